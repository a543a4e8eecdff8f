//! Closed-form machinery for the rank-1 fully-observed case: the
//! minimum-norm least squares solution, the explicit pseudoinverse of the
//! lifted operator, and the exact scalar overlap dynamics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Rank1State;

/// Per-iteration contraction bound of the fully-observed rank-1 dynamics,
/// `sqrt(1 - 1/sqrt(2))`.
pub fn contraction_bound() -> f64 {
    (1.0 - 1.0 / std::f64::consts::SQRT_2).sqrt()
}

/// Constant `C = 50 / (1 - R)` appearing in the noise stability bound.
pub fn noise_constant() -> f64 {
    50.0 / (1.0 - contraction_bound())
}

/// Largest admissible normalized noise-to-signal ratio `sqrt(2) delta / C`
/// for initial overlaps at least `delta`.
pub fn noise_level_condition(delta: f64) -> f64 {
    std::f64::consts::SQRT_2 * delta / noise_constant()
}

/// Minimum-norm solution `(u~, v~)` of the fully-observed lifted least
/// squares problem for a rank-1 basis `(u_t, v_t)` and dense data `X`:
///
/// ```text
/// u~ = (X v_t - (u_t^T X v_t / N) u_t) / ||v_t||^2
/// v~ = (X^T u_t - (u_t^T X v_t / N) v_t) / ||u_t||^2
/// ```
///
/// with `N = ||u_t||^2 + ||v_t||^2`.
pub fn min_norm_closed_form(
    u_t: &DVector<f64>,
    v_t: &DVector<f64>,
    x: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.nrows() != u_t.len() || x.ncols() != v_t.len() {
        return Err(Error::InvalidDimensions(format!(
            "X is {}x{}, u_t has length {}, v_t has length {}",
            x.nrows(),
            x.ncols(),
            u_t.len(),
            v_t.len()
        )));
    }
    let un_sq = u_t.norm_squared();
    let vn_sq = v_t.norm_squared();
    if un_sq == 0.0 || vn_sq == 0.0 {
        return Err(Error::InvalidArgument("u_t and v_t must be nonzero".into()));
    }
    let n_t = un_sq + vn_sq;
    let xv = x * v_t;
    let xtu = x.transpose() * u_t;
    let bilinear = u_t.dot(&xv);
    let u_tilde = (xv - u_t * (bilinear / n_t)) / vn_sq;
    let v_tilde = (xtu - v_t * (bilinear / n_t)) / un_sq;
    Ok((u_tilde, v_tilde))
}

/// Guard on `(m+n) * m * n` for [`pseudoinverse_closed_form`].
const PINV_MAX_ELEMS: usize = 4_000_000;

/// Explicit `(m+n) x (mn)` pseudoinverse of the fully-observed rank-1
/// lifted operator, entry by entry. Test-oracle support.
///
/// Vectorization is row-major over the full grid, matching the canonical
/// entry order of [`crate::ObservedMatrix`]; with 0-based indices the
/// column `p` addresses entry `(p / n, p mod n)`.
pub fn pseudoinverse_closed_form(
    u_bar: &DVector<f64>,
    v_bar: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let m = u_bar.len();
    let n = v_bar.len();
    if (m + n).saturating_mul(m).saturating_mul(n) > PINV_MAX_ELEMS {
        return Err(Error::MaterializeTooLarge { rows: m + n, cols: m * n });
    }
    let un_sq = u_bar.norm_squared();
    let vn_sq = v_bar.norm_squared();
    if un_sq == 0.0 || vn_sq == 0.0 {
        return Err(Error::InvalidArgument("u_bar and v_bar must be nonzero".into()));
    }
    let big_n = un_sq + vn_sq;
    let mut out = DMatrix::zeros(m + n, m * n);
    for p in 0..m * n {
        let row = p / n;
        let col = p % n;
        for i in 0..m {
            let delta = if i == row { 1.0 } else { 0.0 };
            out[(i, p)] = v_bar[col] / vn_sq * (delta - u_bar[i] * u_bar[row] / big_n);
        }
        for j in 0..n {
            let delta = if j == col { 1.0 } else { 0.0 };
            out[(m + j, p)] = u_bar[row] / un_sq * (delta - v_bar[j] * v_bar[col] / big_n);
        }
    }
    Ok(out)
}

/// One step of the exact overlap recurrence: `alpha_{t+1}` given `alpha_t`,
/// using `alpha~ = sqrt(1 - 3 alpha^2 / 4)`.
pub fn overlap_step(alpha: f64) -> f64 {
    let a_tilde = (1.0 - 0.75 * alpha * alpha).max(0.0).sqrt();
    (1.0 + (a_tilde - 0.5 * alpha) * alpha) / (2.0 - 1.5 * alpha * alpha + alpha * a_tilde).sqrt()
}

/// Pure scalar dynamics of the fully-observed rank-1 iteration: the
/// sequence of overlap states starting from `(alpha_1, beta_1)`, for `t_len`
/// iterations (the initial state included).
pub fn rank1_full_dynamics(alpha_1: f64, beta_1: f64, t_len: usize) -> Result<Vec<Rank1State>> {
    if !(alpha_1 > 0.0 && alpha_1 <= 1.0 && beta_1 > 0.0 && beta_1 <= 1.0) {
        return Err(Error::InvalidArgument(
            "initial overlaps must lie in (0, 1]".into(),
        ));
    }
    let mut states = Vec::with_capacity(t_len);
    let first = Rank1State::from_overlaps(alpha_1, beta_1);
    let (mut eps, mut delta) = (first.eps, first.delta);
    states.push(first);
    // Iterate in error coordinates: eps_{t+1} = sqrt((1 - r)(1 + r)) with
    // r = r(eps_t), using the cancellation-free form of 1 - r. The overlap
    // form loses all precision once the overlaps round to 1.
    for _ in 1..t_len {
        eps = next_eps(eps);
        delta = next_eps(delta);
        states.push(Rank1State::from_errors(eps, delta));
    }
    Ok(states)
}

fn next_eps(eps: f64) -> f64 {
    let omr = crate::solver::one_minus_next_overlap(eps);
    let r = crate::solver::next_overlap(eps);
    (omr * (1.0 + r)).max(0.0).sqrt()
}
