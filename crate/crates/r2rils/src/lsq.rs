//! Implicit linear operator of the step-I least squares problem and an
//! LSQR solver returning its minimum-norm solution.
//!
//! The operator maps a stacked coefficient vector
//! `z = [vec(A) column-major | vec(B) column-major]` of length `r(m+n)` to
//! the vector of values of `U B^T + A V^T` at the observed entries, in
//! canonical (row-major) order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::FactorPair;

/// Guard on `|omega| * r(m+n)` for [`LiftedOperator::materialize`].
const MATERIALIZE_MAX_ELEMS: usize = 4_000_000;

/// The lifted tangent-space operator restricted to an observation set.
#[derive(Debug, Clone)]
pub struct LiftedOperator<'a> {
    u: &'a DMatrix<f64>,
    v: &'a DMatrix<f64>,
    omega: &'a [(usize, usize)],
    column_scales: Option<DVector<f64>>,
}

impl<'a> LiftedOperator<'a> {
    /// Panics when an index in `omega` falls outside the basis dimensions;
    /// the apply kernels rely on validated indices.
    pub fn new(basis: &'a FactorPair, omega: &'a [(usize, usize)]) -> Self {
        let (m, n) = (basis.u.nrows(), basis.v.nrows());
        assert!(
            omega.iter().all(|&(i, j)| i < m && j < n),
            "observation index outside the {m}x{n} grid"
        );
        Self {
            u: &basis.u,
            v: &basis.v,
            omega,
            column_scales: None,
        }
    }

    pub fn nrows(&self) -> usize {
        self.omega.len()
    }

    pub fn ncols(&self) -> usize {
        self.rank() * (self.m() + self.n())
    }

    fn m(&self) -> usize {
        self.u.nrows()
    }

    fn n(&self) -> usize {
        self.v.nrows()
    }

    fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn column_scales(&self) -> Option<&DVector<f64>> {
        self.column_scales.as_ref()
    }

    /// Installs the unit-column right preconditioner computed by
    /// [`Self::compute_column_scales`].
    pub fn with_column_scaling(mut self) -> Self {
        self.column_scales = Some(self.compute_column_scales());
        self
    }

    /// Per-column inverse norms of the implicit least squares matrix.
    ///
    /// The scale for the A-column `(i, k)` is `1/sqrt(sum_{j:(i,j) in omega} V[j,k]^2)`
    /// and for the B-column `(j, k)` is `1/sqrt(sum_{i:(i,j) in omega} U[i,k]^2)`.
    /// Columns with norm below 1e-12 keep scale 1.
    pub fn compute_column_scales(&self) -> DVector<f64> {
        let (m, n, r) = (self.m(), self.n(), self.rank());
        let mut sq = DVector::zeros(r * (m + n));
        for &(i, j) in self.omega {
            for k in 0..r {
                let vv = self.v[(j, k)];
                sq[k * m + i] += vv * vv;
                let uu = self.u[(i, k)];
                sq[r * m + k * n + j] += uu * uu;
            }
        }
        sq.map(|s: f64| {
            let norm = s.sqrt();
            if norm < 1e-12 {
                1.0
            } else {
                1.0 / norm
            }
        })
    }

    /// Applies the forward map to a coefficient vector.
    pub fn apply_forward(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.ncols() {
            return Err(Error::LengthMismatch { expected: self.ncols(), got: z.len() });
        }
        let out = match &self.column_scales {
            None => self.forward_kernel(z.as_slice()),
            Some(scales) => self.forward_kernel(z.component_mul(scales).as_slice()),
        };
        Ok(DVector::from_vec(out))
    }

    /// Hot loop of the solver; runs once per LSQR iteration. Streams over
    /// the observations once per factor column with unchecked indexing
    /// (indices are validated at construction).
    fn forward_kernel(&self, z: &[f64]) -> Vec<f64> {
        let (m, n, r) = (self.m(), self.n(), self.rank());
        let mut out = vec![0.0f64; self.omega.len()];
        let (za, zb) = z.split_at(r * m);
        let us = self.u.as_slice();
        let vs = self.v.as_slice();
        for k in 0..r {
            let uk = &us[k * m..(k + 1) * m];
            let vk = &vs[k * n..(k + 1) * n];
            let ak = &za[k * m..(k + 1) * m];
            let bk = &zb[k * n..(k + 1) * n];
            for (o, &(i, j)) in out.iter_mut().zip(self.omega) {
                unsafe {
                    *o += uk.get_unchecked(i) * bk.get_unchecked(j)
                        + ak.get_unchecked(i) * vk.get_unchecked(j);
                }
            }
        }
        out
    }

    /// Applies the exact transpose of the forward map.
    pub fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.omega.len() {
            return Err(Error::LengthMismatch { expected: self.omega.len(), got: y.len() });
        }
        let (m, n, r) = (self.m(), self.n(), self.rank());
        let mut out = DVector::zeros(self.ncols());
        {
            let slice = out.as_mut_slice();
            let (oa, ob) = slice.split_at_mut(r * m);
            let us = self.u.as_slice();
            let vs = self.v.as_slice();
            let ys = y.as_slice();
            for k in 0..r {
                let uk = &us[k * m..(k + 1) * m];
                let vk = &vs[k * n..(k + 1) * n];
                let ak = &mut oa[k * m..(k + 1) * m];
                let bk = &mut ob[k * n..(k + 1) * n];
                for (&w, &(i, j)) in ys.iter().zip(self.omega) {
                    unsafe {
                        *ak.get_unchecked_mut(i) += w * vk.get_unchecked(j);
                        *bk.get_unchecked_mut(j) += w * uk.get_unchecked(i);
                    }
                }
            }
        }
        if let Some(scales) = &self.column_scales {
            out.component_mul_assign(scales);
        }
        Ok(out)
    }

    /// Dense `|omega| x r(m+n)` matrix whose action equals the forward map.
    /// Test-oracle support; guarded against large sizes.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        let rows = self.nrows();
        let cols = self.ncols();
        if rows.saturating_mul(cols) > MATERIALIZE_MAX_ELEMS {
            return Err(Error::MaterializeTooLarge { rows, cols });
        }
        let (m, n, r) = (self.m(), self.n(), self.rank());
        let mut a = DMatrix::zeros(rows, cols);
        for (p, &(i, j)) in self.omega.iter().enumerate() {
            for k in 0..r {
                a[(p, k * m + i)] = self.v[(j, k)];
                a[(p, r * m + k * n + j)] = self.u[(i, k)];
            }
        }
        if let Some(scales) = &self.column_scales {
            for c in 0..cols {
                let mut col = a.column_mut(c);
                col *= scales[c];
            }
        }
        Ok(a)
    }
}

/// How the inner solver terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsqrTermination {
    Converged,
    HitCap,
}

/// Diagnostics from an LSQR solve.
#[derive(Debug, Clone, Copy)]
pub struct LsqrReport {
    pub iterations: usize,
    /// `||A^T r|| / (||A|| ||r||)` at termination, the normal-equations
    /// relative residual. Zero when the residual itself vanished.
    pub relative_residual: f64,
    pub termination: LsqrTermination,
}

/// Minimum-norm least squares solution of the lifted system via LSQR
/// (Golub-Kahan bidiagonalization), started from zero.
///
/// Stops when either the relative least squares residual `||r||/||b||` or
/// the normal-equations relative residual drops below `tol`, or at `cap`
/// iterations. Hitting the cap is not an error; the current iterate is
/// returned. When column scaling is active the solution is mapped back to
/// unscaled coordinates.
pub fn lsqr_min_norm(
    op: &LiftedOperator<'_>,
    rhs: &DVector<f64>,
    tol: f64,
    cap: usize,
) -> Result<(DVector<f64>, LsqrReport)> {
    if rhs.len() != op.nrows() {
        return Err(Error::LengthMismatch { expected: op.nrows(), got: rhs.len() });
    }
    let ncols = op.ncols();
    let mut x = DVector::zeros(ncols);

    // Golub-Kahan bidiagonalization, Paige-Saunders recurrences.
    let mut beta = rhs.norm();
    let bnorm = beta;
    if beta == 0.0 {
        let report = LsqrReport {
            iterations: 0,
            relative_residual: 0.0,
            termination: LsqrTermination::Converged,
        };
        return Ok((unscale(op, x), report));
    }
    let mut u = rhs / beta;
    let mut v = op.apply_adjoint(&u)?;
    let mut alpha = v.norm();
    if alpha == 0.0 {
        // b is orthogonal to the range; zero is the minimum-norm solution.
        let report = LsqrReport {
            iterations: 0,
            relative_residual: 0.0,
            termination: LsqrTermination::Converged,
        };
        return Ok((unscale(op, x), report));
    }
    v /= alpha;

    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = alpha * alpha;
    let mut rel = f64::INFINITY;
    let mut iterations = 0;
    let mut termination = LsqrTermination::HitCap;

    for iter in 1..=cap {
        iterations = iter;

        // Next bidiagonalization step.
        let mut u_next = op.apply_forward(&v)?;
        u_next.axpy(-alpha, &u, 1.0);
        beta = u_next.norm();
        if beta > 0.0 {
            u_next /= beta;
            u = u_next;
        }
        let mut v_next = op.apply_adjoint(&u)?;
        v_next.axpy(-beta, &v, 1.0);
        alpha = v_next.norm();
        if alpha > 0.0 {
            v_next /= alpha;
        }
        anorm_sq += beta * beta + alpha * alpha;

        // Givens rotation eliminating beta.
        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;

        x.axpy(phi / rho, &w, 1.0);
        let mut w_next = v_next.clone();
        w_next.axpy(-theta / rho, &w, 1.0);
        w = w_next;
        if alpha > 0.0 {
            v = v_next;
        }

        // ||r|| = phibar, ||A^T r|| = phibar * |rhobar| * |c| would lag one
        // rotation; the standard estimate is phibar * alpha * |c|.
        let rnorm = phibar;
        let arnorm = phibar * alpha * c.abs();
        let anorm = anorm_sq.sqrt();
        rel = if rnorm > 0.0 { arnorm / (anorm * rnorm) } else { 0.0 };
        if rnorm / bnorm <= tol || rel <= tol {
            termination = LsqrTermination::Converged;
            break;
        }
        if alpha == 0.0 || beta == 0.0 {
            // Exact breakdown: the Krylov space is exhausted.
            termination = LsqrTermination::Converged;
            break;
        }
    }

    let report = LsqrReport {
        iterations,
        relative_residual: rel,
        termination,
    };
    Ok((unscale(op, x), report))
}

fn unscale(op: &LiftedOperator<'_>, mut x: DVector<f64>) -> DVector<f64> {
    if let Some(scales) = op.column_scales() {
        x.component_mul_assign(scales);
    }
    x
}

/// Splits the stacked solution vector back into factor matrices
/// `(A: m x r, B: n x r)`.
pub fn unstack(z: &DVector<f64>, m: usize, n: usize, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    debug_assert_eq!(z.len(), r * (m + n));
    let a = DMatrix::from_column_slice(m, r, &z.as_slice()[..r * m]);
    let b = DMatrix::from_column_slice(n, r, &z.as_slice()[r * m..]);
    (a, b)
}

/// Stacks factor matrices into the canonical coefficient vector.
pub fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let mut z = DVector::zeros(a.len() + b.len());
    z.as_mut_slice()[..a.len()].copy_from_slice(a.as_slice());
    z.as_mut_slice()[a.len()..].copy_from_slice(b.as_slice());
    z
}
