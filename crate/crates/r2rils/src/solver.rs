//! The outer iteration: alternating lifted least-squares solves and
//! subspace averaging, with rank-r truncation, best-iterate tracking and
//! early stopping.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lsq::{lsqr_min_norm, unstack, LiftedOperator, LsqrReport};
use crate::model::{
    colnorm, CompletionResult, FactorPair, InitMode, IterationRecord, IterationTrace,
    ObservedMatrix, SolverConfig, StopReason, UpdateVariant,
};

/// True when every row and column of the observation set has at least
/// `r` entries, a necessary condition for unique recovery.
pub fn has_min_coverage(obs: &ObservedMatrix, r: usize) -> bool {
    obs.row_counts().iter().all(|&c| c >= r) && obs.col_counts().iter().all(|&c| c >= r)
}

/// Initial factor pair per the configured mode.
pub fn initialize(obs: &ObservedMatrix, cfg: &SolverConfig) -> Result<FactorPair> {
    let (m, n, r) = (obs.nrows(), obs.ncols(), cfg.rank);
    if r > m.min(n) {
        return Err(Error::InvalidConfig(format!(
            "rank {r} exceeds min dimension {}",
            m.min(n)
        )));
    }
    match &cfg.init_mode {
        InitMode::Svd => {
            let (u, _, v) = truncated_svd_sparse(obs, r, cfg.seed);
            FactorPair::new(u, v)
        }
        InitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let u = DMatrix::from_fn(m, r, |_, _| StandardNormal.sample(&mut rng));
            let v = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
            FactorPair::new(colnorm(&u)?, colnorm(&v)?)
        }
        InitMode::Explicit(pair) => {
            if pair.u.nrows() != m || pair.v.nrows() != n || pair.rank() != r {
                return Err(Error::InvalidConfig(
                    "explicit initialization has wrong dimensions".into(),
                ));
            }
            pair.colnormed()
        }
    }
}

/// Top-r singular triplets of the zero-filled observed matrix via block
/// power iteration on the sparse data.
fn truncated_svd_sparse(
    obs: &ObservedMatrix,
    r: usize,
    seed: u64,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (m, n) = (obs.nrows(), obs.ncols());
    let k = (r + 4).min(m.min(n));
    // The iteration seed is decoupled from the solver seed so that svd
    // initialization stays deterministic per (obs, seed).
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let mut q = orthonormalize(&DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng)));
    for _ in 0..80 {
        let y = orthonormalize(&sparse_mul(obs, &q));
        q = orthonormalize(&sparse_mul_transpose(obs, &y));
    }
    // Rayleigh-Ritz on the converged subspace.
    let y = sparse_mul(obs, &q);
    let qr = y.qr();
    let (qu, ru) = (qr.q(), qr.r());
    let svd = ru.svd(true, true);
    let order = sorted_desc(&svd.singular_values);
    let w = svd.u.as_ref().unwrap();
    let z = svd.v_t.as_ref().unwrap().transpose();
    let mut u_out = DMatrix::zeros(m, r);
    let mut v_out = DMatrix::zeros(n, r);
    let mut s_out = DVector::zeros(r);
    for (c, &idx) in order.iter().take(r).enumerate() {
        u_out.set_column(c, &(&qu * w.column(idx)));
        v_out.set_column(c, &(&q * z.column(idx)));
        s_out[c] = svd.singular_values[idx];
    }
    (u_out, s_out, v_out)
}

fn sorted_desc(s: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    order
}

fn sparse_mul(obs: &ObservedMatrix, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(obs.nrows(), q.ncols());
    for &(i, j, x) in obs.entries() {
        for k in 0..q.ncols() {
            out[(i, k)] += x * q[(j, k)];
        }
    }
    out
}

fn sparse_mul_transpose(obs: &ObservedMatrix, y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(obs.ncols(), y.ncols());
    for &(i, j, x) in obs.entries() {
        for k in 0..y.ncols() {
            out[(j, k)] += x * y[(i, k)];
        }
    }
    out
}

fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Step I: minimum-norm solution of the lifted least squares problem for
/// the current basis.
pub fn step1_solve(
    obs: &ObservedMatrix,
    basis: &FactorPair,
    cfg: &SolverConfig,
) -> Result<(FactorPair, LsqrReport)> {
    let omega = obs.indices();
    let mut op = LiftedOperator::new(basis, &omega);
    if cfg.normalize_ls_columns {
        op = op.with_column_scaling();
    }
    let rhs = obs.values();
    let (z, report) = lsqr_min_norm(&op, &rhs, cfg.lsqr_tol, cfg.lsqr_max_iter)?;
    let (a, b) = unstack(&z, basis.u.nrows(), basis.v.nrows(), basis.rank());
    Ok((FactorPair::new(a, b)?, report))
}

/// Step II: combine the current and new subspace estimates.
///
/// `weight_prev` is 1 for plain averaging and the attenuation weight when
/// weighted averaging is engaged; it applies to the Standard variant only.
pub fn step2_update(
    basis: &FactorPair,
    tilde: &FactorPair,
    variant: &UpdateVariant,
    weight_prev: f64,
) -> Result<FactorPair> {
    match variant {
        UpdateVariant::Standard | UpdateVariant::NonMinimal { .. } => {
            let u = colnorm(&(&basis.u * weight_prev + colnorm(&tilde.u)?))?;
            let v = colnorm(&(&basis.v * weight_prev + colnorm(&tilde.v)?))?;
            FactorPair::new(u, v)
        }
        UpdateVariant::Naive => {
            FactorPair::new(colnorm(&tilde.u)?, colnorm(&tilde.v)?)
        }
        UpdateVariant::Weighted { w_u, w_v } => {
            let u = colnorm(&(&basis.u + colnorm(&tilde.u)? * *w_u))?;
            let v = colnorm(&(&basis.v + colnorm(&tilde.v)? * *w_v))?;
            FactorPair::new(u, v)
        }
    }
}

/// Best rank-r approximation of the lifted estimate
/// `Xhat = U_t V~^T + U~ V_t^T`, computed without forming the dense matrix.
///
/// Returns the factored truncation and all `2r` singular values of the
/// lifted estimate.
pub fn rank_r_truncate(
    basis: &FactorPair,
    tilde: &FactorPair,
    r: usize,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, Vec<f64>) {
    // Xhat = [U_t | U~] [V~ | V_t]^T.
    let p = stack_cols(&basis.u, &tilde.u);
    let q = stack_cols(&tilde.v, &basis.v);
    let qr_p = p.qr();
    let qr_q = q.qr();
    let (qp, rp) = (qr_p.q(), qr_p.r());
    let (qq, rq) = (qr_q.q(), qr_q.r());
    let core = &rp * rq.transpose();
    let svd = core.svd(true, true);
    let order = sorted_desc(&svd.singular_values);
    let w = svd.u.as_ref().unwrap();
    let z = svd.v_t.as_ref().unwrap().transpose();
    let mut u_r = DMatrix::zeros(basis.u.nrows(), r);
    let mut v_r = DMatrix::zeros(basis.v.nrows(), r);
    let mut s = DVector::zeros(r);
    for (c, &idx) in order.iter().take(r).enumerate() {
        u_r.set_column(c, &(&qp * w.column(idx)));
        v_r.set_column(c, &(&qq * z.column(idx)));
        s[c] = svd.singular_values[idx];
    }
    let all: Vec<f64> = order.iter().map(|&idx| svd.singular_values[idx]).collect();
    (u_r, s, v_r, all)
}

fn stack_cols(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}

/// Frobenius inner product of two factored matrices `P1 Q1^T` and `P2 Q2^T`.
fn lifted_inner(
    p1: &DMatrix<f64>,
    q1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    q2: &DMatrix<f64>,
) -> f64 {
    ((p1.transpose() * p2) * (q2.transpose() * q1)).trace()
}

/// Runs the full completion iteration and returns the best rank-r iterate.
pub fn complete(obs: &ObservedMatrix, cfg: &SolverConfig) -> Result<CompletionResult> {
    cfg.validate()?;
    if obs.nnz() == 0 {
        return Err(Error::EmptyObservations);
    }
    if let UpdateVariant::NonMinimal { .. } = cfg.update_variant {
        if cfg.rank != 1 {
            return Err(Error::InvalidConfig(
                "the non-minimal-norm variant is defined for rank 1 only".into(),
            ));
        }
    }
    let (m, n, r) = (obs.nrows(), obs.ncols(), cfg.rank);
    let mut basis = initialize(obs, cfg)?;
    let mut trace = IterationTrace::default();

    let mut best_rmse = f64::INFINITY;
    let mut best_iteration = 0usize;
    let mut best: Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, Vec<f64>)> = None;
    let mut prev: Option<(DMatrix<f64>, DMatrix<f64>, f64)> = None; // (P, Q, ||Xhat||^2)
    let mut prev_rmse = f64::NAN;
    let mut stop_reason = StopReason::MaxIters;

    for t in 1..=cfg.t_max {
        let (mut tilde, report) = step1_solve(obs, &basis, cfg)?;
        if let UpdateVariant::NonMinimal { lambda } = cfg.update_variant {
            tilde = non_minimal_shift(&tilde, &basis, lambda)?;
        }

        let (u_r, s, v_r, lifted_sv) = rank_r_truncate(&basis, &tilde, r);
        let rmse = {
            let mut sq = 0.0;
            for &(i, j, x) in obs.entries() {
                let mut est = 0.0;
                for k in 0..r {
                    est += u_r[(i, k)] * s[k] * v_r[(j, k)];
                }
                sq += (est - x) * (est - x);
            }
            (sq / obs.nnz() as f64).sqrt()
        };

        let p = stack_cols(&basis.u, &tilde.u);
        let q = stack_cols(&tilde.v, &basis.v);
        let norm_sq = lifted_inner(&p, &q, &p, &q);
        let step_norm = match &prev {
            None => f64::NAN,
            Some((pp, pq, pn)) => {
                let cross = lifted_inner(&p, &q, pp, pq);
                ((norm_sq + pn - 2.0 * cross).max(0.0) / (m as f64 * n as f64)).sqrt()
            }
        };

        let tail_ratio = if lifted_sv[0] > 0.0 {
            lifted_sv.get(r).copied().unwrap_or(0.0) / lifted_sv[0]
        } else {
            0.0
        };

        if rmse < best_rmse {
            best_rmse = rmse;
            best_iteration = t;
            best = Some((u_r, s, v_r, lifted_sv));
        }

        let converged = rmse <= cfg.eps_exact
            || (t > 1 && step_norm <= cfg.eps_step)
            || (t > 1 && (rmse - prev_rmse).abs() <= cfg.delta_rel * rmse);

        // Weighted averaging engages on a fixed cadence after the start
        // iteration, only for the standard update and only while not
        // converged.
        let attenuated = !converged
            && matches!(cfg.update_variant, UpdateVariant::Standard)
            && t > cfg.attenuation_start
            && (t - cfg.attenuation_start - 1) % cfg.attenuation_period == 0;

        trace.records.push(IterationRecord {
            iter: t,
            rmse_obs: rmse,
            step_norm,
            lsqr_iters: report.iterations,
            attenuated,
            lifted_tail_ratio: tail_ratio,
        });

        if rmse <= cfg.eps_exact {
            stop_reason = StopReason::Exact;
            break;
        }
        if t > 1 && step_norm <= cfg.eps_step {
            stop_reason = StopReason::Step;
            break;
        }
        if t > 1 && (rmse - prev_rmse).abs() <= cfg.delta_rel * rmse {
            stop_reason = StopReason::RelativeChange;
            break;
        }

        if t < cfg.t_max {
            let weight_prev = if attenuated { cfg.attenuation_beta } else { 1.0 };
            basis = match step2_update(&basis, &tilde, &cfg.update_variant, weight_prev) {
                Ok(b) => b,
                Err(Error::DegenerateColumn { .. }) => {
                    return Err(Error::DegenerateSubspace {
                        iteration: t,
                        trace: Box::new(trace),
                    });
                }
                Err(e) => return Err(e),
            };
        }
        prev = Some((p, q, norm_sq));
        prev_rmse = rmse;
    }

    let (u, s, v, lifted_singular_values) = best.expect("at least one iteration ran");
    Ok(CompletionResult {
        u,
        s,
        v,
        best_iteration,
        trace,
        stop_reason,
        lifted_singular_values,
    })
}

/// `h(eps) = sqrt(1 + 2 eps^2 - 3 eps^4)`.
pub fn h_factor(eps: f64) -> f64 {
    (1.0 + 2.0 * eps * eps - 3.0 * eps.powi(4)).max(0.0).sqrt()
}

/// The next-iterate overlap `r(eps) = (1 + eps^2 + h) / sqrt(2 (1 + 3 eps^2 + h))`
/// of the fully-observed rank-1 dynamics.
pub fn next_overlap(eps: f64) -> f64 {
    let h = h_factor(eps);
    (1.0 + eps * eps + h) / (2.0 * (1.0 + 3.0 * eps * eps + h)).sqrt()
}

/// `1 - r(eps)`, evaluated in a cancellation-free form; behaves like
/// `eps^6 / 2` near zero.
pub(crate) fn one_minus_next_overlap(eps: f64) -> f64 {
    let e2 = eps * eps;
    let h = h_factor(eps);
    let num = 1.0 + e2 + h;
    let d = (2.0 * (1.0 + 3.0 * e2 + h)).sqrt();
    // 1 - num/d = (d^2 - num^2) / (d (d + num)), and d^2 - num^2 reduces
    // algebraically to 8 eps^6 / (1 + eps^2 + h).
    8.0 * e2 * e2 * e2 / (num * d * (d + num))
}

/// `1 - sqrt(1 - eps^2)` without cancellation.
fn one_minus_alpha(eps: f64) -> f64 {
    let e2 = eps * eps;
    e2 / (1.0 + (1.0 - e2).max(0.0).sqrt())
}

/// Per-iteration error contraction factor `R(eps, delta)` of the
/// fully-observed rank-1 dynamics. The removable singularity at
/// `eps = delta = 0` evaluates to 0.
pub fn contraction_factor(eps: f64, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) || !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(
            "contraction factor arguments must lie in [0, 1]".into(),
        ));
    }
    let num = one_minus_next_overlap(eps) + one_minus_next_overlap(delta);
    let den = one_minus_alpha(eps) + one_minus_alpha(delta);
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

/// Rank-1 step-II weights that recover the true vectors in a single
/// iteration on fully-observed data: `w_u = (u_t^T ColNorm(u~_t))^{-1}`.
pub fn optimal_weights(basis: &FactorPair, tilde: &FactorPair) -> Result<(f64, f64)> {
    if basis.rank() != 1 || tilde.rank() != 1 {
        return Err(Error::InvalidArgument("optimal weights are defined for rank 1".into()));
    }
    let nu = colnorm(&tilde.u)?;
    let nv = colnorm(&tilde.v)?;
    let du = basis.u.column(0).dot(&nu.column(0));
    let dv = basis.v.column(0).dot(&nv.column(0));
    if du == 0.0 || dv == 0.0 {
        return Err(Error::InvalidArgument("optimal weight denominator is zero".into()));
    }
    Ok((1.0 / du, 1.0 / dv))
}

/// Shifts a rank-1 least squares solution along the kernel direction
/// `(u_t, -v_t)`, producing a non-minimal-norm solution.
pub fn non_minimal_shift(
    tilde: &FactorPair,
    basis: &FactorPair,
    lambda: f64,
) -> Result<FactorPair> {
    if basis.rank() != 1 || tilde.rank() != 1 {
        return Err(Error::InvalidArgument(
            "the kernel shift is defined for rank 1".into(),
        ));
    }
    FactorPair::new(&tilde.u + &basis.u * lambda, &tilde.v - &basis.v * lambda)
}
