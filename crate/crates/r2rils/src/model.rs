//! Shared domain types: observations, factor pairs, solver configuration
//! and completion results.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Threshold below which a column is considered degenerate in [`colnorm`].
pub const COLNORM_DEGENERACY_THRESHOLD: f64 = 1e-300;

/// Sparse set of observed entries of an `m x n` matrix.
///
/// Entries are kept in row-major order so that vectorizing over the
/// observation set is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    m: usize,
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl ObservedMatrix {
    /// Builds an observation set, validating index ranges and rejecting
    /// duplicate positions. Entries are sorted into row-major order.
    pub fn new(m: usize, n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidDimensions(format!(
                "matrix dimensions must be positive, got {m}x{n}"
            )));
        }
        for &(i, j, _) in &entries {
            if i >= m || j >= n {
                return Err(Error::IndexOutOfRange { i, j, m, n });
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::DuplicateEntry { i: w[0].0, j: w[0].1 });
            }
        }
        Ok(Self { m, n, entries })
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Observed entries in canonical (row-major) order.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Index set in canonical order, without values.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|&(i, j, _)| (i, j)).collect()
    }

    /// Observed values vectorized in canonical order.
    pub fn values(&self) -> DVector<f64> {
        DVector::from_iterator(self.entries.len(), self.entries.iter().map(|&(_, _, x)| x))
    }

    /// Number of observed entries per row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.m];
        for &(i, _, _) in &self.entries {
            c[i] += 1;
        }
        c
    }

    /// Number of observed entries per column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.n];
        for &(_, j, _) in &self.entries {
            c[j] += 1;
        }
        c
    }

    /// Dense matrix with observed values and zeros elsewhere.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.m, self.n);
        for &(i, j, v) in &self.entries {
            x[(i, j)] = v;
        }
        x
    }

    /// Squared Frobenius norm restricted to the observed set.
    pub fn observed_norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, _, x)| x * x).sum()
    }
}

/// A pair of tall factor matrices estimating the column space (`u`, `m x r`)
/// and row space (`v`, `n x r`).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl FactorPair {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::InvalidDimensions(format!(
                "factor pair rank mismatch: U has {} columns, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        if u.ncols() == 0 {
            return Err(Error::InvalidDimensions("factor rank must be at least 1".into()));
        }
        Ok(Self { u, v })
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// Both factors column-normalized.
    pub fn colnormed(&self) -> Result<Self> {
        Ok(Self {
            u: colnorm(&self.u)?,
            v: colnorm(&self.v)?,
        })
    }
}

/// Normalizes every column of `m` to unit Euclidean norm.
///
/// A column with norm below [`COLNORM_DEGENERACY_THRESHOLD`] signals a
/// degenerate subspace.
pub fn colnorm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for k in 0..out.ncols() {
        let norm = out.column(k).norm();
        if norm < COLNORM_DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateColumn { col: k });
        }
        let mut col = out.column_mut(k);
        col /= norm;
    }
    Ok(out)
}

/// Root mean squared error of a dense estimate on the observed entries,
/// `||est - X||_{F(omega)} / sqrt(|omega|)`.
pub fn observed_rmse(est: &DMatrix<f64>, obs: &ObservedMatrix) -> Result<f64> {
    if obs.nnz() == 0 {
        return Err(Error::EmptyObservations);
    }
    if est.nrows() != obs.nrows() || est.ncols() != obs.ncols() {
        return Err(Error::InvalidDimensions(format!(
            "estimate is {}x{}, observations are {}x{}",
            est.nrows(),
            est.ncols(),
            obs.nrows(),
            obs.ncols()
        )));
    }
    let sq: f64 = obs
        .entries()
        .iter()
        .map(|&(i, j, x)| {
            let d = est[(i, j)] - x;
            d * d
        })
        .sum();
    Ok((sq / obs.nnz() as f64).sqrt())
}

/// Which update rule step II applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateVariant {
    /// `ColNorm(U_t + ColNorm(U~_t))` with periodic weighted attenuation.
    Standard,
    /// `ColNorm(U~_t)`, discarding the previous estimate.
    Naive,
    /// Fixed scalar weights on the normalized new estimate (rank-1 analysis).
    Weighted { w_u: f64, w_v: f64 },
    /// Shift the least-squares solution along the kernel direction before
    /// the standard update (rank-1 analysis).
    NonMinimal { lambda: f64 },
}

/// How the initial factor pair is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Top-r singular vectors of the zero-filled observed matrix.
    Svd,
    /// I.i.d. standard normal entries, column-normalized.
    Random,
    /// Caller-provided factors, column-normalized before use.
    Explicit(FactorPair),
}

/// All solver knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub t_max: usize,
    pub lsqr_max_iter: usize,
    pub lsqr_tol: f64,
    /// Stop when the observed RMSE of the rank-r truncation drops below this.
    pub eps_exact: f64,
    /// Stop when `||Xhat_t - Xhat_{t-1}||_F / sqrt(mn)` drops below this.
    pub eps_step: f64,
    /// Stop when `|rmse_t - rmse_{t-1}| <= delta_rel * rmse_t`.
    pub delta_rel: f64,
    /// Iteration after which weighted averaging may engage.
    pub attenuation_start: usize,
    pub attenuation_beta: f64,
    /// Weighted averaging is applied once every this many iterations after
    /// engagement.
    pub attenuation_period: usize,
    pub update_variant: UpdateVariant,
    pub init_mode: InitMode,
    /// Right-precondition the least squares system to unit column norms.
    pub normalize_ls_columns: bool,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            t_max: 300,
            lsqr_max_iter: 4000,
            lsqr_tol: 1e-14,
            eps_exact: 1e-15,
            eps_step: 1e-15,
            delta_rel: 1e-4,
            attenuation_start: 40,
            attenuation_beta: 1.0 + std::f64::consts::SQRT_2,
            attenuation_period: 5,
            update_variant: UpdateVariant::Standard,
            init_mode: InitMode::Svd,
            normalize_ls_columns: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if self.t_max < 1 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        if self.lsqr_max_iter < 1 {
            return Err(Error::InvalidConfig("lsqr_max_iter must be at least 1".into()));
        }
        if !(self.attenuation_beta > 0.0) {
            return Err(Error::InvalidConfig("attenuation_beta must be positive".into()));
        }
        if self.attenuation_period == 0 {
            return Err(Error::InvalidConfig("attenuation_period must be positive".into()));
        }
        Ok(())
    }
}

/// Per-iteration diagnostic record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based outer iteration index.
    pub iter: usize,
    /// Observed RMSE of the rank-r truncated estimate.
    pub rmse_obs: f64,
    /// `||Xhat_t - Xhat_{t-1}||_F / sqrt(mn)`; NaN at the first iteration.
    pub step_norm: f64,
    /// Inner solver iterations used this outer iteration.
    pub lsqr_iters: usize,
    /// Whether weighted averaging was applied at this iteration's update.
    pub attenuated: bool,
    /// `sigma_{r+1} / sigma_1` of the lifted rank-2r estimate.
    pub lifted_tail_ratio: f64,
}

/// The full per-iteration trace of a solver run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Which stopping criterion ended the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Observed RMSE dropped below `eps_exact`.
    Exact,
    /// Lifted-estimate step size dropped below `eps_step`.
    Step,
    /// Relative change of the observed RMSE dropped below `delta_rel`.
    RelativeChange,
    /// Iteration budget exhausted.
    MaxIters,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Exact => "exact",
            StopReason::Step => "step",
            StopReason::RelativeChange => "relative_change",
            StopReason::MaxIters => "max_iters",
        }
    }
}

/// Best rank-r estimate in factored SVD form, with the run trace.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    /// `m x r`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Singular values, descending.
    pub s: DVector<f64>,
    /// `n x r`, orthonormal columns.
    pub v: DMatrix<f64>,
    /// 1-based iteration with the smallest observed squared error.
    pub best_iteration: usize,
    pub trace: IterationTrace,
    pub stop_reason: StopReason,
    /// All `2r` singular values of the lifted estimate at the best iteration.
    pub lifted_singular_values: Vec<f64>,
}

impl CompletionResult {
    /// Value of the estimate at entry `(i, j)`.
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        (0..self.s.len())
            .map(|k| self.u[(i, k)] * self.s[k] * self.v[(j, k)])
            .sum()
    }

    /// Dense realization `U diag(S) V^T`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let r = self.s.len();
        let mut us = self.u.clone();
        for k in 0..r {
            let mut col = us.column_mut(k);
            col *= self.s[k];
        }
        &us * self.v.transpose()
    }

    /// Observed RMSE of this estimate.
    pub fn observed_rmse(&self, obs: &ObservedMatrix) -> Result<f64> {
        if obs.nnz() == 0 {
            return Err(Error::EmptyObservations);
        }
        let sq: f64 = obs
            .entries()
            .iter()
            .map(|&(i, j, x)| {
                let d = self.value_at(i, j) - x;
                d * d
            })
            .sum();
        Ok((sq / obs.nnz() as f64).sqrt())
    }
}

/// Scalar overlap state of a rank-1 estimate against the true singular
/// vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank1State {
    /// `u^T u_t`
    pub alpha: f64,
    /// `v^T v_t`
    pub beta: f64,
    /// `sqrt(1 - alpha^2)`
    pub eps: f64,
    /// `sqrt(1 - beta^2)`
    pub delta: f64,
}

impl Rank1State {
    pub fn from_overlaps(alpha: f64, beta: f64) -> Self {
        let a = alpha.clamp(-1.0, 1.0);
        let b = beta.clamp(-1.0, 1.0);
        Self {
            alpha: a,
            beta: b,
            eps: (1.0 - a * a).max(0.0).sqrt(),
            delta: (1.0 - b * b).max(0.0).sqrt(),
        }
    }

    /// State from the overlap errors themselves; keeps precision when the
    /// overlaps are within rounding distance of 1.
    pub fn from_errors(eps: f64, delta: f64) -> Self {
        let e = eps.clamp(0.0, 1.0);
        let d = delta.clamp(0.0, 1.0);
        Self {
            alpha: (1.0 - e * e).max(0.0).sqrt(),
            beta: (1.0 - d * d).max(0.0).sqrt(),
            eps: e,
            delta: d,
        }
    }

    /// Joint estimation error `||(u_t, v_t) - (u, v)||`, evaluated as
    /// `sqrt(2 (eps^2/(1+alpha) + delta^2/(1+beta)))` to avoid the
    /// cancellation in `2 - alpha - beta` near convergence.
    pub fn error_norm(&self) -> f64 {
        let a = self.eps * self.eps / (1.0 + self.alpha);
        let b = self.delta * self.delta / (1.0 + self.beta);
        (2.0 * (a + b)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn observed_matrix_sorts_entries_row_major() {
        let obs =
            ObservedMatrix::new(3, 3, vec![(2, 1, 5.0), (0, 2, 1.0), (0, 0, 2.0)]).unwrap();
        let idx: Vec<_> = obs.entries().iter().map(|&(i, j, _)| (i, j)).collect();
        assert_eq!(idx, vec![(0, 0), (0, 2), (2, 1)]);
    }

    #[test]
    fn observed_matrix_rejects_duplicates_and_out_of_range() {
        let dup = ObservedMatrix::new(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]);
        assert!(matches!(dup, Err(Error::DuplicateEntry { i: 0, j: 0 })));
        let oor = ObservedMatrix::new(2, 2, vec![(2, 0, 1.0)]);
        assert!(matches!(oor, Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn colnorm_identity_is_fixed_point() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(colnorm(&id).unwrap(), id);
    }

    #[test]
    fn colnorm_three_four_five() {
        let m = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        let out = colnorm(&m).unwrap();
        assert_abs_diff_eq!(out[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(out[(1, 0)], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn colnorm_unit_norms_and_direction() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::from_fn(5, 2, |_, _| StandardNormal.sample(&mut rng));
        let out = colnorm(&m).unwrap();
        for k in 0..2 {
            assert_abs_diff_eq!(out.column(k).norm(), 1.0, epsilon = 1e-12);
            let direct = m.column(k) / m.column(k).norm();
            assert!((out.column(k) - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn colnorm_flags_degenerate_column() {
        let m = DMatrix::from_column_slice(2, 1, &[0.0, 0.0]);
        assert!(matches!(colnorm(&m), Err(Error::DegenerateColumn { col: 0 })));
    }

    #[test]
    fn observed_rmse_exact_match_is_zero() {
        let obs = ObservedMatrix::new(2, 2, vec![(0, 1, 3.0), (1, 0, -1.0)]).unwrap();
        let est = obs.to_dense();
        assert_eq!(observed_rmse(&est, &obs).unwrap(), 0.0);
    }

    #[test]
    fn observed_rmse_single_entry() {
        let obs = ObservedMatrix::new(2, 2, vec![(0, 0, 2.0)]).unwrap();
        let est = DMatrix::zeros(2, 2);
        assert_abs_diff_eq!(observed_rmse(&est, &obs).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn observed_rmse_matches_brute_force() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let entries: Vec<_> = [(0, 0), (1, 2), (3, 1), (2, 2)]
            .iter()
            .map(|&(i, j)| (i, j, StandardNormal.sample(&mut rng)))
            .collect();
        let obs = ObservedMatrix::new(4, 4, entries).unwrap();
        let est = DMatrix::from_fn(4, 4, |_, _| StandardNormal.sample(&mut rng));
        let mut sq = 0.0;
        for &(i, j, x) in obs.entries() {
            sq += (est[(i, j)] - x) * (est[(i, j)] - x);
        }
        let expect = (sq / obs.nnz() as f64).sqrt();
        assert_abs_diff_eq!(observed_rmse(&est, &obs).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn observed_rmse_rejects_empty_omega() {
        let obs = ObservedMatrix::new(2, 2, vec![]).unwrap();
        let est = DMatrix::zeros(2, 2);
        assert!(matches!(observed_rmse(&est, &obs), Err(Error::EmptyObservations)));
    }

    proptest! {
        #[test]
        fn colnorm_is_idempotent(vals in proptest::collection::vec(-100.0f64..100.0, 12)) {
            let m = DMatrix::from_column_slice(4, 3, &vals);
            if let Ok(once) = colnorm(&m) {
                let twice = colnorm(&once).unwrap();
                prop_assert!((&twice - &once).norm() < 1e-12);
            }
        }

        #[test]
        fn colnorm_scales_by_sign(
            vals in proptest::collection::vec(-10.0f64..10.0, 6),
            c in prop_oneof![-100.0f64..-1e-3, 1e-3f64..100.0],
        ) {
            let m = DMatrix::from_column_slice(3, 2, &vals);
            if let Ok(base) = colnorm(&m) {
                let scaled = colnorm(&(&m * c)).unwrap();
                let expect = &base * c.signum();
                prop_assert!((&scaled - &expect).norm() < 1e-12);
            }
        }
    }
}
