//! Evaluation measures: unobserved-entry relative RMSE, success
//! classification and full-matrix relative error.

use nalgebra::DMatrix;

use crate::datagen::GroundTruth;
use crate::error::{Error, Result};
use crate::model::{CompletionResult, ObservedMatrix};

/// Threshold below which a run counts as a successful recovery.
pub const SUCCESS_THRESHOLD: f64 = 1e-4;

fn check_shapes(est: &CompletionResult, truth: &GroundTruth) -> Result<()> {
    if est.u.nrows() != truth.nrows() || est.v.nrows() != truth.ncols() {
        return Err(Error::InvalidDimensions(format!(
            "estimate is {}x{}, truth is {}x{}",
            est.u.nrows(),
            est.v.nrows(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    Ok(())
}

/// Squared Frobenius norm of `P Q^T` from the factors.
fn factored_norm_sq(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    ((p.transpose() * p) * (q.transpose() * q)).trace().max(0.0)
}

/// Factored representation of the difference `Xhat - X0` as `P Q^T`.
fn difference_factors(
    est: &CompletionResult,
    truth: &GroundTruth,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = (truth.nrows(), truth.ncols());
    let (re, rt) = (est.s.len(), truth.rank());
    let mut p = DMatrix::zeros(m, re + rt);
    let mut q = DMatrix::zeros(n, re + rt);
    for k in 0..re {
        p.set_column(k, &(est.u.column(k) * est.s[k]));
        q.set_column(k, &est.v.column(k));
    }
    for k in 0..rt {
        p.set_column(re + k, &(truth.u.column(k) * truth.s[k]));
        q.set_column(re + k, &(-truth.v.column(k)));
    }
    (p, q)
}

/// Relative RMSE over the unobserved entries,
/// `sqrt(m n / |omega^c|) ||Xhat - X0||_{F(omega^c)} / ||X0||_F`.
///
/// The residual is accumulated entrywise over the complement; subtracting
/// the observed part from a factored full norm instead would leave a
/// cancellation floor near 1e-8 on converged estimates.
pub fn rel_rmse_unobserved(
    est: &CompletionResult,
    truth: &GroundTruth,
    obs: &ObservedMatrix,
) -> Result<f64> {
    check_shapes(est, truth)?;
    if obs.nrows() != truth.nrows() || obs.ncols() != truth.ncols() {
        return Err(Error::InvalidDimensions(
            "observation grid does not match the ground truth".into(),
        ));
    }
    let (m, n) = (truth.nrows(), truth.ncols());
    let unobserved = m * n - obs.nnz();
    if unobserved == 0 {
        return Err(Error::InvalidArgument(
            "relative RMSE is undefined on a fully observed grid".into(),
        ));
    }
    let truth_norm = truth.frobenius_norm();
    if truth_norm == 0.0 {
        return Err(Error::InvalidArgument("ground truth has zero norm".into()));
    }
    let est_dense = est.to_dense();
    let truth_dense = truth.to_dense();
    let mut observed = vec![false; m * n];
    for &(i, j) in &obs.indices() {
        observed[i * n + j] = true;
    }
    let mut comp_sq = 0.0;
    for i in 0..m {
        for j in 0..n {
            if !observed[i * n + j] {
                let d = est_dense[(i, j)] - truth_dense[(i, j)];
                comp_sq += d * d;
            }
        }
    }
    Ok(((m * n) as f64 / unobserved as f64).sqrt() * comp_sq.sqrt() / truth_norm)
}

/// True iff the relative RMSE clears the (strict) success threshold.
pub fn is_success(rel_rmse: f64) -> bool {
    rel_rmse < SUCCESS_THRESHOLD
}

/// Full-matrix relative error `||Xhat - X||_F / ||X||_F` from the factors.
pub fn rel_frobenius_full(est: &CompletionResult, truth: &GroundTruth) -> Result<f64> {
    check_shapes(est, truth)?;
    let truth_norm = truth.frobenius_norm();
    if truth_norm == 0.0 {
        return Err(Error::InvalidArgument("ground truth has zero norm".into()));
    }
    let (p, q) = difference_factors(est, truth);
    Ok(factored_norm_sq(&p, &q).sqrt() / truth_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_uniform, sample_omega};
    use crate::model::{IterationTrace, StopReason};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn result_from_truth(truth: &GroundTruth) -> CompletionResult {
        CompletionResult {
            u: truth.u.clone(),
            s: DVector::from_iterator(truth.rank(), truth.s.iter().copied()),
            v: truth.v.clone(),
            best_iteration: 1,
            trace: IterationTrace::default(),
            stop_reason: StopReason::Exact,
            lifted_singular_values: vec![],
        }
    }

    fn zero_result(truth: &GroundTruth) -> CompletionResult {
        let mut r = result_from_truth(truth);
        r.s.fill(0.0);
        r
    }

    fn brute_force_rel_rmse(
        est: &CompletionResult,
        truth: &GroundTruth,
        obs: &ObservedMatrix,
    ) -> f64 {
        let (m, n) = (truth.nrows(), truth.ncols());
        let observed: std::collections::BTreeSet<_> = obs.indices().into_iter().collect();
        let mut sq = 0.0;
        let mut count = 0usize;
        for i in 0..m {
            for j in 0..n {
                if !observed.contains(&(i, j)) {
                    let d = est.value_at(i, j) - truth.value_at(i, j);
                    sq += d * d;
                    count += 1;
                }
            }
        }
        ((m * n) as f64 / count as f64).sqrt() * sq.sqrt() / truth.to_dense().norm()
    }

    #[test]
    fn exact_estimate_scores_zero() {
        let truth = generate_uniform(10, 11, 2, &[2.0, 1.0], 0).unwrap();
        let omega = sample_omega(10, 11, 2, 2.0, 0).unwrap();
        let obs = truth.observe(omega.indices()).unwrap();
        let est = result_from_truth(&truth);
        assert_abs_diff_eq!(
            rel_rmse_unobserved(&est, &truth, &obs).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(rel_frobenius_full(&est, &truth).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_estimate_reduces_to_truth_norm_ratio() {
        let truth = generate_uniform(12, 9, 2, &[3.0, 1.0], 1).unwrap();
        let omega = sample_omega(12, 9, 2, 2.0, 1).unwrap();
        let obs = truth.observe(omega.indices()).unwrap();
        let est = zero_result(&truth);
        let got = rel_rmse_unobserved(&est, &truth, &obs).unwrap();
        let dense = truth.to_dense();
        let observed: std::collections::BTreeSet<_> = obs.indices().into_iter().collect();
        let mut comp_sq = 0.0;
        for i in 0..12 {
            for j in 0..9 {
                if !observed.contains(&(i, j)) {
                    comp_sq += dense[(i, j)] * dense[(i, j)];
                }
            }
        }
        let unobserved = 12 * 9 - obs.nnz();
        let expected = ((12 * 9) as f64 / unobserved as f64).sqrt() * comp_sq.sqrt() / dense.norm();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(rel_frobenius_full(&est, &truth).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        for seed in 0..10 {
            let truth = generate_uniform(20, 20, 3, &[3.0, 2.0, 1.0], seed).unwrap();
            let other = generate_uniform(20, 20, 3, &[2.5, 2.0, 1.5], seed + 100).unwrap();
            let omega = sample_omega(20, 20, 3, 2.0, seed).unwrap();
            let obs = truth.observe(omega.indices()).unwrap();
            let est = result_from_truth(&other);
            let got = rel_rmse_unobserved(&est, &truth, &obs).unwrap();
            let want = brute_force_rel_rmse(&est, &truth, &obs);
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_metric_matches_dense_oracle() {
        for seed in 0..10 {
            let truth = generate_uniform(50, 40, 3, &[3.0, 2.0, 1.0], seed).unwrap();
            let other = generate_uniform(50, 40, 3, &[4.0, 1.0, 0.5], seed + 7).unwrap();
            let est = result_from_truth(&other);
            let got = rel_frobenius_full(&est, &truth).unwrap();
            let want = (est.to_dense() - truth.to_dense()).norm() / truth.to_dense().norm();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn invariant_under_joint_sign_flips() {
        let truth = generate_uniform(15, 14, 2, &[2.0, 1.0], 3).unwrap();
        let other = generate_uniform(15, 14, 2, &[1.5, 1.0], 8).unwrap();
        let omega = sample_omega(15, 14, 2, 2.0, 3).unwrap();
        let obs = truth.observe(omega.indices()).unwrap();

        let est = result_from_truth(&other);
        let base = rel_rmse_unobserved(&est, &truth, &obs).unwrap();

        let mut flipped = result_from_truth(&other);
        let nu = -flipped.u.column(0);
        let nv = -flipped.v.column(0);
        flipped.u.set_column(0, &nu);
        flipped.v.set_column(0, &nv);
        assert_abs_diff_eq!(
            rel_rmse_unobserved(&flipped, &truth, &obs).unwrap(),
            base,
            epsilon = 1e-12
        );

        let mut truth_flipped = truth.clone();
        let tu = -truth_flipped.u.column(1);
        let tv = -truth_flipped.v.column(1);
        truth_flipped.u.set_column(1, &tu);
        truth_flipped.v.set_column(1, &tv);
        assert_abs_diff_eq!(
            rel_rmse_unobserved(&est, &truth_flipped, &obs).unwrap(),
            base,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_full_grid() {
        let truth = generate_uniform(5, 5, 1, &[1.0], 0).unwrap();
        let full: Vec<_> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).collect();
        let obs = truth.observe(&full).unwrap();
        let est = result_from_truth(&truth);
        assert!(rel_rmse_unobserved(&est, &truth, &obs).is_err());
    }

    #[test]
    fn success_threshold_is_strict() {
        assert!(is_success(1e-14));
        assert!(!is_success(1e-4));
        assert!(!is_success(0.5));
        assert!(is_success(9.999e-5));
    }
}
