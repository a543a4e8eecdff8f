//! The verify subcommand: a quick self-contained battery of oracle and
//! property checks, printing one line per check.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use r2rils::datagen::{generate_uniform, sample_omega};
use r2rils::io::{read_triplets, write_triplets};
use r2rils::lsq::{lsqr_min_norm, unstack, LiftedOperator};
use r2rils::metrics::rel_rmse_unobserved;
use r2rils::rank1::{min_norm_closed_form, pseudoinverse_closed_form};
use r2rils::solver::{complete, contraction_factor};
use r2rils::{FactorPair, ObservedMatrix, SolverConfig, StopReason};

use crate::CliError;

type Check = (&'static str, fn() -> Result<(), String>);

const CHECKS: &[Check] = &[
    ("closed form vs pseudoinverse vs solver", check_rank1_equivalence),
    ("Moore-Penrose conditions", check_moore_penrose),
    ("contraction factor bounds", check_contraction_factor),
    ("metric vs brute force", check_metric),
    ("triplet file round-trip", check_round_trip),
    ("full-observation quadratic convergence", check_quadratic),
    ("omega sampler coverage", check_coverage),
];

pub fn run() -> Result<(), CliError> {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => println!("check {name}: ok"),
            Err(e) => {
                println!("check {name}: FAILED ({e})");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        Err(CliError::internal_any(format!("{failed} checks failed")))
    } else {
        Ok(())
    }
}

fn runit(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    let v = DVector::<f64>::from_fn(len, |_, _| StandardNormal.sample(rng));
    let n = v.norm();
    v / n
}

fn rank1_instance(seed: u64, m: usize, n: usize) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_t = runit(&mut rng, m);
    let v_t = runit(&mut rng, n);
    let x = DMatrix::<f64>::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
    (u_t, v_t, x)
}

fn check_rank1_equivalence() -> Result<(), String> {
    let (m, n) = (7, 8);
    let (u_t, v_t, x) = rank1_instance(11, m, n);
    let (cf_u, cf_v) = min_norm_closed_form(&u_t, &v_t, &x).map_err(|e| e.to_string())?;
    let dagger = pseudoinverse_closed_form(&u_t, &v_t).map_err(|e| e.to_string())?;
    let vec_x = DVector::from_fn(m * n, |p, _| x[(p / n, p % n)]);
    let pinv_sol = &dagger * &vec_x;

    let basis = FactorPair::new(
        DMatrix::from_column_slice(m, 1, u_t.as_slice()),
        DMatrix::from_column_slice(n, 1, v_t.as_slice()),
    )
    .map_err(|e| e.to_string())?;
    let entries: Vec<_> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, x[(i, j)]))
        .collect();
    let obs = ObservedMatrix::new(m, n, entries).map_err(|e| e.to_string())?;
    let omega = obs.indices();
    let op = LiftedOperator::new(&basis, &omega);
    let (z, _) = lsqr_min_norm(&op, &obs.values(), 1e-14, 4000).map_err(|e| e.to_string())?;
    let (a, b) = unstack(&z, m, n, 1);

    let d1 = (pinv_sol.rows(0, m) - &cf_u).norm() + (pinv_sol.rows(m, n) - &cf_v).norm();
    let d2 = (a.column(0) - &cf_u).norm() + (b.column(0) - &cf_v).norm();
    if d1.max(d2) > 1e-8 {
        return Err(format!("disagreement {:.3e}", d1.max(d2)));
    }
    Ok(())
}

fn check_moore_penrose() -> Result<(), String> {
    let (m, n) = (6, 7);
    let (u_t, v_t, _) = rank1_instance(12, m, n);
    let dagger = pseudoinverse_closed_form(&u_t, &v_t).map_err(|e| e.to_string())?;
    let basis = FactorPair::new(
        DMatrix::from_column_slice(m, 1, u_t.as_slice()),
        DMatrix::from_column_slice(n, 1, v_t.as_slice()),
    )
    .map_err(|e| e.to_string())?;
    let omega: Vec<_> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mat = LiftedOperator::new(&basis, &omega)
        .materialize()
        .map_err(|e| e.to_string())?;
    let ad = &mat * &dagger;
    let da = &dagger * &mat;
    let worst = [
        (&mat * &da - &mat).norm(),
        (&dagger * &ad - &dagger).norm(),
        (&ad - ad.transpose()).norm(),
        (&da - da.transpose()).norm(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    if worst > 1e-10 {
        return Err(format!("residual {worst:.3e}"));
    }
    Ok(())
}

fn check_contraction_factor() -> Result<(), String> {
    let at_origin = contraction_factor(0.0, 0.0).map_err(|e| e.to_string())?;
    if at_origin != 0.0 {
        return Err(format!("nonzero at origin: {at_origin:.3e}"));
    }
    let bound = (1.0f64 - 1.0 / 2.0f64.sqrt()).sqrt();
    for i in 0..=40 {
        for j in 0..=40 {
            let eps = i as f64 / 40.0;
            let delta = j as f64 / 40.0;
            let r = contraction_factor(eps, delta).map_err(|e| e.to_string())?;
            if r > bound + 1e-12 {
                return Err(format!("factor {r:.6} above {bound:.6} at ({eps}, {delta})"));
            }
        }
    }
    Ok(())
}

fn check_metric() -> Result<(), String> {
    let truth = generate_uniform(20, 20, 3, &[3.0, 2.0, 1.0], 5).map_err(|e| e.to_string())?;
    let omega = sample_omega(20, 20, 3, 2.0, 5).map_err(|e| e.to_string())?;
    let obs = truth.observe(omega.indices()).map_err(|e| e.to_string())?;
    let mut cfg = SolverConfig::new(3);
    cfg.seed = 5;
    let result = complete(&obs, &cfg).map_err(|e| e.to_string())?;
    let got = rel_rmse_unobserved(&result, &truth, &obs).map_err(|e| e.to_string())?;

    let est = result.to_dense();
    let dense = truth.to_dense();
    let observed: std::collections::BTreeSet<_> = obs.indices().into_iter().collect();
    let mut sq = 0.0;
    let mut count = 0usize;
    for i in 0..20 {
        for j in 0..20 {
            if !observed.contains(&(i, j)) {
                let d = est[(i, j)] - dense[(i, j)];
                sq += d * d;
                count += 1;
            }
        }
    }
    let want = (400.0 / count as f64).sqrt() * sq.sqrt() / dense.norm();
    if (got - want).abs() > 1e-12 {
        return Err(format!("metric {got:.3e} vs brute force {want:.3e}"));
    }
    Ok(())
}

fn check_round_trip() -> Result<(), String> {
    let truth = generate_uniform(12, 10, 2, &[2.0, 1.0], 3).map_err(|e| e.to_string())?;
    let omega = sample_omega(12, 10, 2, 2.0, 3).map_err(|e| e.to_string())?;
    let obs = truth.observe(omega.indices()).map_err(|e| e.to_string())?;
    let path = std::env::temp_dir().join(format!("r2rils_verify_{}.txt", std::process::id()));
    let result = (|| -> Result<(), String> {
        write_triplets(&obs, &path).map_err(|e| e.to_string())?;
        let back = read_triplets(&path).map_err(|e| e.to_string())?;
        if back.entries() != obs.entries() {
            return Err("entries changed across the round trip".into());
        }
        Ok(())
    })();
    let _ = std::fs::remove_file(&path);
    result
}

fn check_quadratic() -> Result<(), String> {
    let truth = generate_uniform(30, 35, 1, &[1.0], 9).map_err(|e| e.to_string())?;
    let full: Vec<_> = (0..30).flat_map(|i| (0..35).map(move |j| (i, j))).collect();
    let obs = truth.observe(&full).map_err(|e| e.to_string())?;
    let mut cfg = SolverConfig::new(1);
    cfg.seed = 9;
    let result = complete(&obs, &cfg).map_err(|e| e.to_string())?;
    if result.stop_reason != StopReason::Exact && result.stop_reason != StopReason::Step {
        return Err(format!("stopped with {:?}", result.stop_reason));
    }
    if result.trace.len() > 15 {
        return Err(format!("took {} iterations", result.trace.len()));
    }
    Ok(())
}

fn check_coverage() -> Result<(), String> {
    for seed in 0..5 {
        let omega = sample_omega(40, 50, 3, 2.0, seed).map_err(|e| e.to_string())?;
        let mut row_counts = vec![0usize; 40];
        let mut col_counts = vec![0usize; 50];
        for &(i, j) in omega.indices() {
            row_counts[i] += 1;
            col_counts[j] += 1;
        }
        if row_counts.iter().any(|&c| c < 3) || col_counts.iter().any(|&c| c < 3) {
            return Err(format!("seed {seed}: row/column below rank coverage"));
        }
    }
    Ok(())
}
