//! Seeded experiment sweeps. Each protocol emits a long-form CSV of raw
//! realizations, a summary CSV aggregated per grid point, and an SVG chart.
//! Every raw row carries the seed and the full parameter tuple.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use r2rils::datagen::{add_noise, generate_power_law, generate_uniform, sample_fixed_count, sample_omega};
use r2rils::metrics::{is_success, rel_frobenius_full, rel_rmse_unobserved, SUCCESS_THRESHOLD};
use r2rils::solver::{initialize, step1_solve, step2_update};
use r2rils::{complete, FactorPair, ObservedMatrix, SolverConfig, UpdateVariant};

use crate::config::{pick, FileConfig};
use crate::fmt;
use crate::plot::{self, Chart, Series};
use crate::CliError;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Protocol {
    Oversampling,
    Noise,
    Powerlaw,
    NaiveCompare,
    ConvergenceTrace,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Sweep protocol.
    #[arg(value_enum)]
    pub protocol: Protocol,
    /// Flat key=value config file; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Realizations per grid point.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Base seed; realization k uses base_seed + k.
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Oversampling ratio (fixed-rho protocols) or grid start (oversampling).
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub rho_step: Option<f64>,
    /// Comma-separated noise levels (noise protocol).
    #[arg(long)]
    pub eta_levels: Option<String>,
    /// Comma-separated singular values.
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Power-law exponent (powerlaw protocol).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated entry-budget factors c; |omega| = c * n * ln(n).
    #[arg(long)]
    pub count_factors: Option<String>,
    /// Worker threads for the realizations.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const SWEEP_KEYS: &[&str] = &[
    "m",
    "n",
    "rank",
    "seeds",
    "base_seed",
    "t_max",
    "rho",
    "rho_max",
    "rho_step",
    "eta_levels",
    "spectrum",
    "alpha",
    "count_factors",
    "jobs",
    "out",
];

struct Params {
    m: usize,
    n: usize,
    rank: usize,
    seeds: usize,
    base_seed: u64,
    t_max: usize,
    rho: f64,
    rho_max: f64,
    rho_step: f64,
    eta_levels: Vec<f64>,
    spectrum: Vec<f64>,
    alpha: f64,
    count_factors: Vec<f64>,
    out: PathBuf,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::input(format!("{what} value {t:?}: {e}")))
        })
        .collect()
}

fn resolve(args: &SweepArgs) -> Result<Params, CliError> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p, SWEEP_KEYS).map_err(CliError::input)?,
        None => FileConfig::empty(),
    };
    let rank = pick(args.rank, file.get("rank").map_err(CliError::input)?, 3);
    let eta_levels = match pick(
        args.eta_levels.clone(),
        file.get::<String>("eta_levels").map_err(CliError::input)?,
        String::new(),
    ) {
        s if s.is_empty() => vec![1e-3, 1e-2, 1e-1],
        s => parse_list(&s, "eta_levels")?,
    };
    let spectrum = match pick(
        args.spectrum.clone(),
        file.get::<String>("spectrum").map_err(CliError::input)?,
        String::new(),
    ) {
        s if s.is_empty() => vec![1.0; rank],
        s => parse_list(&s, "spectrum")?,
    };
    let count_factors = match pick(
        args.count_factors.clone(),
        file.get::<String>("count_factors").map_err(CliError::input)?,
        String::new(),
    ) {
        s if s.is_empty() => vec![6.0, 8.0, 10.0, 12.0],
        s => parse_list(&s, "count_factors")?,
    };
    if spectrum.len() != rank {
        return Err(CliError::input(format!(
            "spectrum has {} values but rank is {rank}",
            spectrum.len()
        )));
    }
    let jobs = pick(args.jobs, file.get("jobs").map_err(CliError::input)?, 0);
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(CliError::internal_any)?;
    }
    Ok(Params {
        m: pick(args.m, file.get("m").map_err(CliError::input)?, 100),
        n: pick(args.n, file.get("n").map_err(CliError::input)?, 100),
        rank,
        seeds: pick(args.seeds, file.get("seeds").map_err(CliError::input)?, 10),
        base_seed: pick(args.base_seed, file.get("base_seed").map_err(CliError::input)?, 1),
        t_max: pick(args.t_max, file.get("t_max").map_err(CliError::input)?, 100),
        rho: pick(args.rho, file.get("rho").map_err(CliError::input)?, 1.0),
        rho_max: pick(args.rho_max, file.get("rho_max").map_err(CliError::input)?, 3.0),
        rho_step: pick(args.rho_step, file.get("rho_step").map_err(CliError::input)?, 0.25),
        eta_levels,
        spectrum,
        alpha: pick(args.alpha, file.get("alpha").map_err(CliError::input)?, 0.5),
        count_factors,
        out: pick(
            args.out.clone(),
            file.get::<String>("out")
                .map_err(CliError::input)?
                .map(PathBuf::from),
            PathBuf::from("sweep_out"),
        ),
    })
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let p = resolve(args)?;
    std::fs::create_dir_all(&p.out).map_err(CliError::internal)?;
    match args.protocol {
        Protocol::Oversampling => oversampling(&p),
        Protocol::Noise => noise(&p),
        Protocol::Powerlaw => powerlaw(&p),
        Protocol::NaiveCompare => naive_compare(&p),
        Protocol::ConvergenceTrace => convergence_trace(&p),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(CliError::internal_any)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// One noise-free completion realization; infinite rel-RMSE marks failure.
fn one_run(p: &Params, rho: f64, seed: u64) -> (f64, String) {
    let run = || -> r2rils::Result<f64> {
        let truth = generate_uniform(p.m, p.n, p.rank, &p.spectrum, seed)?;
        let omega = sample_omega(p.m, p.n, p.rank, rho, seed)?;
        let obs = truth.observe(omega.indices())?;
        let mut cfg = SolverConfig::new(p.rank);
        cfg.t_max = p.t_max;
        cfg.seed = seed;
        let result = complete(&obs, &cfg)?;
        rel_rmse_unobserved(&result, &truth, &obs)
    };
    match run() {
        Ok(rel) => (rel, "ok".to_string()),
        Err(e) => (f64::INFINITY, format!("error: {e}")),
    }
}

fn oversampling(p: &Params) -> Result<(), CliError> {
    let mut rhos = Vec::new();
    let mut rho = p.rho;
    while rho <= p.rho_max + 1e-12 {
        rhos.push(rho);
        rho += p.rho_step;
    }
    let grid: Vec<(f64, u64)> = rhos
        .iter()
        .flat_map(|&r| (0..p.seeds as u64).map(move |k| (r, p.base_seed + k)))
        .collect();
    let rows: Vec<(f64, u64, f64, String)> = grid
        .par_iter()
        .map(|&(rho, seed)| {
            let (rel, status) = one_run(p, rho, seed);
            (rho, seed, rel, status)
        })
        .collect();

    let raw_path = p.out.join("oversampling_raw.csv");
    let mut w = csv_writer(&raw_path)?;
    w.write_record(["protocol", "m", "n", "rank", "spectrum", "t_max", "rho", "seed", "rel_rmse", "success", "status"])
        .map_err(CliError::internal_any)?;
    let spectrum_str = p.spectrum.iter().map(|&x| fmt::num(x)).collect::<Vec<_>>().join(";");
    for (rho, seed, rel, status) in &rows {
        w.write_record([
            "oversampling".into(),
            p.m.to_string(),
            p.n.to_string(),
            p.rank.to_string(),
            spectrum_str.clone(),
            p.t_max.to_string(),
            fmt::num(*rho),
            seed.to_string(),
            fmt::num(*rel),
            fmt::flag(is_success(*rel)),
            status.clone(),
        ])
        .map_err(CliError::internal_any)?;
    }
    w.flush().map_err(CliError::internal)?;

    let summary_path = p.out.join("oversampling_summary.csv");
    let mut s = csv_writer(&summary_path)?;
    s.write_record(["rho", "median_rel_rmse", "failure_probability"])
        .map_err(CliError::internal_any)?;
    let mut fail_points = Vec::new();
    let mut med_points = Vec::new();
    for &rho in &rhos {
        let rels: Vec<f64> = rows
            .iter()
            .filter(|r| r.0 == rho)
            .map(|r| r.2)
            .collect();
        let failures = rels.iter().filter(|&&x| !(x < SUCCESS_THRESHOLD)).count();
        let fail_prob = failures as f64 / rels.len() as f64;
        let med = median(rels);
        s.write_record([fmt::num(rho), fmt::num(med), fmt::num(fail_prob)])
            .map_err(CliError::internal_any)?;
        fail_points.push((rho, fail_prob));
        med_points.push((rho, med));
    }
    s.flush().map_err(CliError::internal)?;

    plot::render(
        &p.out.join("oversampling.svg"),
        &Chart {
            title: "failure probability vs oversampling ratio",
            x_label: "rho",
            y_label: "failure probability",
            log_x: false,
            log_y: false,
        },
        &[Series {
            label: "failure prob".into(),
            points: fail_points,
        }],
    )
    .map_err(CliError::internal)?;
    println!("wrote {} and summary/plot alongside", raw_path.display());
    Ok(())
}

fn noise(p: &Params) -> Result<(), CliError> {
    let grid: Vec<(f64, u64)> = p
        .eta_levels
        .iter()
        .flat_map(|&e| (0..p.seeds as u64).map(move |k| (e, p.base_seed + k)))
        .collect();
    let rows: Vec<(f64, u64, f64, String)> = grid
        .par_iter()
        .map(|&(eta0, seed)| {
            let run = || -> r2rils::Result<f64> {
                let truth = generate_uniform(p.m, p.n, p.rank, &p.spectrum, seed)?;
                let omega = sample_omega(p.m, p.n, p.rank, p.rho, seed)?;
                let clean = truth.observe(omega.indices())?;
                let obs = add_noise(&clean, eta0, seed ^ 0x6e6f697365)?;
                let mut cfg = SolverConfig::new(p.rank);
                cfg.t_max = p.t_max;
                cfg.seed = seed;
                cfg.delta_rel = 0.0;
                let result = complete(&obs, &cfg)?;
                rel_rmse_unobserved(&result, &truth, &obs)
            };
            match run() {
                Ok(rel) => (eta0, seed, rel, "ok".to_string()),
                Err(e) => (eta0, seed, f64::INFINITY, format!("error: {e}")),
            }
        })
        .collect();

    let raw_path = p.out.join("noise_raw.csv");
    let mut w = csv_writer(&raw_path)?;
    w.write_record(["protocol", "m", "n", "rank", "spectrum", "rho", "t_max", "eta0", "seed", "rel_rmse", "status"])
        .map_err(CliError::internal_any)?;
    let spectrum_str = p.spectrum.iter().map(|&x| fmt::num(x)).collect::<Vec<_>>().join(";");
    for (eta0, seed, rel, status) in &rows {
        w.write_record([
            "noise".into(),
            p.m.to_string(),
            p.n.to_string(),
            p.rank.to_string(),
            spectrum_str.clone(),
            fmt::num(p.rho),
            p.t_max.to_string(),
            fmt::num(*eta0),
            seed.to_string(),
            fmt::num(*rel),
            status.clone(),
        ])
        .map_err(CliError::internal_any)?;
    }
    w.flush().map_err(CliError::internal)?;

    let summary_path = p.out.join("noise_summary.csv");
    let mut s = csv_writer(&summary_path)?;
    s.write_record(["eta0", "median_rel_rmse", "failure_probability"])
        .map_err(CliError::internal_any)?;
    let mut points = Vec::new();
    for &eta0 in &p.eta_levels {
        let rels: Vec<f64> = rows.iter().filter(|r| r.0 == eta0).map(|r| r.2).collect();
        let failures = rels.iter().filter(|&&x| !x.is_finite()).count();
        let med = median(rels.clone());
        s.write_record([
            fmt::num(eta0),
            fmt::num(med),
            fmt::num(failures as f64 / rels.len() as f64),
        ])
        .map_err(CliError::internal_any)?;
        points.push((eta0, med));
    }
    s.flush().map_err(CliError::internal)?;

    // Log-log slope across the levels, printed for a quick linearity check.
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / k;
    let ym = ys.iter().sum::<f64>() / k;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
    println!("log-log slope of median rel-RMSE vs eta0: {slope:.3}");

    plot::render(
        &p.out.join("noise.svg"),
        &Chart {
            title: "unobserved RMSE vs noise level",
            x_label: "eta0",
            y_label: "median rel-RMSE",
            log_x: true,
            log_y: true,
        },
        &[Series {
            label: "median".into(),
            points,
        }],
    )
    .map_err(CliError::internal)?;
    println!("wrote {} and summary/plot alongside", raw_path.display());
    Ok(())
}

fn powerlaw(p: &Params) -> Result<(), CliError> {
    let grid: Vec<(f64, u64)> = p
        .count_factors
        .iter()
        .flat_map(|&c| (0..p.seeds as u64).map(move |k| (c, p.base_seed + k)))
        .collect();
    let rows: Vec<(f64, usize, u64, f64, String)> = grid
        .par_iter()
        .map(|&(factor, seed)| {
            let count = (factor * p.n as f64 * (p.n as f64).ln()).round() as usize;
            let run = || -> r2rils::Result<f64> {
                let truth = generate_power_law(p.m, p.n, p.rank, p.alpha, seed)?;
                let omega = sample_fixed_count(p.m, p.n, p.rank, count, seed)?;
                let obs = truth.observe(omega.indices())?;
                let mut cfg = SolverConfig::new(p.rank);
                cfg.t_max = p.t_max;
                cfg.seed = seed;
                let result = complete(&obs, &cfg)?;
                rel_frobenius_full(&result, &truth)
            };
            match run() {
                Ok(rel) => (factor, count, seed, rel, "ok".to_string()),
                Err(e) => (factor, count, seed, f64::INFINITY, format!("error: {e}")),
            }
        })
        .collect();

    let raw_path = p.out.join("powerlaw_raw.csv");
    let mut w = csv_writer(&raw_path)?;
    w.write_record(["protocol", "m", "n", "rank", "alpha", "t_max", "count_factor", "count", "seed", "rel_frobenius", "recovered", "status"])
        .map_err(CliError::internal_any)?;
    for (factor, count, seed, rel, status) in &rows {
        w.write_record([
            "powerlaw".into(),
            p.m.to_string(),
            p.n.to_string(),
            p.rank.to_string(),
            fmt::num(p.alpha),
            p.t_max.to_string(),
            fmt::num(*factor),
            count.to_string(),
            seed.to_string(),
            fmt::num(*rel),
            fmt::flag(*rel <= 0.01),
            status.clone(),
        ])
        .map_err(CliError::internal_any)?;
    }
    w.flush().map_err(CliError::internal)?;

    let summary_path = p.out.join("powerlaw_summary.csv");
    let mut s = csv_writer(&summary_path)?;
    s.write_record(["count_factor", "median_rel_frobenius", "recovery_rate"])
        .map_err(CliError::internal_any)?;
    let mut points = Vec::new();
    for &factor in &p.count_factors {
        let rels: Vec<f64> = rows.iter().filter(|r| r.0 == factor).map(|r| r.3).collect();
        let recovered = rels.iter().filter(|&&x| x <= 0.01).count();
        let rate = recovered as f64 / rels.len() as f64;
        s.write_record([fmt::num(factor), fmt::num(median(rels)), fmt::num(rate)])
            .map_err(CliError::internal_any)?;
        points.push((factor, rate));
    }
    s.flush().map_err(CliError::internal)?;

    plot::render(
        &p.out.join("powerlaw.svg"),
        &Chart {
            title: "power-law recovery vs entry budget",
            x_label: "count factor c in c*n*ln(n)",
            y_label: "recovery rate",
            log_x: false,
            log_y: false,
        },
        &[Series {
            label: "recovery rate".into(),
            points,
        }],
    )
    .map_err(CliError::internal)?;
    println!("wrote {} and summary/plot alongside", raw_path.display());
    Ok(())
}

fn naive_compare(p: &Params) -> Result<(), CliError> {
    let seed = p.base_seed;
    let truth = generate_uniform(p.m, p.n, p.rank, &p.spectrum, seed).map_err(CliError::from_core)?;
    let omega = sample_omega(p.m, p.n, p.rank, p.rho.max(5.0), seed).map_err(CliError::from_core)?;
    let obs = truth.observe(omega.indices()).map_err(CliError::from_core)?;

    let mut std_cfg = SolverConfig::new(p.rank);
    std_cfg.t_max = 30;
    std_cfg.seed = seed;
    let standard = complete(&obs, &std_cfg).map_err(CliError::from_core)?;

    let mut naive_cfg = SolverConfig::new(p.rank);
    naive_cfg.t_max = 500;
    naive_cfg.seed = seed;
    naive_cfg.update_variant = UpdateVariant::Naive;
    naive_cfg.delta_rel = 0.0;
    naive_cfg.eps_step = 0.0;
    let naive = complete(&obs, &naive_cfg).map_err(CliError::from_core)?;

    let raw_path = p.out.join("naive_compare_raw.csv");
    let mut w = csv_writer(&raw_path)?;
    w.write_record(["protocol", "m", "n", "rank", "rho", "seed", "variant", "iter", "rmse_obs"])
        .map_err(CliError::internal_any)?;
    for (variant, result) in [("standard", &standard), ("naive", &naive)] {
        for rec in &result.trace.records {
            w.write_record([
                "naive_compare".into(),
                p.m.to_string(),
                p.n.to_string(),
                p.rank.to_string(),
                fmt::num(p.rho.max(5.0)),
                seed.to_string(),
                variant.into(),
                rec.iter.to_string(),
                fmt::num(rec.rmse_obs),
            ])
            .map_err(CliError::internal_any)?;
        }
    }
    w.flush().map_err(CliError::internal)?;

    // Raw first-column snapshots of U_t over the last 50 naive iterations,
    // for post-hoc visualization of the oscillation.
    let snapshots = naive_u1_snapshots(&obs, &naive_cfg, 50).map_err(CliError::from_core)?;
    let snap_path = p.out.join("naive_u1_snapshots.csv");
    let mut w = csv_writer(&snap_path)?;
    w.write_record(["iter", "row", "value"]).map_err(CliError::internal_any)?;
    for (iter, u1) in &snapshots {
        for (row, &value) in u1.iter().enumerate() {
            w.write_record([iter.to_string(), row.to_string(), fmt::num(value)])
                .map_err(CliError::internal_any)?;
        }
    }
    w.flush().map_err(CliError::internal)?;

    plot::render(
        &p.out.join("naive_compare.svg"),
        &Chart {
            title: "standard vs naive update",
            x_label: "iteration",
            y_label: "observed RMSE",
            log_x: false,
            log_y: true,
        },
        &[
            Series {
                label: "standard".into(),
                points: standard
                    .trace
                    .records
                    .iter()
                    .map(|r| (r.iter as f64, r.rmse_obs))
                    .collect(),
            },
            Series {
                label: "naive".into(),
                points: naive
                    .trace
                    .records
                    .iter()
                    .map(|r| (r.iter as f64, r.rmse_obs))
                    .collect(),
            },
        ],
    )
    .map_err(CliError::internal)?;
    println!(
        "standard best rmse {} in {} iters; naive ran {} iters; wrote {}",
        fmt::num(
            standard
                .trace
                .records
                .iter()
                .map(|r| r.rmse_obs)
                .fold(f64::INFINITY, f64::min)
        ),
        standard.trace.len(),
        naive.trace.len(),
        raw_path.display()
    );
    Ok(())
}

/// Re-runs the naive iteration to capture the trailing `keep` first-column
/// estimates, which the solver trace does not retain.
fn naive_u1_snapshots(
    obs: &ObservedMatrix,
    cfg: &SolverConfig,
    keep: usize,
) -> r2rils::Result<Vec<(usize, Vec<f64>)>> {
    let mut basis: FactorPair = initialize(obs, cfg)?;
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for t in 1..=cfg.t_max {
        let (tilde, _) = step1_solve(obs, &basis, cfg)?;
        basis = step2_update(&basis, &tilde, &UpdateVariant::Naive, 1.0)?;
        if t + keep > cfg.t_max {
            out.push((t, basis.u.column(0).iter().copied().collect()));
        }
    }
    Ok(out)
}

fn convergence_trace(p: &Params) -> Result<(), CliError> {
    let seeds: Vec<u64> = (0..p.seeds as u64).map(|k| p.base_seed + k).collect();
    let runs: Vec<(u64, r2rils::Result<r2rils::CompletionResult>)> = seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> r2rils::Result<r2rils::CompletionResult> {
                let truth = generate_uniform(p.m, p.n, p.rank, &p.spectrum, seed)?;
                let omega = sample_omega(p.m, p.n, p.rank, p.rho.max(2.5), seed)?;
                let obs = truth.observe(omega.indices())?;
                let mut cfg = SolverConfig::new(p.rank);
                cfg.t_max = p.t_max;
                cfg.seed = seed;
                complete(&obs, &cfg)
            };
            (seed, run())
        })
        .collect();

    let raw_path = p.out.join("convergence_trace_raw.csv");
    let mut w = csv_writer(&raw_path)?;
    w.write_record(["protocol", "m", "n", "rank", "spectrum", "rho", "seed", "iter", "rmse_obs", "step_norm", "status"])
        .map_err(CliError::internal_any)?;
    let spectrum_str = p.spectrum.iter().map(|&x| fmt::num(x)).collect::<Vec<_>>().join(";");
    let mut series = Vec::new();
    for (seed, run) in &runs {
        match run {
            Ok(result) => {
                for rec in &result.trace.records {
                    w.write_record([
                        "convergence_trace".into(),
                        p.m.to_string(),
                        p.n.to_string(),
                        p.rank.to_string(),
                        spectrum_str.clone(),
                        fmt::num(p.rho.max(2.5)),
                        seed.to_string(),
                        rec.iter.to_string(),
                        fmt::num(rec.rmse_obs),
                        fmt::num(rec.step_norm),
                        "ok".into(),
                    ])
                    .map_err(CliError::internal_any)?;
                }
                series.push(Series {
                    label: format!("seed {seed}"),
                    points: result
                        .trace
                        .records
                        .iter()
                        .map(|r| (r.iter as f64, r.rmse_obs))
                        .collect(),
                });
            }
            Err(e) => {
                w.write_record([
                    "convergence_trace".into(),
                    p.m.to_string(),
                    p.n.to_string(),
                    p.rank.to_string(),
                    spectrum_str.clone(),
                    fmt::num(p.rho.max(2.5)),
                    seed.to_string(),
                    "0".into(),
                    "".into(),
                    "".into(),
                    format!("error: {e}"),
                ])
                .map_err(CliError::internal_any)?;
            }
        }
    }
    w.flush().map_err(CliError::internal)?;

    plot::render(
        &p.out.join("convergence_trace.svg"),
        &Chart {
            title: "observed RMSE per iteration",
            x_label: "iteration",
            y_label: "observed RMSE",
            log_x: false,
            log_y: true,
        },
        &series,
    )
    .map_err(CliError::internal)?;
    println!("wrote {} and plot alongside", raw_path.display());
    Ok(())
}
