//! The generate and complete subcommands: dataset serialization and
//! single-problem completion runs.

use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::{DMatrix, DVector};

use r2rils::datagen::{
    add_noise, generate_power_law, generate_uniform, sample_fixed_count, sample_omega, GroundTruth,
};
use r2rils::io::{read_triplets, write_triplets};
use r2rils::{complete, InitMode, SolverConfig, StopReason, UpdateVariant};

use crate::config::{pick, FileConfig};
use crate::fmt;
use crate::{CliError, EXIT_INPUT, EXIT_NONCONVERGENCE};

#[derive(Args)]
pub struct GenerateArgs {
    /// Flat key=value config file; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generation model: uniform or powerlaw.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Comma-separated singular values (uniform model).
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Power-law decay exponent in [0, 1] (powerlaw model).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Oversampling ratio; |omega| ~ rho * r * (m + n - r).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Exact number of observed entries; overrides rho when set.
    #[arg(long)]
    pub count: Option<usize>,
    /// Per-entry Gaussian noise level added to the observations.
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output file name prefix.
    #[arg(long)]
    pub prefix: Option<String>,
}

const GENERATE_KEYS: &[&str] = &[
    "model", "m", "n", "rank", "spectrum", "alpha", "rho", "count", "eta0", "seed", "out",
    "prefix",
];

pub fn run_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p, GENERATE_KEYS).map_err(CliError::input)?,
        None => FileConfig::empty(),
    };
    let get = |k| file.get::<String>(k).map_err(CliError::input);

    let model = pick(args.model.clone(), get("model")?, "uniform".into());
    let m = pick(args.m, file.get("m").map_err(CliError::input)?, 50);
    let n = pick(args.n, file.get("n").map_err(CliError::input)?, 60);
    let rank = pick(args.rank, file.get("rank").map_err(CliError::input)?, 2);
    let rho = pick(args.rho, file.get("rho").map_err(CliError::input)?, 3.0);
    let count = args.count.or(file.get("count").map_err(CliError::input)?);
    let alpha = pick(args.alpha, file.get("alpha").map_err(CliError::input)?, 0.5);
    let eta0 = pick(args.eta0, file.get("eta0").map_err(CliError::input)?, 0.0);
    let seed = pick(args.seed, file.get("seed").map_err(CliError::input)?, 0);
    let out = pick(
        args.out.clone(),
        get("out")?.map(PathBuf::from),
        PathBuf::from("."),
    );
    let prefix = pick(args.prefix.clone(), get("prefix")?, "gen".into());

    let truth = match model.as_str() {
        "uniform" => {
            let spectrum = match pick(args.spectrum.clone(), get("spectrum")?, String::new()) {
                s if s.is_empty() => vec![1.0; rank],
                s => parse_spectrum(&s)?,
            };
            generate_uniform(m, n, rank, &spectrum, seed).map_err(CliError::from_core)?
        }
        "powerlaw" => generate_power_law(m, n, rank, alpha, seed).map_err(CliError::from_core)?,
        other => {
            return Err(CliError::input(format!(
                "unknown model {other:?} (expected uniform or powerlaw)"
            )))
        }
    };
    let omega = match count {
        Some(c) => sample_fixed_count(m, n, rank, c, seed).map_err(CliError::from_core)?,
        None => sample_omega(m, n, rank, rho, seed).map_err(CliError::from_core)?,
    };
    let mut obs = truth.observe(omega.indices()).map_err(CliError::from_core)?;
    if eta0 > 0.0 {
        obs = add_noise(&obs, eta0, seed ^ 0x6e6f697365).map_err(CliError::from_core)?;
    }

    std::fs::create_dir_all(&out).map_err(CliError::internal)?;
    let truth_path = out.join(format!("{prefix}_truth.txt"));
    let obs_path = out.join(format!("{prefix}_observed.txt"));
    let meta_path = out.join(format!("{prefix}_meta.txt"));
    write_factors(&truth_path, &truth.u, &truth.s, &truth.v).map_err(CliError::internal)?;
    write_triplets(&obs, &obs_path).map_err(CliError::from_core)?;
    write_meta(
        &meta_path,
        &truth,
        &model,
        rho,
        count,
        alpha,
        eta0,
        obs.nnz(),
        omega.redraws(),
    )
    .map_err(CliError::internal)?;
    println!(
        "wrote {} ({} observed entries), {}, {}",
        obs_path.display(),
        obs.nnz(),
        truth_path.display(),
        meta_path.display()
    );
    Ok(())
}

fn parse_spectrum(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::input(format!("spectrum value {t:?}: {e}")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn write_meta(
    path: &Path,
    truth: &GroundTruth,
    model: &str,
    rho: f64,
    count: Option<usize>,
    alpha: f64,
    eta0: f64,
    nnz: usize,
    redraws: usize,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "model={model}")?;
    writeln!(f, "m={}", truth.nrows())?;
    writeln!(f, "n={}", truth.ncols())?;
    writeln!(f, "rank={}", truth.rank())?;
    match count {
        Some(c) => writeln!(f, "count={c}")?,
        None => writeln!(f, "rho={}", fmt::num(rho))?,
    }
    if model == "powerlaw" {
        writeln!(f, "alpha={}", fmt::num(alpha))?;
    } else {
        let s: Vec<String> = truth.s.iter().map(|&x| fmt::num(x)).collect();
        writeln!(f, "spectrum={}", s.join(","))?;
    }
    writeln!(f, "eta0={}", fmt::num(eta0))?;
    writeln!(f, "seed={}", truth.seed)?;
    writeln!(f, "nnz={nnz}")?;
    writeln!(f, "redraws={redraws}")?;
    Ok(())
}

/// Text serialization of a factored matrix `U diag(s) V^T`.
pub fn write_factors(
    path: &Path,
    u: &DMatrix<f64>,
    s: &DVector<f64>,
    v: &DMatrix<f64>,
) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "% factored matrix: U diag(s) V^T")?;
    writeln!(f, "{} {} {}", u.nrows(), v.nrows(), s.len())?;
    let s_line: Vec<String> = s.iter().map(|x| format!("{x}")).collect();
    writeln!(f, "{}", s_line.join(" "))?;
    for i in 0..u.nrows() {
        let row: Vec<String> = (0..u.ncols()).map(|k| format!("{}", u[(i, k)])).collect();
        writeln!(f, "{}", row.join(" "))?;
    }
    for j in 0..v.nrows() {
        let row: Vec<String> = (0..v.ncols()).map(|k| format!("{}", v[(j, k)])).collect();
        writeln!(f, "{}", row.join(" "))?;
    }
    Ok(())
}

#[derive(Args)]
pub struct CompleteArgs {
    /// Observed-triplets input file.
    pub input: PathBuf,
    /// Flat key=value config file; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Target rank.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long)]
    pub lsqr_max_iter: Option<usize>,
    #[arg(long)]
    pub lsqr_tol: Option<f64>,
    #[arg(long)]
    pub eps_exact: Option<f64>,
    #[arg(long)]
    pub eps_step: Option<f64>,
    #[arg(long)]
    pub delta_rel: Option<f64>,
    /// Update variant: standard or naive.
    #[arg(long)]
    pub variant: Option<String>,
    /// Initialization: svd or random.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub normalize_ls_columns: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output file name prefix; defaults to the input file stem.
    #[arg(long)]
    pub prefix: Option<String>,
}

const COMPLETE_KEYS: &[&str] = &[
    "rank",
    "t_max",
    "lsqr_max_iter",
    "lsqr_tol",
    "eps_exact",
    "eps_step",
    "delta_rel",
    "variant",
    "init",
    "normalize_ls_columns",
    "seed",
    "out",
    "prefix",
];

pub fn solver_config_from(args: &CompleteArgs, file: &FileConfig) -> Result<SolverConfig, CliError> {
    let rank = args
        .rank
        .or(file.get("rank").map_err(CliError::input)?)
        .ok_or_else(|| CliError::input("rank is required (flag --rank or config key rank)"))?;
    let mut cfg = SolverConfig::new(rank);
    cfg.t_max = pick(args.t_max, file.get("t_max").map_err(CliError::input)?, cfg.t_max);
    cfg.lsqr_max_iter = pick(
        args.lsqr_max_iter,
        file.get("lsqr_max_iter").map_err(CliError::input)?,
        cfg.lsqr_max_iter,
    );
    cfg.lsqr_tol = pick(
        args.lsqr_tol,
        file.get("lsqr_tol").map_err(CliError::input)?,
        cfg.lsqr_tol,
    );
    cfg.eps_exact = pick(
        args.eps_exact,
        file.get("eps_exact").map_err(CliError::input)?,
        cfg.eps_exact,
    );
    cfg.eps_step = pick(
        args.eps_step,
        file.get("eps_step").map_err(CliError::input)?,
        cfg.eps_step,
    );
    cfg.delta_rel = pick(
        args.delta_rel,
        file.get("delta_rel").map_err(CliError::input)?,
        cfg.delta_rel,
    );
    cfg.seed = pick(args.seed, file.get("seed").map_err(CliError::input)?, cfg.seed);
    cfg.normalize_ls_columns = pick(
        args.normalize_ls_columns,
        file.get("normalize_ls_columns").map_err(CliError::input)?,
        cfg.normalize_ls_columns,
    );
    let variant = pick(
        args.variant.clone(),
        file.get::<String>("variant").map_err(CliError::input)?,
        "standard".into(),
    );
    cfg.update_variant = match variant.as_str() {
        "standard" => UpdateVariant::Standard,
        "naive" => UpdateVariant::Naive,
        other => {
            return Err(CliError::input(format!(
                "unknown variant {other:?} (expected standard or naive)"
            )))
        }
    };
    let init = pick(
        args.init.clone(),
        file.get::<String>("init").map_err(CliError::input)?,
        "svd".into(),
    );
    cfg.init_mode = match init.as_str() {
        "svd" => InitMode::Svd,
        "random" => InitMode::Random,
        other => {
            return Err(CliError::input(format!(
                "unknown init {other:?} (expected svd or random)"
            )))
        }
    };
    cfg.validate().map_err(CliError::from_core)?;
    Ok(cfg)
}

pub fn run_complete(args: &CompleteArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p, COMPLETE_KEYS).map_err(CliError::input)?,
        None => FileConfig::empty(),
    };
    let cfg = solver_config_from(args, &file)?;
    let out = pick(
        args.out.clone(),
        file.get::<String>("out")
            .map_err(CliError::input)?
            .map(PathBuf::from),
        PathBuf::from("."),
    );
    let default_prefix = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "result".into());
    let prefix = pick(
        args.prefix.clone(),
        file.get("prefix").map_err(CliError::input)?,
        default_prefix,
    );

    let obs = read_triplets(&args.input).map_err(CliError::from_core)?;
    let result = complete(&obs, &cfg).map_err(CliError::from_core)?;

    std::fs::create_dir_all(&out).map_err(CliError::internal)?;
    let factors_path = out.join(format!("{prefix}_factors.txt"));
    let trace_path = out.join(format!("{prefix}_trace.csv"));
    let summary_path = out.join(format!("{prefix}_summary.txt"));
    write_factors(&factors_path, &result.u, &result.s, &result.v).map_err(CliError::internal)?;

    let mut w = csv::Writer::from_path(&trace_path).map_err(CliError::internal_any)?;
    w.write_record(["iter", "rmse_obs", "step_norm", "lsqr_iters", "attenuated"])
        .map_err(CliError::internal_any)?;
    for rec in &result.trace.records {
        w.write_record([
            rec.iter.to_string(),
            fmt::num(rec.rmse_obs),
            fmt::num(rec.step_norm),
            rec.lsqr_iters.to_string(),
            fmt::flag(rec.attenuated),
        ])
        .map_err(CliError::internal_any)?;
    }
    w.flush().map_err(CliError::internal)?;

    let best = &result.trace.records[result.best_iteration - 1];
    let summary = format!(
        "stop_reason={}\niterations={}\nbest_iteration={}\nbest_rmse_obs={}\nsingular_values={}\n",
        result.stop_reason.as_str(),
        result.trace.len(),
        result.best_iteration,
        fmt::num(best.rmse_obs),
        result
            .s
            .iter()
            .map(|&x| fmt::num(x))
            .collect::<Vec<_>>()
            .join(",")
    );
    std::fs::write(&summary_path, &summary).map_err(CliError::internal)?;
    println!(
        "stop_reason={} iterations={} best_rmse_obs={}",
        result.stop_reason.as_str(),
        result.trace.len(),
        fmt::num(best.rmse_obs)
    );

    if result.stop_reason == StopReason::MaxIters {
        return Err(CliError {
            code: EXIT_NONCONVERGENCE,
            message: format!(
                "did not converge within {} iterations (artifacts written to {})",
                cfg.t_max,
                out.display()
            ),
        });
    }
    Ok(())
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: msg.into(),
        }
    }
}
