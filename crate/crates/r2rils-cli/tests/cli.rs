//! End-to-end checks of the command-line interface: artifact formats,
//! determinism, exit codes, and sweep aggregation consistency.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_r2rils"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let gen = [
        "generate", "--m", "30", "--n", "36", "--rank", "2", "--rho", "4", "--seed", "11",
    ];
    assert_code(&run(&[&gen[..], &["--out", "a"]].concat(), dir.path()), 0);
    assert_code(&run(&[&gen[..], &["--out", "b"]].concat(), dir.path()), 0);
    for name in ["gen_observed.txt", "gen_truth.txt", "gen_meta.txt"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    let header = std::fs::read_to_string(dir.path().join("a/gen_observed.txt")).unwrap();
    let first = header.lines().find(|l| !l.starts_with('%')).unwrap();
    let parts: Vec<&str> = first.split_whitespace().collect();
    assert_eq!(parts[0], "30");
    assert_eq!(parts[1], "36");

    let out = run(
        &[
            "complete",
            "a/gen_observed.txt",
            "--rank",
            "2",
            "--out",
            "a",
            "--prefix",
            "res",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let summary = std::fs::read_to_string(dir.path().join("a/res_summary.txt")).unwrap();
    assert!(summary.contains("stop_reason="), "{summary}");

    let trace = std::fs::read_to_string(dir.path().join("a/res_trace.csv")).unwrap();
    let iterations: usize = summary
        .lines()
        .find_map(|l| l.strip_prefix("iterations="))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(trace.lines().count(), iterations + 1, "one row per iteration");
    assert!(trace.starts_with("iter,rmse_obs,step_norm,lsqr_iters,attenuated"));
}

#[test]
fn complete_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &run(
            &["generate", "--m", "25", "--n", "30", "--rank", "2", "--rho", "4", "--seed", "3"],
            dir.path(),
        ),
        0,
    );
    for out in ["x", "y"] {
        assert_code(
            &run(
                &["complete", "gen_observed.txt", "--rank", "2", "--out", out],
                dir.path(),
            ),
            0,
        );
    }
    for name in ["gen_observed_factors.txt", "gen_observed_trace.csv"] {
        let a = std::fs::read(dir.path().join("x").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("y").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn malformed_input_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.txt"), "2 2 2\n1 1 3.5\n1 1 4.0\n").unwrap();
    let out = run(&["complete", "bad.txt", "--rank", "1"], dir.path());
    assert_code(&out, 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &run(
            &["generate", "--m", "40", "--n", "40", "--rank", "3", "--rho", "2.5", "--seed", "5"],
            dir.path(),
        ),
        0,
    );
    let out = run(
        &[
            "complete",
            "gen_observed.txt",
            "--rank",
            "3",
            "--variant",
            "naive",
            "--t-max",
            "3",
            "--delta-rel",
            "0",
            "--eps-step",
            "0",
        ],
        dir.path(),
    );
    assert_code(&out, 2);
}

#[test]
fn config_file_applies_and_cli_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("gen.conf"),
        "m=20\nn=22\nrank=2\nrho=4\nseed=9\nprefix=fromfile\n",
    )
    .unwrap();
    assert_code(
        &run(
            &["generate", "--config", "gen.conf", "--prefix", "fromcli"],
            dir.path(),
        ),
        0,
    );
    assert!(dir.path().join("fromcli_observed.txt").exists());
    assert!(!dir.path().join("fromfile_observed.txt").exists());
    let meta = std::fs::read_to_string(dir.path().join("fromcli_meta.txt")).unwrap();
    assert!(meta.contains("m=20"), "{meta}");

    let out = run(&["generate", "--config", "gen.conf", "--set-bogus"], dir.path());
    assert_code(&out, 1);
    std::fs::write(dir.path().join("bad.conf"), "m=20\nbogus=1\n").unwrap();
    let out = run(&["generate", "--config", "bad.conf"], dir.path());
    assert_code(&out, 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn sweep_summary_matches_raw_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "sweep",
            "oversampling",
            "--m",
            "40",
            "--n",
            "40",
            "--rank",
            "2",
            "--seeds",
            "4",
            "--rho",
            "1.5",
            "--rho-max",
            "2.5",
            "--rho-step",
            "0.5",
            "--t-max",
            "50",
            "--out",
            "sw",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    assert!(dir.path().join("sw/oversampling.svg").exists());

    let raw = std::fs::read_to_string(dir.path().join("sw/oversampling_raw.csv")).unwrap();
    let mut lines = raw.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (rho_c, seed_c, rel_c) = (col("rho"), col("seed"), col("rel_rmse"));
    assert!(header.contains(&"m") && header.contains(&"rank"), "{header:?}");

    let mut by_rho: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    let mut seeds_seen = std::collections::BTreeSet::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        seeds_seen.insert(f[seed_c].to_string());
        by_rho
            .entry(f[rho_c].to_string())
            .or_default()
            .push(f[rel_c].parse().unwrap());
    }
    assert_eq!(seeds_seen.len(), 4, "every row carries its seed");

    let summary = std::fs::read_to_string(dir.path().join("sw/oversampling_summary.csv")).unwrap();
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let mut rels = by_rho.remove(f[0]).expect("summary rho present in raw");
        rels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = 0.5 * (rels[1] + rels[2]);
        let fails = rels.iter().filter(|&&x| !(x < 1e-4)).count() as f64 / rels.len() as f64;
        assert_eq!(f[1].parse::<f64>().unwrap(), med, "median mismatch at rho {}", f[0]);
        assert_eq!(f[2].parse::<f64>().unwrap(), fails, "failure mismatch at rho {}", f[0]);
    }
    assert!(by_rho.is_empty(), "raw rho values missing from summary");
}

#[test]
fn csv_uses_scientific_notation_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &run(
            &["generate", "--m", "30", "--n", "30", "--rank", "1", "--rho", "6", "--seed", "2"],
            dir.path(),
        ),
        0,
    );
    assert_code(
        &run(
            &["complete", "gen_observed.txt", "--rank", "1"],
            dir.path(),
        ),
        0,
    );
    let trace = std::fs::read_to_string(dir.path().join("gen_observed_trace.csv")).unwrap();
    let last = trace.lines().last().unwrap();
    let rmse = last.split(',').nth(1).unwrap();
    assert!(
        rmse.contains('e') && rmse.parse::<f64>().unwrap() < 1e-3,
        "converged rmse uses scientific notation: {last}"
    );
}

#[test]
fn verify_subcommand_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], dir.path());
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches(": ok").count(), 7, "{stdout}");
}
