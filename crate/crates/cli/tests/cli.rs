use std::fs;
use std::path::Path;

use swipt_cli::{run, EXIT_CONFIG, EXIT_FAILURE_BUDGET, EXIT_OK};

fn swipt(args: &[&str]) -> i32 {
    run(std::iter::once("swipt").chain(args.iter().copied()))
}

/// CSV text with the `wall_ms` column removed.
fn without_wall(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let w = header.iter().position(|h| *h == "wall_ms");
    let keep = |line: &str| -> String {
        line.split(',')
            .enumerate()
            .filter(|(i, _)| Some(*i) != w)
            .map(|(_, c)| c)
            .collect::<Vec<_>>()
            .join(",")
    };
    std::iter::once(keep(&header.join(","))).chain(lines.map(keep)).collect::<Vec<_>>().join("\n")
}

#[test]
fn replay_regenerates_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let code = swipt(&[
        "sweep", "--preset", "small", "--vary", "eta=-15:-5:5dB", "--methods", "ldi,nonrobust",
        "--instances", "2", "--seed", "11", "--out", a.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let m = a.join("manifest.toml");
    assert_eq!(swipt(&["replay", m.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "2"]), EXIT_OK);
    let (x, y) = (without_wall(&a.join("sweep.csv")), without_wall(&b.join("sweep.csv")));
    assert_eq!(x.lines().count(), 1 + 3 * 2 * 2);
    assert_eq!(x, y);
}

#[test]
fn config_file_with_units_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(
        &cfg,
        r#"
n_tx = 4
n_er = 1
eve_antennas = 2
n_eve = 1
sigma_d_sq = 1.0
sigma_e_sq = 1.0
p_secrecy = 0.1
q_eh = 0.1
rate_target = 1.0
eh_targets = "-10 dB"
eh_efficiency = 1.0
power_budget = "60 dB"
rng_seed = 5
"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let code = swipt(&[
        "solve-power", "--config", cfg.to_str().unwrap(), "--method", "bti", "--solver-log",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let csv = fs::read_to_string(out.join("power.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..5], ["5", "0", "bti", "1", "0.1"]);
    assert!(out.join("logs/p0_i0_bti.csv").exists());
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("power_budget = 1000000.0"), "stored linear");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(swipt(&["solve-power", "--unknown-flag"]), EXIT_CONFIG);
    assert_eq!(swipt(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(swipt(&["solve-power", "--preset", "fig9", "--out", out]), EXIT_CONFIG);
    assert_eq!(swipt(&["solve-power", "--preset", "small", "--methods", "xyz", "--out", out]), EXIT_CONFIG);
    assert_eq!(swipt(&["sweep", "--preset", "small", "--vary", "R=1:0:1", "--out", out]), EXIT_CONFIG);
    assert_eq!(swipt(&["solve-power", "--preset", "small", "--set", "p=2", "--out", out]), EXIT_CONFIG);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "n_tx = \"four\"\n").unwrap();
    assert_eq!(swipt(&["solve-power", "--config", bad.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
    assert_eq!(swipt(&["solve-power", "--config", "/nonexistent.toml", "--out", out]), EXIT_CONFIG);
}

#[test]
fn failure_budget_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    // Three iterations cannot reach optimality.
    let manifest = {
        let code = swipt(&[
            "solve-power", "--preset", "small", "--methods", "ldi", "--instances", "2",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        fs::read_to_string(out.join("manifest.toml")).unwrap()
    };
    let starved = manifest.replace("max_iter = 200", "max_iter = 3");
    assert_ne!(starved, manifest);
    let m = dir.path().join("starved.toml");
    fs::write(&m, starved).unwrap();
    // Replay has no budget; the flag is on the experiment subcommands.
    assert_eq!(swipt(&["replay", m.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK);
    let csv = fs::read_to_string(out.join("power.csv")).unwrap();
    assert!(csv.contains("max_iter"));
    let code = swipt(&[
        "solve-power", "--preset", "small", "--methods", "ldi", "--tol", "1e-30", "--max-failures", "0",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FAILURE_BUDGET);
}

#[test]
fn validate_and_feasibility_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = out.to_str().unwrap();
    assert_eq!(swipt(&["validate", "--preset", "small", "--methods", "ldi,mrt", "--trials", "300", "--out", o]), EXIT_OK);
    let csv = fs::read_to_string(out.join("validate.csv")).unwrap();
    assert!(csv.starts_with("seed,instance,method,R,eta,p,q,status,power,rank_ratio,iters,trials,secrecy_outage"));
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(swipt(&["feasibility", "--preset", "small", "--methods", "all", "--instances", "2", "--out", o]), EXIT_OK);
    let csv = fs::read_to_string(out.join("feasibility.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,instances,feasible,rate,solver_failures");
    assert_eq!(csv.lines().count(), 6);
}
