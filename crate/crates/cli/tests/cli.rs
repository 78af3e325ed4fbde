use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("subsel-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_csv(dir: &Path, name: &str, rows: &[Vec<f64>]) -> PathBuf {
    let body: String = rows
        .iter()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn subsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subsel"))
        .args(args)
        .env_remove("SUBSEL_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

// deterministic pseudo-random coordinates without pulling in an RNG
fn lcg_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    (0..n).map(|_| (0..d).map(|_| next()).collect()).collect()
}

#[test]
fn rank_k_data_is_covered_exactly() {
    let dir = workdir("rank");
    // points inside the span of e1, e2 in R^5
    let rows: Vec<Vec<f64>> = lcg_rows(30, 2, 3)
        .into_iter()
        .map(|r| vec![r[0], r[1], 0.0, 0.0, 0.0])
        .collect();
    let input = write_csv(&dir, "rank.csv", &rows);
    for algo in ["mcmc-one-pass", "exact-adaptive", "squared-length"] {
        let out = subsel(&[
            "--input", input.to_str().unwrap(), "--algo", algo, "--k", "2", "--t", "4",
            "--m", "10", "--reps", "3", "--seed", "5",
        ]);
        let report = json(&out);
        assert_eq!(report["exact_cover"], Value::Bool(true), "{algo}");
        assert_eq!(report["final_err"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn reports_are_deterministic_modulo_timing() {
    let dir = workdir("det");
    let input = write_csv(&dir, "det.csv", &lcg_rows(40, 6, 9));
    let args = [
        "--input", input.to_str().unwrap(), "--k", "2", "--p", "1.5", "--delta", "0.5", "--t",
        "6", "--seed", "17",
    ];
    let mut a = json(&subsel(&args));
    let mut b = json(&subsel(&args));
    a.as_object_mut().unwrap().remove("timings");
    b.as_object_mut().unwrap().remove("timings");
    assert_eq!(a, b);
    assert_eq!(a["seed"], 17);
    assert_eq!(a["passes"]["selection"], 1);
    assert_eq!(a["passes"]["evaluation"], 1);
    let errs: Vec<f64> = a["per_repetition_err"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let chosen = a["final_err"].as_f64().unwrap();
    assert!(errs.iter().all(|&e| chosen <= e));
    assert_eq!(errs[a["selected_repetition"].as_u64().unwrap() as usize], chosen);
}

#[test]
fn seed_env_var_and_flag_precedence() {
    let dir = workdir("seed");
    let input = write_csv(&dir, "seed.csv", &lcg_rows(20, 3, 1));
    let base = [
        "--input", input.to_str().unwrap(), "--k", "1", "--t", "2", "--m", "3",
    ];
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_subsel"));
        cmd.args(base).args(extra);
        match env {
            Some(v) => cmd.env("SUBSEL_SEED", v),
            None => cmd.env_remove("SUBSEL_SEED"),
        };
        json(&cmd.output().unwrap())
    };
    assert_eq!(run(Some("42"), &[])["seed"], 42);
    assert_eq!(run(Some("42"), &["--seed", "7"])["seed"], 7);
    assert_eq!(run(None, &[])["seed"], 0);
}

#[test]
fn exact_adaptive_spends_l_selection_passes() {
    let dir = workdir("exact");
    let input = write_csv(&dir, "exact.csv", &lcg_rows(25, 5, 4));
    let report = json(&subsel(&[
        "--input", input.to_str().unwrap(), "--algo", "exact-adaptive", "--k", "3", "--t", "2",
        "--m", "1", "--reps", "4",
    ]));
    assert_eq!(report["passes"]["selection"], 3);
    assert_eq!(report["passes"]["evaluation"], 1);
}

#[test]
fn svd_oracle_bound_holds_on_small_instance() {
    let dir = workdir("svd");
    let input = write_csv(&dir, "svd.csv", &lcg_rows(40, 8, 12));
    let report = json(&subsel(&[
        "--input", input.to_str().unwrap(), "--k", "2", "--p", "2", "--delta", "0.5", "--t", "20",
        "--oracle", "svd", "--seed", "3",
    ]));
    let oracle = &report["oracle"];
    assert_eq!(oracle["kind"], "svd");
    assert_eq!(oracle["bound_satisfied"], true);
    assert!(report["final_err_root"].as_f64().unwrap() <= oracle["additive_bound_root"].as_f64().unwrap());
}

#[test]
fn csv_report_and_output_file() {
    let dir = workdir("csvout");
    let input = write_csv(&dir, "in.csv", &lcg_rows(15, 4, 2));
    let out_path = dir.join("report.csv");
    let out = subsel(&[
        "--input", input.to_str().unwrap(), "--k", "2", "--p", "1", "--delta", "0.5", "--t", "3",
        "--report", "csv", "--out", out_path.to_str().unwrap(), "--oracle", "bruteforce",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let values: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(header.len(), values.len());
    let col = |name: &str| values[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("algorithm"), "mcmc-one-pass");
    assert_eq!(col("oracle"), "bruteforce");
    assert_eq!(col("selection_passes"), "1");
}

#[test]
fn header_flag_skips_first_line() {
    let dir = workdir("header");
    let path = dir.join("h.csv");
    std::fs::write(&path, "x,y,z\n1,0,0\n0,1,0\n0,0,1\n").unwrap();
    let report = json(&subsel(&[
        "--input", path.to_str().unwrap(), "--header", "--k", "2", "--t", "2", "--m", "4",
    ]));
    assert_eq!(report["n"], 3);
    let out = subsel(&["--input", path.to_str().unwrap(), "--k", "2", "--t", "2", "--m", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = workdir("codes");
    let ragged = dir.join("ragged.csv");
    std::fs::write(&ragged, "1,0\n0,2,3\n").unwrap();
    let out = subsel(&["--input", ragged.to_str().unwrap(), "--k", "1", "--t", "1", "--m", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    let big = write_csv(&dir, "big.csv", &lcg_rows(30, 3, 8));
    let out = subsel(&[
        "--input", big.to_str().unwrap(), "--k", "2", "--t", "2", "--m", "2", "--oracle",
        "bruteforce",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = subsel(&["--input", big.to_str().unwrap(), "--k", "2", "--delta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = subsel(&["--input", big.to_str().unwrap(), "--k", "2", "--algo", "volume", "--t", "1", "--m", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.join("missing.csv");
    let out = subsel(&["--input", missing.to_str().unwrap(), "--k", "1", "--t", "1", "--m", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
