use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[catqubit]
dim = 16
two_mode_dim = 11
drive = "adiabatic"

[[catqubit.rows]]
K_over_kappa = 1e5
K_hz = 600e3
"#;

fn catrep(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catrep"))
        .current_dir(dir)
        .env_remove("CATREP_CONFIG")
        .env("RUST_BACKTRACE", "0")
        .args(args)
        .output()
        .expect("spawn catrep")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = catrep(dir, args);
    assert!(
        out.status.success(),
        "catrep {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn gates_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "small.toml", SMALL);
    let cfg = cfg.to_str().unwrap();
    ok(tmp.path(), &["--config", cfg, "--out", "a", "gates"]);
    ok(tmp.path(), &["--config", cfg, "--out", "b", "gates"]);
    let a = read_dir_sorted(&tmp.path().join("a/gates"));
    let b = read_dir_sorted(&tmp.path().join("b/gates"));
    let names: Vec<_> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["gates.csv", "resolved_config.toml", "run.json"]);
    assert_eq!(a, b);
}

#[test]
fn three_kerr_rows_give_eighteen_gate_rows() {
    let tmp = TempDir::new().unwrap();
    let body = r#"
[catqubit]
dim = 16
two_mode_dim = 11
drive = "adiabatic"
rows = [
  { K_over_kappa = 1e3, K_hz = 25.86e3 },
  { K_over_kappa = 1e4, K_hz = 500e3 },
  { K_over_kappa = 1e5, K_hz = 600e3 },
]
"#;
    let cfg = config(tmp.path(), "rows.toml", body);
    ok(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--out", "o", "gates"],
    );
    let (header, rows) = csv_rows(&tmp.path().join("o/gates/gates.csv"));
    assert_eq!(
        header,
        [
            "operation",
            "K",
            "kappa",
            "duration_s",
            "duration_Kt",
            "fidelity"
        ]
    );
    assert_eq!(rows.len(), 18);
    for r in &rows {
        let f: f64 = r[5].parse().unwrap();
        assert!(f > 0.5 && f <= 1.0, "{r:?}");
    }
}

#[test]
fn missing_kerr_is_named_and_nothing_is_written() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "bad.toml",
        "[[catqubit.rows]]\nK_over_kappa = 1e4\n",
    );
    let out = catrep(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--out", "o", "gates"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("K_hz"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn out_of_range_value_is_rejected_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "bad.toml", "[link]\np = 1.5\n");
    let out = catrep(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--out", "o", "mc"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("link.p"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn default_three_level_chain_crossovers() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--out", "o", "crossover"]);
    let (header, rows) = csv_rows(&tmp.path().join("o/crossover/crossover.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let find = |m: &str| -> f64 {
        let r = rows
            .iter()
            .find(|r| {
                r[col("label")] == "K/kappa=1e5"
                    && r[col("n")] == "3"
                    && r[col("m")] == m
                    && r[col("storage")] == "fock"
            })
            .unwrap();
        r[col("crossover_km")].parse().unwrap()
    };
    for (m, want) in [("1", 387.0), ("200", 244.0)] {
        let l = find(m);
        assert!((l / want - 1.0).abs() < 0.15, "m={m}: {l} km");
    }
}

#[test]
fn monte_carlo_is_reproducible_and_seed_sensitive() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str, seed: &'static str| {
        ["--out", out, "--trials", "20000", "--seed", seed, "mc"]
    };
    ok(tmp.path(), &args("a", "11"));
    ok(tmp.path(), &args("b", "11"));
    ok(tmp.path(), &args("c", "12"));
    let read = |d: &str| fs::read(tmp.path().join(d).join("mc/mc.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let (header, rows) = csv_rows(&tmp.path().join("a/mc/mc.csv"));
    assert_eq!(rows.len(), 4);
    let rel = header.iter().position(|h| h == "rel_diff").unwrap();
    let n0: f64 = rows[0][rel].parse().unwrap();
    assert!(n0.abs() < 0.05, "n=0 relative difference {n0}");
    let resolved = fs::read_to_string(tmp.path().join("a/mc/resolved_config.toml")).unwrap();
    assert!(
        resolved.contains("seed = 11") && resolved.contains("trials = 20000"),
        "{resolved}"
    );
}

#[test]
fn zero_iterations_report_the_initial_guess() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "g.toml", "[grape]\ndim = 12\nsegments = 20\n");
    ok(
        tmp.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "o",
            "--format",
            "json",
            "grape",
            "--iters",
            "0",
        ],
    );
    let text = fs::read_to_string(tmp.path().join("o/grape/grape_summary.json")).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    for r in rows.as_array().unwrap() {
        assert_eq!(r["iterations"], 0);
        let (init, fin) = (
            r["initial_fidelity"].as_f64().unwrap(),
            r["lossless_fidelity"].as_f64().unwrap(),
        );
        assert!((init - fin).abs() < 1e-12, "{init} vs {fin}");
    }
    assert!(tmp.path().join("o/grape/drive_pulse.json").exists());
}

#[test]
fn figure6_has_direct_plus_six_curves() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["--out", "o", "figure6"]);
    let (header, rows) = csv_rows(&tmp.path().join("o/figure6/figure6.csv"));
    assert_eq!(header.len(), 8);
    assert_eq!(header[0], "L_km");
    assert!(rows.len() >= 10);
    let run: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("o/figure6/run.json")).unwrap()).unwrap();
    assert_eq!(run["command"], "figure6");
    assert_eq!(run["summary"]["curves"].as_array().unwrap().len(), 7);
}

#[test]
fn config_file_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "env.toml", "[chain]\nseed = 99\n");
    let out = Command::new(env!("CARGO_BIN_EXE_catrep"))
        .current_dir(tmp.path())
        .env("CATREP_CONFIG", &cfg)
        .arg("config")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("seed = 99"));
}
