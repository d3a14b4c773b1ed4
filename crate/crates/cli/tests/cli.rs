use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn dryfric(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dryfric"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

/// Data rows of a CSV written by the tool, split into fields.
fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# dryfric ") && comment.contains("config_sha256="), "{comment}");
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn col(rows: &[Vec<String>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMALL: &str = r#"{"params": {"mu_s": 1.0, "mu_d": 0.25, "delta": 0.5}, "p": [4, 8], "n_excursions": 4000}"#;

#[test]
fn simulate_smoke_run_is_fast_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"params": {"mu_s": 1.0, "mu_d": 1.0, "delta": 0.5}, "n_excursions": 10000}"#,
    );
    let a = dir.path().join("a");
    let start = Instant::now();
    let out = dryfric(&a, &["simulate", "--config", &cfg, "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let (header, stats) = rows(&a.join("statistics.csv"));
    assert_eq!(header, "name,value,stderr,lo95,hi95,n");
    assert_eq!(stats.len(), 4);
    let s4 = &stats[3];
    let (lo, hi): (f64, f64) = (s4[3].parse().unwrap(), s4[4].parse().unwrap());
    assert!(lo <= 1.0 && 1.0 <= hi, "{s4:?}");

    let b = dir.path().join("b");
    let out = dryfric(&b, &["simulate", "--config", &cfg, "--seed", "7", "--threads", "2"]);
    assert!(out.status.success());
    for f in ["statistics.csv", "hist_stick.csv", "hist_slide.csv", "hist_excursion.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    assert!(dryfric(&c, &["simulate", "--config", &cfg, "--seed", "8"]).status.success());
    assert_ne!(std::fs::read(a.join("statistics.csv")).unwrap(), std::fs::read(c.join("statistics.csv")).unwrap());
}

#[test]
fn solve_reuses_one_factorization_per_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dryfric(dir.path(), &["solve", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, r) = rows(&dir.path().join("solve.csv"));
    assert_eq!(header, "statistic,delta,p,lambda,value");
    assert_eq!(r.len(), 8);
    assert!(col(&r, 4).iter().all(|v| v.is_finite() && *v > 0.0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve_report.json")).unwrap()).unwrap();
    for entry in report.as_array().unwrap() {
        assert_eq!(entry["report"]["factorizations"], 1);
        assert_eq!(entry["report"]["solves"], 4);
    }
}

#[test]
fn oversized_grid_is_refused_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dryfric(dir.path(), &["solve", "--config", &cfg, "--override", "memory_budget=100000"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("N_p = 1105") && err.contains("bytes"), "{err}");
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for extra in ["bogus=1", "params.mu_d=2.0", "p=[]", "lambda=-1"] {
        let out = dryfric(dir.path(), &["solve", "--config", &cfg, "--override", extra]);
        assert_eq!(out.status.code(), Some(2), "{extra}");
    }
    let out = dryfric(dir.path(), &["solve", "--config", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dryfric(dir.path(), &["solve"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dryfric(dir.path(), &["kappa", "--config", &cfg, "--override", "p=[3]"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn durations_emit_decreasing_transforms_and_zero_slide_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dryfric(dir.path(), &["durations", "--config", &cfg, "--override", "mc=true"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, r) = rows(&dir.path().join("laplace.csv"));
    assert_eq!(header, "lambda,F_stick,F_slid_G,F_slid_w");
    for k in 1..=2 {
        let c = col(&r, k);
        assert!(c.windows(2).all(|w| w[1] < w[0]), "column {k}");
        assert!(c.iter().all(|x| *x > 0.0 && *x < 1.0));
    }
    // `1 - lambda w` cancels to round-off once the transform is below 1e-16
    let c = col(&r, 3);
    assert!(c.windows(2).all(|w| w[1] <= w[0]));
    assert!(c.iter().all(|x| *x >= 0.0 && *x < 1.0));
    let (g, w) = (col(&r, 2), col(&r, 3));
    assert!(g.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-8));
    let (_, f0) = rows(&dir.path().join("durations_f0.csv"));
    let get = |m: &str, ph: &str| -> f64 {
        f0.iter().find(|r| r[0] == m && r[1] == ph).unwrap()[2].parse().unwrap()
    };
    let stick = get("kolmogorov", "stick");
    assert!((stick - get("kolmogorov_limit", "stick")).abs() < 1e-3 * stick);
    assert!(get("kolmogorov", "slide").abs() < 0.05 * stick);
    assert!(f0.iter().any(|r| r[0] == "mc_histogram"));
}

#[test]
fn psd_column_is_even_and_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dryfric(dir.path(), &["psd", "--config", &cfg, "--override", "omega_grid={\"min\":-4,\"max\":4,\"count\":16}"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, r) = rows(&dir.path().join("psd.csv"));
    assert_eq!(header, "omega,S_v");
    let s = col(&r, 1);
    assert_eq!(s.len(), 16);
    for k in 0..16 {
        assert!(s[k] >= -1e-8);
        assert!((s[k] - s[15 - k]).abs() < 1e-8 * s[k].max(1.0));
    }
}

#[test]
fn extrapolate_fills_targets_and_fails_with_exit_4_when_stuck() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("k,l,value\n");
    for l in 1..=4 {
        for k in 1..=6 {
            if (k, l) != (6, 4) {
                csv += &format!("{k},{l},{}\n", 0.2 - 0.1 * 2f64.powi(-k) - 0.05 * 2f64.powi(-l));
            }
        }
    }
    let input = dir.path().join("grid.csv");
    std::fs::write(&input, csv).unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"params": {{"mu_s": 1.0, "mu_d": 0.25, "delta": 0.5}}, "extrapolate": {{"input": "{}", "targets": [[6, 4]]}}}}"#,
            input.display()
        ),
    );
    let out = dryfric(dir.path(), &["extrapolate", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, r) = rows(&dir.path().join("extrapolated.csv"));
    let cell = r.iter().find(|x| x[0] == "6" && x[1] == "4").unwrap();
    assert_eq!(cell[5], "extrapolated");
    let v: f64 = cell[4].parse().unwrap();
    assert!((v - (0.2 - 0.1 / 64.0 - 0.05 / 16.0)).abs() < 1e-12);
    assert_eq!(r.iter().filter(|x| x[5] == "computed").count(), 23);

    let out = dryfric(dir.path(), &["extrapolate", "--config", &cfg, "--override", "extrapolate.targets=[[9,9]]"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn kappa_reports_one_row_per_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dryfric(dir.path(), &["kappa", "--config", &cfg, "--override", "p=[4,8]"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, r) = rows(&dir.path().join("kappa.csv"));
    assert_eq!(header, "statistic,delta,p,kappa,value_half,value_p,value_double");
    assert_eq!(r.len(), 8);
    assert!(col(&r, 3).iter().all(|k| k.is_finite() && *k > 0.0 && *k < 3.0));
}
