use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use insider_core::donsker::{bp_cond_density, InsiderSpec};
use insider_core::quadrature::QuadratureConfig;

fn insider(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insider"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn gaussian_density_at_time_zero_is_standard_normal_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let out = insider(&["density", "--seed", "1", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("o/density.csv"));
    let mut mass = std::collections::BTreeMap::<String, f64>::new();
    for r in &table {
        let (t, y, m): (f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        if t == 0.0 {
            assert!((m - normal_pdf(y)).abs() < 1e-15, "y={y}");
        }
        *mass.entry(r[0].clone()).or_default() += m * 0.04;
    }
    assert_eq!(mass.len(), 3);
    for (t, total) in mass {
        assert!((0.999..=1.001).contains(&total), "t={t}: {total}");
    }
}

#[test]
fn brownian_poisson_rows_match_direct_evaluation_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bp.toml",
        "schema_version = 1\nseed = 2\n[insider]\nkind = \"brownian_poisson\"\nlambda = 1.5\n\
         [density]\ntimes = [0.0, 0.25]\ny_points = 21\nbrownian = 0.3\njump = -0.2\n",
    );
    let out = insider(&["density", "--config", "bp.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let spec = InsiderSpec::brownian_poisson(1.0, 1.5, 1.0).unwrap();
    let quad = QuadratureConfig::default();
    let table = rows(&dir.path().join("o/density.csv"));
    assert_eq!(table.len(), 42);
    for r in table {
        let (t, y): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let (b_t, n_t) = if t == 0.0 { (0.0, 0.0) } else { (0.3, -0.2) };
        let m = bp_cond_density(&spec, t, y, b_t, n_t, &quad).unwrap();
        assert_eq!(r[2].parse::<f64>().unwrap().to_bits(), m.to_bits(), "t={t} y={y}");
    }
}

#[test]
fn identical_arms_give_zero_advantage() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", "schema_version = 1\nseed = 4\nsteps = 256\n[simulate]\ninsider_policy = \"merton\"\n");
    let out = insider(&["simulate", "--config", "m.toml", "--paths", "300", "--out", "o"], dir.path());
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/simulate_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["advantage"].as_f64().unwrap(), 0.0);
    assert_eq!(summary["n_paths"].as_u64().unwrap(), 300);
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(insider(&["foc", "--out", "o"], p).status.code(), Some(2), "missing seed");

    write(p, "typo.toml", "schema_version = 1\nseed = 1\n[market]\nsigma = 0.3\n");
    assert_eq!(insider(&["foc", "--config", "typo.toml"], p).status.code(), Some(2));

    write(p, "v2.toml", "schema_version = 2\nseed = 1\n");
    assert_eq!(insider(&["foc", "--config", "v2.toml"], p).status.code(), Some(2));

    write(p, "psi.toml", "schema_version = 1\nseed = 1\n[foc]\njumps = [{ gamma = 0.3, nu = 0.1, psi = -1.5 }]\n");
    assert_eq!(insider(&["foc", "--config", "psi.toml", "--out", "o"], p).status.code(), Some(3));

    write(p, "ok.toml", "schema_version = 1\nseed = 1\n");
    assert_eq!(insider(&["foc", "--config", "ok.toml", "--out", "o"], p).status.code(), Some(0));
}

#[test]
fn verify_reports_degenerate_variance_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "v.toml",
        "schema_version = 1\nseed = 3\n[verify]\npaths = 400\ndensity_times = [0.99999999999]\n",
    );
    let out = insider(&["verify", "--config", "v.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(false));
    let entries = report["entries"].as_array().unwrap();
    let failed: Vec<&serde_json::Value> = entries.iter().filter(|e| e["passed"] == false).collect();
    assert_eq!(failed.len(), 1, "{failed:?}");
    assert!(failed[0]["detail"].as_str().unwrap().contains("DegenerateVariance"));
    for e in entries {
        assert!(e["name"].is_string() && e["threshold"].is_number());
    }
}

#[test]
fn every_subcommand_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "c.toml", "schema_version = 1\nseed = 8\nsteps = 256\n[verify]\npaths = 200\n");
    for cmd in ["density", "policy", "simulate", "foc", "solve-c", "verify"] {
        for out in ["a", "b"] {
            let o = insider(&[cmd, "--config", "c.toml", "--paths", "200", "--out", out], p);
            assert!(o.status.code().is_some_and(|c| c <= 1), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let names: Vec<_> = fs::read_dir(p.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 9);
    for name in names {
        assert_eq!(fs::read(p.join("a").join(&name)).unwrap(), fs::read(p.join("b").join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "c.toml", "schema_version = 1\nseed = 8\nsteps = 64\n");
    insider(&["simulate", "--config", "c.toml", "--paths", "50", "--out", "a"], p);
    insider(&["simulate", "--config", "c.toml", "--paths", "50", "--seed", "9", "--out", "b"], p);
    insider(&["simulate", "--config", "c.toml", "--paths", "50", "--seed", "8", "--out", "c"], p);
    let read = |d: &str| fs::read(p.join(d).join("simulate.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));
}
