use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bmix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmix")).current_dir(dir).args(args).output().expect("bmix runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

/// Drops the trailing `wall_ms` column.
fn without_wall(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

#[test]
fn validate_reports_intro_weights() {
    let dir = tempfile::tempdir().unwrap();
    let o = bmix(dir.path(), &["validate", "--preset", "intro3", "--seed", "1", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("p_min = 1/3"), "{out}");
    assert!(out.contains("p_max = 2/3"), "{out}");
    assert!(dir.path().join("o/validate.json").exists());
    assert!(dir.path().join("o/manifest-validate.json").exists());
}

#[test]
fn failed_assumption_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bmix(dir.path(), &["validate", "--preset", "identity", "--seed", "1", "--out", "o"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = bmix(dir.path(), &["sweep-mix", "--preset", "doubling"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let cfg = write_config(dir.path(), r#"{"map": "doubling", "seed": 1, "epsilons": [0.5]}"#);
    assert_eq!(bmix(dir.path(), &["sweep-mix", "--config", &cfg]).status.code(), Some(2));

    let cfg = write_config(dir.path(), r#"{"map": "doubling", "seed": 1, "deltas": [0.0]}"#);
    assert_eq!(bmix(dir.path(), &["sweep-mix", "--config", &cfg]).status.code(), Some(2));

    let o = bmix(dir.path(), &["spectral", "--preset", "intro3", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn doubling_mixing_sweep_has_unit_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"map": "doubling", "seed": 5, "epsilons": {"octaves": [5, 12]}, "out": "o"}"#);
    let o = bmix(dir.path(), &["sweep-mix", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("o/sweep_mix.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,delta,t_mix,t_dis,method,slope_fit_running,theory_lower,theory_upper,wall_ms"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    let slope: f64 = rows.last().unwrap()[5].parse().unwrap();
    assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
    assert!(rows.iter().all(|r| r[4] == "density_worst_case"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"map": "doubling", "seed": 9, "epsilons": [0.0625, 0.03125], "deltas": [0.25, 0.5],
            "mc": {"particles": 20000, "steps": 8}, "pcmix_trials": 3}"#,
    );
    for out in ["a", "b"] {
        for cmd in ["sweep-dis", "sweep-mix", "mc-crosscheck", "verify-pcmix", "verify-duality"] {
            let o = bmix(dir.path(), &[cmd, "--config", &cfg, "--out", out]);
            assert!(o.status.code().is_some_and(|c| c <= 1), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for f in ["mc.csv", "pcmix.csv", "duality.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    for f in ["sweep_dis.csv", "sweep_mix.csv"] {
        let a = fs::read_to_string(dir.path().join("a").join(f)).unwrap();
        let b = fs::read_to_string(dir.path().join("b").join(f)).unwrap();
        assert_eq!(without_wall(&a), without_wall(&b), "{f}");
    }
    let hash = |out: &str| {
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(out).join("manifest-sweep-dis.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("a"), hash("b"));
    let leftovers: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().contains(".tmp")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn eigen_certificate_passes_for_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"map": "doubling", "seed": 1, "epsilons": [0.02], "out": "o"}"#);
    let o = bmix(dir.path(), &["verify-eigen", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let cert: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/eigen.json")).unwrap()).unwrap();
    assert_eq!(cert["samples"][0]["pass"], true);
}

#[test]
fn empty_report_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = bmix(dir.path(), &["report", "--out", "nothing"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));
    let text = fs::read_to_string(dir.path().join("nothing/report.txt")).unwrap();
    assert!(text.contains("InsufficientData"));
}

#[test]
fn report_juxtaposes_measurements_and_theory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"map": "doubling", "seed": 2, "epsilons": {"octaves": [4, 8]}, "out": "o"}"#);
    for cmd in ["sweep-mix", "sweep-dis", "verify-duality"] {
        assert_eq!(bmix(dir.path(), &[cmd, "--config", &cfg]).status.code(), Some(0), "{cmd}");
    }
    let o = bmix(dir.path(), &["report", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("o/report.txt")).unwrap();
    assert!(text.contains("lower ≤ t ≤ upper"));
    assert!(text.contains("duality at δ = 0.5"));
    assert!(text.contains("[4] mixing-time scaling"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    let sweeps = report["sweeps"].as_array().unwrap();
    assert_eq!(sweeps.len(), 2);
    for s in sweeps {
        assert!(s["rows"].as_array().unwrap().iter().all(|r| r["inside"] == true));
    }
    let plot = fs::read_to_string(dir.path().join("o/plot_tmix_doubling_delta0.5.txt")).unwrap();
    let data: Vec<_> = plot.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 5);
    assert!(data.iter().all(|l| l.split_whitespace().count() == 2));
}
