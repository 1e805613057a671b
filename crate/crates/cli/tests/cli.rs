use std::path::Path;
use std::process::{Command, Output};

fn atmplace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atmplace"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_prints_summary_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--seed", "1", "--n", "6", "--iface", "x32", "--ws", "0.40", "--out", "a"];
    let o = atmplace(dir.path(), &args);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(stdout(&o).contains("6 dies"), "{}", stdout(&o));
    let mut again = args;
    again[10] = "b";
    assert_eq!(code(&atmplace(dir.path(), &again)), 0);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("design.json")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn bad_input_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = atmplace(dir.path(), &["gen", "--n", "6", "--ws", "0.9"]);
    assert_eq!(code(&o), 2, "{o:?}");
    assert_eq!(code(&atmplace(dir.path(), &["gen"])), 2);
    assert_eq!(code(&atmplace(dir.path(), &["frobnicate"])), 2);
    // a missing file is a runtime failure, not a usage error
    let o = atmplace(dir.path(), &["audit", "--design", "nope.json", "--placement", "nope.json"]);
    assert_eq!(code(&o), 1, "{o:?}");
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = atmplace(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    ok(&["gen", "--seed", "3", "--n", "4", "--iface", "x16", "--ws", "0.5", "--out", "."]);

    let o = atmplace(d, &["dataset", "--design", "design.json", "--count", "1", "--out", "data"]);
    assert_eq!(code(&o), 2);
    ok(&["dataset", "--design", "design.json", "--count", "4", "--seed", "2", "--out", "data"]);
    assert_eq!(json(&d.join("data/manifest.json"))["count"], 4);

    std::fs::write(d.join("fit.json"), r#"{"adam_iterations": 60, "lm_iterations": 10}"#).unwrap();
    let fit = [
        "fit", "--design", "design.json", "--dataset", "data", "--n-train", "3", "--reps", "5", "--config", "fit.json",
        "--out", "models",
    ];
    ok(&fit);
    let report = json(&d.join("models/fit_report.json"));
    assert_eq!(report["schema_version"], 1);
    for model in ["thermal", "warpage"] {
        assert!(report[model]["test_pearson"].is_number(), "{model}");
    }
    assert!(report["speedup"]["combined_speedup"].as_f64().unwrap() > 0.0);
    assert!(d.join("models/thermal_params.json").exists() && d.join("models/speedup.json").exists());

    let o = atmplace(d, &["place", "--design", "design.json", "--mode", "tm", "--out", "tm"]);
    assert_eq!(code(&o), 2, "thermo-mechanical mode without models");
    for (mode, out) in [("wl", "wl"), ("tm", "tm")] {
        ok(&["place", "--design", "design.json", "--params", "models", "--mode", mode, "--seed", "1", "--out", out]);
        let text = ok(&["audit", "--design", "design.json", "--placement", &format!("{out}/placement.json"), "--out", out]);
        assert!(text.starts_with("legal true"), "{text}");
        let (placed, audited) = (json(&d.join(out).join("report.json")), json(&d.join(out).join("audit.json")));
        assert_eq!(placed["twl"], audited["twl"]);
        assert_eq!(placed["t_max"], audited["t_max"]);
    }

    ok(&[
        "pareto", "--design", "design.json", "--params", "models", "--grid-t", "1", "--grid-w", "0.1", "--out", "sweep",
    ]);
    let csv = std::fs::read_to_string(d.join("sweep/pareto.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(d.join("sweep/pareto.svg").exists());

    ok(&["tune", "--design", "design.json", "--budget", "1", "--threads", "1", "--out", "tune"]);
    assert_eq!(json(&d.join("tune/tune.json"))["best"], 0);
    let o = atmplace(d, &["tune", "--design", "design.json", "--budget", "0", "--out", "tune"]);
    assert_eq!(code(&o), 2);
}
