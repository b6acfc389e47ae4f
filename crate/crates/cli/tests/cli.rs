use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_falselabel"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn synth(dir: &Path, name: &str, sep: &str) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap();
    let o = run(&["synth", "--sep", sep, "--dims", "4", "--count", "60", "--seed", "1", "--out", p]);
    assert!(o.status.success(), "{}", text(&o));
    p.to_string()
}

#[test]
fn version_and_help() {
    let o = run(&["version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("falselabel "));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let help = text(&run(&["trace", "--help"]));
    for flag in ["--data", "--size", "--weights", "--quotient", "--init"] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["synth", "--sep", "x"]).status.code(), Some(1));
    let o = run(&["run", "--config", "definitely/missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("definitely/missing.json"));
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "a,label\n1.0,1\nfoo,-1\n").unwrap();
    let o = run(&["trace", "--data", bad.to_str().unwrap(), "--size", "3"]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    let missing = tmp.path().join("none.csv");
    let o = run(&["trace", "--data", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn even_size_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), "d.csv", "3");
    let o = run(&["trace", "--data", &d, "--size", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("L must be odd"));
}

#[test]
fn synth_then_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "d.csv", "6");
    let cfg = tmp.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{
  "datasets": [{"name": "blobs", "path": "d.csv", "label_column": "label"}],
  "ensemble_sizes": [3, 5],
  "repetitions": 2,
  "baselines": ["nb", "bagging"],
  "schedule": {"quotient": 0.98},
  "output_dir": "out"
}"#,
    )
    .unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let out = tmp.path().join("out");
    for f in ["summary.csv", "diff_vs_best.csv", "friedman.csv", "runs.csv", "traces/blobs_D3_1.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let first = std::fs::read(out.join("summary.csv")).unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, std::fs::read(out.join("summary.csv")).unwrap());

    let ens = out.join("ensembles/blobs_D5_0.json");
    let d = tmp.path().join("d.csv");
    let o = run(&["decompose", "--ensemble", ens.to_str().unwrap(), "--data", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("mean_individual_loss,good_diversity,bad_diversity,ensemble_loss"));
    let v: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((v[3] - (v[0] - v[1] + v[2])).abs() < 1e-9);
}

#[test]
fn invalid_config_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"datasets": [], "repetitions": 1}"#).unwrap();
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    std::fs::write(&cfg, "{not json").unwrap();
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn trace_writes_monotone_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let d = synth(tmp.path(), "d.csv", "4");
    let out = tmp.path().join("t.csv");
    let ens = tmp.path().join("e.json");
    let o = run(&[
        "trace", "--data", &d, "--size", "5", "--seed", "3", "--quotient", "0.99", "--weights", "1,1,0.5,1",
        "--init", "copy_orig", "--out", out.to_str().unwrap(), "--save-ensemble", ens.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,temperature,best_energy,current_energy,ensemble_accuracy,mean_abs_correlation,elapsed_micros")
    );
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 917);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
        assert!(w[1][2] >= w[0][2]);
    }
    assert!(ens.exists());
    assert_eq!(run(&["trace", "--data", &d, "--weights", "1,2"]).status.code(), Some(1));
    assert_eq!(run(&["trace", "--data", &d, "--init", "sideways"]).status.code(), Some(1));
}
