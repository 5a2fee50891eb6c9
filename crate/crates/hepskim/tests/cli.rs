mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{build_corpus, config_json, plain};

fn hepskim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hepskim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.evt");
    let o = hepskim(&[
        "gen",
        "--seed",
        "42",
        "--events",
        "10000",
        "--kind",
        "mc",
        "--out",
        s(&f),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = hepskim(&["inspect", s(&f)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("10000 events"), "{}", stdout(&o));
    assert!(stdout(&o).contains("compression: none"));
}

#[test]
fn empty_file_inspects_as_zero_events() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("e.evt");
    assert!(hepskim(&["gen", "--events", "0", "--out", s(&f)]).status.success());
    let o = hepskim(&["inspect", s(&f)]);
    assert!(stdout(&o).contains("0 events, 0 blocks"), "{}", stdout(&o));
}

#[test]
fn usage_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = hepskim(&["gen", "--events", "-1", "--out", "x.evt"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1, "{}", stderr(&o));

    let blocker = dir.path().join("file");
    fs::write(&blocker, b"").unwrap();
    let o = hepskim(&["gen", "--events", "10", "--out", s(&blocker.join("sub.evt"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    assert_eq!(
        hepskim(&["inspect", s(&dir.path().join("missing.evt"))]).status.code(),
        Some(3)
    );
    assert_eq!(hepskim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hepskim(&["--help"]).status.code(), Some(0));
}

#[test]
fn truncated_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t.evt");
    assert!(
        hepskim(&["gen", "--events", "5000", "--block-events", "1000", "--out", s(&f)])
            .status
            .success()
    );
    let bytes = fs::read(&f).unwrap();
    fs::write(&f, &bytes[..bytes.len() - 100]).unwrap();
    let o = hepskim(&["inspect", s(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("truncated block"), "{}", stderr(&o));
}

#[test]
fn convert_toggles_compression() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("a.evt");
    let z = dir.path().join("z.evt");
    assert!(hepskim(&["gen", "--events", "3000", "--out", s(&f)]).status.success());
    let o = hepskim(&["convert", s(&f), s(&z)]);
    assert!(stdout(&o).contains("compression deflate"), "{}", stdout(&o));
    assert!(fs::metadata(&z).unwrap().len() < fs::metadata(&f).unwrap().len());
    assert!(stdout(&hepskim(&["inspect", s(&z)])).contains("3000 events"));
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let cfg = dir.join("analysis.json");
    fs::write(&cfg, config_json(&dir.join("corpus"), extra)).unwrap();
    cfg
}

#[test]
fn skim_with_false_cut_keeps_nothing() {
    let dir = tempfile::tempdir().unwrap();
    build_corpus(&dir.path().join("corpus"), 10_000, 2, plain());
    let cfg = write_config(dir.path(), r#", "selection": "false""#);
    let out = dir.path().join("out");
    let o = hepskim(&["skim", "--config", s(&cfg), "--dataset", "signal", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("10000 → 0 rows"), "{}", stdout(&o));
    assert!(stdout(&hepskim(&["inspect", s(&out.join("signal.ntu"))])).contains("0 rows"));
}

#[test]
fn sum_weights_rejects_data() {
    let dir = tempfile::tempdir().unwrap();
    build_corpus(&dir.path().join("corpus"), 1000, 1, plain());
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let o = hepskim(&[
        "sum-weights",
        "--config",
        s(&cfg),
        "--dataset",
        "data",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("data"), "{}", stderr(&o));
    let o = hepskim(&["sum-weights", "--config", s(&cfg), "--out-dir", s(&out)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("signal: 1000.0"), "{}", stdout(&o));
    let o = hepskim(&["skim", "--config", s(&cfg), "--dataset", "nope", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unmatched_glob_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = hepskim(&["skim", "--config", s(&cfg), "--out-dir", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn plot_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    build_corpus(&dir.path().join("corpus"), 5000, 3, plain());
    let cfg = write_config(dir.path(), "");
    let mut outputs = Vec::new();
    for workers in ["1", "3", "3"] {
        let out = dir.path().join(format!("out-{}", outputs.len()));
        let o = hepskim(&[
            "plot-data",
            "--config",
            s(&cfg),
            "--workers",
            workers,
            "--out-dir",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let files = [
            "plot.json",
            "plot.csv",
            "histograms.json",
            "signal.ntu",
            "ttbar.ntu",
            "data.ntu",
        ];
        outputs.push(files.map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let plot: serde_json::Value = serde_json::from_slice(&outputs[0][0]).unwrap();
    assert_eq!(plot["histograms"][0]["components"][0]["label"], "signal");
}
