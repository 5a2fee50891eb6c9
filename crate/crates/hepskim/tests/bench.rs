mod common;

use std::fs;

use common::{build_corpus, config_json, read_events};
use hepskim::analysis::{Analysis, AnalysisConfig};
use hepskim::bench::{
    compare_reports, generate, reports_csv, reports_json, run_benchmark, BenchError, BenchInputs, GeneratorSpec,
    MatrixCell,
};
use hepskim::engine::DatasetKind;
use hepskim::storage::{read_evt, WriteOptions};

fn spec(seed: u64, n: u64) -> GeneratorSpec {
    GeneratorSpec::new(seed, n, DatasetKind::Mc)
}

#[test]
fn empty_spec_writes_a_valid_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.evt");
    let s = generate(&spec(1, 0), &p, WriteOptions::default()).unwrap();
    assert_eq!((s.events, s.blocks), (0, 0));
    assert_eq!(read_evt(&p).unwrap().events().count(), 0);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.evt");
    let b = dir.path().join("b.evt");
    let c = dir.path().join("c.evt");
    let z = WriteOptions {
        compress: true,
        block_events: 777,
    };
    generate(&spec(42, 5000), &a, z).unwrap();
    generate(&spec(42, 5000), &b, z).unwrap();
    generate(&spec(43, 5000), &c, z).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn unit_weights_sum_to_the_event_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.evt");
    generate(&spec(42, 10_000), &p, WriteOptions::default()).unwrap();
    let sum: f64 = read_events(&[p]).iter().map(|e| e.weight).sum();
    assert_eq!(sum, 10_000.0);
}

#[test]
fn file_size_grows_linearly() {
    let dir = tempfile::tempdir().unwrap();
    let pts: Vec<(f64, f64)> = [1000u64, 2000, 4000, 8000, 16000]
        .iter()
        .map(|&n| {
            let p = dir.path().join(format!("{n}.evt"));
            (
                n as f64,
                generate(&spec(3, n), &p, WriteOptions::default()).unwrap().bytes as f64,
            )
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.99, "r2 = {r2}");
}

fn small_bench() -> (tempfile::TempDir, Analysis, BenchInputs) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    build_corpus(&corpus, 8000, 2, WriteOptions::default());
    let a = AnalysisConfig::from_json(&config_json(&corpus, r#", "selection": "met.pt > 50.0""#))
        .unwrap()
        .validate(None)
        .unwrap();
    let inputs = BenchInputs::prepare(&a, "signal", &dir.path().join("inputs")).unwrap();
    (dir, a, inputs)
}

#[test]
fn cached_cells_read_nothing_and_agree() {
    let (dir, a, inputs) = small_bench();
    let mut reports = Vec::new();
    for compressed in [false, true] {
        for cached in [false, true] {
            let cell = MatrixCell {
                cached,
                compressed,
                workers: 2,
            };
            let r = run_benchmark(&a, &inputs, cell, 3, dir.path()).unwrap();
            assert_eq!(r.repetitions.len(), 3);
            assert_eq!(r.first_pass.len(), 3);
            if cached {
                assert!(r.repetitions.iter().all(|p| p.storage_bytes == 0 && p.cache_hits > 0));
            } else {
                assert!(r.repetitions.iter().all(|p| p.storage_bytes > 0));
            }
            for p in r.repetitions.iter().chain(&r.first_pass) {
                let phases = p.read_compute() + p.write;
                assert!(
                    (phases - p.total).abs() <= 1e-9 * p.total.max(1e-9),
                    "{phases} vs {}",
                    p.total
                );
            }
            reports.push(r);
        }
    }
    let crc = reports[0].output_crc32;
    assert!(reports
        .iter()
        .all(|r| r.output_crc32 == crc && r.output_rows == reports[0].output_rows));
    let c = compare_reports(&reports[0], &reports[0]).unwrap();
    assert_eq!(
        [
            c.read,
            c.decode,
            c.compute,
            c.write,
            c.read_decode,
            c.read_compute,
            c.total
        ],
        [1.0; 7]
    );
    let json: serde_json::Value = serde_json::from_str(&reports_json(&reports)).unwrap();
    assert_eq!(
        json[3]["cell"],
        serde_json::json!({"cached": true, "compressed": true, "workers": 2})
    );
    assert_eq!(reports_csv(&reports).lines().count(), 1 + 4 * 7);
}

#[test]
fn single_worker_phases_fit_inside_the_wall_time() {
    let (dir, a, inputs) = small_bench();
    let cell = MatrixCell {
        cached: false,
        compressed: false,
        workers: 1,
    };
    let r = run_benchmark(&a, &inputs, cell, 3, dir.path()).unwrap();
    for p in &r.repetitions {
        assert!(p.read_compute() + p.write <= p.total * (1.0 + 1e-9));
    }
}

#[test]
fn reports_compare_only_like_with_like() {
    let (dir, a, inputs) = small_bench();
    let cell = MatrixCell {
        cached: false,
        compressed: false,
        workers: 1,
    };
    let r = run_benchmark(&a, &inputs, cell, 3, dir.path()).unwrap();
    let mut other = r.clone();
    other.fingerprint.push('x');
    assert!(matches!(
        compare_reports(&r, &other),
        Err(BenchError::IncomparableConfigs(_))
    ));
    assert!(matches!(
        run_benchmark(&a, &inputs, cell, 2, dir.path()),
        Err(BenchError::InvalidRepetitions(2))
    ));
}
