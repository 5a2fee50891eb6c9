mod common;

use std::path::Path;

use common::{
    build_corpus, config_json, default_columns, kahan, plain, read_events, ref_hist, rel_close, scalar_close,
    skim_default, Corpus,
};
use hepskim::analysis::{
    build_plot_bundle, fill_histograms, open_dataset, run_skim, sum_of_weights, Analysis, AnalysisConfig,
    AnalysisError, HistogramSet,
};
use hepskim::bench::{generate, GeneratorSpec, WeightDist};
use hepskim::core::Scalar;
use hepskim::engine::DatasetKind;
use hepskim::storage::{read_ntu, NtuColumns};

fn analysis(dir: &Path, extra: &str) -> Analysis {
    AnalysisConfig::from_json(&config_json(dir, extra))
        .unwrap()
        .validate(None)
        .unwrap()
}

fn rows(ntu: &NtuColumns) -> Vec<Vec<Scalar>> {
    (0..ntu.rows as usize).map(|i| ntu.row(i).unwrap()).collect()
}

fn corpus(dir: &Path) -> Corpus {
    build_corpus(dir, 10_000, 4, plain())
}

fn skim_all(a: &Analysis, out: &Path) -> Vec<HistogramSet> {
    a.datasets
        .iter()
        .map(|d| {
            let ds = open_dataset(a, d).unwrap();
            let ntu = out.join(format!("{}.ntu", d.label));
            run_skim(a, &ds, &ntu).unwrap();
            fill_histograms(a, d, &ntu, 3).unwrap()
        })
        .collect()
}

#[test]
fn sum_of_weights_matches_serial_sum() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let a = analysis(dir.path(), "");
    for (label, files) in [("signal", &c.signal), ("ttbar", &c.ttbar)] {
        let ds = open_dataset(&a, a.dataset(label).unwrap()).unwrap();
        let (sumw, _) = sum_of_weights(&ds).unwrap();
        let oracle = kahan(read_events(files).iter().map(|e| e.weight));
        assert!(rel_close(sumw, oracle, 1e-12), "{label}: {sumw} vs {oracle}");
    }
    assert_eq!(
        sum_of_weights(&open_dataset(&a, a.dataset("signal").unwrap()).unwrap())
            .unwrap()
            .0,
        10_000.0
    );
    let data = open_dataset(&a, a.dataset("data").unwrap()).unwrap();
    assert!(matches!(sum_of_weights(&data), Err(AnalysisError::KindMismatch { .. })));
}

#[test]
fn skim_matches_serial_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let a = analysis(
        dir.path(),
        r#", "workers": 4, "partition": {"mode": "custom", "custom": {"per_file": 3}}"#,
    );
    for (label, files) in [("signal", &c.signal), ("ttbar", &c.ttbar), ("data", &c.data)] {
        let d = a.dataset(label).unwrap();
        let ds = open_dataset(&a, d).unwrap();
        let out = dir.path().join(format!("{label}.ntu"));
        let r = run_skim(&a, &ds, &out).unwrap();
        let got = read_ntu(&out, None).unwrap();
        let names: Vec<&str> = got.columns.iter().map(|(c, _)| c.name.as_str()).collect();
        assert_eq!(names, default_columns());
        let expected = skim_default(&read_events(files), d.cross_section_pb, a.luminosity_invpb);
        assert_eq!(r.rows as usize, expected.len());
        assert!(r.reduction() > 0.0 && r.reduction() < 1.0);
        for (g, e) in rows(&got).iter().zip(&expected) {
            assert!(
                g.iter().zip(e).all(|(x, y)| scalar_close(x, y, 1e-12)),
                "{label}: {g:?} vs {e:?}"
            );
        }
    }
}

#[test]
fn trivial_cuts() {
    let dir = tempfile::tempdir().unwrap();
    build_corpus(dir.path(), 2000, 2, plain());
    let a = analysis(dir.path(), r#", "selection": "true""#);
    let d = a.dataset("data").unwrap();
    let out = dir.path().join("all.ntu");
    let r = run_skim(&a, &open_dataset(&a, d).unwrap(), &out).unwrap();
    assert_eq!(r.rows, r.input_events);
    let w = read_ntu(&out, Some(&["weight"]))
        .unwrap()
        .get("weight")
        .unwrap()
        .to_f64();
    assert!(w.iter().all(|&x| x == 1.0));

    let a = analysis(dir.path(), r#", "selection": "false""#);
    for d in &a.datasets {
        let r = run_skim(&a, &open_dataset(&a, d).unwrap(), &out).unwrap();
        assert_eq!(r.rows, 0);
        assert_eq!(read_ntu(&out, None).unwrap().rows, 0);
    }
}

#[test]
fn constant_weights_cancel() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GeneratorSpec {
        weights: WeightDist::Constant(3.0),
        ..GeneratorSpec::new(11, 4000, DatasetKind::Mc)
    };
    generate(&spec, &dir.path().join("signal_000.evt"), plain()).unwrap();
    let json = format!(
        r#"{{"datasets": [{{"glob": "{}/signal_*.evt", "kind": "mc", "xsec_pb": 2.0, "label": "signal"}}],
            "luminosity_invpb": 1000.0, "selection": "true"}}"#,
        dir.path().display()
    );
    let a = AnalysisConfig::from_json(&json).unwrap().validate(None).unwrap();
    let out = dir.path().join("c.ntu");
    let r = run_skim(&a, &open_dataset(&a, &a.datasets[0]).unwrap(), &out).unwrap();
    assert_eq!(r.sum_of_weights, Some(12_000.0));
    let expected = 2.0 * 1000.0 / 4000.0;
    let w = read_ntu(&out, Some(&["weight"]))
        .unwrap()
        .get("weight")
        .unwrap()
        .to_f64();
    assert!(w.iter().all(|&x| rel_close(x, expected, 1e-12)));
}

#[test]
fn zero_sum_of_weights_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GeneratorSpec {
        weights: WeightDist::Constant(0.0),
        ..GeneratorSpec::new(1, 100, DatasetKind::Mc)
    };
    generate(&spec, &dir.path().join("signal_000.evt"), plain()).unwrap();
    let json = format!(
        r#"{{"datasets": [{{"glob": "{}/signal_*.evt", "kind": "mc", "xsec_pb": 2.0, "label": "signal"}}],
            "luminosity_invpb": 1.0}}"#,
        dir.path().display()
    );
    let a = AnalysisConfig::from_json(&json).unwrap().validate(None).unwrap();
    let err = run_skim(
        &a,
        &open_dataset(&a, &a.datasets[0]).unwrap(),
        &dir.path().join("z.ntu"),
    )
    .unwrap_err();
    assert!(matches!(err, AnalysisError::ZeroSumOfWeights { .. }));
}

#[test]
fn histograms_match_brute_force_binning() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let a = analysis(dir.path(), r#", "group_rows": 97"#);
    let sets = skim_all(&a, dir.path());
    for (set, files) in sets.iter().zip([&c.signal, &c.ttbar, &c.data]) {
        let d = a.dataset(&set.label).unwrap();
        let expected = skim_default(&read_events(files), d.cross_section_pb, a.luminosity_invpb);
        let names = default_columns();
        let col = |name: &str| {
            let i = names.iter().position(|n| *n == name).unwrap();
            expected.iter().map(|r| r[i].as_f64()).collect::<Vec<f64>>()
        };
        let weights = col("weight");
        for h in &set.histograms {
            let r = ref_hist(&h.spec, &col(&h.spec.variable), &weights);
            let close = |x: f64, y: f64| rel_close(x, y, 1e-12);
            assert!(
                h.contents.iter().zip(&r.contents).all(|(x, y)| close(*x, *y)),
                "{}",
                h.spec.variable
            );
            assert!(h.sumw2.iter().zip(&r.sumw2).all(|(x, y)| close(*x, *y)));
            assert!(close(h.underflow, r.underflow) && close(h.overflow, r.overflow));
            let total = kahan(weights.iter().copied());
            assert!(rel_close(h.total(), total, 1e-12), "{} vs {total}", h.total());
            if set.kind == DatasetKind::Data {
                assert_eq!(h.contents, h.sumw2);
            }
        }
    }
}

#[test]
fn cross_section_scales_the_plot() {
    let dir = tempfile::tempdir().unwrap();
    build_corpus(dir.path(), 5000, 2, plain());
    let a = analysis(dir.path(), "");
    let mut doubled = a.clone();
    for d in &mut doubled.datasets {
        if let Some(x) = d.cross_section_pb.as_mut() {
            *x *= 2.0;
        }
    }
    let one = build_plot_bundle(&a, &skim_all(&a, dir.path())).unwrap();
    let two = build_plot_bundle(&doubled, &skim_all(&doubled, dir.path())).unwrap();
    for (h1, h2) in one.histograms.iter().zip(&two.histograms) {
        assert_eq!(h1.components.len(), 2);
        let pairs = h1
            .components
            .iter()
            .zip(&h2.components)
            .map(|(a, b)| (&a.series, &b.series));
        for (c1, c2) in pairs.chain([(&h1.stack, &h2.stack)]) {
            for (x, y) in c1.contents.iter().zip(&c2.contents) {
                assert!(rel_close(2.0 * x, *y, 1e-12), "{x} {y}");
            }
        }
        assert_eq!(h1.data, h2.data);
    }
}

#[test]
fn stack_is_the_component_sum() {
    let dir = tempfile::tempdir().unwrap();
    build_corpus(dir.path(), 3000, 2, plain());
    let a = analysis(dir.path(), "");
    let bundle = build_plot_bundle(&a, &skim_all(&a, dir.path())).unwrap();
    for h in &bundle.histograms {
        assert_eq!(h.edges.len(), h.nbins as usize + 1);
        let labels: Vec<&str> = h.components.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["signal", "ttbar"]);
        for i in 0..h.nbins as usize {
            let sum = h.components[0].series.contents[i] + h.components[1].series.contents[i];
            assert_eq!(h.stack.contents[i], sum);
        }
        assert!(h.data.is_some());
    }
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = |extra: &str| {
        AnalysisConfig::from_json(&config_json(dir.path(), extra))
            .and_then(|c| c.validate(None))
            .unwrap_err()
            .to_string()
    };
    assert!(bad(r#", "selection": "met.pt and true""#).contains("selection"));
    assert!(bad(r#", "bogus": 1"#).contains("bogus"));
    assert!(bad(r#", "projection": [{"name": "weight", "expr": "met.pt"}]"#).contains("weight"));
    assert!(bad(r#", "partition": {"mode": "sideways"}"#).contains("partition"));
}
