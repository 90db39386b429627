//! Experiment driver, reference handling and report files.

use std::sync::Arc;

use expint::bench::{
    emit_report, parse_report, read_field, records_to_csv, run_experiment, summary_path,
    write_field, ExperimentConfig, LambdaSource, RunRecord, CACHE_MAGIC, CSV_HEADER,
};
use expint::field::Field;
use expint::ops::Discretization;
use expint::problem::lin1d;
use expint::runner::{error_inf_rel, reference_solution, simulate, Formulation, RunSpec};
use expint::scheme::SchemeId;
use proptest::prelude::*;

fn small_nl1d(schemes: Vec<SchemeId>, steps: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig {
        schemes,
        steps,
        n: 64,
        ..ExperimentConfig::for_preset("nl1d", None).unwrap()
    }
}

#[test]
fn empty_scheme_list_gives_no_records() {
    let cfg = small_nl1d(vec![], vec![16, 32]);
    assert!(run_experiment(&cfg).unwrap().is_empty());
}

#[test]
fn small_run_matrix() {
    let cfg = small_nl1d(
        vec![SchemeId::L2a, SchemeId::Ee, SchemeId::Erbe],
        vec![64, 128, 256],
    );
    let records = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 9);
    for r in &records {
        assert!(!r.blowup && r.error.is_some(), "{r:?}");
        assert!(r.seconds >= 0.0);
        assert_eq!(r.n, 64);
        assert_eq!(r.lambda.is_none(), r.scheme == SchemeId::Erbe);
    }
    for id in [SchemeId::L2a, SchemeId::Ee, SchemeId::Erbe] {
        let errs: Vec<f64> = records
            .iter()
            .filter(|r| r.scheme == id)
            .map(|r| r.error.unwrap())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{id}: {errs:?}");
    }
}

#[test]
fn reference_is_resolved() {
    // doubling the reference resolution moves no error above 1e-9 by more than 1%
    let cfg = small_nl1d(SchemeId::ALL.to_vec(), vec![64, 128, 256]);
    let coarse = run_experiment(&cfg).unwrap();
    let fine = run_experiment(&ExperimentConfig {
        reference_factor: 2 * cfg.reference_factor,
        ..cfg
    })
    .unwrap();
    assert_eq!(coarse.len(), 33);
    for (a, b) in coarse.iter().zip(&fine) {
        let (ea, eb) = (a.error.unwrap(), b.error.unwrap());
        if eb > 1e-9 {
            assert!(
                (ea - eb).abs() / eb < 0.01,
                "{} m={}: {ea:.4e} vs {eb:.4e}",
                a.scheme,
                a.m
            );
        }
    }
}

#[test]
fn lin1d_reference_agrees_with_an_independent_integrator() {
    let p = lin1d();
    let disc = Arc::new(Discretization::new(&p, &p.grid(256).unwrap()).unwrap());
    let t = p.final_time;
    let reference = reference_solution(&disc, 1024, t).unwrap();
    let other = simulate(
        &disc,
        &RunSpec::accelerated(SchemeId::Erk2p2, 1.0, 10240, t),
        &disc.initial_field(),
    )
    .unwrap();
    let diff = error_inf_rel(&other.integration.solution.unwrap(), &reference).unwrap();
    assert!(diff < 1e-8, "{diff:.3e}");
}

#[test]
fn formulations_reach_comparable_errors_on_adr2d() {
    let cfg = ExperimentConfig {
        schemes: vec![SchemeId::L2a],
        steps: vec![2048],
        n: 64,
        lambda: LambdaSource::Value(0.53),
        ..ExperimentConfig::for_preset("adr2d", None).unwrap()
    };
    let acc = run_experiment(&cfg).unwrap()[0].error.unwrap();
    let orig = run_experiment(&ExperimentConfig {
        formulation: Formulation::Original,
        ..cfg
    })
    .unwrap()[0]
        .error
        .unwrap();
    let ratio = acc / orig;
    assert!(
        (0.2..=5.0).contains(&ratio),
        "accelerated {acc:.3e}, original {orig:.3e}"
    );
}

#[test]
fn original_formulation_rejects_implicit_schemes() {
    let cfg = ExperimentConfig {
        formulation: Formulation::Original,
        ..small_nl1d(vec![SchemeId::Ee, SchemeId::Imex2], vec![16])
    };
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn config_files() {
    let text = r#"
        preset = "adr3d"
        b = -1.0
        schemes = ["le", "sl2"]
        formulation = "accelerated"
        backend = "kron"
        n = 8
        steps = [16, 32]
        final_time = 0.25
        lambda = 0.6
    "#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(cfg.schemes, vec![SchemeId::Le, SchemeId::Sl2]);
    assert_eq!(cfg.lambda, LambdaSource::Value(0.6));
    assert_eq!(cfg.reference_factor, 4);
    assert_eq!(cfg.repeat, 1);
    assert_eq!(
        ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(),
        cfg
    );

    let tuned = text.replace("lambda = 0.6", "lambda = \"tuned\"");
    assert!(ExperimentConfig::from_toml(&tuned).is_err());
    let tuned = format!("{tuned}\n[tune]\ncoarse_n = 4\nsteps = 16\npoints = 3\n");
    assert_eq!(
        ExperimentConfig::from_toml(&tuned).unwrap().lambda,
        LambdaSource::Tuned
    );

    assert!(ExperimentConfig::from_toml(&format!("{text}\ncolour = 1\n")).is_err());
    assert!(ExperimentConfig::from_toml(&text.replace("\"adr3d\"", "\"adr4d\"")).is_err());
    assert!(ExperimentConfig::from_toml(&text.replace("lambda = 0.6", "lambda = 1.5")).is_err());
    assert!(ExperimentConfig::from_toml(&text.replace("[16, 32]", "[0]")).is_err());
}

#[test]
fn reference_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..small_nl1d(vec![SchemeId::L2b], vec![32])
    };
    let first = run_experiment(&cfg).unwrap();
    let files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(files.len(), 1);
    let cached = read_field(&files[0]).unwrap();
    assert_eq!(cached.shape(), &[64]);
    let second = run_experiment(&cfg).unwrap();
    assert_eq!(first[0].error, second[0].error);
}

#[test]
fn field_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub/u.ref");
    let u = Field::from_vec(
        &[3, 2],
        vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300, -7.25, 0.1],
    )
    .unwrap();
    write_field(&path, &u).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], CACHE_MAGIC);
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
    assert_eq!(bytes.len(), 8 * (2 + 2 + 6));
    let back = read_field(&path).unwrap();
    assert_eq!(back.shape(), u.shape());
    assert!(back
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    std::fs::write(&path, b"NOTAFILE").unwrap();
    assert!(read_field(&path).is_err());
    let mut truncated = bytes.clone();
    truncated.pop();
    std::fs::write(&path, truncated).unwrap();
    assert!(read_field(&path).is_err());
}

#[test]
fn empty_report_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out/empty.csv");
    let (csv, summary) = emit_report(&[], &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        format!("{CSV_HEADER}\n")
    );
    assert_eq!(summary, summary_path(&path));
    assert!(summary.exists());
}

#[test]
fn report_rows_are_sorted() {
    let rec = |scheme, m| RunRecord {
        scheme,
        formulation: Formulation::Accelerated,
        n: 8,
        m,
        lambda: Some(0.5),
        error: Some(1e-3),
        seconds: 0.1,
        blowup: false,
    };
    let csv = records_to_csv(&[
        rec(SchemeId::Sle, 64),
        rec(SchemeId::Ee, 128),
        rec(SchemeId::Sle, 16),
        rec(SchemeId::Ee, 32),
    ]);
    let keys: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .map(|f| (f[0].to_string(), f[3].to_string()))
        .collect();
    let expected = [("ee", "32"), ("ee", "128"), ("sle", "16"), ("sle", "64")];
    assert_eq!(keys, expected.map(|(a, b)| (a.to_string(), b.to_string())));
    assert!(parse_report("scheme,m\n").is_err());
}

#[test]
fn error_examples() {
    let r = Field::from_vec(&[4], vec![1.0, -3.0, 2.0, 0.5]).unwrap();
    assert_eq!(error_inf_rel(&r, &r).unwrap(), 0.0);
    let u = r.map(|x| 1.01 * x);
    assert!((error_inf_rel(&u, &r).unwrap() - 0.01).abs() < 1e-15);
    assert!(error_inf_rel(&r, &Field::zeros(&[4])).is_err());
    assert!(error_inf_rel(&r, &Field::zeros(&[2, 2])).is_err());
}

fn record_strategy() -> impl Strategy<Value = RunRecord> {
    (
        0usize..11,
        any::<bool>(),
        1usize..5000,
        1usize..100_000,
        prop::option::of(0.0f64..=1.0),
        prop::option::of(1e-300f64..1e3),
        0.0f64..1e4,
    )
        .prop_map(|(s, orig, n, m, lambda, error, seconds)| RunRecord {
            scheme: SchemeId::ALL[s],
            formulation: if orig {
                Formulation::Original
            } else {
                Formulation::Accelerated
            },
            n,
            m,
            lambda,
            blowup: error.is_none(),
            error,
            seconds,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_round_trip(mut records in prop::collection::vec(record_strategy(), 0..20)) {
        let parsed = parse_report(&records_to_csv(&records)).unwrap();
        expint::bench::sort_records(&mut records);
        // the sort is stable, so equal keys keep their order in both
        prop_assert_eq!(parsed, records);
    }

    #[test]
    fn decimal_fidelity(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let rec = RunRecord {
            scheme: SchemeId::Ee,
            formulation: Formulation::Accelerated,
            n: 1,
            m: 1,
            lambda: None,
            error: Some(x),
            seconds: x.abs(),
            blowup: false,
        };
        let back = parse_report(&records_to_csv(&[rec])).unwrap();
        prop_assert_eq!(back[0].error.unwrap().to_bits(), x.to_bits());
        prop_assert_eq!(back[0].seconds.to_bits(), x.abs().to_bits());
    }

    #[test]
    fn error_matches_loop_oracle(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..64)) {
        let (u, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(r.iter().any(|&x| x != 0.0));
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..u.len() {
            num = num.max((u[i] - r[i]).abs());
            den = den.max(r[i].abs());
        }
        let n = u.len();
        let got = error_inf_rel(&Field::from_vec(&[n], u).unwrap(), &Field::from_vec(&[n], r).unwrap()).unwrap();
        prop_assert_eq!(got, num / den);
    }
}
