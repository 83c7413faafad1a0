use std::time::Instant;

use dial_core::gbdt::{
    logistic_gradient, logistic_loss, read_samples, sigmoid, train, train_with_report, write_samples, Confusion,
    GbdtModel, Hyperparams, Node, TrainingSample, Tree, MODEL_FORMAT_VERSION,
};
use dial_core::metrics::{FEATURE_LEN, FEATURE_SCHEMA_VERSION};
use dial_core::provenance::Provenance;
use dial_core::sim::Op;
use dial_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURE: &str = include_str!("fixtures/one_tree.json");

fn hp(num_trees: usize, max_depth: usize, min_samples_leaf: usize) -> Hyperparams {
    Hyperparams {
        num_trees,
        max_depth,
        min_samples_leaf,
        ..Hyperparams::default()
    }
}

/// Points labelled by the line x0 + 2 x1 > 1.
fn separable(n: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = vec![rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..1.0)];
            let label = (x[0] + 2.0 * x[1] > 1.0) as u8;
            TrainingSample::new(x, label, Op::Read)
        })
        .collect()
}

/// Label is 1 with probability sigmoid(3 x0 - x2), so classes overlap.
fn noisy(n: usize, dims: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let label = (rng.gen::<f64>() < sigmoid(3.0 * x[0] - x[2])) as u8;
            TrainingSample::new(x, label, Op::Write)
        })
        .collect()
}

fn model_with(base_score: f64, trees: Vec<Tree>, feature_len: usize) -> GbdtModel {
    GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        schema_version: FEATURE_SCHEMA_VERSION,
        op: Op::Read,
        feature_len,
        base_score,
        learning_rate: 0.5,
        hyperparams: Hyperparams::default(),
        trees,
        provenance: None,
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let y = rng.gen_range(0..2) as f64;
        let f = rng.gen_range(-8.0..8.0);
        let h = 1e-5;
        let numeric = (logistic_loss(y, f + h) - logistic_loss(y, f - h)) / (2.0 * h);
        let analytic = logistic_gradient(y, f);
        let rel = (numeric - analytic).abs() / analytic.abs().max(1e-12);
        assert!(rel < 1e-6, "y={y} f={f}: {numeric} vs {analytic}");
    }
}

#[test]
fn training_loss_never_increases() {
    let samples = noisy(600, 4, 3);
    let (_, report) = train_with_report(&samples, &hp(80, 4, 5)).unwrap();
    assert_eq!(report.loss_history.len(), 81);
    for w in report.loss_history.windows(2) {
        assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
    }
    assert!(report.loss_history.last() < report.loss_history.first());
}

#[test]
fn separable_set_is_learned() {
    let all = separable(1000, 5);
    let (train_set, test_set) = all.split_at(800);
    let h = Hyperparams {
        num_trees: 200,
        max_depth: 3,
        ..Hyperparams::default()
    };
    let model = train(train_set, &h).unwrap();
    let c = Confusion::evaluate(&model, test_set).unwrap();
    assert_eq!(c.total(), 200);
    assert!(c.error_rate() < 0.05, "held-out error {}", c.error_rate());
}

#[test]
fn contradictory_duplicates_predict_one_half() {
    let x = vec![0.3, -1.0, 7.0];
    let mut samples = vec![TrainingSample::new(x.clone(), 1, Op::Read); 25];
    samples.extend(vec![TrainingSample::new(x.clone(), 0, Op::Read); 25]);
    let model = train(&samples, &hp(20, 3, 1)).unwrap();
    assert!((model.predict_proba(&x).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let samples = noisy(400, 5, 8);
    let h = Hyperparams {
        subsample_fraction: 0.7,
        seed: 42,
        ..hp(30, 3, 5)
    };
    let a = train(&samples, &h).unwrap().to_json().unwrap();
    let b = train(&samples, &h).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let c = train(&samples, &Hyperparams { seed: 43, ..h }).unwrap().to_json().unwrap();
    assert_ne!(a, c);
}

#[test]
fn empty_ensemble_predicts_the_prior() {
    let prior: f64 = 0.3;
    let model = model_with((prior / (1.0 - prior)).ln(), vec![], 2);
    assert!((model.predict_proba(&[5.0, -2.0]).unwrap() - prior).abs() < 1e-12);
}

#[test]
fn single_split_steps_at_the_threshold() {
    let tree = Tree {
        nodes: vec![
            Node::Split {
                feature: 0,
                threshold: 1.5,
                left: 1,
                right: 2,
            },
            Node::Leaf { leaf: -1.0 },
            Node::Leaf { leaf: 2.0 },
        ],
    };
    let model = model_with(0.0, vec![tree], 2);
    let p = |v: f64| model.predict_proba(&[v, 0.0]).unwrap();
    let (lo, hi) = (sigmoid(-0.5), sigmoid(0.5 * 2.0));
    for v in [-10.0, 0.0, 1.0, 1.5] {
        assert_eq!(p(v), lo);
    }
    for v in [1.5000001, 2.0, 100.0] {
        assert_eq!(p(v), hi);
    }
}

#[test]
fn fixture_model_gives_hand_computed_probabilities() {
    let model = GbdtModel::from_json(FIXTURE).unwrap();
    assert_eq!(model.op, Op::Write);
    // 0.5 + 0.1 * 4 = 0.9 and 0.5 + 0.1 * -3 = 0.2
    let right = 1.0 / (1.0 + (-0.9f64).exp());
    let left = 1.0 / (1.0 + (-0.2f64).exp());
    assert!((model.predict_proba(&[0.0, 5.0]).unwrap() - right).abs() < 1e-15);
    assert!((model.predict_proba(&[9.0, 2.0]).unwrap() - left).abs() < 1e-15);
    assert!((right - 0.7109495026250039).abs() < 1e-15);
}

#[test]
fn round_trip_preserves_predictions_bitwise() {
    let samples = noisy(500, FEATURE_LEN, 13);
    let model = train(&samples, &hp(40, 4, 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = GbdtModel::load(&path).unwrap();
    assert_eq!(back, model);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..FEATURE_LEN).map(|_| rng.gen_range(-2.0..2.0)).collect();
        assert_eq!(model.predict_proba(&x).unwrap().to_bits(), back.predict_proba(&x).unwrap().to_bits());
    }
}

#[test]
fn truncated_model_is_rejected() {
    let text = train(&noisy(200, 3, 2), &hp(5, 2, 5)).unwrap().to_json().unwrap();
    for cut in [0, 1, text.len() / 3, text.len() / 2, text.len() - 2] {
        assert!(
            matches!(GbdtModel::from_json(&text[..cut]), Err(Error::InvalidModel { .. })),
            "prefix of {cut} bytes accepted"
        );
    }
}

#[test]
fn invariant_violations_name_the_node() {
    let bad = FIXTURE.replace("\"feature\": 1", "\"feature\": 7");
    match GbdtModel::from_json(&bad) {
        Err(Error::InvalidModel { path, .. }) => assert_eq!(path, "trees[0].nodes[0]"),
        other => panic!("{other:?}"),
    }
    let bad = FIXTURE.replace("\"right\": 2", "\"right\": 1");
    assert!(matches!(GbdtModel::from_json(&bad), Err(Error::InvalidModel { .. })));
    let bad = FIXTURE.replace("\"format_version\": 1", "\"format_version\": 9");
    match GbdtModel::from_json(&bad) {
        Err(Error::InvalidModel { path, .. }) => assert_eq!(path, "format_version"),
        other => panic!("{other:?}"),
    }
    let bad = FIXTURE.replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(matches!(GbdtModel::from_json(&bad), Err(Error::InvalidModel { .. })));
}

#[test]
fn bad_training_sets_are_rejected() {
    let mut one_class = separable(50, 1);
    for s in &mut one_class {
        s.label = 1;
    }
    assert!(matches!(train(&one_class, &hp(5, 2, 1)), Err(Error::SingleClass { missing: 0 })));
    let mut ragged = separable(50, 1);
    ragged[10].features.push(1.0);
    assert!(matches!(train(&ragged, &hp(5, 2, 1)), Err(Error::SchemaMismatch { expected: 2, got: 3 })));
    let mut mixed = separable(50, 1);
    mixed[3].op = Op::Write;
    assert!(matches!(train(&mixed, &hp(5, 2, 1)), Err(Error::MixedOps(Op::Read, Op::Write))));
    let mut nan = separable(50, 1);
    nan[4].features[1] = f64::NAN;
    assert!(matches!(train(&nan, &hp(5, 2, 1)), Err(Error::NonFiniteFeature { index: 1 })));
    assert!(matches!(train(&separable(50, 1), &hp(0, 2, 1)), Err(Error::Hyperparams(_))));
}

#[test]
fn prediction_checks_the_schema() {
    let model = GbdtModel::from_json(FIXTURE).unwrap();
    assert!(matches!(
        model.predict_proba(&[1.0, 2.0, 3.0]),
        Err(Error::SchemaMismatch { expected: 2, got: 3 })
    ));
}

#[test]
fn monotone_rescaling_does_not_change_predictions() {
    let samples = noisy(500, 4, 21);
    let g = |v: f64| (2.0 * v).exp() * 10.0 + 3.0;
    let rescaled: Vec<TrainingSample> = samples
        .iter()
        .map(|s| {
            let mut t = s.clone();
            t.features[0] = g(t.features[0]);
            t
        })
        .collect();
    let h = hp(40, 3, 5);
    let a = train(&samples, &h).unwrap();
    let b = train(&rescaled, &h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..500 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let mut y = x.clone();
        y[0] = g(y[0]);
        assert_eq!(a.predict_proba(&x).unwrap().to_bits(), b.predict_proba(&y).unwrap().to_bits());
    }
}

#[test]
fn mean_prediction_matches_class_prior() {
    let samples = noisy(2000, 4, 31);
    let prior = samples.iter().filter(|s| s.label == 1).count() as f64 / samples.len() as f64;
    let model = train(&samples, &Hyperparams::default()).unwrap();
    let mean = samples.iter().map(|s| model.predict_proba(&s.features).unwrap()).sum::<f64>() / samples.len() as f64;
    assert!((mean - prior).abs() < 0.02, "mean {mean} vs prior {prior}");
}

#[test]
fn inference_over_all_candidates_is_fast() {
    let samples = noisy(3000, FEATURE_LEN, 41);
    let model = train(&samples, &Hyperparams::default()).unwrap();
    assert_eq!(model.trees.len(), 200);
    let xs: Vec<Vec<f64>> = samples[..42].iter().map(|s| s.features.clone()).collect();
    let rounds = 50;
    let start = Instant::now();
    for _ in 0..rounds {
        for x in &xs {
            std::hint::black_box(model.predict_proba(x).unwrap());
        }
    }
    let per_round = start.elapsed().as_secs_f64() / rounds as f64;
    assert!(per_round < 15e-3, "{per_round} s for 42 candidates");
}

#[test]
fn sample_files_round_trip_with_provenance() {
    let mut samples = noisy(30, 3, 51);
    samples[0].source = Some("s_wr_sq_1m/seed=1/c0.ost0".into());
    samples[1].weight = 2.5;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("write_samples.jsonl");
    let prov = Provenance::new(vec![1, 2], "abc".into());
    write_samples(&path, &samples, Some(&prov)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().next().unwrap().starts_with("{\"provenance\""));
    assert_eq!(read_samples(&path).unwrap(), samples);
}
