use hqclass::baselines::{self, BaselineHyper, BaselineKind};
use hqclass::data::{apply_class_noise, generate, split, DatasetMeta, LabeledDataset, ShapeId, ShapeSpec, SplitTag};
use hqclass::metrics::{dataset_auc, prediction_grid, score_dataset};
use hqclass::model::{Architecture, ModelSpec};
use hqclass::train::{dataset_loss, train, TrainConfig};
use hqclass::{Error, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        let c = if y == 1 { 0.7 } else { -0.7 };
        features.push(c + rng.random_range(-0.6..0.6));
        features.push(c + rng.random_range(-0.6..0.6));
        labels.push(y);
    }
    let meta = DatasetMeta {
        shape: None,
        noise_sigma: 0.0,
        seed,
        split: SplitTag::Full,
    };
    LabeledDataset::new(2, features, labels, meta).unwrap()
}

fn cfg(epochs: usize, exec: Execution) -> TrainConfig {
    TrainConfig {
        epochs,
        seed: 3,
        exec,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_reports_the_untrained_model() {
    let (tr, te) = (blobs(64, 1), blobs(64, 2));
    let mut m = ModelSpec::new(Architecture::Qnode, 2, 2, 2, 1).build().unwrap();
    m.init_params(4);
    let before = m.params().to_vec();
    let rep = train(&mut m, &tr, &te, &cfg(0, Execution::Sequential)).unwrap();
    assert_eq!(rep.history.len(), 1);
    assert_eq!((rep.best_epoch, rep.epochs_run), (0, 0));
    assert_eq!(m.params(), &before[..]);
    assert_eq!(rep.best_auc, dataset_auc(&m, &te, Execution::Sequential).unwrap());
}

#[test]
fn training_is_deterministic_and_best_is_running_max() {
    let (tr, te) = (blobs(96, 1), blobs(64, 2));
    let run = |exec| {
        let mut m = ModelSpec::new(Architecture::FhNnVcdrc, 2, 2, 2, 1).build().unwrap();
        m.init_params(8);
        let rep = train(&mut m, &tr, &te, &cfg(4, exec)).unwrap();
        (rep, m)
    };
    let (a, ma) = run(Execution::Sequential);
    let (b, mb) = run(Execution::Sequential);
    let (c, mc) = run(Execution::Parallel);
    assert_eq!(a, b);
    assert_eq!(a, c, "parallel per-sample gradients must reduce to the same bits");
    assert_eq!(ma.params(), mb.params());
    assert_eq!(ma.params(), mc.params());
    assert_eq!(a.history.len(), 5);
    let max = a.history.iter().map(|r| r.test_auc).fold(f64::MIN, f64::max);
    assert_eq!(a.best_auc, max);
    assert_eq!(a.history[a.best_epoch].test_auc, max);
    assert!(a.best_epoch <= a.epochs_run);
}

#[test]
fn qnode_separates_blobs() {
    let (tr, te) = (blobs(400, 1), blobs(200, 2));
    let mut m = ModelSpec::new(Architecture::Qnode, 2, 2, 2, 1).build().unwrap();
    m.init_params(5);
    let loss0 = dataset_loss(&m, &tr, Execution::Parallel).unwrap();
    let rep = train(&mut m, &tr, &te, &cfg(15, Execution::Parallel)).unwrap();
    assert!(rep.best_auc >= 0.95, "best auc {}", rep.best_auc);
    assert!(dataset_loss(&m, &tr, Execution::Parallel).unwrap() < loss0);
}

#[test]
fn single_class_test_set_is_rejected() {
    let tr = blobs(10, 1);
    let te = tr.subset(&[1, 3, 5], SplitTag::Test);
    let mut m = ModelSpec::new(Architecture::Logreg, 2, 1, 1, 1).build().unwrap();
    assert!(matches!(train(&mut m, &tr, &te, &cfg(1, Execution::Sequential)), Err(Error::UndefinedMetric(_))));
}

#[test]
fn sequential_and_parallel_paths_agree_bitwise() {
    let ds = generate(&ShapeSpec::new(ShapeId::Crescent2d), 600, 1).unwrap();
    let ds = apply_class_noise(&ds, 0.4, 2).unwrap();
    let (tr, te) = split(&ds, 0.5, 3).unwrap();
    let hyper = BaselineHyper {
        forest_trees: 12,
        mlpc_epochs: 3,
        logreg_epochs: 3,
        ..BaselineHyper::default()
    };
    for kind in BaselineKind::ALL {
        let a = baselines::fit(kind, &tr, &hyper, 9, Execution::Sequential).unwrap();
        let b = baselines::fit(kind, &tr, &hyper, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b, "{kind}");
        let sa = score_dataset(&a, &te, Execution::Sequential).unwrap();
        let sb = score_dataset(&b, &te, Execution::Parallel).unwrap();
        assert_eq!(sa, sb);
        assert!(sa.iter().all(|s| (0.0..=1.0).contains(s)));
    }
    let mut m = ModelSpec::new(Architecture::Vcdrc, 2, 2, 3, 1).build().unwrap();
    m.init_params(1);
    let bounds = [(-1.5, 1.5); 2];
    let g1 = prediction_grid(&m, bounds, 20, None, Execution::Sequential).unwrap();
    let g2 = prediction_grid(&m, bounds, 20, None, Execution::Parallel).unwrap();
    assert_eq!(g1, g2);
}
