use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hqclass::baselines::{self, BaselineHyper, BaselineKind};
use hqclass::data::{generate, split, ShapeId, ShapeSpec, BOX_HALF_WIDTH};
use hqclass::metrics::{prediction_grid, score_dataset};
use hqclass::model::{Architecture, ModelSpec};
use hqclass::train::{fit, TrainConfig};
use hqclass::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn execution(c: &mut Criterion) {
    let ds = generate(&ShapeSpec::new(ShapeId::Crescent2d), 1024, 1).unwrap();
    let (train, test) = split(&ds, 0.5, 2).unwrap();
    let mut model = ModelSpec::new(Architecture::FhNnVcdrc, 2, 2, 6, 1).build().unwrap();
    model.init_params(3);

    let mut g = c.benchmark_group("epoch_fh_nn_vcdrc_512");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = TrainConfig {
            epochs: 1,
            exec,
            ..TrainConfig::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut m = model.clone();
                fit(&mut m, &train, &cfg, None, |_, _, _| Ok(())).unwrap();
                black_box(m)
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("score_fh_nn_vcdrc_512");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| score_dataset(&model, black_box(&test), exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("grid_fh_nn_vcdrc_50x50");
    g.sample_size(10);
    let bounds = [(-BOX_HALF_WIDTH, BOX_HALF_WIDTH); 2];
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| prediction_grid(&model, bounds, 50, None, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("forest_100_trees_512");
    g.sample_size(10);
    let hyper = BaselineHyper::default();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| baselines::fit(BaselineKind::RandomForest, &train, &hyper, 4, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, execution);
criterion_main!(benches);
