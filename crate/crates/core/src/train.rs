//! Mini-batch Adam training with per-epoch test AUC tracking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::exec::Execution;
use crate::metrics::{roc_auc, score_dataset};
use crate::model::HybridModel;
use crate::nn::AdamState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Seeds the per-epoch shuffles. Parameter init is the caller's business.
    pub seed: u64,
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 35,
            batch_size: 32,
            lr: AdamState::DEFAULT_LR,
            seed: 0,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_auc: f64,
    pub test_auc: f64,
}

/// Per-epoch history. Entry 0 is the untrained model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub best_auc: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Parameters as they were after `best_epoch`.
    pub best_params: Vec<f64>,
}

fn mean_loss(model: &HybridModel, ds: &LabeledDataset, exec: Execution) -> Result<f64> {
    let losses = exec.try_map_range(ds.len(), |i| model.loss(ds.row(i), ds.label(i)))?;
    Ok(losses.iter().sum::<f64>() / ds.len() as f64)
}

/// Runs `cfg.epochs` epochs of shuffled mini-batch Adam on the mean BCE.
///
/// Per-sample gradients may be computed in parallel; they are summed in
/// sample order, so the trajectory does not depend on scheduling. Entries of
/// `trainable` that are `false` are held fixed. `on_epoch(epoch, model,
/// mean_batch_loss)` runs after every epoch.
pub fn fit<F>(
    model: &mut HybridModel,
    train: &LabeledDataset,
    cfg: &TrainConfig,
    trainable: Option<&[bool]>,
    mut on_epoch: F,
) -> Result<()>
where
    F: FnMut(usize, &HybridModel, f64) -> Result<()>,
{
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    check_len("training features", model.spec().input_dim, train.dim())?;
    if let Some(mask) = trainable {
        check_len("trainable mask", model.n_params(), mask.len())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.n_params(), cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let m: &HybridModel = model;
            let per_sample = cfg
                .exec
                .try_map_range(batch.len(), |k| m.loss_and_gradient(train.row(batch[k]), train.label(batch[k])))?;
            let mut grad = vec![0.0; model.n_params()];
            for (loss, g) in &per_sample {
                loss_sum += loss;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if let Some(mask) = trainable {
                for (g, &on) in grad.iter_mut().zip(mask) {
                    if !on {
                        *g = 0.0;
                    }
                }
            }
            adam.step(model.params_mut(), &grad)?;
        }
        on_epoch(epoch, model, loss_sum / train.len() as f64)?;
    }
    Ok(())
}

/// Trains `model` and evaluates it on both splits after every epoch.
/// `best_auc` is the running maximum of the test AUC, epoch 0 included.
/// The model is left at its final parameters.
pub fn train(
    model: &mut HybridModel,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if test_set.is_empty() || !test_set.has_both_classes() {
        return Err(Error::UndefinedMetric("test set needs both classes for AUC".into()));
    }
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    check_len("test features", model.spec().input_dim, test_set.dim())?;
    let exec = cfg.exec;
    let auc_of = |m: &HybridModel, ds: &LabeledDataset| -> Result<f64> {
        if !ds.has_both_classes() {
            return Ok(f64::NAN);
        }
        Ok(roc_auc(&score_dataset(m, ds, exec)?, ds.labels())?.auc)
    };

    let initial = EpochRecord {
        epoch: 0,
        train_loss: mean_loss(model, train_set, exec)?,
        train_auc: auc_of(model, train_set)?,
        test_auc: auc_of(model, test_set)?,
    };
    let mut best = (initial.test_auc, 0, model.params().to_vec());
    let mut history = vec![initial];
    fit(model, train_set, cfg, None, |epoch, m, loss| {
        let rec = EpochRecord {
            epoch,
            train_loss: loss,
            train_auc: auc_of(m, train_set)?,
            test_auc: auc_of(m, test_set)?,
        };
        if rec.test_auc > best.0 {
            best = (rec.test_auc, epoch, m.params().to_vec());
        }
        history.push(rec);
        Ok(())
    })?;

    Ok(TrainReport {
        best_auc: best.0,
        best_epoch: best.1,
        epochs_run: cfg.epochs,
        best_params: best.2,
        history,
    })
}

/// Mean BCE of `model` over `ds`.
pub fn dataset_loss(model: &HybridModel, ds: &LabeledDataset, exec: Execution) -> Result<f64> {
    mean_loss(model, ds, exec)
}

