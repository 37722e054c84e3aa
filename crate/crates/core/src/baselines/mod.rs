//! Classical reference classifiers.
//!
//! Defaults: KNN with k = 5; CART with Gini, depth 8, 5 samples per leaf;
//! a forest of 100 bootstrapped trees trying `⌊√d⌋` features per split; QDA
//! with `1e-6 · I` added to each class covariance; logistic regression and an
//! MLP (d → 16 → 16 → 1, ReLU) trained with Adam on binary cross-entropy.

mod knn;
mod qda;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use knn::Knn;
pub use qda::Qda;
pub use tree::{DecisionTree, ForestParams, RandomForest, TreeParams};

use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::exec::Execution;
use crate::metrics::Scorer;
use crate::model::{Architecture, HybridModel, ModelSpec};
use crate::train::{fit as fit_network, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Knn,
    DecisionTree,
    RandomForest,
    Qda,
    LogisticRegression,
    Mlpc,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::Knn,
        BaselineKind::DecisionTree,
        BaselineKind::RandomForest,
        BaselineKind::Qda,
        BaselineKind::LogisticRegression,
        BaselineKind::Mlpc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Knn => "knn",
            BaselineKind::DecisionTree => "tree",
            BaselineKind::RandomForest => "forest",
            BaselineKind::Qda => "qda",
            BaselineKind::LogisticRegression => "logreg",
            BaselineKind::Mlpc => "mlpc",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown baseline '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineHyper {
    pub knn_k: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub forest_bootstrap: bool,
    /// `None` means `max(1, ⌊√d⌋)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forest_max_features: Option<usize>,
    pub qda_reg: f64,
    pub logreg_epochs: usize,
    pub mlpc_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for BaselineHyper {
    fn default() -> Self {
        Self {
            knn_k: 5,
            tree_max_depth: 8,
            tree_min_leaf: 5,
            forest_trees: 100,
            forest_bootstrap: true,
            forest_max_features: None,
            qda_reg: 1e-6,
            logreg_epochs: 100,
            mlpc_epochs: 200,
            batch_size: 32,
            lr: 0.01,
        }
    }
}

impl BaselineHyper {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.tree_max_depth,
            min_leaf: self.tree_min_leaf,
            max_features: None,
        }
    }

    pub fn forest_params(&self, dim: usize) -> ForestParams {
        let sqrt = ((dim as f64).sqrt().floor() as usize).max(1);
        ForestParams {
            n_trees: self.forest_trees,
            bootstrap: self.forest_bootstrap,
            tree: TreeParams {
                max_features: Some(self.forest_max_features.unwrap_or(sqrt)),
                ..self.tree_params()
            },
        }
    }

    /// Training epochs for the gradient-trained kinds, 0 otherwise.
    pub fn epochs(&self, kind: BaselineKind) -> usize {
        match kind {
            BaselineKind::LogisticRegression => self.logreg_epochs,
            BaselineKind::Mlpc => self.mlpc_epochs,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineModel {
    Knn(Knn),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    Qda(Qda),
    /// Logistic regression and MLPC share the dense stack of the hybrid models.
    Network(BaselineKind, HybridModel),
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::Knn(_) => BaselineKind::Knn,
            BaselineModel::DecisionTree(_) => BaselineKind::DecisionTree,
            BaselineModel::RandomForest(_) => BaselineKind::RandomForest,
            BaselineModel::Qda(_) => BaselineKind::Qda,
            BaselineModel::Network(k, _) => *k,
        }
    }
}

/// Fits `kind` on `train`. Deterministic for a given `seed`.
pub fn fit(kind: BaselineKind, train: &LabeledDataset, hyper: &BaselineHyper, seed: u64, exec: Execution) -> Result<BaselineModel> {
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    Ok(match kind {
        BaselineKind::Knn => BaselineModel::Knn(Knn::fit(train, hyper.knn_k)?),
        BaselineKind::DecisionTree => BaselineModel::DecisionTree(DecisionTree::fit(train, hyper.tree_params())?),
        BaselineKind::RandomForest => {
            BaselineModel::RandomForest(RandomForest::fit(train, hyper.forest_params(train.dim()), seed, exec)?)
        }
        BaselineKind::Qda => BaselineModel::Qda(Qda::fit(train, hyper.qda_reg)?),
        BaselineKind::LogisticRegression | BaselineKind::Mlpc => {
            if !train.has_both_classes() {
                return Err(Error::invalid(format!("{kind} needs both classes in the training set")));
            }
            let arch = if kind == BaselineKind::Mlpc {
                Architecture::Mlpc
            } else {
                Architecture::Logreg
            };
            let mut net = ModelSpec::new(arch, train.dim(), 1, 1, 1).build()?;
            net.init_params(seed);
            let cfg = TrainConfig {
                epochs: hyper.epochs(kind),
                batch_size: hyper.batch_size,
                lr: hyper.lr,
                seed,
                exec,
            };
            fit_network(&mut net, train, &cfg, None, |_, _, _| Ok(()))?;
            BaselineModel::Network(kind, net)
        }
    })
}

/// Class-1 scores in `[0, 1]` for every row of `x`.
pub fn predict_scores(model: &BaselineModel, x: &LabeledDataset, exec: Execution) -> Result<Vec<f64>> {
    crate::metrics::score_dataset(model, x, exec)
}

impl Scorer for BaselineModel {
    fn input_dim(&self) -> usize {
        match self {
            BaselineModel::Knn(m) => m.dim(),
            BaselineModel::DecisionTree(m) => m.dim(),
            BaselineModel::RandomForest(m) => m.dim(),
            BaselineModel::Qda(m) => m.dim(),
            BaselineModel::Network(_, m) => m.spec().input_dim,
        }
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        check_len("baseline query", self.input_dim(), x.len())?;
        match self {
            BaselineModel::Knn(m) => m.score(x),
            BaselineModel::DecisionTree(m) => m.score(x),
            BaselineModel::RandomForest(m) => m.score(x),
            BaselineModel::Qda(m) => m.score(x),
            BaselineModel::Network(_, m) => m.predict(x),
        }
    }
}
