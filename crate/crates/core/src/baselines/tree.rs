use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::exec::Execution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classifier with Gini impurity. Leaves score the class-1 fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    dim: usize,
    nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    data: &'a LabeledDataset,
    params: TreeParams,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn positives(&self, idx: &[usize]) -> usize {
        idx.iter().filter(|&&i| self.data.labels()[i] == 1).count()
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.data.dim();
        match (self.params.max_features, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Best `(feature, threshold, weighted child gini)` or `None` if no split helps.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let total_pos = self.positives(idx);
        let parent = gini(total_pos, n);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = idx.to_vec();
        for f in self.candidate_features() {
            let x = |i: usize| self.data.row(i)[f];
            sorted.sort_by(|&a, &b| x(a).total_cmp(&x(b)).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(self.data.labels()[sorted[k - 1]] == 1);
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (lo, hi) = (x(sorted[k - 1]), x(sorted[k]));
                if lo == hi {
                    continue;
                }
                let impurity = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(total_pos - left_pos, n - k)) / n as f64;
                if impurity < parent - 1e-12 && best.is_none_or(|b| impurity < b.2) {
                    best = Some((f, lo + (hi - lo) / 2.0, impurity));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let pos = self.positives(idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(pos as f64 / idx.len() as f64));
        if depth >= self.params.max_depth || pos == 0 || pos == idx.len() || idx.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        if let Some((feature, threshold, _)) = self.best_split(idx) {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.data.row(i)[feature] <= threshold);
            let left = self.grow(&l, depth + 1);
            let right = self.grow(&r, depth + 1);
            self.nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        id
    }
}

impl DecisionTree {
    pub fn fit(train: &LabeledDataset, params: TreeParams) -> Result<Self> {
        let idx: Vec<usize> = (0..train.len()).collect();
        Self::fit_rows(train, &idx, params, None)
    }

    fn fit_rows(train: &LabeledDataset, idx: &[usize], params: TreeParams, rng: Option<ChaCha8Rng>) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::invalid("cannot grow a tree on zero rows"));
        }
        if params.max_features == Some(0) {
            return Err(Error::invalid("max_features must be positive"));
        }
        let mut b = Builder {
            data: train,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.grow(idx, 0);
        Ok(Self {
            dim: train.dim(),
            nodes: b.nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_len("tree query", self.dim, x.len())?;
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(p) => return Ok(p),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

/// Bagged CART trees; the score is the mean leaf fraction over trees.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Tree seeds are drawn up front from `seed`, so the forest does not depend on build order.
    pub fn fit(train: &LabeledDataset, params: ForestParams, seed: u64, exec: Execution) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if train.is_empty() {
            return Err(Error::invalid("cannot grow a forest on zero rows"));
        }
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
        let trees = exec.try_map_range(params.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds[t]);
            let n = train.len();
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit_rows(train, &idx, params.tree, Some(rng))
        })?;
        Ok(Self { trees })
    }

    pub fn dim(&self) -> usize {
        self.trees[0].dim()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for t in &self.trees {
            sum += t.score(x)?;
        }
        Ok(sum / self.trees.len() as f64)
    }
}
