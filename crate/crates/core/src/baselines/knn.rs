use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};

/// k-nearest-neighbour vote under Euclidean distance; ties in distance go to the lower row index.
#[derive(Clone, Debug, PartialEq)]
pub struct Knn {
    k: usize,
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl Knn {
    pub fn fit(train: &LabeledDataset, k: usize) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::invalid(format!("k = {k} must be in 1..={}", train.len())));
        }
        Ok(Self {
            k,
            dim: train.dim(),
            features: train.features().to_vec(),
            labels: train.labels().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fraction of the `k` nearest training points labelled 1.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_len("knn query", self.dim, x.len())?;
        let mut dist: Vec<(f64, usize)> = self
            .features
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, row)| (row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by);
        }
        let votes = dist[..self.k].iter().filter(|(_, i)| self.labels[*i] == 1).count();
        Ok(votes as f64 / self.k as f64)
    }
}
