use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct ClassGaussian {
    mean: Vec<f64>,
    /// Lower Cholesky factor of the regularized covariance, row-major.
    chol: Vec<f64>,
    log_det: f64,
    log_prior: f64,
}

/// Quadratic discriminant analysis: one full-covariance Gaussian per class.
#[derive(Clone, Debug, PartialEq)]
pub struct Qda {
    dim: usize,
    classes: [ClassGaussian; 2],
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if v <= 0.0 || !v.is_finite() {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

impl ClassGaussian {
    fn fit(train: &LabeledDataset, class: u8, reg: f64) -> Result<Self> {
        let d = train.dim();
        let rows: Vec<&[f64]> = train
            .rows()
            .zip(train.labels())
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r)
            .collect();
        if rows.len() < d + 1 {
            return Err(Error::invalid(format!(
                "QDA needs at least {} samples of class {class}, got {}",
                d + 1,
                rows.len()
            )));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v / n;
            }
        }
        let mut cov = vec![0.0; d * d];
        for r in &rows {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
                }
            }
        }
        for i in 0..d {
            cov[i * d + i] += reg;
        }
        let chol = cholesky(&cov, d).ok_or_else(|| Error::invalid(format!("class {class} covariance is not positive definite")))?;
        let log_det = 2.0 * (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>();
        Ok(Self {
            mean,
            chol,
            log_det,
            log_prior: (n / train.len() as f64).ln(),
        })
    }

    /// Log of prior times density, without the shared `-(d/2) ln 2π` term.
    fn log_joint(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        // solve L z = x - mean
        let mut z = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|k| self.chol[i * d + k] * z[k]).sum();
            z[i] = (x[i] - self.mean[i] - s) / self.chol[i * d + i];
        }
        let maha: f64 = z.iter().map(|v| v * v).sum();
        self.log_prior - 0.5 * self.log_det - 0.5 * maha
    }
}

impl Qda {
    pub fn fit(train: &LabeledDataset, reg: f64) -> Result<Self> {
        Ok(Self {
            dim: train.dim(),
            classes: [ClassGaussian::fit(train, 0, reg)?, ClassGaussian::fit(train, 1, reg)?],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Posterior probability of class 1.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_len("qda query", self.dim, x.len())?;
        let diff = self.classes[0].log_joint(x) - self.classes[1].log_joint(x);
        Ok(crate::nn::sigmoid(-diff))
    }
}
