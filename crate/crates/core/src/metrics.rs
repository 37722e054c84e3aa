//! ROC/AUC and prediction grids.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::exec::Execution;

/// Anything that maps a feature vector to a class-1 score in `[0, 1]`.
pub trait Scorer: Sync {
    fn input_dim(&self) -> usize;
    fn score(&self, x: &[f64]) -> Result<f64>;
}

/// Scores every row of `ds`, in row order.
pub fn score_dataset(scorer: &dyn Scorer, ds: &LabeledDataset, exec: Execution) -> Result<Vec<f64>> {
    check_len("scorer input", scorer.input_dim(), ds.dim())?;
    exec.try_map_range(ds.len(), |i| scorer.score(ds.row(i)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive; `+inf` for the origin.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocResult {
    pub auc: f64,
    pub curve: Vec<RocPoint>,
}

impl RocResult {
    /// `fpr,tpr,threshold` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.curve {
            writeln!(out, "{:.9},{:.9},{:.9}", p.fpr, p.tpr, p.threshold).expect("write to string");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Area under the ROC curve via the Mann–Whitney rank sum; tied scores get
/// their average rank (half credit).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocResult> {
    check_len("labels", scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC needs both classes (positives: {n_pos}, negatives: {n_neg})"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // ascending ranks, ties averaged
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let auc = (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);

    // threshold sweep from the highest score down
    let mut curve = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = order.len();
    while k > 0 {
        let threshold = scores[order[k - 1]];
        while k > 0 && scores[order[k - 1]] == threshold {
            if labels[order[k - 1]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k -= 1;
        }
        curve.push(RocPoint {
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
            threshold,
        });
    }
    Ok(RocResult { auc, curve })
}

/// Scores `ds` with `scorer` and returns its AUC.
pub fn dataset_auc(scorer: &dyn Scorer, ds: &LabeledDataset, exec: Execution) -> Result<f64> {
    let scores = score_dataset(scorer, ds, exec)?;
    Ok(roc_auc(&scores, ds.labels())?.auc)
}

/// Model output sampled at cell centres of a `resolution × resolution` raster.
///
/// `values[row * resolution + col]`: column 0 is the smallest `x1`, row 0 is
/// the largest `x2` (image orientation). 3D models are sliced at `x3 = slice`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionGrid {
    pub bounds: [(f64, f64); 2],
    pub resolution: usize,
    pub slice: Option<f64>,
    pub values: Vec<f64>,
}

impl PredictionGrid {
    /// `(x1, x2)` of the centre of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        cell_center(&self.bounds, self.resolution, row, col)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    /// Plain PGM (`P2`), `round(255 · p)` per pixel.
    pub fn to_pgm(&self) -> String {
        let r = self.resolution;
        let mut out = format!("P2 {r} {r} 255\n");
        for row in self.values.chunks_exact(r) {
            let px: Vec<String> = row.iter().map(|p| ((255.0 * p).round() as u8).to_string()).collect();
            out.push_str(&px.join(" "));
            out.push('\n');
        }
        out
    }

    /// `x1,x2[,x3],p` rows in the same order as `values`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.slice.is_some() { "x1,x2,x3,p\n" } else { "x1,x2,p\n" });
        for row in 0..self.resolution {
            for col in 0..self.resolution {
                let (x1, x2) = self.cell_center(row, col);
                write!(out, "{x1:.6},{x2:.6},").expect("write to string");
                if let Some(z) = self.slice {
                    write!(out, "{z:.6},").expect("write to string");
                }
                writeln!(out, "{:.6}", self.value(row, col)).expect("write to string");
            }
        }
        out
    }

    /// Share of cells where `p > 0.5` agrees with `truth(x1, x2)`.
    pub fn agreement(&self, truth: impl Fn(f64, f64) -> bool) -> f64 {
        let r = self.resolution;
        let hits = (0..r * r)
            .filter(|&k| {
                let (x1, x2) = self.cell_center(k / r, k % r);
                (self.values[k] > 0.5) == truth(x1, x2)
            })
            .count();
        hits as f64 / (r * r) as f64
    }
}

fn cell_center(bounds: &[(f64, f64); 2], resolution: usize, row: usize, col: usize) -> (f64, f64) {
    let step = |(lo, hi): (f64, f64)| (hi - lo) / resolution as f64;
    let x1 = bounds[0].0 + (col as f64 + 0.5) * step(bounds[0]);
    let x2 = bounds[1].1 - (row as f64 + 0.5) * step(bounds[1]);
    (x1, x2)
}

pub fn prediction_grid(
    scorer: &dyn Scorer,
    bounds: [(f64, f64); 2],
    resolution: usize,
    slice: Option<f64>,
    exec: Execution,
) -> Result<PredictionGrid> {
    if resolution < 2 {
        return Err(Error::invalid(format!("grid resolution must be >= 2, got {resolution}")));
    }
    if bounds.iter().any(|(lo, hi)| hi.partial_cmp(lo) != Some(Ordering::Greater)) {
        return Err(Error::invalid("grid bounds must satisfy min < max"));
    }
    match (scorer.input_dim(), slice) {
        (2, None) | (3, Some(_)) => {}
        (3, None) => return Err(Error::invalid("3D models need a slice value for the third coordinate")),
        (d, _) => {
            return Err(Error::DimensionMismatch {
                what: "grid model input",
                expected: if slice.is_some() { 3 } else { 2 },
                got: d,
            })
        }
    }
    let values = exec.try_map_range(resolution * resolution, |k| {
        let (x1, x2) = cell_center(&bounds, resolution, k / resolution, k % resolution);
        match slice {
            Some(z) => scorer.score(&[x1, x2, z]),
            None => scorer.score(&[x1, x2]),
        }
    })?;
    Ok(PredictionGrid {
        bounds,
        resolution,
        slice,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64, usize);

    impl Scorer for Constant {
        fn input_dim(&self) -> usize {
            self.1
        }
        fn score(&self, _: &[f64]) -> Result<f64> {
            Ok(self.0)
        }
    }

    struct LeftHalf;

    impl Scorer for LeftHalf {
        fn input_dim(&self) -> usize {
            2
        }
        fn score(&self, x: &[f64]) -> Result<f64> {
            Ok(if x[0] < 0.0 { 1.0 } else { 0.0 })
        }
    }

    #[test]
    fn auc_examples() {
        let r = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert!((r.auc - 0.75).abs() < 1e-15);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[0, 1, 0, 1, 1, 0]).unwrap().auc, 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
        assert!(roc_auc(&[0.1, f64::NAN], &[0, 1]).is_err());
    }

    #[test]
    fn curve_is_monotone_and_anchored() {
        let r = roc_auc(&[0.1, 0.4, 0.35, 0.8, 0.4], &[0, 0, 1, 1, 1]).unwrap();
        let first = r.curve.first().unwrap();
        let last = r.curve.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in r.curve.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            assert!(w[1].threshold < w[0].threshold);
        }
        // trapezoid area equals the rank statistic
        let area: f64 = r.curve.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
        assert!((area - r.auc).abs() < 1e-12);
        assert!(r.to_csv().starts_with("fpr,tpr,threshold\n0.000000000,0.000000000,inf\n"));
    }

    #[test]
    fn constant_grid() {
        let g = prediction_grid(&Constant(0.5, 2), [(-1.0, 1.0), (-1.0, 1.0)], 4, None, Execution::Parallel).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.5));
        assert_eq!(g.to_pgm().lines().next().unwrap(), "P2 4 4 255");
        assert!(g.to_pgm().lines().nth(1).unwrap().starts_with("128 128"));
    }

    #[test]
    fn grid_orientation_and_agreement() {
        let g = prediction_grid(&LeftHalf, [(-1.0, 1.0), (-2.0, 2.0)], 10, None, Execution::Sequential).unwrap();
        assert_eq!(g.value(0, 0), 1.0);
        assert_eq!(g.value(0, 9), 0.0);
        let (x1, x2) = g.cell_center(0, 0);
        assert!((x1 + 0.9).abs() < 1e-12 && (x2 - 1.8).abs() < 1e-12);
        assert_eq!(g.agreement(|x1, _| x1 < 0.0), 1.0);
        assert_eq!(g.agreement(|_, _| true), 0.5);
    }

    #[test]
    fn grid_errors() {
        let b = [(-1.0, 1.0), (-1.0, 1.0)];
        assert!(prediction_grid(&Constant(0.5, 2), b, 1, None, Execution::Sequential).is_err());
        assert!(prediction_grid(&Constant(0.5, 3), b, 4, None, Execution::Sequential).is_err());
        assert!(prediction_grid(&Constant(0.5, 2), b, 4, Some(0.0), Execution::Sequential).is_err());
        let g = prediction_grid(&Constant(0.2, 3), b, 3, Some(0.0), Execution::Sequential).unwrap();
        assert!(g.to_csv().starts_with("x1,x2,x3,p\n"));
        assert!(prediction_grid(&Constant(0.5, 2), [(1.0, 1.0), (-1.0, 1.0)], 4, None, Execution::Sequential).is_err());
    }
}
