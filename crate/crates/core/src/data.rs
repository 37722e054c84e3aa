//! Synthetic non-convex datasets with one-sided Gaussian noise.
//!
//! Points are drawn uniformly from the box `[-π/2, π/2]^d`, so raw
//! coordinates are valid rotation angles, and labelled 1 iff they fall inside
//! the shape's region:
//!
//! - `crescent2d`: a disc with an overlapping, off-centre disc cut out.
//! - `triple2d`: three disjoint discs at the vertices of a triangle.
//! - `triple3d`: three disjoint balls at alternate corners of a cube.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the sampling box.
pub const BOX_HALF_WIDTH: f64 = FRAC_PI_2;

/// Noise levels swept by default: 0.0, 0.2, …, 1.2.
pub const DEFAULT_NOISE_GRID: [f64; 7] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeId {
    Crescent2d,
    Triple2d,
    Triple3d,
}

impl ShapeId {
    pub const ALL: [ShapeId; 3] = [ShapeId::Crescent2d, ShapeId::Triple2d, ShapeId::Triple3d];

    pub fn label(self) -> &'static str {
        match self {
            ShapeId::Crescent2d => "crescent2d",
            ShapeId::Triple2d => "triple2d",
            ShapeId::Triple3d => "triple3d",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ShapeId::Triple3d => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ShapeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeId::ALL
            .into_iter()
            .find(|id| id.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown shape '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn new(center: &[f64], radius: f64) -> Self {
        Self {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
        d2 <= self.radius * self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// `outer \ inner`
    Crescent { outer: Ball, inner: Ball },
    Union(Vec<Ball>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpec {
    pub id: ShapeId,
    pub region: Region,
}

impl ShapeSpec {
    pub fn new(id: ShapeId) -> Self {
        let region = match id {
            ShapeId::Crescent2d => Region::Crescent {
                outer: Ball::new(&[0.0, 0.0], 1.35),
                inner: Ball::new(&[0.6, 0.0], 1.0),
            },
            ShapeId::Triple2d => {
                let r = 0.95;
                let at = |deg: f64| {
                    let t = deg.to_radians();
                    Ball::new(&[r * t.cos(), r * t.sin()], 0.55)
                };
                Region::Union(vec![at(90.0), at(210.0), at(330.0)])
            }
            ShapeId::Triple3d => Region::Union(vec![
                Ball::new(&[0.7, 0.7, 0.7], 0.85),
                Ball::new(&[-0.7, -0.7, 0.7], 0.85),
                Ball::new(&[0.7, -0.7, -0.7], 0.85),
            ]),
        };
        Self { id, region }
    }

    pub fn dim(&self) -> usize {
        self.id.dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.region {
            Region::Crescent { outer, inner } => outer.contains(x) && !inner.contains(x),
            Region::Union(balls) => balls.iter().any(|b| b.contains(x)),
        }
    }

    pub fn label(&self, x: &[f64]) -> u8 {
        u8::from(self.contains(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Full,
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub shape: Option<ShapeId>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub split: SplitTag,
}

/// Row-major feature matrix with binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
    pub meta: DatasetMeta,
}

impl LabeledDataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<u8>, meta: DatasetMeta) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {bad} is not binary")));
        }
        Ok(Self {
            dim,
            features,
            labels,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        f64::from(self.labels[i])
    }

    pub fn count_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.count_positive();
        pos > 0 && pos < self.len()
    }

    pub fn subset(&self, indices: &[usize], split: SplitTag) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            dim: self.dim,
            features,
            labels,
            meta: DatasetMeta { split, ..self.meta },
        }
    }

    /// `x1,x2[,x3],label` with 9 significant digits per coordinate.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * (self.dim * 16 + 4));
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",label\n");
        for (row, label) in self.rows().zip(&self.labels) {
            for v in row {
                write!(out, "{v:.8e},").expect("write to string");
            }
            writeln!(out, "{label}").expect("write to string");
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let dim = cols.len().saturating_sub(1);
        let expected: Vec<String> = (1..=dim).map(|k| format!("x{k}")).chain(["label".to_string()]).collect();
        if !(2..=3).contains(&dim) || cols != expected {
            return Err(bad(1, format!("header must be x1,x2[,x3],label, got '{header}'")));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(bad(i + 1, format!("expected {} fields, got {}", dim + 1, fields.len())));
            }
            for f in &fields[..dim] {
                let v: f64 = f.parse().map_err(|_| bad(i + 1, format!("bad number '{f}'")))?;
                features.push(v);
            }
            labels.push(match fields[dim] {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(i + 1, format!("label must be 0 or 1, got '{other}'"))),
            });
        }
        let meta = DatasetMeta {
            shape: None,
            noise_sigma: 0.0,
            seed: 0,
            split: SplitTag::Full,
        };
        Self::new(dim, features, labels, meta)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

const MAX_REDRAWS: usize = 64;

/// `n_points` uniform samples from the box, labelled by `shape`. A draw that
/// misses one class entirely is redrawn (up to a fixed number of attempts).
pub fn generate(shape: &ShapeSpec, n_points: usize, seed: u64) -> Result<LabeledDataset> {
    if n_points < 2 {
        return Err(Error::invalid(format!("need at least 2 points, got {n_points}")));
    }
    let dim = shape.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let meta = DatasetMeta {
        shape: Some(shape.id),
        noise_sigma: 0.0,
        seed,
        split: SplitTag::Full,
    };
    let mut attempt = 0;
    loop {
        let features: Vec<f64> = (0..n_points * dim)
            .map(|_| rng.random_range(-BOX_HALF_WIDTH..=BOX_HALF_WIDTH))
            .collect();
        let labels: Vec<u8> = features.chunks_exact(dim).map(|x| shape.label(x)).collect();
        let ds = LabeledDataset::new(dim, features, labels, meta)?;
        attempt += 1;
        if ds.has_both_classes() || attempt >= MAX_REDRAWS {
            return Ok(ds);
        }
    }
}

/// Adds `N(0, sigma²)` to every coordinate of class-1 rows only.
pub fn apply_class_noise(ds: &LabeledDataset, sigma: f64, seed: u64) -> Result<LabeledDataset> {
    apply_noise_to_class(ds, 1, sigma, seed)
}

pub fn apply_noise_to_class(ds: &LabeledDataset, class: u8, sigma: f64, seed: u64) -> Result<LabeledDataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if class > 1 {
        return Err(Error::invalid(format!("noisy class must be 0 or 1, got {class}")));
    }
    let mut out = ds.clone();
    out.meta.noise_sigma = sigma;
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = out.dim;
    for (row, &label) in out.features.chunks_exact_mut(dim).zip(&out.labels) {
        if label == class {
            for v in row {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Ok(out)
}

/// Seeded shuffle, then the first `floor(fraction · N)` rows become the training set.
pub fn split(ds: &LabeledDataset, fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n_train = (fraction * ds.len() as f64).floor() as usize;
    if n_train == 0 || n_train == ds.len() {
        return Err(Error::invalid(format!(
            "split of {} rows at fraction {fraction} leaves an empty side",
            ds.len()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = idx.split_at(n_train);
    Ok((ds.subset(train, SplitTag::Train), ds.subset(test, SplitTag::Test)))
}
