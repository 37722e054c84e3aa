//! Config-driven sweeps over models × noise levels × seeds.
//!
//! One TOML file fully determines a run. Every cell derives its random
//! streams from the master seed and the cell's identity, so cells can run in
//! any order, or in parallel, without changing a single output byte.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineHyper, BaselineKind, BaselineModel};
use crate::data::{self, LabeledDataset, ShapeId, ShapeSpec, BOX_HALF_WIDTH, DEFAULT_NOISE_GRID};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::write_atomic;
use crate::metrics::{dataset_auc, prediction_grid, roc_auc, score_dataset, PredictionGrid, RocResult, Scorer};
use crate::model::{Architecture, HybridModel, ModelSpec};
use crate::sim::MAX_QUBITS;
use crate::train::{self, EpochRecord, TrainConfig};

pub const RESULTS_HEADER: &str =
    "model,shape,noise_sigma,seed,B,L,n_qubits,batch,epochs_run,best_auc,best_epoch,wall_time_s";
pub const EPOCHS_HEADER: &str = "model,shape,noise_sigma,seed,B,L,epoch,train_loss,train_auc,test_auc";
pub const TIMINGS_HEADER: &str = "model,shape,noise_sigma,seed,B,L,wall_time_s";

/// Anything that can sit in the `models` list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Hybrid(Architecture),
    Baseline(BaselineKind),
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Hybrid(a) => a.label(),
            ModelKind::Baseline(b) => b.label(),
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, ModelKind::Hybrid(a) if a.is_quantum())
    }

    /// Network-valued kinds are trained epoch by epoch; the rest are fitted once.
    fn network_arch(self) -> Option<Architecture> {
        match self {
            ModelKind::Hybrid(a) => Some(a),
            ModelKind::Baseline(BaselineKind::LogisticRegression) => Some(Architecture::Logreg),
            ModelKind::Baseline(BaselineKind::Mlpc) => Some(Architecture::Mlpc),
            ModelKind::Baseline(_) => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// `logreg` and `mlpc` resolve to the baselines.
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(b) = s.parse::<BaselineKind>() {
            return Ok(ModelKind::Baseline(b));
        }
        match s.parse::<Architecture>() {
            Ok(a) => Ok(ModelKind::Hybrid(a)),
            Err(_) => Err(Error::invalid(format!(
                "unknown model kind '{s}' (expected drc, vc, vcdrc, qnode, fh_nn_vcdrc, fh_vcdrc_nn, nn, knn, tree, forest, qda, logreg or mlpc)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelEntry {
    /// Name used in reports and file names; defaults to the kind label.
    pub label: String,
    pub kind: ModelKind,
    /// `None` puts one qubit per input feature.
    pub n_qubits: Option<usize>,
    pub blocks: usize,
    pub layers: usize,
    /// Overrides the training budget of this model only.
    pub epochs: Option<usize>,
    line: usize,
}

impl ModelEntry {
    /// Roster defaults: B = 6, L = 1 for the re-uploading models; VC is one block of six layers.
    pub fn new(kind: ModelKind) -> Self {
        let (blocks, layers) = match kind {
            ModelKind::Hybrid(Architecture::Vc) => (1, 6),
            k if k.is_quantum() => (6, 1),
            _ => (1, 1),
        };
        Self {
            label: kind.label().to_string(),
            kind,
            n_qubits: None,
            blocks,
            layers,
            epochs: None,
            line: 0,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Network structure for inputs of dimension `dim`; `None` for the non-network baselines.
    pub fn spec(&self, dim: usize) -> Option<ModelSpec> {
        let arch = self.kind.network_arch()?;
        let n = self.n_qubits.unwrap_or(dim);
        Some(match arch {
            Architecture::Drc => ModelSpec::new(arch, dim, 1, self.blocks, 1),
            Architecture::Nn => ModelSpec::new(arch, dim, n, 1, 1),
            Architecture::Logreg | Architecture::Mlpc => ModelSpec::new(arch, dim, 1, 1, 1),
            _ => ModelSpec::new(arch, dim, n, self.blocks, self.layers),
        })
    }

    /// `(B, L, n_qubits)` as reported; zeros for classical models.
    fn report_shape(&self, dim: usize) -> (usize, usize, usize) {
        match (self.kind.is_quantum(), self.spec(dim)) {
            (true, Some(s)) => (s.blocks, s.layers, s.n_qubits),
            _ => (0, 0, 0),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let fail = |msg: String| Error::Config {
            line: self.line.max(1),
            message: format!("model '{}': {msg}", self.label),
        };
        if self.blocks == 0 || self.layers == 0 {
            return Err(fail("blocks and layers must be at least 1".into()));
        }
        if let Some(n) = self.n_qubits {
            if n == 0 || n > MAX_QUBITS {
                return Err(fail(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n}")));
            }
            if self.kind == ModelKind::Hybrid(Architecture::Drc) && n != 1 {
                return Err(fail("drc always uses a single qubit".into()));
            }
        }
        if let Some(spec) = self.spec(dim) {
            spec.build().map_err(|e| fail(format!("{e} (dataset dimension {dim})")))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub shape: ShapeId,
    pub n_points: usize,
    pub split_fraction: f64,
    pub noise_grid: Vec<f64>,
    pub noisy_class: u8,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            shape: ShapeId::Crescent2d,
            n_points: 6000,
            split_fraction: 0.5,
            noise_grid: DEFAULT_NOISE_GRID.to_vec(),
            noisy_class: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub enabled: bool,
    pub resolution: usize,
    /// Third coordinate of the 2D slice through 3D shapes; `None` is the box midpoint.
    pub slice: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            resolution: 100,
            slice: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSweepConfig {
    pub blocks: Vec<usize>,
    pub models: Vec<Architecture>,
    pub layers: usize,
    /// `None` reuses the dataset noise grid.
    pub noise_grid: Option<Vec<f64>>,
}

impl Default for BlockSweepConfig {
    fn default() -> Self {
        Self {
            blocks: (1..=8).collect(),
            models: vec![Architecture::Drc, Architecture::Vcdrc],
            layers: 1,
            noise_grid: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub training: TrainingConfig,
    pub grid: GridConfig,
    pub models: Vec<ModelEntry>,
    pub baselines: BaselineHyper,
    pub block_sweep: BlockSweepConfig,
}

/// The six quantum models followed by the six classical baselines.
pub fn default_roster() -> Vec<ModelEntry> {
    Architecture::QUANTUM
        .into_iter()
        .map(ModelKind::Hybrid)
        .chain(BaselineKind::ALL.into_iter().map(ModelKind::Baseline))
        .map(ModelEntry::new)
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            seeds: vec![0],
            output_dir: PathBuf::from("results"),
            dataset: DatasetConfig::default(),
            training: TrainingConfig::default(),
            grid: GridConfig::default(),
            models: default_roster(),
            baselines: BaselineHyper::default(),
            block_sweep: BlockSweepConfig::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<RawDataset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    training: Option<RawTraining>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baselines: Option<BaselineHyper>,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_sweep: Option<RawBlockSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    models: Option<Vec<RawModel>>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    shape: Option<String>,
    n_points: Option<usize>,
    split_fraction: Option<f64>,
    noise_grid: Option<Vec<f64>>,
    noisy_class: Option<u8>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    enabled: Option<bool>,
    resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slice: Option<f64>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockSweep {
    blocks: Option<Vec<usize>>,
    models: Option<Vec<String>>,
    layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_grid: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_qubits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
}

/// Where each key of a TOML document lives, for line-precise messages.
struct KeyLines {
    /// `(line, table, occurrence, key)`; headers have an empty key.
    entries: Vec<(usize, String, usize, String)>,
}

impl KeyLines {
    fn scan(text: &str) -> Self {
        let mut entries = Vec::new();
        let mut counts: HashMap<String, usize> = HashMap::new();
        let (mut table, mut occ) = (String::new(), 0);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let header = line
                .strip_prefix("[[")
                .and_then(|r| r.split("]]").next())
                .map(|n| (n, true))
                .or_else(|| line.strip_prefix('[').and_then(|r| r.split(']').next()).map(|n| (n, false)));
            if let Some((name, array)) = header {
                table = name.trim().to_string();
                let c = counts.entry(table.clone()).or_insert(0);
                occ = if array { *c } else { 0 };
                *c += 1;
                entries.push((i + 1, table.clone(), occ, String::new()));
            } else if let Some((key, _)) = line.split_once('=') {
                let key = key.trim().trim_matches('"').to_string();
                entries.push((i + 1, table.clone(), occ, key));
            }
        }
        Self { entries }
    }

    /// Line of `key` in the `occ`-th `[table]`, falling back to the table header, then line 1.
    fn find(&self, table: &str, occ: usize, key: &str) -> usize {
        let hit = |k: &str| {
            self.entries
                .iter()
                .find(|(_, t, o, kk)| t == table && *o == occ && kk == k)
                .map(|e| e.0)
        };
        hit(key)
            .or_else(|| hit(""))
            .or_else(|| self.entries.iter().find(|(_, t, _, k)| t.is_empty() && k == table).map(|e| e.0))
            .unwrap_or(1)
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn check_noise_grid(grid: &[f64], line: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(config_err(line, "noise_grid must not be empty"));
    }
    if let Some(bad) = grid.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(config_err(line, format!("noise levels must be finite and >= 0, got {bad}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a TOML config. Every problem is reported as
    /// [`Error::Config`] with the line it was found on.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_at(text, s.start));
            config_err(line, e.message().trim().to_string())
        })?;
        let lines = KeyLines::scan(text);
        let top = |key: &str| lines.find("", 0, key);
        let mut cfg = ExperimentConfig::default();

        if let Some(s) = raw.master_seed {
            cfg.master_seed = s;
        }
        if let Some(seeds) = raw.seeds {
            if seeds.is_empty() {
                return Err(config_err(top("seeds"), "seeds must not be empty"));
            }
            cfg.seeds = seeds;
        }
        if let Some(dir) = raw.output_dir {
            cfg.output_dir = dir;
        }

        let d = raw.dataset.unwrap_or_default();
        let dline = |key: &str| lines.find("dataset", 0, key);
        if let Some(s) = d.shape {
            cfg.dataset.shape = s.parse().map_err(|_| {
                config_err(dline("shape"), format!("unknown shape '{s}' (expected crescent2d, triple2d or triple3d)"))
            })?;
        }
        if let Some(n) = d.n_points {
            if n < 4 {
                return Err(config_err(dline("n_points"), format!("n_points must be at least 4, got {n}")));
            }
            cfg.dataset.n_points = n;
        }
        if let Some(f) = d.split_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(config_err(dline("split_fraction"), format!("split_fraction must be in (0, 1), got {f}")));
            }
            cfg.dataset.split_fraction = f;
        }
        if let Some(g) = d.noise_grid {
            check_noise_grid(&g, dline("noise_grid"))?;
            cfg.dataset.noise_grid = g;
        }
        if let Some(c) = d.noisy_class {
            if c > 1 {
                return Err(config_err(dline("noisy_class"), format!("noisy_class must be 0 or 1, got {c}")));
            }
            cfg.dataset.noisy_class = c;
        }

        let t = raw.training.unwrap_or_default();
        let tline = |key: &str| lines.find("training", 0, key);
        if let Some(e) = t.epochs {
            cfg.training.epochs = e;
        }
        if let Some(b) = t.batch_size {
            if b == 0 {
                return Err(config_err(tline("batch_size"), "batch_size must be positive"));
            }
            cfg.training.batch_size = b;
        }
        if let Some(lr) = t.lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(config_err(tline("lr"), format!("lr must be positive, got {lr}")));
            }
            cfg.training.lr = lr;
        }

        let g = raw.grid.unwrap_or_default();
        if let Some(e) = g.enabled {
            cfg.grid.enabled = e;
        }
        if let Some(r) = g.resolution {
            if r < 2 {
                return Err(config_err(lines.find("grid", 0, "resolution"), format!("resolution must be >= 2, got {r}")));
            }
            cfg.grid.resolution = r;
        }
        if let Some(z) = g.slice {
            if z.is_nan() || z.abs() > BOX_HALF_WIDTH {
                return Err(config_err(lines.find("grid", 0, "slice"), format!("slice must lie inside the sampling box, got {z}")));
            }
            cfg.grid.slice = Some(z);
        }

        if let Some(b) = raw.baselines {
            let bline = |key: &str| lines.find("baselines", 0, key);
            if b.knn_k == 0 {
                return Err(config_err(bline("knn_k"), "knn_k must be positive"));
            }
            if b.forest_trees == 0 {
                return Err(config_err(bline("forest_trees"), "forest_trees must be positive"));
            }
            if b.forest_max_features == Some(0) {
                return Err(config_err(bline("forest_max_features"), "forest_max_features must be positive"));
            }
            if b.batch_size == 0 {
                return Err(config_err(bline("batch_size"), "batch_size must be positive"));
            }
            if !(b.lr > 0.0 && b.lr.is_finite()) {
                return Err(config_err(bline("lr"), format!("lr must be positive, got {}", b.lr)));
            }
            if !(b.qda_reg >= 0.0 && b.qda_reg.is_finite()) {
                return Err(config_err(bline("qda_reg"), "qda_reg must be finite and >= 0"));
            }
            cfg.baselines = b;
        }

        if let Some(bs) = raw.block_sweep {
            let sline = |key: &str| lines.find("block_sweep", 0, key);
            if let Some(blocks) = bs.blocks {
                if blocks.is_empty() || blocks.contains(&0) {
                    return Err(config_err(sline("blocks"), "block_sweep.blocks must be a non-empty list of positive counts"));
                }
                cfg.block_sweep.blocks = blocks;
            }
            if let Some(models) = bs.models {
                if models.is_empty() {
                    return Err(config_err(sline("models"), "block_sweep.models must not be empty"));
                }
                cfg.block_sweep.models = models
                    .iter()
                    .map(|m| match m.parse::<Architecture>() {
                        Ok(a) if a.is_quantum() && a != Architecture::Vc => Ok(a),
                        _ => Err(config_err(
                            sline("models"),
                            format!("'{m}' has no block count to sweep (use drc, vcdrc, qnode, fh_nn_vcdrc or fh_vcdrc_nn)"),
                        )),
                    })
                    .collect::<Result<_>>()?;
            }
            if let Some(l) = bs.layers {
                if l == 0 {
                    return Err(config_err(sline("layers"), "block_sweep.layers must be positive"));
                }
                cfg.block_sweep.layers = l;
            }
            if let Some(g) = bs.noise_grid {
                check_noise_grid(&g, sline("noise_grid"))?;
                cfg.block_sweep.noise_grid = Some(g);
            }
        }

        if let Some(models) = raw.models {
            if models.is_empty() {
                return Err(config_err(top("models"), "the model list is empty"));
            }
            let mut entries = Vec::with_capacity(models.len());
            for (i, m) in models.into_iter().enumerate() {
                let mline = |key: &str| lines.find("models", i, key);
                let kind: ModelKind = m.kind.parse().map_err(|e: Error| config_err(mline("kind"), e.to_string()))?;
                let mut entry = ModelEntry::new(kind);
                entry.line = mline("kind");
                if let Some(l) = m.label {
                    if l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                        return Err(config_err(mline("label"), format!("label '{l}' must be non-empty [A-Za-z0-9_-]")));
                    }
                    entry.label = l;
                }
                entry.n_qubits = m.n_qubits;
                if let Some(b) = m.blocks {
                    entry.blocks = b;
                }
                if let Some(l) = m.layers {
                    entry.layers = l;
                }
                entry.epochs = m.epochs;
                if entries.iter().any(|e: &ModelEntry| e.label == entry.label) {
                    return Err(config_err(
                        entry.line,
                        format!("duplicate model label '{}'; give one of them a distinct `label`", entry.label),
                    ));
                }
                entries.push(entry);
            }
            cfg.models = entries;
        }
        cfg.check_models(cfg.dataset.shape.dim())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Checks that every model can be built for inputs of dimension `dim`.
    pub fn check_models(&self, dim: usize) -> Result<()> {
        if self.models.is_empty() {
            return Err(config_err(1, "the model list is empty"));
        }
        self.models.iter().try_for_each(|m| m.check(dim))
    }

    /// The fully resolved config, defaults included, as TOML.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            master_seed: Some(self.master_seed),
            seeds: Some(self.seeds.clone()),
            output_dir: Some(self.output_dir.clone()),
            dataset: Some(RawDataset {
                shape: Some(self.dataset.shape.label().to_string()),
                n_points: Some(self.dataset.n_points),
                split_fraction: Some(self.dataset.split_fraction),
                noise_grid: Some(self.dataset.noise_grid.clone()),
                noisy_class: Some(self.dataset.noisy_class),
            }),
            training: Some(RawTraining {
                epochs: Some(self.training.epochs),
                batch_size: Some(self.training.batch_size),
                lr: Some(self.training.lr),
            }),
            grid: Some(RawGrid {
                enabled: Some(self.grid.enabled),
                resolution: Some(self.grid.resolution),
                slice: self.grid.slice,
            }),
            baselines: Some(self.baselines),
            block_sweep: Some(RawBlockSweep {
                blocks: Some(self.block_sweep.blocks.clone()),
                models: Some(self.block_sweep.models.iter().map(|a| a.label().to_string()).collect()),
                layers: Some(self.block_sweep.layers),
                noise_grid: self.block_sweep.noise_grid.clone(),
            }),
            models: Some(
                self.models
                    .iter()
                    .map(|m| RawModel {
                        kind: m.kind.label().to_string(),
                        label: Some(m.label.clone()),
                        n_qubits: m.n_qubits,
                        blocks: Some(m.blocks),
                        layers: Some(m.layers),
                        epochs: m.epochs,
                    })
                    .collect(),
            ),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

// ---------------------------------------------------------------------------
// Seeding

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for the stream named by `parts` under `master`.
/// FNV-1a over the parts, then splitmix64 mixing; independent of platform and Rust version.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    splitmix64(h ^ splitmix64(master))
}

/// Train/test split of `shape` at noise `sigma` for replicate `seed`.
///
/// The base points and the partition depend only on `(master, shape, seed)`,
/// so all noise levels of one replicate share them.
pub fn prepare_split(
    cfg: &ExperimentConfig,
    shape: ShapeId,
    sigma: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (s, r) = (shape.label(), seed.to_string());
    let base = data::generate(&ShapeSpec::new(shape), cfg.dataset.n_points, derive_seed(cfg.master_seed, &["data", s, &r]))?;
    let sig = sigma.to_string();
    let noisy = data::apply_noise_to_class(
        &base,
        cfg.dataset.noisy_class,
        sigma,
        derive_seed(cfg.master_seed, &["noise", s, &r, &sig]),
    )?;
    data::split(&noisy, cfg.dataset.split_fraction, derive_seed(cfg.master_seed, &["split", s, &r]))
}

// ---------------------------------------------------------------------------
// Cells

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub shape: ShapeId,
    pub noise_sigma: f64,
    pub seed: u64,
    pub blocks: usize,
    pub layers: usize,
    pub n_qubits: usize,
    pub batch: usize,
    pub epochs_run: usize,
    pub best_auc: f64,
    pub best_epoch: usize,
    pub wall_time_s: f64,
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.8}")
    }
}

impl ResultRow {
    fn key(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.model, self.shape, self.noise_sigma, self.seed, self.blocks, self.layers
        )
    }

    fn csv(&self, wall_time: bool) -> String {
        let wall = if wall_time {
            format!("{:.3}", self.wall_time_s)
        } else {
            "NA".into()
        };
        format!(
            "{},{},{},{},{},{},{wall}\n",
            self.key(),
            self.n_qubits,
            self.batch,
            self.epochs_run,
            num(self.best_auc),
            self.best_epoch,
        )
    }
}

/// A fitted model of either family.
#[derive(Clone, Debug)]
pub enum TrainedModel {
    Hybrid(HybridModel),
    Baseline(BaselineModel),
}

impl TrainedModel {
    pub fn scorer(&self) -> &dyn Scorer {
        match self {
            TrainedModel::Hybrid(m) => m,
            TrainedModel::Baseline(m) => m,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub row: ResultRow,
    /// Per-epoch record; a single epoch-0 entry for models fitted in one shot.
    pub history: Vec<EpochRecord>,
    pub grid: Option<PredictionGrid>,
}

#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub exec: Execution,
    /// Record measured seconds in `results.csv` instead of `NA`. Breaks byte-for-byte reruns.
    pub wall_time: bool,
    /// Called once per finished cell.
    pub progress: Option<&'a (dyn Fn(&ResultRow) + Sync)>,
}

fn grid_slice(cfg: &ExperimentConfig, dim: usize) -> Option<f64> {
    (dim == 3).then(|| cfg.grid.slice.unwrap_or(0.0))
}

/// Trains (or fits) one model on one split. The returned model is the best-epoch snapshot.
pub fn run_cell(
    cfg: &ExperimentConfig,
    entry: &ModelEntry,
    sigma: f64,
    seed: u64,
    split: &(LabeledDataset, LabeledDataset),
    exec: Execution,
    with_grid: bool,
) -> Result<(CellResult, TrainedModel)> {
    let (train_set, test_set) = split;
    let dim = train_set.dim();
    let shape = train_set.meta.shape.unwrap_or(cfg.dataset.shape);
    let start = Instant::now();
    let (b, l, n) = entry.report_shape(dim);
    let stream = [shape.label(), &seed.to_string(), &entry.label, &b.to_string(), &l.to_string()];
    let model_seed = derive_seed(cfg.master_seed, &[&["model"][..], &stream].concat());
    let shuffle_seed = derive_seed(cfg.master_seed, &[&["shuffle"][..], &stream].concat());

    let (trained, history, batch, epochs_run, best_auc, best_epoch) = match entry.spec(dim) {
        Some(spec) => {
            let mut model = spec.build()?;
            model.init_params(model_seed);
            let (epochs, batch_size, lr) = match entry.kind {
                ModelKind::Baseline(k) => (cfg.baselines.epochs(k), cfg.baselines.batch_size, cfg.baselines.lr),
                ModelKind::Hybrid(_) => (cfg.training.epochs, cfg.training.batch_size, cfg.training.lr),
            };
            let tc = TrainConfig {
                epochs: entry.epochs.unwrap_or(epochs),
                batch_size,
                lr,
                seed: shuffle_seed,
                exec,
            };
            let rep = train::train(&mut model, train_set, test_set, &tc)?;
            model.set_params(&rep.best_params)?;
            (TrainedModel::Hybrid(model), rep.history, batch_size, rep.epochs_run, rep.best_auc, rep.best_epoch)
        }
        None => {
            let ModelKind::Baseline(kind) = entry.kind else {
                unreachable!("hybrid kinds always have a spec")
            };
            let m = baselines::fit(kind, train_set, &cfg.baselines, model_seed, exec)?;
            let test_auc = dataset_auc(&m, test_set, exec)?;
            let train_auc = if train_set.has_both_classes() {
                dataset_auc(&m, train_set, exec)?
            } else {
                f64::NAN
            };
            let rec = EpochRecord {
                epoch: 0,
                train_loss: f64::NAN,
                train_auc,
                test_auc,
            };
            (TrainedModel::Baseline(m), vec![rec], 0, 0, test_auc, 0)
        }
    };

    let grid = if with_grid {
        let bounds = [(-BOX_HALF_WIDTH, BOX_HALF_WIDTH); 2];
        Some(prediction_grid(trained.scorer(), bounds, cfg.grid.resolution, grid_slice(cfg, dim), exec)?)
    } else {
        None
    };
    let row = ResultRow {
        model: entry.label.clone(),
        shape,
        noise_sigma: sigma,
        seed,
        blocks: b,
        layers: l,
        n_qubits: n,
        batch,
        epochs_run,
        best_auc,
        best_epoch,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((CellResult { row, history, grid }, trained))
}

/// Runs every `(model, sigma, seed)` cell on `shape`, in that nesting order.
fn run_cells(
    cfg: &ExperimentConfig,
    shape: ShapeId,
    models: &[ModelEntry],
    noise_grid: &[f64],
    with_grid: bool,
    opts: &RunOptions<'_>,
) -> Result<ExperimentReport> {
    let exec = opts.exec;
    let n_sigma = noise_grid.len();
    let splits = exec.try_map_range(cfg.seeds.len() * n_sigma, |k| {
        prepare_split(cfg, shape, noise_grid[k % n_sigma], cfg.seeds[k / n_sigma])
    })?;
    let per_model = n_sigma * cfg.seeds.len();
    let cells = exec.try_map_range(models.len() * per_model, |k| {
        let (m, rest) = (k / per_model, k % per_model);
        let (i_sigma, i_seed) = (rest / cfg.seeds.len(), rest % cfg.seeds.len());
        let split = &splits[i_seed * n_sigma + i_sigma];
        let (cell, _) = run_cell(cfg, &models[m], noise_grid[i_sigma], cfg.seeds[i_seed], split, exec, with_grid)?;
        if let Some(p) = opts.progress {
            p(&cell.row);
        }
        Ok::<_, Error>(cell)
    })?;
    Ok(ExperimentReport { cells })
}

/// Noise sweep of every configured model on the configured shape.
pub fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions<'_>) -> Result<ExperimentReport> {
    cfg.check_models(cfg.dataset.shape.dim())?;
    run_cells(cfg, cfg.dataset.shape, &cfg.models, &cfg.dataset.noise_grid, cfg.grid.enabled, opts)
}

/// Block-count sweep of the block-sweep models on the configured shape. No grids.
pub fn run_block_sweep(cfg: &ExperimentConfig, opts: &RunOptions<'_>) -> Result<ExperimentReport> {
    let bs = &cfg.block_sweep;
    if bs.blocks.is_empty() || bs.models.is_empty() {
        return Err(config_err(1, "block sweep needs at least one block count and one model"));
    }
    let models: Vec<ModelEntry> = bs
        .models
        .iter()
        .flat_map(|&arch| {
            bs.blocks.iter().map(move |&b| {
                let mut e = ModelEntry::new(ModelKind::Hybrid(arch));
                e.blocks = b;
                e.layers = bs.layers;
                e
            })
        })
        .collect();
    let dim = cfg.dataset.shape.dim();
    models.iter().try_for_each(|m| m.check(dim))?;
    let noise = bs.noise_grid.as_deref().unwrap_or(&cfg.dataset.noise_grid);
    run_cells(cfg, cfg.dataset.shape, &models, noise, false, opts)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.cells.iter().map(|c| &c.row)
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.cells.extend(other.cells);
    }

    pub fn results_csv(&self, wall_time: bool) -> String {
        let mut out = format!("{RESULTS_HEADER}\n");
        for r in self.rows() {
            out.push_str(&r.csv(wall_time));
        }
        out
    }

    pub fn epochs_csv(&self) -> String {
        let mut out = format!("{EPOCHS_HEADER}\n");
        for c in &self.cells {
            for h in &c.history {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    c.row.key(),
                    h.epoch,
                    num(h.train_loss),
                    num(h.train_auc),
                    num(h.test_auc)
                )
                .expect("write to string");
            }
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = format!("{TIMINGS_HEADER}\n");
        for r in self.rows() {
            writeln!(out, "{},{:.3}", r.key(), r.wall_time_s).expect("write to string");
        }
        out
    }

    /// Writes `results.csv`, `epochs.csv`, `timings.csv`, `config.toml` and any
    /// grids into `dir`. Each file appears atomically.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path, wall_time: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("results.csv"), self.results_csv(wall_time).as_bytes())?;
        write_atomic(&dir.join("epochs.csv"), self.epochs_csv().as_bytes())?;
        write_atomic(&dir.join("timings.csv"), self.timings_csv().as_bytes())?;
        write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
        for c in &self.cells {
            if let Some(g) = &c.grid {
                write_grid(g, dir, &grid_stem(&c.row.model, c.row.shape, c.row.noise_sigma, c.row.seed))?;
            }
        }
        Ok(())
    }
}

/// `grid_<model>_<shape>_n<sigma>_s<seed>`
pub fn grid_stem(model: &str, shape: ShapeId, sigma: f64, seed: u64) -> String {
    format!("grid_{model}_{shape}_n{sigma}_s{seed}")
}

/// Writes `<stem>.pgm`, `<stem>.csv` and, for sliced grids, `<stem>.slice.txt`.
pub fn write_grid(grid: &PredictionGrid, dir: &Path, stem: &str) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.pgm")), grid.to_pgm().as_bytes())?;
    write_atomic(&dir.join(format!("{stem}.csv")), grid.to_csv().as_bytes())?;
    if let Some(z) = grid.slice {
        let text = format!("axis = \"x3\"\nvalue = {z}\n");
        write_atomic(&dir.join(format!("{stem}.slice.txt")), text.as_bytes())?;
    }
    Ok(())
}

/// ROC of a trained model on `test`.
pub fn test_roc(model: &TrainedModel, test: &LabeledDataset, exec: Execution) -> Result<RocResult> {
    roc_auc(&score_dataset(model.scorer(), test, exec)?, test.labels())
}

/// Noise sweeps over every built-in shape, followed by the block sweep on the configured shape.
#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub noise: ExperimentReport,
    pub blocks: ExperimentReport,
}

pub fn bench_all(cfg: &ExperimentConfig, opts: &RunOptions<'_>) -> Result<BenchReport> {
    for shape in ShapeId::ALL {
        cfg.check_models(shape.dim())?;
    }
    let mut noise = ExperimentReport::default();
    for shape in ShapeId::ALL {
        let mut c = cfg.clone();
        c.dataset.shape = shape;
        noise.extend(run_cells(&c, shape, &c.models, &c.dataset.noise_grid, c.grid.enabled, opts)?);
    }
    let blocks = run_block_sweep(cfg, opts)?;
    Ok(BenchReport { noise, blocks })
}

impl BenchReport {
    /// Noise-sweep artifacts go to `dir`, block-sweep artifacts to `dir/block_sweep`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path, wall_time: bool) -> Result<()> {
        self.noise.write(cfg, dir, wall_time)?;
        self.blocks.write(cfg, &dir.join("block_sweep"), wall_time)
    }
}

/// Writes the train/test CSVs of every `(sigma, seed)` split and returns their paths.
pub fn write_datasets(cfg: &ExperimentConfig, dir: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shape = cfg.dataset.shape;
    let grid = &cfg.dataset.noise_grid;
    let jobs: Vec<(f64, u64)> = grid.iter().flat_map(|&s| cfg.seeds.iter().map(move |&r| (s, r))).collect();
    let written = exec.try_map_range(jobs.len(), |k| {
        let (sigma, seed) = jobs[k];
        let (train, test) = prepare_split(cfg, shape, sigma, seed)?;
        let stem = format!("data_{shape}_n{sigma}_s{seed}");
        let paths = [dir.join(format!("{stem}_train.csv")), dir.join(format!("{stem}_test.csv"))];
        train.write_csv(&paths[0])?;
        test.write_csv(&paths[1])?;
        Ok::<_, Error>(paths)
    })?;
    Ok(written.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
master_seed = 7
seeds = [1]

[dataset]
n_points = 80
noise_grid = [0.0, 0.5]

[training]
epochs = 2

[grid]
resolution = 4

[[models]]
kind = "qnode"
blocks = 1

[[models]]
kind = "knn"
"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_follow_the_roster() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.models.len(), 12);
        let vc = cfg.models.iter().find(|m| m.label == "vc").unwrap();
        assert_eq!((vc.blocks, vc.layers), (1, 6));
        let drc = cfg.models.iter().find(|m| m.label == "drc").unwrap();
        assert_eq!(drc.spec(2).unwrap().build().unwrap().n_params(), 18);
        assert_eq!(cfg.dataset.noise_grid.len(), 7);
        assert_eq!(cfg.training.epochs, 35);
    }

    #[test]
    fn config_errors_carry_lines() {
        let line = |text: &str| match ExperimentConfig::from_toml(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(line("seeds = [1]\nmodels = []\n"), 2);
        assert_eq!(line("seeds = [1]\n\n[dataset]\nshape = \"square\"\n"), 4);
        assert_eq!(line("[training]\nepochs = 3\nbogus = 1\n"), 3);
        assert_eq!(line("[[models]]\nkind = \"drc\"\n\n[[models]]\nkind = \"nope\"\n"), 5);
        assert_eq!(line("[[models]]\nkind = \"vc\"\nblocks = 2\n"), 2);
        assert_eq!(line("[dataset]\nsplit_fraction = 1.5\n"), 2);
        assert_eq!(line("[[models]]\nkind = \"qnode\"\nn_qubits = 3\n"), 2);
        assert_eq!(line("[[models]]\nkind = \"knn\"\n[[models]]\nkind = \"knn\"\n"), 4);
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = tiny();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(ExperimentConfig { models: vec![], ..again.clone() }, ExperimentConfig { models: vec![], ..cfg.clone() });
        let strip = |c: &ExperimentConfig| c.models.iter().map(|m| (m.label.clone(), m.kind, m.blocks, m.layers)).collect::<Vec<_>>();
        assert_eq!(strip(&again), strip(&cfg));
    }

    #[test]
    fn derived_seeds_separate_streams() {
        assert_eq!(derive_seed(1, &["a", "b"]), derive_seed(1, &["a", "b"]));
        assert_ne!(derive_seed(1, &["a", "b"]), derive_seed(2, &["a", "b"]));
        assert_ne!(derive_seed(1, &["ab"]), derive_seed(1, &["a", "b"]));
    }

    #[test]
    fn splits_share_points_across_noise() {
        let cfg = tiny();
        let (a, _) = prepare_split(&cfg, ShapeId::Crescent2d, 0.0, 1).unwrap();
        let (b, _) = prepare_split(&cfg, ShapeId::Crescent2d, 0.5, 1).unwrap();
        assert_eq!(a.labels(), b.labels());
        for i in 0..a.len() {
            if a.labels()[i] == 0 {
                assert_eq!(a.row(i), b.row(i));
            }
        }
    }

    #[test]
    fn sweep_shape_and_schedule_independence() {
        let cfg = tiny();
        let seq = run_sweep(&cfg, &RunOptions { exec: Execution::Sequential, ..Default::default() }).unwrap();
        let par = run_sweep(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(seq.cells.len(), 4);
        assert_eq!(seq.results_csv(false), par.results_csv(false));
        assert_eq!(seq.epochs_csv(), par.epochs_csv());
        let csv = seq.results_csv(false);
        assert!(csv.starts_with(RESULTS_HEADER));
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",NA") && l.split(',').count() == 12));
        for c in &seq.cells {
            assert!(c.row.best_epoch <= c.row.epochs_run);
            assert!((0.0..=1.0).contains(&c.row.best_auc));
            assert_eq!(c.grid.as_ref().unwrap().values.len(), 16);
        }
    }

    #[test]
    fn block_sweep_rows() {
        let mut cfg = tiny();
        cfg.block_sweep.blocks = vec![1, 2];
        cfg.block_sweep.noise_grid = Some(vec![0.0]);
        let rep = run_block_sweep(&cfg, &RunOptions::default()).unwrap();
        let got: Vec<(String, usize)> = rep.rows().map(|r| (r.model.clone(), r.blocks)).collect();
        assert_eq!(got, [("drc", 1), ("drc", 2), ("vcdrc", 1), ("vcdrc", 2)].map(|(m, b)| (m.to_string(), b)));
        assert!(rep.cells.iter().all(|c| c.grid.is_none()));
    }
}
