//! Classifier architectures as sequential graphs of dense layers and circuits.
//!
//! | id            | stages                                                                |
//! |---------------|-----------------------------------------------------------------------|
//! | `drc`         | 1 qubit, `B × [ROT(x1, x2, 0), ROT(θ)]`, `p = (1 + ⟨Z⟩) / 2`           |
//! | `vc`          | RX embedding, `L` entangling layers, `p = (1 + mean⟨Z⟩) / 2`           |
//! | `vcdrc`       | `B × [RX embedding, L entangling layers]`, same head as `vc`           |
//! | `qnode`       | `vcdrc` → Dense(n→1, sigmoid)                                         |
//! | `fh_nn_vcdrc` | Dense(d→2, ReLU) → Dense(2→n, LeakyReLU) → `vcdrc` → Dense(n→1, σ)   |
//! | `fh_vcdrc_nn` | `vcdrc` → Dense(n→2, ReLU) → Dense(2→2, LeakyReLU) → Dense(2→1, σ)   |
//!
//! Plus the purely classical `nn` (the classical half of `fh_nn_vcdrc` with its
//! decision neuron), `logreg` and `mlpc`, which share the same training loop.
//!
//! An entangling layer is a trainable ROT on every wire followed by a CNOT
//! ring `i → (i + 1) mod n`. On two qubits the ring would be a CNOT pair that
//! cancels itself, so a single `CNOT(0 → 1)` is emitted instead.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grad::jacobian_scoped;
use crate::metrics::Scorer;
use crate::nn::{bce_grad, bce_loss, Activation, DenseCache, DenseLayer};
use crate::sim::{CircuitBuilder, CircuitSpec, Gate, Slot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Drc,
    Vc,
    Vcdrc,
    Qnode,
    FhNnVcdrc,
    FhVcdrcNn,
    Nn,
    Logreg,
    Mlpc,
}

impl Architecture {
    pub const QUANTUM: [Architecture; 6] = [
        Architecture::Drc,
        Architecture::Vc,
        Architecture::Vcdrc,
        Architecture::Qnode,
        Architecture::FhNnVcdrc,
        Architecture::FhVcdrcNn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Architecture::Drc => "drc",
            Architecture::Vc => "vc",
            Architecture::Vcdrc => "vcdrc",
            Architecture::Qnode => "qnode",
            Architecture::FhNnVcdrc => "fh_nn_vcdrc",
            Architecture::FhVcdrcNn => "fh_vcdrc_nn",
            Architecture::Nn => "nn",
            Architecture::Logreg => "logreg",
            Architecture::Mlpc => "mlpc",
        }
    }

    pub fn is_quantum(self) -> bool {
        Self::QUANTUM.contains(&self)
    }

    /// Whether the raw features are fed straight into RX embeddings (one per qubit).
    pub fn embeds_raw_input(self) -> bool {
        matches!(
            self,
            Architecture::Vc | Architecture::Vcdrc | Architecture::Qnode | Architecture::FhVcdrcNn
        )
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Architecture::Drc,
            Architecture::Vc,
            Architecture::Vcdrc,
            Architecture::Qnode,
            Architecture::FhNnVcdrc,
            Architecture::FhVcdrcNn,
            Architecture::Nn,
            Architecture::Logreg,
            Architecture::Mlpc,
        ];
        all.into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown architecture '{s}'")))
    }
}

/// Everything needed to rebuild a model's structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub input_dim: usize,
    pub n_qubits: usize,
    pub blocks: usize,
    pub layers: usize,
}

impl ModelSpec {
    pub fn new(arch: Architecture, input_dim: usize, n_qubits: usize, blocks: usize, layers: usize) -> Self {
        Self {
            arch,
            input_dim,
            n_qubits,
            blocks,
            layers,
        }
    }

    pub fn build(&self) -> Result<HybridModel> {
        HybridModel::from_spec(*self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    Dense(DenseLayer),
    Quantum(CircuitSpec),
}

impl Stage {
    pub fn n_params(&self) -> usize {
        match self {
            Stage::Dense(l) => l.n_params(),
            Stage::Quantum(c) => c.n_params(),
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Stage::Dense(l) => l.in_dim,
            Stage::Quantum(c) => c.n_inputs(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Stage::Dense(l) => l.out_dim,
            Stage::Quantum(c) => c.n_qubits(),
        }
    }
}

/// How the last stage's output becomes a probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// `p = (1 + mean_w ⟨Z_w⟩) / 2`.
    MeanExpectation,
    /// The last stage already emits a single probability (sigmoid neuron).
    Probability,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel {
    spec: ModelSpec,
    stages: Vec<Stage>,
    offsets: Vec<usize>,
    head: Head,
    params: Vec<f64>,
}

/// Ring of CNOTs `i → (i + 1) mod n`; one CNOT on two qubits.
fn entangle(b: &mut CircuitBuilder) {
    let n = b.n_qubits();
    if n == 2 {
        b.push(Gate::Cnot { control: 0, target: 1 });
    } else if n > 2 {
        for i in 0..n {
            b.push(Gate::Cnot {
                control: i,
                target: (i + 1) % n,
            });
        }
    }
}

/// `blocks × [RX(x_i) on wire i, layers × (ROT on every wire, CNOT ring)]`.
pub fn vcdrc_circuit(n_qubits: usize, blocks: usize, layers: usize) -> Result<CircuitSpec> {
    if n_qubits < 2 || blocks == 0 || layers == 0 {
        return Err(Error::invalid(format!(
            "variational circuit needs n_qubits >= 2, B >= 1, L >= 1 (got n={n_qubits}, B={blocks}, L={layers})"
        )));
    }
    let mut b = CircuitBuilder::new(n_qubits, n_qubits);
    for _ in 0..blocks {
        for w in 0..n_qubits {
            b.push(Gate::Rx {
                wire: w,
                angle: Slot::Input(w),
            });
        }
        for _ in 0..layers {
            for w in 0..n_qubits {
                b.trainable_rot(w);
            }
            entangle(&mut b);
        }
    }
    b.build()
}

/// Single-qubit re-uploading circuit: `blocks × [ROT(x1, x2, x3 or 0), ROT(θ1, θ2, θ3)]`.
pub fn drc_circuit(input_dim: usize, blocks: usize) -> Result<CircuitSpec> {
    if blocks == 0 {
        return Err(Error::invalid("DRC needs at least one block"));
    }
    if !(1..=3).contains(&input_dim) {
        return Err(Error::invalid(format!(
            "single-qubit DRC uploads at most 3 features per ROT, got {input_dim}"
        )));
    }
    let upload: [Slot; 3] = std::array::from_fn(|k| {
        if k < input_dim {
            Slot::Input(k)
        } else {
            Slot::Fixed(0.0)
        }
    });
    let mut b = CircuitBuilder::new(1, input_dim);
    for _ in 0..blocks {
        b.push(Gate::Rot {
            wire: 0,
            angles: upload,
        });
        b.trainable_rot(0);
    }
    b.build()
}

fn dense(i: usize, o: usize, a: Activation) -> Result<Stage> {
    Ok(Stage::Dense(DenseLayer::new(i, o, a)?))
}

pub fn build_drc(blocks: usize) -> Result<HybridModel> {
    ModelSpec::new(Architecture::Drc, 2, 1, blocks, 1).build()
}

pub fn build_vc(n_qubits: usize, layers: usize) -> Result<HybridModel> {
    ModelSpec::new(Architecture::Vc, n_qubits, n_qubits, 1, layers).build()
}

pub fn build_vcdrc(n_qubits: usize, blocks: usize, layers: usize) -> Result<HybridModel> {
    ModelSpec::new(Architecture::Vcdrc, n_qubits, n_qubits, blocks, layers).build()
}

pub fn build_qnode(n_qubits: usize, blocks: usize, layers: usize) -> Result<HybridModel> {
    ModelSpec::new(Architecture::Qnode, n_qubits, n_qubits, blocks, layers).build()
}

/// 2D-input variant; use [`ModelSpec`] for other input widths.
pub fn build_fh_nn_vcdrc(n_qubits: usize, blocks: usize, layers: usize) -> Result<HybridModel> {
    ModelSpec::new(Architecture::FhNnVcdrc, 2, n_qubits, blocks, layers).build()
}

pub fn build_fh_vcdrc_nn(n_qubits: usize, blocks: usize, layers: usize) -> Result<HybridModel> {
    ModelSpec::new(Architecture::FhVcdrcNn, n_qubits, n_qubits, blocks, layers).build()
}

impl HybridModel {
    pub fn from_spec(spec: ModelSpec) -> Result<Self> {
        let ModelSpec {
            arch,
            input_dim: d,
            n_qubits: n,
            blocks,
            layers,
        } = spec;
        if d == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if arch.embeds_raw_input() && d != n {
            return Err(Error::invalid(format!(
                "{arch} embeds each feature on its own qubit: input_dim {d} != n_qubits {n}"
            )));
        }
        if arch == Architecture::Drc && n != 1 {
            return Err(Error::invalid("DRC is a single-qubit model"));
        }
        use Activation::*;
        let (stages, head) = match arch {
            Architecture::Drc => (vec![Stage::Quantum(drc_circuit(d, blocks)?)], Head::MeanExpectation),
            Architecture::Vc => {
                if blocks != 1 {
                    return Err(Error::invalid("VC has exactly one block"));
                }
                (vec![Stage::Quantum(vcdrc_circuit(n, 1, layers)?)], Head::MeanExpectation)
            }
            Architecture::Vcdrc => (vec![Stage::Quantum(vcdrc_circuit(n, blocks, layers)?)], Head::MeanExpectation),
            Architecture::Qnode => (
                vec![Stage::Quantum(vcdrc_circuit(n, blocks, layers)?), dense(n, 1, Sigmoid)?],
                Head::Probability,
            ),
            Architecture::FhNnVcdrc => (
                vec![
                    dense(d, 2, Relu)?,
                    dense(2, n, LeakyRelu)?,
                    Stage::Quantum(vcdrc_circuit(n, blocks, layers)?),
                    dense(n, 1, Sigmoid)?,
                ],
                Head::Probability,
            ),
            Architecture::FhVcdrcNn => (
                vec![
                    Stage::Quantum(vcdrc_circuit(n, blocks, layers)?),
                    dense(n, 2, Relu)?,
                    dense(2, 2, LeakyRelu)?,
                    dense(2, 1, Sigmoid)?,
                ],
                Head::Probability,
            ),
            Architecture::Nn => (
                vec![dense(d, 2, Relu)?, dense(2, n, LeakyRelu)?, dense(n, 1, Sigmoid)?],
                Head::Probability,
            ),
            Architecture::Logreg => (vec![dense(d, 1, Sigmoid)?], Head::Probability),
            Architecture::Mlpc => (
                vec![dense(d, 16, Relu)?, dense(16, 16, Relu)?, dense(16, 1, Sigmoid)?],
                Head::Probability,
            ),
        };
        Self::assemble(spec, stages, head)
    }

    fn assemble(spec: ModelSpec, stages: Vec<Stage>, head: Head) -> Result<Self> {
        check_len("first stage input", spec.input_dim, stages[0].in_dim())?;
        for pair in stages.windows(2) {
            check_len("stage chaining", pair[0].out_dim(), pair[1].in_dim())?;
        }
        if head == Head::Probability {
            check_len("probability head width", 1, stages.last().map_or(0, Stage::out_dim))?;
        }
        let mut offsets = Vec::with_capacity(stages.len() + 1);
        let mut total = 0;
        for s in &stages {
            offsets.push(total);
            total += s.n_params();
        }
        offsets.push(total);
        Ok(Self {
            spec,
            stages,
            offsets,
            head,
            params: vec![0.0; total],
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("model parameters", self.params.len(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Flat-vector range owned by stage `i`.
    pub fn stage_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Parameters per stage, in stage order.
    pub fn stage_param_counts(&self) -> Vec<usize> {
        self.stages.iter().map(Stage::n_params).collect()
    }

    pub fn quantum_param_count(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| matches!(s, Stage::Quantum(_)))
            .map(Stage::n_params)
            .sum()
    }

    /// Glorot-uniform dense weights with zero biases; circuit angles uniform in `[0, 2π)`.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..self.stages.len() {
            let range = self.stage_range(i);
            let slice = &mut self.params[range];
            match &self.stages[i] {
                Stage::Dense(l) => l.init(slice, &mut rng),
                Stage::Quantum(_) => slice.iter_mut().for_each(|p| *p = rng.random_range(0.0..TAU)),
            }
        }
    }

    fn to_probability(&self, out: &[f64]) -> f64 {
        match self.head {
            Head::MeanExpectation => {
                let mean = out.iter().sum::<f64>() / out.len() as f64;
                ((1.0 + mean) / 2.0).clamp(0.0, 1.0)
            }
            Head::Probability => out[0],
        }
    }

    /// Output of every stage, in order.
    pub fn stage_outputs(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len("model input", self.spec.input_dim, x.len())?;
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.stages.len());
        for (i, stage) in self.stages.iter().enumerate() {
            let input = outs.last().map_or(x, |v| v.as_slice());
            let p = &self.params[self.stage_range(i)];
            let out = match stage {
                Stage::Dense(l) => l.forward_cached(p, input).out,
                Stage::Quantum(c) => crate::sim::run_circuit(c, p, input)?,
            };
            outs.push(out);
        }
        Ok(outs)
    }

    /// Class-1 probability for one sample.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let outs = self.stage_outputs(x)?;
        Ok(self.to_probability(outs.last().expect("at least one stage")))
    }

    /// BCE loss for one sample.
    pub fn loss(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok(bce_loss(self.predict(x)?, y))
    }

    /// BCE loss and its gradient with respect to every parameter.
    ///
    /// Dense layers are differentiated analytically; circuits go through the
    /// parameter-shift jacobian, including its input columns when an upstream
    /// stage needs them.
    pub fn loss_and_gradient(&self, x: &[f64], y: f64) -> Result<(f64, Vec<f64>)> {
        check_len("model input", self.spec.input_dim, x.len())?;
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.stages.len() + 1);
        let mut caches: Vec<Option<DenseCache>> = Vec::with_capacity(self.stages.len());
        inputs.push(x.to_vec());
        for (i, stage) in self.stages.iter().enumerate() {
            let p = &self.params[self.stage_range(i)];
            let input = &inputs[i];
            let (out, cache) = match stage {
                Stage::Dense(l) => {
                    let c = l.forward_cached(p, input);
                    (c.out.clone(), Some(c))
                }
                Stage::Quantum(c) => (crate::sim::run_circuit(c, p, input)?, None),
            };
            inputs.push(out);
            caches.push(cache);
        }
        let out = inputs.last().expect("non-empty");
        let prob = self.to_probability(out);
        let loss = bce_loss(prob, y);
        let dp = bce_grad(prob, y);
        let mut grad_out = match self.head {
            Head::MeanExpectation => vec![dp / (2.0 * out.len() as f64); out.len()],
            Head::Probability => vec![dp],
        };

        let mut grad = vec![0.0; self.params.len()];
        for i in (0..self.stages.len()).rev() {
            let range = self.stage_range(i);
            let p = &self.params[range.clone()];
            let g = &mut grad[range];
            let input = &inputs[i];
            grad_out = match &self.stages[i] {
                Stage::Dense(l) => l.backward(p, input, caches[i].as_ref().expect("dense cache"), &grad_out, g),
                Stage::Quantum(c) => {
                    let jac = jacobian_scoped(c, p, input, i > 0)?;
                    for (w, gw) in grad_out.iter().enumerate() {
                        for (gj, dj) in g.iter_mut().zip(&jac.d_params[w]) {
                            *gj += gw * dj;
                        }
                    }
                    let mut gx = vec![0.0; c.n_inputs()];
                    if i > 0 {
                        for (w, gw) in grad_out.iter().enumerate() {
                            for (gk, dk) in gx.iter_mut().zip(&jac.d_inputs[w]) {
                                *gk += gw * dk;
                            }
                        }
                    }
                    gx
                }
            };
        }
        Ok((loss, grad))
    }

    pub fn to_saved(&self) -> SavedModel {
        SavedModel {
            format: SavedModel::FORMAT.to_string(),
            version: SavedModel::VERSION,
            spec: self.spec,
            params: self.params.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_saved()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(text).map_err(|e| Error::invalid(format!("model json: {e}")))?;
        saved.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Gradient of the BCE loss of `model` at `(x, y)` over all parameters.
pub fn model_backward(model: &HybridModel, x: &[f64], y: f64) -> Result<Vec<f64>> {
    Ok(model.loss_and_gradient(x, y)?.1)
}

impl Scorer for HybridModel {
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        self.predict(x)
    }
}

/// On-disk model: architecture id, hyperparameters and the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub params: Vec<f64>,
}

impl SavedModel {
    pub const FORMAT: &'static str = "hqclass-model";
    pub const VERSION: u32 = 1;

    pub fn into_model(self) -> Result<HybridModel> {
        if self.format != Self::FORMAT {
            return Err(Error::invalid(format!("not a model file (format '{}')", self.format)));
        }
        if self.version != Self::VERSION {
            return Err(Error::invalid(format!("unsupported model version {}", self.version)));
        }
        let mut model = self.spec.build()?;
        model.set_params(&self.params)?;
        Ok(model)
    }
}
