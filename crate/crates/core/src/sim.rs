//! Exact statevector simulation of small parametrized circuits.
//!
//! Qubit ordering: wire 0 is the most significant bit of the amplitude
//! index, so `|10⟩` (wire 0 set) is amplitude 2 on two qubits.
//!
//! Rotations follow `R_A(α) = exp(-i α A / 2)`. The general rotation is the
//! ZYZ product `ROT(φ, θ, ω) = RZ(ω) · RY(θ) · RZ(φ)`, which reaches all of
//! SU(2) up to a global phase. Global phase is not tracked; only expectation
//! values are meaningful outputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];

pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Where a gate angle comes from when a circuit is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    /// Trainable parameter index.
    Param(usize),
    /// Input feature index.
    Input(usize),
    /// Constant angle (e.g. the zero padding of a 2D data upload).
    Fixed(f64),
}

impl Slot {
    #[inline]
    pub fn resolve(self, params: &[f64], inputs: &[f64]) -> f64 {
        match self {
            Slot::Param(i) => params[i],
            Slot::Input(k) => inputs[k],
            Slot::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Rot,
    Cnot,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot => 0,
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::Rot => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Rx { wire: usize, angle: Slot },
    Ry { wire: usize, angle: Slot },
    Rz { wire: usize, angle: Slot },
    Rot { wire: usize, angles: [Slot; 3] },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Rx { .. } => GateKind::Rx,
            Gate::Ry { .. } => GateKind::Ry,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::Rot { .. } => GateKind::Rot,
            Gate::Cnot { .. } => GateKind::Cnot,
        }
    }

    pub fn slots(&self) -> &[Slot] {
        match self {
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => {
                std::slice::from_ref(angle)
            }
            Gate::Rot { angles, .. } => angles,
            Gate::Cnot { .. } => &[],
        }
    }

    fn check_wires(&self, n_qubits: usize) -> Result<()> {
        match *self {
            Gate::Rx { wire, .. } | Gate::Ry { wire, .. } | Gate::Rz { wire, .. } | Gate::Rot { wire, .. } => {
                if wire >= n_qubits {
                    return Err(Error::invalid(format!("wire {wire} out of range for {n_qubits} qubits")));
                }
            }
            Gate::Cnot { control, target } => {
                if control >= n_qubits || target >= n_qubits {
                    return Err(Error::invalid(format!(
                        "CNOT wires ({control}, {target}) out of range for {n_qubits} qubits"
                    )));
                }
                if control == target {
                    return Err(Error::invalid("CNOT control and target must differ"));
                }
            }
        }
        Ok(())
    }
}

pub fn rx_matrix(a: f64) -> Mat2 {
    let (s, c) = (a / 2.0).sin_cos();
    let mis = Complex64::new(0.0, -s);
    [[Complex64::new(c, 0.0), mis], [mis, Complex64::new(c, 0.0)]]
}

pub fn ry_matrix(a: f64) -> Mat2 {
    let (s, c) = (a / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(a: f64) -> Mat2 {
    [
        [Complex64::from_polar(1.0, -a / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, a / 2.0)],
    ]
}

/// Closed form of `RZ(omega) · RY(theta) · RZ(phi)`.
pub fn rot_matrix(phi: f64, theta: f64, omega: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let sum = (phi + omega) / 2.0;
    let diff = (phi - omega) / 2.0;
    [
        [Complex64::from_polar(c, -sum), -Complex64::from_polar(s, diff)],
        [Complex64::from_polar(s, -diff), Complex64::from_polar(c, sum)],
    ]
}

/// Pure state of `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::invalid(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the norm is not checked.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::invalid(format!("amplitude count {len} is not 2^n with 1 <= n <= {MAX_QUBITS}")));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    fn mask(&self, wire: usize) -> usize {
        1 << (self.n_qubits - 1 - wire)
    }

    /// Applies a validated gate with already-resolved angles.
    pub fn apply_gate(&mut self, gate: &Gate, angles: &[f64]) -> Result<()> {
        gate.check_wires(self.n_qubits)?;
        check_len("gate angles", gate.kind().arity(), angles.len())?;
        self.apply_unchecked(gate, angles);
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate, angles: &[f64]) {
        match *gate {
            Gate::Rx { wire, .. } => self.apply_single(wire, &rx_matrix(angles[0])),
            Gate::Ry { wire, .. } => self.apply_single(wire, &ry_matrix(angles[0])),
            Gate::Rz { wire, .. } => self.apply_single(wire, &rz_matrix(angles[0])),
            Gate::Rot { wire, .. } => {
                self.apply_single(wire, &rot_matrix(angles[0], angles[1], angles[2]))
            }
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
        }
    }

    /// Applies a 2x2 unitary to `wire`. Caller guarantees `wire < n_qubits`.
    pub fn apply_single(&mut self, wire: usize, m: &Mat2) {
        let stride = self.mask(wire);
        let dim = self.amps.len();
        for base in (0..dim).step_by(2 * stride) {
            for i in base..base + stride {
                let j = i + stride;
                let a0 = self.amps[i];
                let a1 = self.amps[j];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = self.mask(control);
        let tmask = self.mask(target);
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    /// `⟨ψ| Z_wire |ψ⟩`.
    pub fn expectation_z(&self, wire: usize) -> Result<f64> {
        if wire >= self.n_qubits {
            return Err(Error::invalid(format!(
                "wire {wire} out of range for {} qubits",
                self.n_qubits
            )));
        }
        let mask = self.mask(wire);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| if k & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// `⟨Z_w⟩` for every wire, in wire order.
    pub fn expectations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (k, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (w, e) in out.iter_mut().enumerate() {
                if k & self.mask(w) == 0 {
                    *e += p;
                } else {
                    *e -= p;
                }
            }
        }
        out
    }
}

/// An ordered gate list whose angles bind to parameter or input slots.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    n_inputs: usize,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize, gates: Vec<Gate>, n_params: usize, n_inputs: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::invalid(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        for gate in &gates {
            gate.check_wires(n_qubits)?;
            for slot in gate.slots() {
                match *slot {
                    Slot::Param(i) if i >= n_params => {
                        return Err(Error::invalid(format!("parameter slot {i} >= n_params {n_params}")))
                    }
                    Slot::Input(k) if k >= n_inputs => {
                        return Err(Error::invalid(format!("input slot {k} >= n_inputs {n_inputs}")))
                    }
                    Slot::Fixed(v) if !v.is_finite() => {
                        return Err(Error::invalid("fixed angle must be finite"))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            n_qubits,
            gates,
            n_params,
            n_inputs,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub(crate) fn check_args(&self, params: &[f64], inputs: &[f64]) -> Result<()> {
        check_len("circuit parameters", self.n_params, params.len())?;
        check_len("circuit inputs", self.n_inputs, inputs.len())
    }

    /// Runs `gates[start..]` on `state` in place.
    pub(crate) fn evolve_from(&self, state: &mut Statevector, start: usize, params: &[f64], inputs: &[f64]) {
        let mut angles = [0.0; 3];
        for gate in &self.gates[start..] {
            let slots = gate.slots();
            for (a, s) in angles.iter_mut().zip(slots) {
                *a = s.resolve(params, inputs);
            }
            state.apply_unchecked(gate, &angles[..slots.len()]);
        }
    }

    /// Final state after running the whole circuit from `|0…0⟩`.
    pub fn final_state(&self, params: &[f64], inputs: &[f64]) -> Result<Statevector> {
        self.check_args(params, inputs)?;
        let mut state = Statevector::new(self.n_qubits)?;
        self.evolve_from(&mut state, 0, params, inputs);
        Ok(state)
    }
}

/// Per-wire `⟨Z⟩` after running `circuit` from `|0…0⟩`.
pub fn run_circuit(circuit: &CircuitSpec, params: &[f64], inputs: &[f64]) -> Result<Vec<f64>> {
    Ok(circuit.final_state(params, inputs)?.expectations())
}

/// Incremental circuit construction with automatic parameter-slot allocation.
#[derive(Debug)]
pub struct CircuitBuilder {
    n_qubits: usize,
    n_inputs: usize,
    n_params: usize,
    gates: Vec<Gate>,
}

impl CircuitBuilder {
    pub fn new(n_qubits: usize, n_inputs: usize) -> Self {
        Self {
            n_qubits,
            n_inputs,
            n_params: 0,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Allocates a fresh trainable slot.
    pub fn param(&mut self) -> Slot {
        self.n_params += 1;
        Slot::Param(self.n_params - 1)
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    /// `ROT` with three freshly allocated parameters.
    pub fn trainable_rot(&mut self, wire: usize) -> &mut Self {
        let angles = [self.param(), self.param(), self.param()];
        self.push(Gate::Rot { wire, angles })
    }

    pub fn build(self) -> Result<CircuitSpec> {
        CircuitSpec::new(self.n_qubits, self.gates, self.n_params, self.n_inputs)
    }
}
