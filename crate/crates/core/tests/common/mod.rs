//! Reference implementations shared by the integration tests and the acceptance run.
//! Nothing here calls into the simulator kernels it is used to check.

#![allow(dead_code, clippy::needless_range_loop)]

use hqclass::model::HybridModel;
use hqclass::sim::{CircuitSpec, Gate, Slot};
use num_complex::Complex64 as C;
use rand::Rng;

pub type Matrix = Vec<Vec<C>>;

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }).collect())
        .collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![C::new(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &Matrix, v: &[C]) -> Vec<C> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn pauli(p: char) -> Matrix {
    let (o, z, i) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0));
    match p {
        'X' => vec![vec![z, o], vec![o, z]],
        'Y' => vec![vec![z, -i], vec![i, z]],
        'Z' => vec![vec![o, z], vec![z, -o]],
        _ => unreachable!(),
    }
}

/// `exp(-i a P / 2) = cos(a/2) I - i sin(a/2) P`
pub fn pauli_rotation(p: char, a: f64) -> Matrix {
    let (s, c) = (a / 2.0).sin_cos();
    let pm = pauli(p);
    (0..2)
        .map(|i| {
            (0..2)
                .map(|j| C::new(if i == j { c } else { 0.0 }, 0.0) - C::new(0.0, s) * pm[i][j])
                .collect()
        })
        .collect()
}

/// `1 ⊗ … ⊗ m ⊗ … ⊗ 1` with wire 0 as the leftmost (most significant) factor.
pub fn on_wire(n: usize, wire: usize, m: &Matrix) -> Matrix {
    let mut out = vec![vec![C::new(1.0, 0.0)]];
    for w in 0..n {
        out = kron(&out, if w == wire { m } else { &IDENTITY2 });
    }
    out
}

static IDENTITY2: std::sync::LazyLock<Matrix> = std::sync::LazyLock::new(|| identity(2));

pub fn cnot(n: usize, control: usize, target: usize) -> Matrix {
    let dim = 1 << n;
    let bit = |i: usize, w: usize| (i >> (n - 1 - w)) & 1;
    let mut out = vec![vec![C::new(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        let j = if bit(i, control) == 1 { i ^ (1 << (n - 1 - target)) } else { i };
        out[j][i] = C::new(1.0, 0.0);
    }
    out
}

fn resolve(s: Slot, params: &[f64], inputs: &[f64]) -> f64 {
    match s {
        Slot::Param(j) => params[j],
        Slot::Input(k) => inputs[k],
        Slot::Fixed(v) => v,
    }
}

pub fn gate_matrix(n: usize, gate: &Gate, params: &[f64], inputs: &[f64]) -> Matrix {
    let r = |s: Slot| resolve(s, params, inputs);
    match *gate {
        Gate::Rx { wire, angle } => on_wire(n, wire, &pauli_rotation('X', r(angle))),
        Gate::Ry { wire, angle } => on_wire(n, wire, &pauli_rotation('Y', r(angle))),
        Gate::Rz { wire, angle } => on_wire(n, wire, &pauli_rotation('Z', r(angle))),
        Gate::Rot { wire, angles } => {
            let m = matmul(
                &pauli_rotation('Z', r(angles[2])),
                &matmul(&pauli_rotation('Y', r(angles[1])), &pauli_rotation('Z', r(angles[0]))),
            );
            on_wire(n, wire, &m)
        }
        Gate::Cnot { control, target } => cnot(n, control, target),
    }
}

pub fn oracle_state(circuit: &CircuitSpec, params: &[f64], inputs: &[f64]) -> Vec<C> {
    let n = circuit.n_qubits();
    let mut psi = vec![C::new(0.0, 0.0); 1 << n];
    psi[0] = C::new(1.0, 0.0);
    for g in circuit.gates() {
        psi = matvec(&gate_matrix(n, g, params, inputs), &psi);
    }
    psi
}

/// `⟨Z_w⟩ = Σ_i |ψ_i|² (1 − 2·bit_w(i))`
pub fn oracle_expectations(psi: &[C]) -> Vec<f64> {
    let n = psi.len().trailing_zeros() as usize;
    (0..n)
        .map(|w| {
            psi.iter()
                .enumerate()
                .map(|(i, a)| a.norm_sqr() * if (i >> (n - 1 - w)) & 1 == 1 { -1.0 } else { 1.0 })
                .sum()
        })
        .collect()
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vec<C> {
    let v: Vec<C> = (0..1 << n)
        .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

fn random_slot<R: Rng>(rng: &mut R, n_params: usize, n_inputs: usize) -> Slot {
    match rng.random_range(0..5) {
        0 | 1 if n_params > 0 => Slot::Param(rng.random_range(0..n_params)),
        2 | 3 if n_inputs > 0 => Slot::Input(rng.random_range(0..n_inputs)),
        _ => Slot::Fixed(rng.random_range(-3.0..3.0)),
    }
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize, n_params: usize, n_inputs: usize) -> Gate {
    let wire = rng.random_range(0..n);
    let kind = rng.random_range(0..if n > 1 { 5 } else { 4 });
    if kind == 4 {
        let target = (wire + rng.random_range(1..n)) % n;
        return Gate::Cnot { control: wire, target };
    }
    let mut s = || random_slot(rng, n_params, n_inputs);
    match kind {
        0 => Gate::Rx { wire, angle: s() },
        1 => Gate::Ry { wire, angle: s() },
        2 => Gate::Rz { wire, angle: s() },
        _ => Gate::Rot {
            wire,
            angles: [s(), s(), s()],
        },
    }
}

/// Random circuit with shared parameter and input slots.
pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, n_gates: usize) -> CircuitSpec {
    let n_params = rng.random_range(1..5);
    let n_inputs = rng.random_range(0..4);
    let gates = (0..n_gates).map(|_| random_gate(rng, n, n_params, n_inputs)).collect();
    CircuitSpec::new(n, gates, n_params, n_inputs).expect("valid random circuit")
}

pub fn random_vec<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// Central differences of the per-sample loss in every parameter.
pub fn fd_loss_gradient(model: &HybridModel, x: &[f64], y: f64, h: f64) -> Vec<f64> {
    let mut m = model.clone();
    (0..model.n_params())
        .map(|j| {
            let p0 = model.params()[j];
            m.params_mut()[j] = p0 + h;
            let up = m.loss(x, y).unwrap();
            m.params_mut()[j] = p0 - h;
            let down = m.loss(x, y).unwrap();
            m.params_mut()[j] = p0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖∞ / max(‖b‖∞, 1e-6)`
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-6);
    diff / scale
}

/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)` by counting all pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
