//! Circuit derivatives by the parameter-shift rule.
//!
//! Every angle is the argument of a rotation `exp(-i α P / 2)` with a Pauli
//! generator `P`, so `∂⟨Z⟩/∂α = (E(α + π/2) − E(α − π/2)) / 2` exactly. A slot
//! bound by several gates (re-uploaded inputs) accumulates one such term per
//! occurrence. Input slots are differentiated the same way, which is what lets
//! classical layers in front of a circuit receive gradients.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::sim::{CircuitSpec, Slot, Statevector};

/// `∂⟨Z_w⟩/∂slot` for every wire (rows) and every slot (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitJacobian {
    /// `d_params[w][j] = ∂⟨Z_w⟩/∂params[j]`
    pub d_params: Vec<Vec<f64>>,
    /// `d_inputs[w][k] = ∂⟨Z_w⟩/∂inputs[k]`
    pub d_inputs: Vec<Vec<f64>>,
}

impl CircuitJacobian {
    fn zeros(circuit: &CircuitSpec) -> Self {
        let n = circuit.n_qubits();
        Self {
            d_params: vec![vec![0.0; circuit.n_params()]; n],
            d_inputs: vec![vec![0.0; circuit.n_inputs()]; n],
        }
    }

    /// Largest absolute entry-wise difference over both blocks.
    pub fn max_abs_diff(&self, other: &CircuitJacobian) -> f64 {
        let rows = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter()
                .zip(b)
                .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        };
        rows(&self.d_params, &other.d_params).max(rows(&self.d_inputs, &other.d_inputs))
    }
}

/// Exact jacobian by forward re-evaluation at ±π/2 shifts of each slot occurrence.
///
/// The state before each gate is reused, so each shifted evaluation only
/// replays the suffix of the circuit.
pub fn circuit_jacobian(circuit: &CircuitSpec, params: &[f64], inputs: &[f64]) -> Result<CircuitJacobian> {
    jacobian_scoped(circuit, params, inputs, true)
}

/// As [`circuit_jacobian`]; input columns are left at zero unless `with_inputs`.
pub(crate) fn jacobian_scoped(
    circuit: &CircuitSpec,
    params: &[f64],
    inputs: &[f64],
    with_inputs: bool,
) -> Result<CircuitJacobian> {
    circuit.check_args(params, inputs)?;
    let mut jac = CircuitJacobian::zeros(circuit);
    let mut prefix = Statevector::new(circuit.n_qubits())?;
    let mut angles = [0.0; 3];

    for (g, gate) in circuit.gates().iter().enumerate() {
        let slots = gate.slots();
        for (a, s) in angles.iter_mut().zip(slots) {
            *a = s.resolve(params, inputs);
        }
        let arity = slots.len();

        for (pos, slot) in slots.iter().enumerate() {
            let column = match *slot {
                Slot::Param(j) => (&mut jac.d_params, j),
                Slot::Input(k) if with_inputs => (&mut jac.d_inputs, k),
                Slot::Input(_) | Slot::Fixed(_) => continue,
            };
            let shifted = |delta: f64| {
                let mut st = prefix.clone();
                let mut a = angles;
                a[pos] += delta;
                st.apply_unchecked(gate, &a[..arity]);
                circuit.evolve_from(&mut st, g + 1, params, inputs);
                st.expectations()
            };
            let plus = shifted(FRAC_PI_2);
            let minus = shifted(-FRAC_PI_2);
            let (block, col) = column;
            for (w, row) in block.iter_mut().enumerate() {
                row[col] += (plus[w] - minus[w]) / 2.0;
            }
        }
        prefix.apply_unchecked(gate, &angles[..arity]);
    }
    Ok(jac)
}

/// Central finite differences `(E(x + h) − E(x − h)) / 2h` per slot. Test oracle.
pub fn finite_diff_jacobian(circuit: &CircuitSpec, params: &[f64], inputs: &[f64], h: f64) -> Result<CircuitJacobian> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    circuit.check_args(params, inputs)?;
    let mut jac = CircuitJacobian::zeros(circuit);
    let eval = |p: &[f64], x: &[f64]| crate::sim::run_circuit(circuit, p, x);

    let mut p = params.to_vec();
    for j in 0..params.len() {
        p[j] = params[j] + h;
        let plus = eval(&p, inputs)?;
        p[j] = params[j] - h;
        let minus = eval(&p, inputs)?;
        p[j] = params[j];
        for (w, row) in jac.d_params.iter_mut().enumerate() {
            row[j] = (plus[w] - minus[w]) / (2.0 * h);
        }
    }
    let mut x = inputs.to_vec();
    for k in 0..inputs.len() {
        x[k] = inputs[k] + h;
        let plus = eval(params, &x)?;
        x[k] = inputs[k] - h;
        let minus = eval(params, &x)?;
        x[k] = inputs[k];
        for (w, row) in jac.d_inputs.iter_mut().enumerate() {
            row[k] = (plus[w] - minus[w]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CircuitBuilder, Gate};

    fn single_rx() -> CircuitSpec {
        CircuitSpec::new(1, vec![Gate::Rx { wire: 0, angle: Slot::Param(0) }], 1, 0).unwrap()
    }

    #[test]
    fn rx_derivative_is_minus_sine() {
        let c = single_rx();
        let j = circuit_jacobian(&c, &[FRAC_PI_2], &[]).unwrap();
        assert!((j.d_params[0][0] + 1.0).abs() < 1e-10);
        let j = circuit_jacobian(&c, &[0.0], &[]).unwrap();
        assert!(j.d_params[0][0].abs() < 1e-12);
    }

    #[test]
    fn finite_difference_examples() {
        let c = single_rx();
        let j = finite_diff_jacobian(&c, &[1.0], &[], 1e-5).unwrap();
        assert!((j.d_params[0][0] + 1.0f64.sin()).abs() < 1e-8);
        assert!(finite_diff_jacobian(&c, &[1.0], &[], 0.0).is_err());

        // all gates are identities at zero angle and no slot is trainable
        let id = CircuitSpec::new(2, vec![Gate::Cnot { control: 0, target: 1 }], 0, 0).unwrap();
        let j = finite_diff_jacobian(&id, &[], &[], 1e-5).unwrap();
        assert!(j.d_params.iter().all(|r| r.is_empty()));
        let idp = CircuitSpec::new(
            2,
            vec![
                Gate::Rx { wire: 0, angle: Slot::Param(0) },
                Gate::Rot { wire: 1, angles: [Slot::Param(1), Slot::Input(0), Slot::Param(2)] },
            ],
            3,
            1,
        )
        .unwrap();
        let j = finite_diff_jacobian(&idp, &[0.0; 3], &[0.0], 1e-5).unwrap();
        assert!(j.d_params.iter().chain(&j.d_inputs).flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn fixed_slots_have_no_gradient_and_length_errors_propagate() {
        let c = CircuitSpec::new(1, vec![Gate::Rot { wire: 0, angles: [Slot::Input(0), Slot::Fixed(0.4), Slot::Param(0)] }], 1, 1)
            .unwrap();
        let ps = circuit_jacobian(&c, &[0.2], &[0.9]).unwrap();
        let fd = finite_diff_jacobian(&c, &[0.2], &[0.9], 1e-5).unwrap();
        assert!(ps.max_abs_diff(&fd) < 1e-8);
        assert!(circuit_jacobian(&c, &[], &[0.9]).is_err());
    }

    /// Builds a 2-qubit circuit where the slot `Param(0)` is bound by `k` gates.
    fn repeated(k: usize) -> CircuitSpec {
        let mut b = CircuitBuilder::new(2, 1);
        let shared = b.param();
        b.push(Gate::Rx { wire: 0, angle: Slot::Input(0) });
        for i in 0..k {
            b.trainable_rot(i % 2);
            b.push(Gate::Ry { wire: i % 2, angle: shared });
            b.push(Gate::Cnot { control: 0, target: 1 });
        }
        b.build().unwrap()
    }

    #[test]
    fn shared_slot_accumulates_each_occurrence() {
        for k in 1..=3 {
            let c = repeated(k);
            let params: Vec<f64> = (0..c.n_params()).map(|i| 0.37 * i as f64 - 0.8).collect();
            let inputs = [0.45];
            let ps = circuit_jacobian(&c, &params, &inputs).unwrap();

            // Rebuild with each occurrence as its own slot and sum those columns.
            let mut split = Vec::new();
            let mut next = c.n_params();
            let mut occ = Vec::new();
            for g in c.gates() {
                match g {
                    Gate::Ry { wire, angle: Slot::Param(0) } => {
                        split.push(Gate::Ry { wire: *wire, angle: Slot::Param(next) });
                        occ.push(next);
                        next += 1;
                    }
                    other => split.push(other.clone()),
                }
            }
            let split_c = CircuitSpec::new(2, split, next, 1).unwrap();
            let mut split_p = params.clone();
            split_p.extend(occ.iter().map(|_| params[0]));
            let sj = circuit_jacobian(&split_c, &split_p, &inputs).unwrap();
            for w in 0..2 {
                let sum: f64 = occ.iter().map(|&j| sj.d_params[w][j]).sum();
                assert!((ps.d_params[w][0] - sum).abs() < 1e-12, "k={k} w={w}");
            }
        }
    }
}
