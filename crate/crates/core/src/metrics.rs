//! Figures of merit for estimated gates.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::gst::model::{target_ptm, GateSet};
use crate::gst::GateLabel;
use crate::linalg::{C64, ZERO};
use crate::qptm::{
    pauli_2q, pauli_rotation, project_subspace, ptm_from_unitary_unchecked, DensityMatrix, ErrorGenerator,
    PauliTransferMatrix, PAULI_LABELS_2Q,
};
use crate::{Error, Result};

/// The Hamiltonian coefficients used for calibration feedback.
pub const FEEDBACK_LABELS: [&str; 7] = ["IX", "IY", "XI", "YI", "ZI", "IZ", "ZZ"];

fn dim(m: &PauliTransferMatrix) -> f64 {
    if m.n_qubits() == 2 {
        4.0
    } else {
        2.0
    }
}

/// `(Tr(M_ideal⁻¹ M_exp) + d) / (d(d + 1))`.
pub fn average_gate_fidelity(m_exp: &PauliTransferMatrix, m_ideal: &PauliTransferMatrix) -> Result<f64> {
    if m_exp.dim() != m_ideal.dim() {
        return Err(Error::DimensionMismatch { expected: m_ideal.dim(), got: m_exp.dim() });
    }
    let d = dim(m_ideal);
    let t = (m_ideal.inverse()?.entries() * m_exp.entries()).trace();
    Ok((t + d) / (d * (d + 1.0)))
}

/// Same formula with the operands in the printed order, `Tr(M_exp⁻¹ M_ideal)`.
pub fn average_gate_fidelity_printed_order(m_exp: &PauliTransferMatrix, m_ideal: &PauliTransferMatrix) -> Result<f64> {
    let d = dim(m_ideal);
    let t = (m_exp.inverse()?.entries() * m_ideal.entries()).trace();
    Ok((t + d) / (d * (d + 1.0)))
}

/// Fidelity of the single-qubit block of a two-qubit PTM (qubit 1 or 2).
pub fn subspace_fidelity(m_exp: &PauliTransferMatrix, m_ideal: &PauliTransferMatrix, qubit: usize) -> Result<f64> {
    let inv = m_ideal.inverse()?;
    let a = project_subspace(&inv, qubit)?;
    let b = project_subspace(m_exp, qubit)?;
    let t = (a.entries() * b.entries()).trace();
    Ok((t + 2.0) / 6.0)
}

/// `Σ σ_i(M₁ − M₂) / 2`.
pub fn trace_distance(m1: &PauliTransferMatrix, m2: &PauliTransferMatrix) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch { expected: m1.dim(), got: m2.dim() });
    }
    Ok((m1.entries() - m2.entries()).singular_values().sum() / 2.0)
}

/// Hamiltonian projection of a two-qubit error generator:
/// `H_k = −(i/d²) Tr[(P_kᵀ⊗1 − 1⊗P_k) L_sup]` for the 15 non-identity
/// Paulis. A pure `exp(−iθP/2)` error gives `H_P = θ`.
pub fn hamiltonian_projection(l: &ErrorGenerator) -> Result<BTreeMap<String, f64>> {
    if l.entries().nrows() != 16 {
        return Err(Error::DimensionMismatch { expected: 16, got: l.entries().nrows() });
    }
    let sup = l.as_ptm().superoperator();
    let id = DMatrix::<C64>::identity(4, 4);
    let mut out = BTreeMap::new();
    for k in 1..16 {
        let p = DMatrix::from_fn(4, 4, |r, c| pauli_2q(k)[(r, c)]);
        let op = p.transpose().kronecker(&id) - id.kronecker(&p);
        let t = (op * &sup).trace();
        let h = (C64::new(0.0, -1.0) * t / 16.0).re;
        out.insert(PAULI_LABELS_2Q[k].to_string(), h);
    }
    Ok(out)
}

/// The seven feedback coefficients in [`FEEDBACK_LABELS`] order.
pub fn feedback_coefficients(h: &BTreeMap<String, f64>) -> [f64; 7] {
    FEEDBACK_LABELS.map(|k| h.get(k).copied().unwrap_or(0.0))
}

/// Jamiolkowski probability and amplitude. `ρ_J` is the Choi matrix of the
/// generator with `|Ψ⟩ = Σ_i |i⟩_sys|i⟩_ref / 2` (system index major).
pub fn jamiolkowski_metrics(l: &ErrorGenerator) -> Result<(f64, f64)> {
    let n = l.entries().nrows();
    let d = if n == 16 { 4 } else if n == 4 { 2 } else { return Err(Error::DimensionMismatch { expected: 16, got: n }) };
    let rho = l.as_ptm().choi();
    let psi = DVector::from_fn(d * d, |idx, _| {
        if idx / d == idx % d {
            C64::new(1.0 / (d as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let w = &rho * &psi;
    let overlap = psi.dotc(&w);
    let eps = -overlap.re;
    let perp = &w - &psi * overlap;
    Ok((eps, perp.norm()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateMetrics {
    pub gate: String,
    pub f_gate: f64,
    /// Printed-operand-order fidelity, reported alongside.
    pub f_gate_printed_order: f64,
    pub f_sub: [f64; 2],
    pub epsilon_j: f64,
    pub theta_j: f64,
    pub trace_distance: f64,
    pub hamiltonian_errors: BTreeMap<String, f64>,
}

impl GateMetrics {
    pub fn compute(label: GateLabel, m_exp: &PauliTransferMatrix) -> Result<Self> {
        let ideal = target_ptm(label);
        let l = ErrorGenerator::between(m_exp, &ideal)?;
        let (epsilon_j, theta_j) = jamiolkowski_metrics(&l)?;
        Ok(Self {
            gate: label.name().to_string(),
            f_gate: average_gate_fidelity(m_exp, &ideal)?,
            f_gate_printed_order: average_gate_fidelity_printed_order(m_exp, &ideal)?,
            f_sub: [subspace_fidelity(m_exp, &ideal, 1)?, subspace_fidelity(m_exp, &ideal, 2)?],
            epsilon_j,
            theta_j,
            trace_distance: trace_distance(m_exp, &ideal)?,
            hamiltonian_errors: hamiltonian_projection(&l)?,
        })
    }

    /// `(d/(d+1))(ε_J + θ_J²)`.
    pub fn jamiolkowski_infidelity(&self) -> f64 {
        0.8 * (self.epsilon_j + self.theta_j * self.theta_j)
    }
}

pub fn gate_set_metrics(gs: &GateSet) -> Result<Vec<GateMetrics>> {
    GateLabel::GATES.iter().map(|l| GateMetrics::compute(*l, &gs.gate_ptm(*l))).collect()
}

/// One step of a state-reconstruction circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitStep {
    Gate(GateLabel),
    /// Virtual π rotation about z on qubit 1 or 2, applied exactly.
    VirtualZ2(usize),
}

/// The four Bell-state circuits, in time order, with their targets.
pub fn bell_circuits() -> Vec<(&'static str, Vec<CircuitStep>, [C64; 4])> {
    use CircuitStep::*;
    use GateLabel::*;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |a: f64, b: f64, cc: f64, d: f64| [C64::new(a, 0.0), C64::new(b, 0.0), C64::new(cc, 0.0), C64::new(d, 0.0)];
    let psi = vec![Gate(Y1), Gate(Y2), Gate(CZ), Gate(Y2)];
    let phi = vec![Gate(Y1), Gate(Y2), Gate(CZ), Gate(Y2), Gate(Y2), Gate(Y2)];
    let with_z = |mut v: Vec<CircuitStep>| {
        v.push(VirtualZ2(1));
        v
    };
    vec![
        ("Psi+", psi.clone(), c(0.0, h, h, 0.0)),
        ("Psi-", with_z(psi), c(0.0, h, -h, 0.0)),
        ("Phi+", with_z(phi.clone()), c(h, 0.0, 0.0, h)),
        ("Phi-", phi, c(h, 0.0, 0.0, -h)),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateReconstruction {
    pub name: String,
    pub fidelity: f64,
    /// Smallest eigenvalue; below −1e−6 the state is flagged non-physical.
    pub min_eigenvalue: f64,
    pub physical: bool,
    pub density: crate::qptm::DensityJson,
}

/// Applies the composed PTMs of `steps` to `prep` and compares with `target`.
pub fn reconstruct_state(
    name: &str,
    steps: &[CircuitStep],
    gates: &GateSet,
    prep: &DensityMatrix,
    target: &[C64],
) -> Result<StateReconstruction> {
    let mut m = PauliTransferMatrix::identity(2);
    for s in steps {
        let step = match s {
            CircuitStep::Gate(GateLabel::Null) => continue,
            CircuitStep::Gate(l) => gates.gate_ptm(*l),
            CircuitStep::VirtualZ2(q) => {
                let k = match q {
                    1 => 12,
                    2 => 3,
                    q => return Err(Error::InvalidQubit(*q)),
                };
                ptm_from_unitary_unchecked(&pauli_rotation(k, std::f64::consts::PI))
            }
        };
        m = step.compose(&m);
    }
    let v = DVector::from_vec(prep.pauli_vector());
    let out = m.entries() * v;
    let rho = DensityMatrix::from_pauli_vector(out.as_slice());
    let min_eigenvalue = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
    // clip only for the reported fidelity
    let fidelity = if min_eigenvalue < 0.0 { rho.clipped().fidelity_to_pure(target) } else { rho.fidelity_to_pure(target) };
    Ok(StateReconstruction {
        name: name.to_string(),
        fidelity,
        min_eigenvalue,
        physical: min_eigenvalue >= -1e-6,
        density: rho.to_json(),
    })
}

/// All four Bell states from a gate set, starting from ideal `|00⟩`.
pub fn bell_states(gates: &GateSet) -> Result<Vec<StateReconstruction>> {
    let prep = DensityMatrix::basis(0);
    bell_circuits().iter().map(|(n, s, t)| reconstruct_state(n, s, gates, &prep, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_fidelity_and_zero_distance() {
        let m = PauliTransferMatrix::identity(2);
        assert!((average_gate_fidelity(&m, &m).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&m, &m).unwrap().abs() < 1e-14);
    }

    #[test]
    fn zi_rotation_projects_to_its_angle() {
        let theta = 0.02;
        let e = ptm_from_unitary_unchecked(&pauli_rotation(12, theta));
        let l = crate::qptm::real_matrix_log(e.entries()).unwrap();
        let h = hamiltonian_projection(&l).unwrap();
        for (k, v) in &h {
            if k == "ZI" {
                assert!((v - theta).abs() < 1e-9, "{v}");
            } else {
                assert!(v.abs() < 1e-10, "{k}: {v}");
            }
        }
    }

    #[test]
    fn ideal_bell_circuits_give_pure_targets() {
        for s in bell_states(&GateSet::target()).unwrap() {
            assert!((s.fidelity - 1.0).abs() < 1e-12, "{}: {}", s.name, s.fidelity);
        }
    }
}
