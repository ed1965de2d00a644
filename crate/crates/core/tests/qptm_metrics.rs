use nalgebra::DMatrix;
use proptest::prelude::*;
use spinqubit::gates::ptm16;
use spinqubit::gst::model::{from_m16, target_ptm, target_unitary};
use spinqubit::gst::GateLabel;
use spinqubit::linalg::{CMat4, C64};
use spinqubit::metrics::*;
use spinqubit::qptm::*;

fn ptm(u: &CMat4) -> PauliTransferMatrix {
    PauliTransferMatrix::new(2, from_m16(&ptm16(u))).unwrap()
}

/// exp(−i Σ a_k P_k / 2) for an arbitrary coefficient vector.
fn random_unitary(a: &[f64]) -> CMat4 {
    let mut u = CMat4::identity();
    for (k, t) in a.iter().enumerate() {
        u = pauli_rotation(k + 1, *t) * u;
    }
    u
}

fn gate() -> impl Strategy<Value = GateLabel> {
    prop::sample::select(GateLabel::GATES.to_vec())
}

proptest! {
    #[test]
    fn unitary_ptms_are_orthogonal_and_cptp(a in prop::collection::vec(-3.0f64..3.0, 15)) {
        let m = ptm(&random_unitary(&a));
        let e = m.entries();
        prop_assert!((e.transpose() * e - DMatrix::identity(16, 16)).abs().max() < 1e-12);
        prop_assert!(m.is_trace_preserving(1e-12));
        prop_assert!(m.min_choi_eigenvalue() > -1e-12);
    }

    #[test]
    fn ptm_composition_is_a_homomorphism(a in prop::collection::vec(-3.0f64..3.0, 15), b in prop::collection::vec(-3.0f64..3.0, 15)) {
        let (u, v) = (random_unitary(&a), random_unitary(&b));
        let lhs = ptm(&(u * v));
        let rhs = ptm(&u).compose(&ptm(&v));
        prop_assert!((lhs.entries() - rhs.entries()).abs().max() < 1e-12);
    }

    #[test]
    fn hamiltonian_projection_recovers_a_pauli_rotation(k in 1usize..16, theta in -0.2f64..0.2, g in gate()) {
        prop_assume!(theta.abs() > 1e-4);
        let u = pauli_rotation(k, theta) * target_unitary(g);
        let l = ErrorGenerator::between(&ptm(&u), &target_ptm(g)).unwrap();
        let h = hamiltonian_projection(&l).unwrap();
        let name = ["I", "X", "Y", "Z"];
        let label = format!("{}{}", name[k / 4], name[k % 4]);
        prop_assert!((h[&label] - theta).abs() < 1e-9, "{label}: {} vs {theta}", h[&label]);
        for (other, v) in &h {
            if *other != label {
                prop_assert!(v.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn depolarizing_fidelity_closed_form(p in 0.0f64..0.2, g in gate()) {
        let ideal = target_ptm(g);
        let noisy = PauliTransferMatrix::depolarizing(2, 1.0 - p).compose(&ideal);
        let f = average_gate_fidelity(&noisy, &ideal).unwrap();
        prop_assert!((f - (1.0 - 0.75 * p)).abs() < 1e-12);
    }

    #[test]
    fn operand_orders_agree_for_unitary_errors(k in 1usize..16, theta in -0.3f64..0.3, g in gate()) {
        let u = pauli_rotation(k, theta) * target_unitary(g);
        let (m, ideal) = (ptm(&u), target_ptm(g));
        let a = average_gate_fidelity(&m, &ideal).unwrap();
        prop_assert!((a - average_gate_fidelity_printed_order(&m, &ideal).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn coherent_infidelity_matches_jamiolkowski_form(k in 1usize..16, theta in 1e-3f64..0.1, g in gate()) {
        let u = pauli_rotation(k, theta) * target_unitary(g);
        let m = GateMetrics::compute(g, &ptm(&u)).unwrap();
        // 1 − F = (4/5) sin²(θ/2) for a single Pauli rotation
        let oracle = 0.8 * (theta / 2.0).sin().powi(2);
        prop_assert!(((1.0 - m.f_gate) / oracle - 1.0).abs() < 1e-8);
        prop_assert!((m.jamiolkowski_infidelity() / oracle - 1.0).abs() < 0.01);
        prop_assert!(m.epsilon_j.abs() < 1e-10);
    }

    #[test]
    fn trace_distance_is_a_metric(
        a in prop::collection::vec(-1.0f64..1.0, 15),
        b in prop::collection::vec(-1.0f64..1.0, 15),
        c in prop::collection::vec(-1.0f64..1.0, 15),
    ) {
        let (m1, m2, m3) = (ptm(&random_unitary(&a)), ptm(&random_unitary(&b)), ptm(&random_unitary(&c)));
        let d = trace_distance(&m1, &m2).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= trace_distance(&m1, &m3).unwrap() + trace_distance(&m3, &m2).unwrap() + 1e-10);
        prop_assert!((d - trace_distance(&m2, &m1).unwrap()).abs() < 1e-10);
        prop_assert!(trace_distance(&m1, &m1).unwrap().abs() < 1e-10);
    }
}

#[test]
fn density_matrix_validation() {
    let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.5, 0.0); 4]));
    assert!(DensityMatrix::new(bad).is_err());
    let rho = DensityMatrix::basis(0);
    assert!((rho.purity() - 1.0).abs() < 1e-15);
    let back = DensityMatrix::from_pauli_vector(&rho.pauli_vector());
    assert!((back.entries() - rho.entries()).norm() < 1e-15);
}

#[test]
fn subspace_fidelity_ignores_the_other_qubit() {
    // a rotation on Q2 leaves the Q1 subspace of X1 untouched
    let u = pauli_rotation(pauli_index("IX").unwrap(), 0.3) * target_unitary(GateLabel::X1);
    let f = subspace_fidelity(&ptm(&u), &target_ptm(GateLabel::X1), 1).unwrap();
    assert!((f - 1.0).abs() < 1e-12);
    assert!(subspace_fidelity(&ptm(&u), &target_ptm(GateLabel::X1), 2).unwrap() < 0.99);
}

#[test]
fn matrix_log_rejects_negative_eigenvalues() {
    // a π rotation has eigenvalues −1 and no real logarithm
    let m = ptm(&pauli_rotation(pauli_index("XI").unwrap(), std::f64::consts::PI));
    assert!(real_matrix_log(m.entries()).is_err());
}
