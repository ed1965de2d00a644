use nalgebra::{Complex, Matrix4};
use proptest::prelude::*;
use spinqubit::qptm::pauli_2q;
use spinqubit::vqe::*;

/// Hamiltonian built from Pauli strings, independently of `H2Hamiltonian::matrix`.
fn pauli_sum(h: &[f64; 6]) -> Matrix4<f64> {
    // II, ZI, IZ, ZZ, XX, YY with index 4·a + b
    let idx = [0, 12, 3, 15, 5, 10];
    let mut m = Matrix4::<Complex<f64>>::zeros();
    for (c, k) in h.iter().zip(idx) {
        m += pauli_2q(k) * Complex::new(*c, 0.0);
    }
    assert!(m.map(|z| z.im.abs()).max() < 1e-15);
    m.map(|z| z.re)
}

#[test]
fn reference_table_is_pinned_and_physical() {
    let t = CoefficientTable::reference().unwrap();
    assert!(t.rows.len() >= 20);
    let eq = t.nearest(0.7414);
    assert!((eq.r_angstrom - 0.7414).abs() < 1e-9);
    let e = exact_ground_energy(eq);
    assert!((e + 1.137271).abs() < 2e-6, "{e}");
}

#[test]
fn tampered_table_fails_checksum() {
    let text = "R_angstrom,h0,h1,h2,h3,h4,h5\n0.7414,-0.3,0.1,0.1,0.2,0.09,0.09\n";
    assert!(CoefficientTable::parse(text).is_ok());
    assert!(CoefficientTable::parse_verified(text, &"0".repeat(64)).is_err());
    assert!(CoefficientTable::parse("R_angstrom,h0\n0.7,1\n").is_err());
}

#[test]
fn matrix_matches_pauli_sum_and_oracle() {
    for row in &CoefficientTable::reference().unwrap().rows {
        let oracle = pauli_sum(&row.h);
        assert!((row.matrix() - oracle).abs().max() < 1e-14);
        let min = oracle.symmetric_eigenvalues().min();
        assert!((exact_ground_energy(row) - min).abs() < 1e-12);
    }
}

#[test]
fn noiseless_curve_matches_diagonalization() {
    let t = CoefficientTable::reference().unwrap();
    let curve = dissociation_curve(&t, &VqeConfig::noiseless()).unwrap();
    for p in &curve {
        let oracle = pauli_sum(&t.nearest(p.r_angstrom).h).symmetric_eigenvalues().min();
        assert!((p.e_vqe_hartree - oracle).abs() < 1e-9, "R = {}", p.r_angstrom);
    }
    let m = curve_minimum(&curve).unwrap();
    assert!((0.70..=0.76).contains(&m.r_angstrom));
}

#[test]
fn curve_csv_has_header_and_rows() {
    let t = CoefficientTable::reference().unwrap();
    let curve = dissociation_curve(&t, &VqeConfig::noiseless()).unwrap();
    let mut buf = Vec::new();
    write_curve_csv(&curve, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "R_angstrom,theta_min_rad,E_vqe_hartree,E_exact_hartree");
    assert_eq!(text.lines().count(), curve.len() + 1);
}

#[test]
fn sinusoid_fit_needs_five_points() {
    assert!(fit_sinusoid(&[0.0; 4]).is_err());
    assert!(fit_sinusoid(&[0.0; 5]).is_ok());
}

#[test]
fn bad_readout_is_rejected() {
    assert!(ReadoutModel { f0: [1.2, 1.0], ..ReadoutModel::perfect() }.validate().is_err());
    assert!(ReadoutModel::reference().validate().is_ok());
}

proptest! {
    #[test]
    fn ansatz_stays_in_single_excitation_subspace(theta in -3.2f64..3.2) {
        let psi = circuit_state(&ansatz_circuit(theta));
        prop_assert!(psi[0].norm() < 1e-12 && psi[3].norm() < 1e-12);
        prop_assert!((psi[1].norm() - theta.cos().abs()).abs() < 1e-12);
    }

    #[test]
    fn noiseless_terms_follow_closed_form(theta in -3.2f64..3.2) {
        let e = measure_terms(theta, &VqeConfig::noiseless(), 0).unwrap();
        prop_assert!((e.zz + 1.0).abs() < 1e-12);
        prop_assert!((e.xx + (2.0 * theta).sin()).abs() < 1e-12);
        prop_assert!((e.yy - e.xx).abs() < 1e-12);
        prop_assert!((e.zi - (2.0 * theta).cos()).abs() < 1e-12);
        prop_assert!((e.iz + e.zi).abs() < 1e-12);
    }

    #[test]
    fn noiseless_energies_are_an_exact_sinusoid(n in 5usize..40, row in 0usize..20) {
        let t = CoefficientTable::reference().unwrap();
        let h = &t.rows[row % t.rows.len()];
        let es: Vec<f64> = theta_grid(n).iter().map(|th| h.energy(&measure_terms(*th, &VqeConfig::noiseless(), 0).unwrap())).collect();
        prop_assert!(fit_sinusoid(&es).unwrap().rms_residual < 1e-12);
    }

    #[test]
    fn readout_preserves_normalization(p in proptest::array::uniform4(0.0f64..1.0)) {
        let s: f64 = p.iter().sum();
        prop_assume!(s > 1e-3);
        let p = p.map(|x| x / s);
        let q = ReadoutModel::reference().apply(&p);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.iter().all(|x| *x >= 0.0));
    }
}
