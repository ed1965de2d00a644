//! Error generator of a slightly over-rotated CZ and the metrics derived
//! from it.

use spinqubit::gates::{ptm16, unitary_fidelity};
use spinqubit::gst::model::{from_m16, target_unitary};
use spinqubit::gst::GateLabel;
use spinqubit::metrics::{hamiltonian_projection, jamiolkowski_metrics, GateMetrics};
use spinqubit::qptm::{pauli_index, pauli_rotation, ErrorGenerator, PauliTransferMatrix};

fn main() -> spinqubit::Result<()> {
    let zz = pauli_index("ZZ").expect("label");
    let zi = pauli_index("ZI").expect("label");
    let u = pauli_rotation(zi, 0.01) * pauli_rotation(zz, 0.03) * target_unitary(GateLabel::CZ);
    let ptm = PauliTransferMatrix::new(2, from_m16(&ptm16(&u)))?;
    let ideal = PauliTransferMatrix::new(2, from_m16(&ptm16(&target_unitary(GateLabel::CZ))))?;

    let l = ErrorGenerator::between(&ptm, &ideal)?;
    let h = hamiltonian_projection(&l)?;
    println!("ZZ {:+.4} ZI {:+.4} (injected 0.03, 0.01)", h["ZZ"], h["ZI"]);
    let (eps, theta) = jamiolkowski_metrics(&l)?;
    println!("eps_J {eps:.2e} theta_J {theta:.4}");

    let met = GateMetrics::compute(GateLabel::CZ, &ptm)?;
    println!("F_gate {:.6}  from unitary {:.6}", met.f_gate, unitary_fidelity(&u, &target_unitary(GateLabel::CZ)));
    Ok(())
}
