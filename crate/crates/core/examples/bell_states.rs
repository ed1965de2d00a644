//! Bell states reconstructed from a noisy compiled gate set.

use spinqubit::device::DeviceModel;
use spinqubit::dynamics::NoiseSpec;
use spinqubit::gates::{ideal_params, GateCompiler};
use spinqubit::gst::model::SpamModel;
use spinqubit::metrics::bell_states;

fn main() -> spinqubit::Result<()> {
    let m = DeviceModel::reference();
    let c = GateCompiler::new(m.clone(), ideal_params(&m)?)?;
    let gs = c.gate_set(&NoiseSpec::from_model(&m, 2), 100, &SpamModel::perfect())?;
    for s in bell_states(&gs)? {
        println!("{:<5} F {:.5}  min eig {:+.2e}  physical {}", s.name, s.fidelity, s.min_eigenvalue, s.physical);
    }
    Ok(())
}
