//! Noisy Monte-Carlo channels of the six native gates with their error
//! budget.

use spinqubit::device::DeviceModel;
use spinqubit::dynamics::NoiseSpec;
use spinqubit::gates::{ideal_params, GateCompiler};
use spinqubit::gst::GateLabel;
use spinqubit::metrics::GateMetrics;

fn main() -> spinqubit::Result<()> {
    let m = DeviceModel::reference();
    let c = GateCompiler::new(m.clone(), ideal_params(&m)?)?;
    let spec = NoiseSpec::from_model(&m, 5);
    println!("gate  F_gate     eps_J      theta_J    largest Hamiltonian term");
    for g in GateLabel::GATES {
        let met = GateMetrics::compute(g, &c.channel(g, &spec, 200)?)?;
        let (k, v) = met.hamiltonian_errors.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).expect("15 terms");
        println!("{:<5} {:.6}  {:.3e}  {:.3e}  {k}={v:+.4}", met.gate, met.f_gate, met.epsilon_j, met.theta_j);
    }
    Ok(())
}
