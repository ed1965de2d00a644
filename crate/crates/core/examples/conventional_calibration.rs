//! Ramsey, Rabi-count and conditional-phase calibration starting from the
//! nominal parameters.

use spinqubit::calibration::conventional_calibrate;
use spinqubit::device::DeviceModel;
use spinqubit::gates::{cphase_infidelity, GateCompiler, GateParams};
use spinqubit::gst::GateLabel;

fn main() -> spinqubit::Result<()> {
    let m = DeviceModel::reference();
    let rep = conventional_calibrate(&m, &GateParams::nominal(&m)?)?;
    println!("conditional phase: Q1 control {:.2} deg, Q2 control {:.2} deg, asymmetry {:.2} deg",
        rep.conditional_phase_q1_control_deg, rep.conditional_phase_q2_control_deg, rep.asymmetry_deg);
    println!("A {:.2}  theta {:?}", rep.params.a_vb, rep.params.theta);
    let c = GateCompiler::new(m, rep.params)?;
    println!("noiseless CZ infidelity {:.4}", cphase_infidelity(&c.unitary(GateLabel::CZ)?));
    Ok(())
}
