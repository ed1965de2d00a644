//! GST-driven calibration feedback. A reduced design keeps this quick; the
//! CLI `calibrate-loop` runs the full one.

use spinqubit::calibration::{closed_loop, conventional_calibrate, LoopOptions};
use spinqubit::device::DeviceModel;
use spinqubit::gates::GateParams;

fn main() -> spinqubit::Result<()> {
    let m = DeviceModel::reference();
    let start = conventional_calibrate(&m, &GateParams::nominal(&m)?)?.params;
    let opts = LoopOptions { design_max_l: 4, trials: 100, max_iterations: 4, ..LoopOptions::default() };
    let trace = closed_loop(&m, &start, &opts)?;
    for it in &trace.iterations {
        println!("iter {}  F_CZ est {:.5}  true {:.5}  max correctable {:.2e}",
            it.iteration, it.cphase_fidelity, it.cphase_fidelity_truth, it.report.max_correctable());
    }
    println!("converged {}  diverged {}", trace.converged, trace.diverged);
    Ok(())
}
