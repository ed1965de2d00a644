//! Simulate a short-sequence GST experiment with a 2 degree ZI error on X1
//! and recover it by maximum likelihood.

use spinqubit::gst::dataset::simulate_dataset;
use spinqubit::gst::estimate::{mle_estimate, model_violation, with_x1_zi_error, MleOptions};
use spinqubit::gst::model::GateSet;
use spinqubit::gst::Design;
use spinqubit::metrics::gate_set_metrics;

fn main() -> spinqubit::Result<()> {
    let target = GateSet::target();
    let truth = with_x1_zi_error(&target, 2f64.to_radians());
    let design = Design::standard(4)?;
    println!("{} circuits", design.n_circuits());

    let ds = simulate_dataset(&truth, &design, 10_000, 42)?;
    let est = mle_estimate(&ds, &design, &target, &MleOptions::default())?;
    let mv = model_violation(&ds.aligned_counts(&design)?, &design, &est.gate_set);
    println!("converged {} in {} iterations, N_sigma {:.2}", est.converged, est.iterations, mv.n_sigma);

    for m in gate_set_metrics(&est.gate_set)? {
        println!("{:<3} F {:.5}  ZI {:+.4} rad", m.gate, m.f_gate, m.hamiltonian_errors["ZI"]);
    }
    Ok(())
}
