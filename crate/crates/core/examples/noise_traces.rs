//! Draws 1/f barrier noise and quasi-static detuning and checks the sample
//! variance against the requested rms.

use spinqubit::device::DeviceModel;
use spinqubit::dynamics::{sample_noise, NoiseSpec};

fn main() -> spinqubit::Result<()> {
    let m = DeviceModel::reference();
    let spec = NoiseSpec::from_model(&m, 11);
    let (dur, dt) = (1e-6, 1e-9);
    let trials = 2000;
    let (mut var_v, mut var_f) = (0.0, 0.0);
    for t in 0..trials {
        let r = sample_noise(&spec, dur, dt, t)?;
        var_v += r.dv_b.iter().map(|x| x * x).sum::<f64>() / r.dv_b.len() as f64;
        var_f += r.df[0] * r.df[0];
    }
    println!("barrier rms {:.3e} V (target {:.3e})", (var_v / trials as f64).sqrt(), spec.delta_vb);
    println!("Q1 detuning rms {:.3e} Hz (target {:.3e})", (var_f / trials as f64).sqrt(), spec.delta_fq1);
    Ok(())
}
