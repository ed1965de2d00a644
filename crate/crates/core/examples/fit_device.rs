//! Recover the exchange and noise parameters of the reference device from a
//! synthetic barrier sweep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinqubit::device::{
    dephasing_times, fit_exchange_model, fit_noise_model, synthesize_frequency_data, DeviceModel, FitOptions,
};

fn main() -> spinqubit::Result<()> {
    let truth = DeviceModel::reference();
    let v: Vec<f64> = (0..25).map(|k| 0.01 * k as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = synthesize_frequency_data(&truth, &v, 2e3, &mut rng)?;

    let opts = FitOptions { bootstrap_resamples: 50, ..FitOptions::default() };
    let fit = fit_exchange_model(&data, &opts)?;
    println!("residual rms {:.1} Hz after {} LM iterations", fit.residual_rms, fit.iterations);
    for iv in &fit.intervals {
        println!("  {:<8} {:>14.6e}  [{:.6e}, {:.6e}]", iv.name, iv.estimate, iv.lower, iv.upper);
    }

    let t2: Vec<_> = v.iter().map(|&vb| Ok((vb, dephasing_times(&truth, vb)?))).collect::<spinqubit::Result<_>>()?;
    let noise = fit_noise_model(&fit.model, &t2, None, &opts)?;
    println!("noise: dv_B {:.3e} V, df1 {:.3e} Hz, df2 {:.3e} Hz", noise.delta_vb, noise.delta_fq1, noise.delta_fq2);
    println!("truth: dv_B {:.3e} V, df1 {:.3e} Hz, df2 {:.3e} Hz", truth.delta_vb, truth.delta_fq1, truth.delta_fq2);
    Ok(())
}
