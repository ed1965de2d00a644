//! CPHASE barrier pulse: analytic vs root-solved amplitude, and the
//! adiabaticity of cosine and Tukey windows.

use spinqubit::device::{exchange, DeviceModel};
use spinqubit::pulse::{adiabatic_error, barrier_waveform, cphase_amplitude, cphase_amplitude_analytic, WindowSpec, DEFAULT_DT};

fn main() -> spinqubit::Result<()> {
    let m = DeviceModel::reference();
    let cos = WindowSpec::cosine(100e-9);
    let a = cphase_amplitude(&m, &cos, DEFAULT_DT)?;
    println!("A analytic {:.4}  exact {:.4}  A*J_res {:.5} MHz", a.analytic, a.exact, a.exact * m.j_res / 1e6);

    let dez = (m.f_q1 - m.f_q2).abs();
    let mut specs = vec![("cosine".to_string(), cos)];
    for r in [0.2, 0.5, 0.8] {
        specs.push((format!("tukey r={r}"), WindowSpec::tukey(r, 100e-9)));
    }
    for (name, spec) in specs {
        let amp = cphase_amplitude_analytic(&m, &spec)?;
        let wf = barrier_waveform(&m, amp, &spec, DEFAULT_DT)?;
        let j: Vec<f64> = wf.samples.iter().map(|v| exchange(&m, *v)).collect();
        println!("{name:<12} peak v_B {:.4} V  ESD {:.3e}", wf.samples[wf.samples.len() / 2], adiabatic_error(&j, DEFAULT_DT, dez)?);
    }
    Ok(())
}
