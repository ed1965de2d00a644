//! Window functions, the adiabaticity (ESD) estimator and CPHASE barrier
//! pulse design.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{exchange, DeviceModel};
use crate::dynamics::{conditional_phase, propagate, ControlSchedule, NoiseRealization};
use crate::error::{Error, Result};

/// Simulation step used for pulse design unless stated otherwise.
pub const DEFAULT_DT: f64 = 10e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Window {
    Tukey { r: f64 },
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window: Window,
    pub t_p: f64,
    pub samples: usize,
}

impl WindowSpec {
    pub fn cosine(t_p: f64) -> Self {
        Self { window: Window::Cosine, t_p, samples: 1001 }
    }

    pub fn tukey(r: f64, t_p: f64) -> Self {
        Self { window: Window::Tukey { r }, t_p, samples: 1001 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_p > 0.0) {
            return Err(Error::Domain(format!("t_p must be positive, got {}", self.t_p)));
        }
        if let Window::Tukey { r } = self.window {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Domain(format!("tukey r must be in (0, 1], got {r}")));
            }
        }
        Ok(())
    }

    /// `∫₀^{t_p} W dt`.
    pub fn area(&self) -> f64 {
        match self.window {
            Window::Cosine => self.t_p / 2.0,
            Window::Tukey { r } => self.t_p * (1.0 - r / 2.0),
        }
    }

    fn raw(&self, t: f64) -> f64 {
        // evaluate on the first half so the window is symmetric bit-for-bit
        let t = t.min(self.t_p - t).max(0.0);
        match self.window {
            Window::Cosine => 0.5 * (1.0 - (2.0 * PI * t / self.t_p).cos()),
            Window::Tukey { r } => {
                let edge = r * self.t_p / 2.0;
                if t <= edge {
                    0.5 * (1.0 - (2.0 * PI * t / (r * self.t_p)).cos())
                } else {
                    1.0
                }
            }
        }
    }

    /// Window values at the midpoints of `n = round(t_p/dt)` steps.
    pub fn step_values(&self, dt: f64) -> Vec<f64> {
        let n = (self.t_p / dt).round() as usize;
        (0..n)
            .map(|k| {
                let m = k.min(n - 1 - k);
                self.raw((m as f64 + 0.5) * dt)
            })
            .collect()
    }
}

pub fn window_value(spec: &WindowSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(0.0..=spec.t_p).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {}]", spec.t_p)));
    }
    Ok(spec.raw(t))
}

/// Both solutions for the CPHASE amplitude, as `A_vB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CphaseAmplitude {
    /// From `A·J_res·∫W = 1/2`.
    pub analytic: f64,
    /// From root-solving the simulated conditional phase to π.
    pub exact: f64,
}

/// Window-integral solution: `2π ∫ J dt = π`.
pub fn cphase_amplitude_analytic(model: &DeviceModel, spec: &WindowSpec) -> Result<f64> {
    spec.validate()?;
    Ok(0.5 / (model.j_res * spec.area()))
}

/// Noiseless conditional phase of a barrier pulse with amplitude `a`.
pub fn simulated_conditional_phase(model: &DeviceModel, a: f64, spec: &WindowSpec, dt: f64) -> Result<f64> {
    let wf = barrier_waveform(model, a, spec, dt)?;
    let s = wf.schedule();
    let u = propagate(&s, model, &NoiseRealization::none(s.len()))?;
    // unwrap onto the branch of the adiabatic estimate 2π∫J dt
    let adiabatic: f64 = s.barrier.iter().map(|v| 2.0 * PI * exchange(model, *v) * dt).sum();
    let raw = conditional_phase(&u);
    Ok(raw + 2.0 * PI * ((adiabatic - raw) / (2.0 * PI)).round())
}

pub fn cphase_amplitude(model: &DeviceModel, spec: &WindowSpec, dt: f64) -> Result<CphaseAmplitude> {
    if spec.window != Window::Cosine {
        return Err(Error::Domain("CPHASE amplitude is defined for the cosine window".into()));
    }
    let analytic = cphase_amplitude_analytic(model, spec)?;
    let phase = |a: f64| simulated_conditional_phase(model, a, spec, dt).map(|p| p - PI);
    let (mut lo, mut hi) = ((0.5 * analytic).max(1.0), 2.0 * analytic);
    let (mut flo, fhi) = (phase(lo)?, phase(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = phase(mid)?;
        if fm.abs() < 1e-12 || hi - lo < 1e-15 * mid {
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(CphaseAmplitude { analytic, exact: mid })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierWaveform {
    /// `v_B(k·dt)` for `k = 0..=n`.
    pub samples: Vec<f64>,
    pub dt: f64,
    pub t_p: f64,
    pub a_vb: f64,
    spec: WindowSpec,
    alpha: f64,
}

fn barrier_value(a: f64, w: f64, alpha: f64) -> f64 {
    let x = a * w;
    // hold the residual-exchange floor where the log inversion would dip below zero
    if x >= 1.0 {
        x.ln() / (2.0 * alpha)
    } else {
        0.0
    }
}

pub fn barrier_waveform(model: &DeviceModel, a_vb: f64, spec: &WindowSpec, dt: f64) -> Result<BarrierWaveform> {
    spec.validate()?;
    if !(a_vb >= 1.0) {
        return Err(Error::Domain(format!("A_vB = {a_vb} never exceeds the exchange floor")));
    }
    if !(dt > 0.0) || dt > spec.t_p {
        return Err(Error::Domain(format!("bad dt {dt}")));
    }
    let n = (spec.t_p / dt).round() as usize;
    let samples = (0..=n)
        .map(|k| barrier_value(a_vb, spec.raw(k.min(n - k) as f64 * dt), model.alpha))
        .collect();
    Ok(BarrierWaveform { samples, dt, t_p: spec.t_p, a_vb, spec: *spec, alpha: model.alpha })
}

impl BarrierWaveform {
    /// Piecewise-constant barrier schedule sampled at step midpoints.
    pub fn schedule(&self) -> ControlSchedule {
        let w = self.spec.step_values(self.dt);
        let mut s = ControlSchedule::idle(w.len(), self.dt);
        for (b, w) in s.barrier.iter_mut().zip(w) {
            *b = barrier_value(self.a_vb, w, self.alpha);
        }
        s
    }

    pub fn write_csv<W: Write>(&self, model: &DeviceModel, mut w: W) -> Result<()> {
        writeln!(w, "time_s,v_B_volt,J_hz")?;
        for (k, v) in self.samples.iter().enumerate() {
            writeln!(w, "{:.6e},{},{}", k as f64 * self.dt, v, exchange(model, *v))?;
        }
        Ok(())
    }
}

/// Diabatic transition probability `|∫ f e^{-i2πΔE_z t} dt|²` with
/// `f = J̇/(2ΔE_z)`; `j_env` is sampled on a uniform grid of step `dt`.
pub fn adiabatic_error(j_env: &[f64], dt: f64, delta_ez: f64) -> Result<f64> {
    let n = j_env.len();
    if n < 2 {
        return Err(Error::Domain("envelope needs at least two samples".into()));
    }
    let closed = (j_env[0] - j_env[n - 1]).abs() <= 1e-9 * j_env.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if !closed {
        return Err(Error::Domain("envelope must satisfy J(0) = J(t_p)".into()));
    }
    let deriv = |k: usize| -> f64 {
        if k == 0 {
            (j_env[1] - j_env[0]) / dt
        } else if k == n - 1 {
            (j_env[n - 1] - j_env[n - 2]) / dt
        } else {
            (j_env[k + 1] - j_env[k - 1]) / (2.0 * dt)
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let f = deriv(k) / (2.0 * delta_ez);
        acc += Complex64::from_polar(weight * f * dt, -2.0 * PI * delta_ez * k as f64 * dt);
    }
    Ok(acc.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tukey_edges_vanish() {
        for r in [0.1, 0.5, 1.0] {
            let s = WindowSpec::tukey(r, 1e-7);
            assert_eq!(window_value(&s, 0.0).unwrap(), 0.0);
            assert!(window_value(&s, 1e-7).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn outside_support_is_an_error() {
        assert!(window_value(&WindowSpec::cosine(1e-7), 1.1e-7).is_err());
        assert!(window_value(&WindowSpec::tukey(1.5, 1e-7), 0.0).is_err());
    }

    #[test]
    fn clamp_and_peak_values() {
        let m = DeviceModel::reference();
        let spec = WindowSpec::cosine(1e-7);
        let wf = barrier_waveform(&m, 170.0, &spec, 1e-10).unwrap();
        assert_eq!(wf.samples[0], 0.0);
        assert_eq!(*wf.samples.last().unwrap(), 0.0);
        let mid = wf.samples[wf.samples.len() / 2];
        assert!((mid - 170f64.ln() / (2.0 * m.alpha)).abs() < 1e-15);
        assert!(barrier_waveform(&m, 0.9, &spec, 1e-10).is_err());
    }

    #[test]
    fn constant_envelope_has_no_diabatic_error() {
        assert_eq!(adiabatic_error(&[1e6; 100], 1e-9, 1e8).unwrap(), 0.0);
        assert!(adiabatic_error(&[1.0], 1e-9, 1e8).is_err());
    }
}
