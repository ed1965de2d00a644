//! Physical gate compilation: the 11 tunable parameters turned into
//! control schedules, unitaries and Monte-Carlo channels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::dynamics::{monte_carlo_channel, propagate, ControlSchedule, NoiseRealization, NoiseSpec};
use crate::gst::model::{to_m16, GateSet, SpamModel};
use crate::gst::GateLabel;
use crate::linalg::{CMat4, C64};
use crate::pulse::{barrier_waveform, cphase_amplitude, WindowSpec, DEFAULT_DT};
use crate::qptm::{ptm_from_unitary_unchecked, PauliTransferMatrix};
use crate::{Error, Result};

/// Idle and CPHASE durations.
pub const IDLE_TIME: f64 = 100e-9;
pub const CPHASE_TIME: f64 = 100e-9;
/// Tukey taper of the microwave bursts.
pub const BURST_TAPER: f64 = 0.5;

/// The calibration knobs. `phi[a][v]` is the virtual phase applied to
/// qubit `v` after a burst on qubit `a` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    #[serde(rename = "f_Q1_hz")]
    pub f_q1: f64,
    #[serde(rename = "f_Q2_hz")]
    pub f_q2: f64,
    #[serde(rename = "t_XY_s")]
    pub t_xy: [f64; 2],
    #[serde(rename = "phi_rad")]
    pub phi: [[f64; 2]; 2],
    #[serde(rename = "A_vB")]
    pub a_vb: f64,
    #[serde(rename = "theta_rad")]
    pub theta: [f64; 2],
}

impl GateParams {
    /// Uncalibrated starting point: drives on the bare frequencies, burst
    /// times from the nominal Rabi rate, zero phases and the analytic
    /// CPHASE amplitude.
    pub fn nominal(model: &DeviceModel) -> Result<Self> {
        let spec = WindowSpec::cosine(CPHASE_TIME);
        let a = crate::pulse::cphase_amplitude_analytic(model, &spec)?;
        Ok(Self {
            f_q1: model.f_q1,
            f_q2: model.f_q2,
            t_xy: [burst_time(model.rabi[0]), burst_time(model.rabi[1])],
            phi: [[0.0; 2]; 2],
            a_vb: a,
            theta: [0.0; 2],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_xy[0] > 0.0 && self.t_xy[1] > 0.0) {
            return Err(Error::Domain("burst times must be positive".into()));
        }
        if !(self.a_vb >= 1.0) {
            return Err(Error::Domain(format!("A_vB = {} is below the exchange floor", self.a_vb)));
        }
        let all = [self.f_q1, self.f_q2, self.phi[0][0], self.phi[0][1], self.phi[1][0], self.phi[1][1], self.theta[0], self.theta[1]];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite gate parameter".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 11] {
        [
            self.f_q1, self.f_q2, self.t_xy[0], self.t_xy[1], self.phi[0][0], self.phi[0][1], self.phi[1][0], self.phi[1][1],
            self.a_vb, self.theta[0], self.theta[1],
        ]
    }

    pub const NAMES: [&'static str; 11] =
        ["f_Q1", "f_Q2", "t_XY1", "t_XY2", "phi_11", "phi_12", "phi_21", "phi_22", "A_vB", "theta_1", "theta_2"];
}

/// π/2 burst time of a Tukey(0.5) envelope with peak Rabi rate `rabi`.
pub fn burst_time(rabi: f64) -> f64 {
    1.0 / (4.0 * rabi * (1.0 - BURST_TAPER / 2.0))
}

/// `exp(−iφ₁Z/2) ⊗ exp(−iφ₂Z/2)`.
pub fn virtual_z(phi1: f64, phi2: f64) -> CMat4 {
    let z = |b: usize, p: f64| if b == 0 { -p / 2.0 } else { p / 2.0 };
    CMat4::from_fn(|r, c| if r == c { C64::from_polar(1.0, z(r >> 1, phi1) + z(r & 1, phi2)) } else { C64::new(0.0, 0.0) })
}

/// Axis of a microwave burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurstAxis {
    X,
    Y,
    MinusX,
}

/// Compiles gates on a device with a given parameter set.
#[derive(Debug, Clone)]
pub struct GateCompiler {
    pub model: DeviceModel,
    pub params: GateParams,
    /// Step for microwave bursts and idles.
    pub dt_burst: f64,
    /// Step for the barrier pulse.
    pub dt_cphase: f64,
}

impl GateCompiler {
    pub fn new(model: DeviceModel, params: GateParams) -> Result<Self> {
        model.validate()?;
        params.validate()?;
        Ok(Self { model, params, dt_burst: 50e-12, dt_cphase: DEFAULT_DT })
    }

    fn detunings(&self) -> [f64; 2] {
        [self.params.f_q1 - self.model.f_q1, self.params.f_q2 - self.model.f_q2]
    }

    /// Raw burst on `qubit` with duration `t`, without phase corrections.
    pub fn burst_schedule(&self, qubit: usize, axis: BurstAxis, t: f64) -> Result<ControlSchedule> {
        if qubit > 1 {
            return Err(Error::InvalidQubit(qubit));
        }
        let w = WindowSpec::tukey(BURST_TAPER, t).step_values(self.dt_burst);
        let mut s = ControlSchedule::idle(w.len(), self.dt_burst);
        s.drive_detuning = self.detunings();
        let peak = self.model.rabi[qubit];
        for (k, wk) in w.iter().enumerate() {
            match axis {
                BurstAxis::X => s.mw_i[qubit][k] = peak * wk,
                BurstAxis::MinusX => s.mw_i[qubit][k] = -peak * wk,
                BurstAxis::Y => s.mw_q[qubit][k] = peak * wk,
            }
        }
        Ok(s)
    }

    pub fn idle_schedule(&self, t: f64) -> ControlSchedule {
        // constant controls: the drive-free propagator is exact at any step
        let n = (t / 1e-9).round().max(1.0) as usize;
        let mut s = ControlSchedule::idle(n, t / n as f64);
        s.drive_detuning = self.detunings();
        s
    }

    pub fn cphase_schedule(&self) -> Result<ControlSchedule> {
        let w = barrier_waveform(&self.model, self.params.a_vb, &WindowSpec::cosine(CPHASE_TIME), self.dt_cphase)?;
        let mut s = w.schedule();
        s.drive_detuning = self.detunings();
        Ok(s)
    }

    /// Schedule of a gate plus the virtual Z applied after it.
    pub fn gate_schedule(&self, label: GateLabel) -> Result<(ControlSchedule, CMat4)> {
        let p = &self.params;
        Ok(match label {
            GateLabel::Null => (ControlSchedule::idle(0, self.dt_burst), CMat4::identity()),
            GateLabel::I => (self.idle_schedule(IDLE_TIME), CMat4::identity()),
            GateLabel::X1 | GateLabel::Y1 | GateLabel::X2 | GateLabel::Y2 => {
                let q = if matches!(label, GateLabel::X1 | GateLabel::Y1) { 0 } else { 1 };
                let axis = if matches!(label, GateLabel::X1 | GateLabel::X2) { BurstAxis::X } else { BurstAxis::Y };
                (self.burst_schedule(q, axis, p.t_xy[q])?, virtual_z(p.phi[q][0], p.phi[q][1]))
            }
            GateLabel::CZ => (self.cphase_schedule()?, virtual_z(p.theta[0], p.theta[1])),
        })
    }

    /// Noiseless unitary of a gate in the drive frame.
    pub fn unitary(&self, label: GateLabel) -> Result<CMat4> {
        let (s, z) = self.gate_schedule(label)?;
        if s.is_empty() {
            return Ok(z);
        }
        Ok(z * propagate(&s, &self.model, &NoiseRealization::none(s.len()))?)
    }

    /// Unitary of a schedule followed by a virtual Z, for calibration
    /// experiments that build their own sequences.
    pub fn schedule_unitary(&self, s: &ControlSchedule) -> Result<CMat4> {
        propagate(s, &self.model, &NoiseRealization::none(s.len()))
    }

    /// Monte-Carlo channel of a gate; `trials = 0` or zero noise gives the
    /// noiseless unitary channel.
    pub fn channel(&self, label: GateLabel, spec: &NoiseSpec, trials: usize) -> Result<PauliTransferMatrix> {
        let (s, z) = self.gate_schedule(label)?;
        let zp = ptm_from_unitary_unchecked(&z);
        if s.is_empty() {
            return Ok(zp);
        }
        let m = if trials == 0 || spec.is_zero() {
            ptm_from_unitary_unchecked(&propagate(&s, &self.model, &NoiseRealization::none(s.len()))?)
        } else {
            monte_carlo_channel(&s, &self.model, spec, trials)?
        };
        Ok(zp.compose(&m))
    }

    /// The six-gate set with the given SPAM model. Each gate gets its own
    /// noise seed derived from `spec.seed`.
    pub fn gate_set(&self, spec: &NoiseSpec, trials: usize, spam: &SpamModel) -> Result<GateSet> {
        let mut ptms = Vec::with_capacity(6);
        for (i, label) in GateLabel::GATES.iter().enumerate() {
            let mut s = spec.clone();
            s.seed = spec.seed.wrapping_add(i as u64 * 0x9E37_79B9);
            ptms.push(self.channel(*label, &s, trials)?);
        }
        let arr: [PauliTransferMatrix; 6] = ptms.try_into().expect("six gates");
        Ok(GateSet::from_ptms(&arr, spam))
    }
}

/// Parameters that make every gate as close to ideal as the device allows,
/// found from the noiseless unitaries: drive frequencies on the bare
/// qubits, burst times matched to a π/2 area, and every phase nulled.
/// Used as a reference point, not as a calibration procedure.
pub fn ideal_params(model: &DeviceModel) -> Result<GateParams> {
    let mut p = GateParams::nominal(model)?;
    p.a_vb = cphase_amplitude(model, &WindowSpec::cosine(CPHASE_TIME), DEFAULT_DT)?.exact;
    let c = GateCompiler::new(model.clone(), p)?;
    p.theta = cphase_z_corrections(&c.schedule_unitary(&c.cphase_schedule()?)?);
    for q in 0..2 {
        let (s, _) = c.gate_schedule(if q == 0 { GateLabel::X1 } else { GateLabel::X2 })?;
        let u = c.schedule_unitary(&s)?;
        p.phi[q] = residual_z_phases(&u, q);
    }
    Ok(p)
}

/// Virtual-Z angles `(θ₁, θ₂)` that null the single-qubit phases of the
/// `|01⟩` and `|10⟩` columns of a raw barrier-pulse unitary.
pub fn cphase_z_corrections(u: &CMat4) -> [f64; 2] {
    let a00 = u[(0, 0)].arg();
    [wrap(a00 - u[(2, 2)].arg()), wrap(a00 - u[(1, 1)].arg())]
}

/// Infidelity of a raw barrier-pulse unitary to CZ after its Z corrections.
pub fn cphase_infidelity(u: &CMat4) -> f64 {
    let [t1, t2] = cphase_z_corrections(u);
    1.0 - unitary_fidelity(&(virtual_z(t1, t2) * u), &crate::gst::model::target_unitary(GateLabel::CZ))
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Z phases (per qubit) that best align a burst on `qubit` with the ideal
/// π/2 rotation, by a small 2-parameter scan refined with least squares.
fn residual_z_phases(u: &CMat4, qubit: usize) -> [f64; 2] {
    let ideal = crate::gst::model::target_unitary(if qubit == 0 { GateLabel::X1 } else { GateLabel::X2 });
    let overlap = |p: &[f64]| {
        let v = virtual_z(p[0], p[1]) * u;
        (ideal.adjoint() * v).trace().norm()
    };
    let mut best = [0.0, 0.0];
    let mut fbest = overlap(&best);
    let mut step = 0.5;
    while step > 1e-9 {
        let mut improved = false;
        for d in [[step, 0.0], [-step, 0.0], [0.0, step], [0.0, -step]] {
            let cand = [best[0] + d[0], best[1] + d[1]];
            let f = overlap(&cand);
            if f > fbest {
                best = cand;
                fbest = f;
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    best
}

/// Average gate fidelity `(|Tr U†V|²/d + 1)/(d + 1)` between unitaries.
pub fn unitary_fidelity(u: &CMat4, v: &CMat4) -> f64 {
    let t = (u.adjoint() * v).trace().norm_sqr();
    (t / 4.0 + 1.0) / 5.0
}

/// PTM of a unitary in the `M16` layout.
pub fn ptm16(u: &CMat4) -> crate::gst::model::M16 {
    to_m16(ptm_from_unitary_unchecked(u).entries())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gst::model::target_unitary;

    fn compiler() -> GateCompiler {
        let m = DeviceModel::reference();
        let p = ideal_params(&m).unwrap();
        GateCompiler::new(m, p).unwrap()
    }

    #[test]
    fn burst_time_gives_quarter_turn_area() {
        let t = burst_time(5e6);
        let area = WindowSpec::tukey(BURST_TAPER, t).area() * 5e6;
        assert!((area - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ideal_parameters_give_high_fidelity_gates() {
        let c = compiler();
        for label in GateLabel::GATES {
            let f = unitary_fidelity(&target_unitary(label), &c.unitary(label).unwrap());
            eprintln!("{label}: {:.3e}", 1.0 - f);
            assert!(f > 0.99, "{label}: {f}");
        }
    }

    #[test]
    fn virtual_z_is_diagonal_rotation() {
        let z = virtual_z(PI, 0.0);
        // exp(−iπZ/2) on Q1 = −iZ
        assert!((z[(0, 0)] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((z[(2, 2)] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }
}
