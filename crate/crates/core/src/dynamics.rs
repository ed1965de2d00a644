//! Time-domain propagation of the two-qubit Hamiltonian under sampled
//! controls and classical noise, and Monte-Carlo averaging into channels.
//!
//! The simulation frame rotates at the mean bare Zeeman frequency
//! `f̄ = (f_Q1 + f_Q2)/2` (rotating-wave approximation). Propagators are
//! returned in the drive frame: each qubit rotates at its own tone
//! frequency, which is the frame the control electronics track.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::device::{exchange, DeviceModel};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_propagator, CMat4, C64, ZERO};
use crate::qptm::{ptm_from_unitary_unchecked, PauliTransferMatrix};

/// Piecewise-constant controls: step `k` covers `[k·dt, (k+1)·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub dt: f64,
    /// Barrier voltage (V).
    pub barrier: Vec<f64>,
    /// In-phase and quadrature envelopes of each qubit's tone, in Rabi
    /// frequency units (Hz). A constant `I = f_R` rotates at `f_R`.
    pub mw_i: [Vec<f64>; 2],
    pub mw_q: [Vec<f64>; 2],
    /// Tone frequency minus the bare qubit frequency (Hz).
    pub drive_detuning: [f64; 2],
}

impl ControlSchedule {
    /// An idle schedule of `n` steps.
    pub fn idle(n: usize, dt: f64) -> Self {
        Self {
            dt,
            barrier: vec![0.0; n],
            mw_i: [vec![0.0; n], vec![0.0; n]],
            mw_q: [vec![0.0; n], vec![0.0; n]],
            drive_detuning: [0.0; 2],
        }
    }

    pub fn len(&self) -> usize {
        self.barrier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.barrier.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        for arr in self.mw_i.iter().chain(&self.mw_q) {
            if arr.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: arr.len() });
            }
        }
        Ok(())
    }

    fn driven(&self, k: usize) -> bool {
        self.mw_i[0][k] != 0.0 || self.mw_q[0][k] != 0.0 || self.mw_i[1][k] != 0.0 || self.mw_q[1][k] != 0.0
    }

    /// CSV with one column per control line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# dt_s={},detuning_q1_hz={},detuning_q2_hz={}", self.dt, self.drive_detuning[0], self.drive_detuning[1])?;
        writeln!(w, "time_s,v_B_volt,I_Q1_hz,Q_Q1_hz,I_Q2_hz,Q_Q2_hz")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{:.6e},{},{},{},{},{}",
                k as f64 * self.dt,
                self.barrier[k],
                self.mw_i[0][k],
                self.mw_q[0][k],
                self.mw_i[1][k],
                self.mw_q[1][k]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        // provenance comments may precede the `# dt_s=...` header
        let mut lines = r.lines().filter(|l| !matches!(l, Ok(t) if t.starts_with("# config_hash")));
        let meta = lines.next().ok_or_else(|| Error::Parse("empty schedule".into()))??;
        let mut dt = None;
        let mut det = [0.0; 2];
        for kv in meta.trim_start_matches('#').trim().split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field {kv}")))?;
            let v: f64 = v.parse().map_err(|_| Error::Parse(format!("bad number {v}")))?;
            match k {
                "dt_s" => dt = Some(v),
                "detuning_q1_hz" => det[0] = v,
                "detuning_q2_hz" => det[1] = v,
                _ => return Err(Error::Parse(format!("unknown header field {k}"))),
            }
        }
        let dt = dt.ok_or_else(|| Error::Parse("missing dt_s".into()))?;
        let _columns = lines.next();
        let mut s = ControlSchedule::idle(0, dt);
        s.drive_detuning = det;
        for line in lines {
            let line = line?;
            let f: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value {x}"))))
                .collect::<Result<_>>()?;
            if f.len() != 6 {
                return Err(Error::Parse(format!("expected 6 columns, got {}", f.len())));
            }
            s.barrier.push(f[1]);
            s.mw_i[0].push(f[2]);
            s.mw_q[0].push(f[3]);
            s.mw_i[1].push(f[4]);
            s.mw_q[1].push(f[5]);
        }
        s.validate()?;
        Ok(s)
    }
}

/// One realization of the classical noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub df: [f64; 2],
    pub dv_b: Vec<f64>,
}

impl NoiseRealization {
    pub fn none(n: usize) -> Self {
        Self { df: [0.0; 2], dv_b: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub delta_fq1: f64,
    pub delta_fq2: f64,
    /// Integrated rms of the 1/f barrier noise over `[f_min, 1/(2dt)]`.
    pub delta_vb: f64,
    pub f_min: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn from_model(model: &DeviceModel, seed: u64) -> Self {
        Self { delta_fq1: model.delta_fq1, delta_fq2: model.delta_fq2, delta_vb: model.delta_vb, f_min: 1.0, seed }
    }

    pub fn zero() -> Self {
        Self { delta_fq1: 0.0, delta_fq2: 0.0, delta_vb: 0.0, f_min: 1.0, seed: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.delta_fq1 == 0.0 && self.delta_fq2 == 0.0 && self.delta_vb == 0.0
    }

    /// Per-trial stream: the trial index selects an independent ChaCha stream.
    pub fn rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// Sub-grid 1/f bands per decade below the FFT resolution.
const LOW_BANDS_PER_DECADE: f64 = 4.0;

thread_local! {
    static FFT_CACHE: RefCell<(FftPlanner<f64>, HashMap<usize, Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn inverse_fft(buf: &mut [C64]) {
    FFT_CACHE.with(|cell| {
        let mut cache = cell.borrow_mut();
        let (planner, plans) = &mut *cache;
        let plan = plans
            .entry(buf.len())
            .or_insert_with(|| planner.plan_fft_inverse(buf.len()))
            .clone();
        plan.process(buf);
    });
}

/// Draws a noise trace. The 1/f component has one-sided density
/// `S(f) = C/f` with `C = δv_B² / ln(f_N / f_min)`, `f_N = 1/(2dt)`.
/// Frequencies resolved by the trace (`f ≥ 1/T`) are synthesized on the FFT
/// grid; the slower band `[f_min, 1/T)` is added as log-spaced random
/// sinusoids so that its variance is kept.
pub fn sample_noise(spec: &NoiseSpec, duration: f64, dt: f64, trial: u64) -> Result<NoiseRealization> {
    if !(duration >= dt) || !(dt > 0.0) {
        return Err(Error::Domain(format!("duration {duration} shorter than dt {dt}")));
    }
    let f_nyq = 0.5 / dt;
    if !(spec.f_min > 0.0) || spec.f_min >= f_nyq {
        return Err(Error::Domain(format!("f_min {} must lie in (0, {f_nyq})", spec.f_min)));
    }
    let n = (duration / dt).round().max(1.0) as usize;
    let mut rng = spec.rng(trial);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let df = [spec.delta_fq1 * normal(), spec.delta_fq2 * normal()];
    let mut dv = vec![0.0; n];
    if spec.delta_vb > 0.0 {
        let c = spec.delta_vb.powi(2) / (f_nyq / spec.f_min).ln();
        let t_total = n as f64 * dt;
        let f_grid = 1.0 / t_total;
        // resolved band on the FFT grid
        if n >= 2 {
            let mut spec_buf = vec![ZERO; n];
            for (k, slot) in spec_buf.iter_mut().enumerate().take(n / 2 + 1).skip(1) {
                let f = k as f64 * f_grid;
                if f < spec.f_min {
                    continue;
                }
                let sd = (c / f * f_grid).sqrt();
                *slot = C64::new(sd * normal(), -sd * normal());
            }
            inverse_fft(&mut spec_buf);
            for (x, z) in dv.iter_mut().zip(&spec_buf) {
                *x = z.re;
            }
        }
        // unresolved slow band
        let hi = f_grid.min(f_nyq);
        if hi > spec.f_min {
            let decades = (hi / spec.f_min).log10();
            let bands = (decades * LOW_BANDS_PER_DECADE).ceil().max(1.0) as usize;
            let ratio = (hi / spec.f_min).powf(1.0 / bands as f64);
            for b in 0..bands {
                let lo = spec.f_min * ratio.powi(b as i32);
                let f = lo * ratio.sqrt();
                let sd = (c * ratio.ln()).sqrt();
                let (a, s) = (sd * normal(), sd * normal());
                for (k, x) in dv.iter_mut().enumerate() {
                    let w = 2.0 * PI * f * (k as f64 + 0.5) * dt;
                    *x += a * w.cos() + s * w.sin();
                }
            }
        }
    }
    Ok(NoiseRealization { df, dv_b: dv })
}

/// Exact 2×2 Hermitian propagator `exp(-i2πτH)` for `[[a, b], [b̄, d]]`.
fn su2_step(a: f64, d: f64, b: C64, tau: f64) -> [[C64; 2]; 2] {
    let m = 0.5 * (a + d);
    let h = 0.5 * (a - d);
    let w = (h * h + b.norm_sqr()).sqrt();
    let th = 2.0 * PI * tau * w;
    let global = C64::from_polar(1.0, -2.0 * PI * tau * m);
    let (c, s) = (th.cos(), th.sin());
    if w == 0.0 {
        return [[global, ZERO], [ZERO, global]];
    }
    let k = C64::new(0.0, -s / w);
    [
        [global * (C64::new(c, 0.0) + k * h), global * k * b],
        [global * k * b.conj(), global * (C64::new(c, 0.0) - k * h)],
    ]
}

/// Rotating-frame Hamiltonian of one step with the drives at time `t`.
struct StepContext {
    fbar: f64,
    delta: [f64; 2],
    kappa: [f64; 2],
}

impl StepContext {
    fn new(model: &DeviceModel, schedule: &ControlSchedule) -> Self {
        let fbar = 0.5 * (model.f_q1 + model.f_q2);
        let tone = [model.f_q1 + schedule.drive_detuning[0], model.f_q2 + schedule.drive_detuning[1]];
        Self { fbar, delta: [2.0 * PI * (tone[0] - fbar), 2.0 * PI * (tone[1] - fbar)], kappa: model.crosstalk }
    }
}

/// Product of per-step exponentials, returned in the drive frame.
pub fn propagate(schedule: &ControlSchedule, model: &DeviceModel, noise: &NoiseRealization) -> Result<CMat4> {
    schedule.validate()?;
    if noise.dv_b.len() != schedule.len() {
        return Err(Error::DimensionMismatch { expected: schedule.len(), got: noise.dv_b.len() });
    }
    let ctx = StepContext::new(model, schedule);
    let dt = schedule.dt;
    let mut u = CMat4::identity();
    // drive-free stretches are block diagonal; keep them as four phases
    // plus an odd-block 2×2 and flush into `u` when a drive step arrives
    let ph00 = C64::new(1.0, 0.0);
    let mut ph11 = C64::new(1.0, 0.0);
    let mut odd = [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(1.0, 0.0)]];
    let mut pending = false;
    let flush = |u: &mut CMat4, ph00: C64, ph11: C64, odd: &[[C64; 2]; 2]| {
        let mut b = CMat4::zeros();
        b[(0, 0)] = ph00;
        b[(3, 3)] = ph11;
        b[(1, 1)] = odd[0][0];
        b[(1, 2)] = odd[0][1];
        b[(2, 1)] = odd[1][0];
        b[(2, 2)] = odd[1][1];
        *u = b * *u;
    };
    for k in 0..schedule.len() {
        let v = schedule.barrier[k] + noise.dv_b[k];
        let (f1z, f2z) = model.zeeman(v);
        let e1 = f1z + noise.df[0] - ctx.fbar;
        let e2 = f2z + noise.df[1] - ctx.fbar;
        let j = exchange(model, v);
        if !schedule.driven(k) {
            ph11 *= C64::from_polar(1.0, -2.0 * PI * dt * (e1 + e2));
            let s = su2_step(e2 - j / 2.0, e1 - j / 2.0, C64::new(j / 2.0, 0.0), dt);
            odd = [
                [s[0][0] * odd[0][0] + s[0][1] * odd[1][0], s[0][0] * odd[0][1] + s[0][1] * odd[1][1]],
                [s[1][0] * odd[0][0] + s[1][1] * odd[1][0], s[1][0] * odd[0][1] + s[1][1] * odd[1][1]],
            ];
            pending = true;
            continue;
        }
        if pending {
            flush(&mut u, ph00, ph11, &odd);
            ph11 = C64::new(1.0, 0.0);
            odd = [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(1.0, 0.0)]];
            pending = false;
        }
        let t = (k as f64 + 0.5) * dt;
        // tone j contributes ½ g c e^{-iδt} a_q† on qubit q
        let mut omega = [ZERO; 2];
        for tone in 0..2 {
            let c = C64::new(schedule.mw_i[tone][k], schedule.mw_q[tone][k]);
            if c == ZERO {
                continue;
            }
            let rot = c * C64::from_polar(0.5, -ctx.delta[tone] * t);
            for (q, o) in omega.iter_mut().enumerate() {
                let g = if q == tone { 1.0 } else { ctx.kappa[tone] };
                *o += rot * g;
            }
        }
        let mut h = CMat4::zeros();
        h[(1, 1)] = C64::new(e2 - j / 2.0, 0.0);
        h[(2, 2)] = C64::new(e1 - j / 2.0, 0.0);
        h[(3, 3)] = C64::new(e1 + e2, 0.0);
        h[(1, 2)] = C64::new(j / 2.0, 0.0);
        h[(2, 1)] = C64::new(j / 2.0, 0.0);
        // Q1 raising: |0x⟩ → |1x⟩, Q2 raising: |x0⟩ → |x1⟩
        h[(2, 0)] += omega[0];
        h[(3, 1)] += omega[0];
        h[(1, 0)] += omega[1];
        h[(3, 2)] += omega[1];
        h[(0, 2)] += omega[0].conj();
        h[(1, 3)] += omega[0].conj();
        h[(0, 1)] += omega[1].conj();
        h[(2, 3)] += omega[1].conj();
        u = hermitian_propagator(&h, dt) * u;
    }
    if pending {
        flush(&mut u, ph00, ph11, &odd);
    }
    Ok(to_drive_frame(&u, &ctx, schedule.duration()))
}

/// `exp(i2π[(f_d1 − f̄)n₁ + (f_d2 − f̄)n₂]T) · U`.
fn to_drive_frame(u: &CMat4, ctx: &StepContext, t: f64) -> CMat4 {
    let p1 = ctx.delta[0] * t;
    let p2 = ctx.delta[1] * t;
    let phases = [0.0, p2, p1, p1 + p2];
    let mut out = *u;
    for (r, p) in phases.iter().enumerate() {
        let z = C64::from_polar(1.0, *p);
        for c in 0..4 {
            out[(r, c)] *= z;
        }
    }
    out
}

fn pairwise_sum(items: &mut [DMatrix<f64>]) -> DMatrix<f64> {
    match items.len() {
        0 => unreachable!("pairwise_sum of nothing"),
        1 => items[0].clone(),
        n => {
            let (a, b) = items.split_at_mut(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean PTM over noise trials. Trials use independent RNG streams so any
/// evaluation order yields the same result.
pub fn monte_carlo_channel(
    schedule: &ControlSchedule,
    model: &DeviceModel,
    spec: &NoiseSpec,
    n_trials: usize,
) -> Result<PauliTransferMatrix> {
    if n_trials == 0 {
        return Err(Error::Domain("n_trials must be at least 1".into()));
    }
    if spec.is_zero() {
        let u = propagate(schedule, model, &NoiseRealization::none(schedule.len()))?;
        return Ok(ptm_from_unitary_unchecked(&u));
    }
    let mut ptms = Vec::with_capacity(n_trials);
    for trial in 0..n_trials {
        let noise = sample_noise(spec, schedule.duration(), schedule.dt, trial as u64)?;
        let u = propagate(schedule, model, &noise)?;
        ptms.push(ptm_from_unitary_unchecked(&u).into_entries());
    }
    let mut mean = pairwise_sum(&mut ptms) / n_trials as f64;
    // trace preservation is exact for unitaries; remove summation dust
    mean[(0, 0)] = 1.0;
    for j in 1..16 {
        mean[(0, j)] = 0.0;
    }
    PauliTransferMatrix::new(2, mean)
}

/// Conditional phase `arg U₀₀ + arg U₁₁ − arg U₀₁ − arg U₁₀` mapped to
/// `[0, 2π)`, sign chosen so that exchange accumulates `+2π∫J dt`.
pub fn conditional_phase(u: &CMat4) -> f64 {
    let phi = u[(0, 0)].arg() + u[(3, 3)].arg() - u[(1, 1)].arg() - u[(2, 2)].arg();
    (-phi).rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_residual;

    fn quiet_model() -> DeviceModel {
        let mut m = DeviceModel::reference();
        m.crosstalk = [0.0; 2];
        m
    }

    #[test]
    fn su2_step_matches_eigen_propagator() {
        let (a, d, b) = (3.1e7, -4.2e7, C64::new(1.3e6, -0.7e6));
        let s = su2_step(a, d, b, 1e-8);
        let mut h = CMat4::zeros();
        h[(0, 0)] = C64::new(a, 0.0);
        h[(1, 1)] = C64::new(d, 0.0);
        h[(0, 1)] = b;
        h[(1, 0)] = b.conj();
        let full = hermitian_propagator(&h, 1e-8);
        for r in 0..2 {
            for c in 0..2 {
                assert!((s[r][c] - full[(r, c)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_schedule_without_exchange_is_identity() {
        let mut m = quiet_model();
        m.j_res = 1e-300;
        let s = ControlSchedule::idle(0, 1e-11);
        let u = propagate(&s, &m, &NoiseRealization::none(0)).unwrap();
        assert!((u - CMat4::identity()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn idle_is_unitary_and_diagonal_in_drive_frame() {
        let m = quiet_model();
        let s = ControlSchedule::idle(1000, 1e-10);
        let u = propagate(&s, &m, &NoiseRealization::none(1000)).unwrap();
        assert!(unitarity_residual(&u) < 1e-12);
        // residual exchange mixes |01⟩,|10⟩ only at order J/ΔE_z
        assert!(u[(1, 2)].norm() < 1e-3);
        let phi = conditional_phase(&u);
        let expected = 2.0 * PI * m.j_res * 1e-7;
        assert!((phi - expected).abs() < 1e-4 * expected + 1e-6, "{phi} vs {expected}");
    }

    #[test]
    fn noise_is_deterministic_per_trial() {
        let spec = NoiseSpec { delta_fq1: 1e4, delta_fq2: 2e4, delta_vb: 4e-4, f_min: 1.0, seed: 9 };
        let a = sample_noise(&spec, 1e-7, 1e-11, 3).unwrap();
        let b = sample_noise(&spec, 1e-7, 1e-11, 3).unwrap();
        let c = sample_noise(&spec, 1e-7, 1e-11, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_barrier_noise_gives_flat_trace() {
        let spec = NoiseSpec { delta_fq1: 1e4, delta_fq2: 0.0, delta_vb: 0.0, f_min: 1.0, seed: 1 };
        let r = sample_noise(&spec, 1e-8, 1e-11, 0).unwrap();
        assert!(r.dv_b.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn f_min_above_nyquist_is_rejected() {
        let spec = NoiseSpec { f_min: 1e12, ..NoiseSpec::zero() };
        assert!(sample_noise(&spec, 1e-8, 1e-11, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut s = ControlSchedule::idle(3, 1e-11);
        s.barrier[1] = 0.1;
        s.mw_i[0][2] = 5e6;
        s.drive_detuning = [1e3, -2e3];
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ControlSchedule::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, s);
    }
}
