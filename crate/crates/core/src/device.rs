//! Physical model of the double quantum dot: Zeeman splittings with a
//! barrier-dependent field shift, exponential exchange, conditional
//! transition frequencies, quasistatic dephasing and model fitting.
//!
//! All energies are in frequency units (Hz). Computational basis order is
//! `|00⟩, |01⟩, |10⟩, |11⟩` with Q1 the left bit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat4, C64};
use crate::lsq::{levenberg_marquardt, LmOptions};

/// Finite-difference step along the barrier voltage (V).
pub const DV_STEP: f64 = 10e-6;
/// Finite-difference step along the bare qubit frequencies (Hz).
pub const DF_STEP: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    #[serde(rename = "f_Q1_hz")]
    pub f_q1: f64,
    #[serde(rename = "f_Q2_hz")]
    pub f_q2: f64,
    #[serde(rename = "J_res_hz")]
    pub j_res: f64,
    #[serde(rename = "alpha_per_volt")]
    pub alpha: f64,
    #[serde(rename = "beta1_hz_per_volt_gamma")]
    pub beta1: f64,
    #[serde(rename = "beta2_hz_per_volt_gamma")]
    pub beta2: f64,
    pub gamma: f64,
    #[serde(rename = "delta_vB_volt")]
    pub delta_vb: f64,
    #[serde(rename = "delta_fQ1_hz")]
    pub delta_fq1: f64,
    #[serde(rename = "delta_fQ2_hz")]
    pub delta_fq2: f64,
    /// Peak Rabi frequency of each qubit's own drive tone.
    #[serde(rename = "B_drive_amplitudes_hz")]
    pub rabi: [f64; 2],
    /// Amplitude of tone `j` on the other qubit relative to qubit `j`.
    #[serde(rename = "drive_crosstalk_ratio")]
    pub crosstalk: [f64; 2],
}

/// Reference device profile shipped with the crate.
pub const REFERENCE_DEVICE_JSON: &str = include_str!("../data/reference.device.json");

impl DeviceModel {
    pub fn reference() -> Self {
        serde_json::from_str(REFERENCE_DEVICE_JSON).expect("bundled device profile is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j_res > 0.0) {
            return Err(Error::Model(format!("J_res must be positive, got {}", self.j_res)));
        }
        if self.f_q1 == self.f_q2 {
            return Err(Error::Model("qubit frequencies must differ".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Model(format!("gamma must be positive, got {}", self.gamma)));
        }
        let noise = [self.delta_vb, self.delta_fq1, self.delta_fq2];
        if noise.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Model("rms noise parameters must be non-negative".into()));
        }
        if self.rabi.iter().chain(&self.crosstalk).any(|x| !(*x >= 0.0)) {
            return Err(Error::Model("drive amplitudes must be non-negative".into()));
        }
        Ok(())
    }

    /// `sign(v)|v|^γ`, the field-shift profile.
    fn shift_profile(&self, v: f64) -> f64 {
        v.signum() * v.abs().powf(self.gamma)
    }

    /// Barrier-shifted qubit frequencies `(f_Q1(v), f_Q2(v))`.
    pub fn zeeman(&self, v_b: f64) -> (f64, f64) {
        let s = self.shift_profile(v_b);
        (self.f_q1 + self.beta1 * s, self.f_q2 + self.beta2 * s)
    }

    /// Lab-frame Hamiltonian in Hz.
    pub fn hamiltonian(&self, v_b: f64) -> CMat4 {
        let (f1, f2) = self.zeeman(v_b);
        let j = exchange(self, v_b);
        let mut h = CMat4::zeros();
        h[(1, 1)] = C64::new(f2 - j / 2.0, 0.0);
        h[(2, 2)] = C64::new(f1 - j / 2.0, 0.0);
        h[(3, 3)] = C64::new(f1 + f2, 0.0);
        h[(1, 2)] = C64::new(j / 2.0, 0.0);
        h[(2, 1)] = C64::new(j / 2.0, 0.0);
        h
    }

    /// Voltage at which the exchange reaches `j`.
    pub fn barrier_for_exchange(&self, j: f64) -> f64 {
        (j / self.j_res).ln() / (2.0 * self.alpha)
    }
}

/// `J(v_B) = J_res · e^{2α v_B}`.
pub fn exchange(model: &DeviceModel, v_b: f64) -> f64 {
    model.j_res * (2.0 * model.alpha * v_b).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFrequencies {
    pub f_q1_given_q2_0: f64,
    pub f_q1_given_q2_1: f64,
    pub f_q2_given_q1_0: f64,
    pub f_q2_given_q1_1: f64,
}

impl ConditionalFrequencies {
    pub fn as_array(&self) -> [f64; 4] {
        [self.f_q1_given_q2_0, self.f_q1_given_q2_1, self.f_q2_given_q1_0, self.f_q2_given_q1_1]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { f_q1_given_q2_0: a[0], f_q1_given_q2_1: a[1], f_q2_given_q1_0: a[2], f_q2_given_q1_1: a[3] }
    }
}

/// Eigenenergies `(E00, E01~, E10~, E11)` with the odd-block states
/// labelled by their overlap with the bare `|01⟩`, `|10⟩`.
fn eigenenergies(f1: f64, f2: f64, j: f64) -> Result<[f64; 4]> {
    let delta = f1 - f2;
    if delta == 0.0 && j > 0.0 {
        return Err(Error::Labelling("degenerate qubit frequencies with finite exchange".into()));
    }
    let mean = (f1 + f2) / 2.0 - j / 2.0;
    let half = 0.5 * delta.hypot(j);
    let (e10, e01) = if delta > 0.0 { (mean + half, mean - half) } else { (mean - half, mean + half) };
    Ok([0.0, e01, e10, f1 + f2])
}

fn transitions(f1: f64, f2: f64, j: f64) -> Result<[f64; 4]> {
    let [e00, e01, e10, e11] = eigenenergies(f1, f2, j)?;
    Ok([e10 - e00, e11 - e01, e01 - e00, e11 - e10])
}

/// Transition frequencies of each qubit conditioned on the other.
pub fn conditional_frequencies(model: &DeviceModel, v_b: f64) -> Result<ConditionalFrequencies> {
    let (f1, f2) = model.zeeman(v_b);
    Ok(ConditionalFrequencies::from_array(transitions(f1, f2, exchange(model, v_b))?))
}

/// Same as [`conditional_frequencies`] with the bare frequencies offset.
fn shifted_transitions(model: &DeviceModel, v_b: f64, df1: f64, df2: f64) -> Result<[f64; 4]> {
    let (f1, f2) = model.zeeman(v_b);
    transitions(f1 + df1, f2 + df2, exchange(model, v_b))
}

/// Sensitivities `∂f_k/∂(v_B, f_Q1, f_Q2)` by central differences with the
/// given steps.
pub fn transition_sensitivities(model: &DeviceModel, v_b: f64, dv: f64, df: f64) -> Result<[[f64; 3]; 4]> {
    let vp = conditional_frequencies(model, v_b + dv)?.as_array();
    let vm = conditional_frequencies(model, v_b - dv)?.as_array();
    let ap = shifted_transitions(model, v_b, df, 0.0)?;
    let am = shifted_transitions(model, v_b, -df, 0.0)?;
    let bp = shifted_transitions(model, v_b, 0.0, df)?;
    let bm = shifted_transitions(model, v_b, 0.0, -df)?;
    Ok(std::array::from_fn(|k| {
        [(vp[k] - vm[k]) / (2.0 * dv), (ap[k] - am[k]) / (2.0 * df), (bp[k] - bm[k]) / (2.0 * df)]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingTimes {
    pub t2_q1_given_q2_0: f64,
    pub t2_q1_given_q2_1: f64,
    pub t2_q2_given_q1_0: f64,
    pub t2_q2_given_q1_1: f64,
}

impl DephasingTimes {
    pub fn as_array(&self) -> [f64; 4] {
        [self.t2_q1_given_q2_0, self.t2_q1_given_q2_1, self.t2_q2_given_q1_0, self.t2_q2_given_q1_1]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { t2_q1_given_q2_0: a[0], t2_q1_given_q2_1: a[1], t2_q2_given_q1_0: a[2], t2_q2_given_q1_1: a[3] }
    }
}

/// Quasistatic `T2* = 1/(√2 π σ_f)` for each conditional transition.
pub fn dephasing_times(model: &DeviceModel, v_b: f64) -> Result<DephasingTimes> {
    let noise = [model.delta_vb, model.delta_fq1, model.delta_fq2];
    if noise.iter().all(|x| *x == 0.0) {
        return Err(Error::InfiniteDephasing);
    }
    let d = transition_sensitivities(model, v_b, DV_STEP, DF_STEP)?;
    Ok(DephasingTimes::from_array(std::array::from_fn(|k| {
        let var: f64 = (0..3).map(|p| (d[k][p] * noise[p]).powi(2)).sum();
        if var == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (std::f64::consts::SQRT_2 * std::f64::consts::PI * var.sqrt())
        }
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: DeviceModel,
    pub intervals: Vec<ParameterInterval>,
    pub residual_rms: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    pub seed: u64,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bootstrap_resamples: 200, confidence: 0.95, seed: 0x5eed, lm: LmOptions::default() }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Residual bootstrap: refit on `fitted + resampled residuals` and take
/// percentile intervals. Residuals are inflated by `√(n/(n−p))`.
fn residual_bootstrap<F>(
    fitted: &[f64],
    residuals: &[f64],
    n_params: usize,
    opts: &FitOptions,
    mut refit: F,
) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = residuals.len();
    let inflate = (n as f64 / (n.saturating_sub(n_params)).max(1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(opts.bootstrap_resamples); n_params];
    for _ in 0..opts.bootstrap_resamples {
        let data: Vec<f64> = fitted
            .iter()
            .map(|y| y + inflate * residuals[rng.random_range(0..n)])
            .collect();
        let p = refit(&data)?;
        for (k, v) in p.into_iter().enumerate() {
            samples[k].push(v);
        }
    }
    let tail = (1.0 - opts.confidence) / 2.0;
    Ok(samples
        .into_iter()
        .map(|mut s| {
            s.sort_by(|a, b| a.total_cmp(b));
            (percentile(&s, tail), percentile(&s, 1.0 - tail))
        })
        .collect())
}

const EXCHANGE_NAMES: [&str; 7] = ["alpha", "beta1", "beta2", "gamma", "J_res", "f_Q1", "f_Q2"];

/// Internal coordinates: α, β₁ and β₂ in MHz/V^γ, γ, ln J_res, and the
/// qubit frequencies as MHz offsets from a fixed origin.
struct ExchangeCoords {
    f1_origin: f64,
    f2_origin: f64,
}

impl ExchangeCoords {
    fn to_model(&self, x: &[f64], template: &DeviceModel) -> DeviceModel {
        DeviceModel {
            alpha: x[0],
            beta1: x[1] * 1e6,
            beta2: x[2] * 1e6,
            gamma: x[3],
            j_res: x[4].exp(),
            f_q1: self.f1_origin + x[5] * 1e6,
            f_q2: self.f2_origin + x[6] * 1e6,
            ..template.clone()
        }
    }

    fn from_model(&self, m: &DeviceModel) -> Vec<f64> {
        vec![
            m.alpha,
            m.beta1 / 1e6,
            m.beta2 / 1e6,
            m.gamma,
            m.j_res.ln(),
            (m.f_q1 - self.f1_origin) / 1e6,
            (m.f_q2 - self.f2_origin) / 1e6,
        ]
    }
}

fn model_curves(m: &DeviceModel, v: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(4 * v.len());
    for &vb in v {
        out.extend_from_slice(&conditional_frequencies(m, vb)?.as_array());
    }
    Ok(out)
}

/// Data-driven starting point for the exchange fit.
pub fn initial_exchange_guess(data: &[(f64, ConditionalFrequencies)]) -> Result<DeviceModel> {
    let mut pts: Vec<(f64, [f64; 4])> = data.iter().map(|(v, c)| (*v, c.as_array())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // exchange from the Q1 conditional splitting: ln J affine in v
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (v, f) in &pts {
        let j = f[1] - f[0];
        if j > 0.0 {
            let y = j.ln();
            sx += v;
            sy += y;
            sxx += v * v;
            sxy += v * y;
            n += 1.0;
        }
    }
    if n < 2.0 {
        return Err(Error::Domain("exchange splitting not resolved in the data".into()));
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let icpt = (sy - slope * sx) / n;
    let (v0, f0) = pts[0];
    let j0 = icpt.exp() * (slope * v0).exp();
    // bare frequencies from the lowest-voltage point, removing the exchange pull
    let f1 = (f0[0] + f0[1]) / 2.0 - j0 / 2.0;
    let f2 = (f0[2] + f0[3]) / 2.0 - j0 / 2.0;
    // field shift of Q2 (the larger one) fixes γ by a log-log slope
    let mut logs = Vec::new();
    for (v, f) in &pts {
        let s = (f[2] + f[3]) / 2.0 - f2;
        if *v > 0.0 && s.abs() > 1e3 {
            logs.push((v.ln(), s.abs().ln()));
        }
    }
    let gamma = if logs.len() >= 2 {
        let m = logs.len() as f64;
        let (a, b): (f64, f64) = logs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let (aa, ab): (f64, f64) = logs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 * p.0, acc.1 + p.0 * p.1));
        ((m * ab - a * b) / (m * aa - a * a)).clamp(0.2, 5.0)
    } else {
        1.0
    };
    let mut template = DeviceModel {
        f_q1: f1,
        f_q2: f2,
        j_res: icpt.exp(),
        alpha: slope / 2.0,
        beta1: 0.0,
        beta2: 0.0,
        gamma,
        delta_vb: 0.0,
        delta_fq1: 0.0,
        delta_fq2: 0.0,
        rabi: [0.0; 2],
        crosstalk: [0.0; 2],
    };
    // β from linear least squares on the per-qubit mean shifts
    let (mut num1, mut num2, mut den) = (0.0, 0.0, 0.0);
    for (v, f) in &pts {
        let s = template.shift_profile(*v);
        num1 += s * ((f[0] + f[1]) / 2.0 - f1);
        num2 += s * ((f[2] + f[3]) / 2.0 - f2);
        den += s * s;
    }
    if den > 0.0 {
        template.beta1 = num1 / den;
        template.beta2 = num2 / den;
    }
    Ok(template)
}

fn fit_exchange_core(
    v: &[f64],
    y: &[f64],
    start: &DeviceModel,
    coords: &ExchangeCoords,
    lm: &LmOptions,
) -> Result<(DeviceModel, Vec<f64>, usize)> {
    let x0 = coords.from_model(start);
    let scale = [1.0, 1.0, 1.0, 0.1, 1.0, 1.0, 1.0];
    let f = |x: &[f64]| -> Result<Vec<f64>> {
        if !(x[3] > 0.0) {
            return Err(Error::Domain("gamma left its domain".into()));
        }
        let m = coords.to_model(x, start);
        let pred = model_curves(&m, v)?;
        Ok(pred.iter().zip(y).map(|(p, d)| (p - d) / 1e6).collect())
    };
    let sol = levenberg_marquardt(f, &x0, &scale, lm)?;
    let r: Vec<f64> = sol.residuals.iter().map(|r| r * 1e6).collect();
    Ok((coords.to_model(&sol.x, start), r, sol.iterations))
}

/// Least-squares fit of the exchange and field-shift model to the four
/// conditional transition-frequency curves.
pub fn fit_exchange_model(data: &[(f64, ConditionalFrequencies)], opts: &FitOptions) -> Result<FitReport> {
    let mut distinct: Vec<f64> = data.iter().map(|d| d.0).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 8 {
        return Err(Error::Domain(format!("need at least 8 distinct v_B points, got {}", distinct.len())));
    }
    let start = initial_exchange_guess(data)?;
    let js: Vec<f64> = data.iter().map(|(_, c)| c.f_q1_given_q2_1 - c.f_q1_given_q2_0).collect();
    let (jmin, jmax) = js.iter().fold((f64::INFINITY, 0.0f64), |a, j| (a.0.min(*j), a.1.max(*j)));
    if !(jmin > 0.0 && jmax / jmin >= 10.0) {
        return Err(Error::Domain("data must span a decade of exchange".into()));
    }
    let coords = ExchangeCoords { f1_origin: start.f_q1, f2_origin: start.f_q2 };
    let v: Vec<f64> = data.iter().map(|d| d.0).collect();
    let y: Vec<f64> = data.iter().flat_map(|d| d.1.as_array()).collect();
    let (model, resid, iterations) = fit_exchange_core(&v, &y, &start, &coords, &opts.lm)?;
    let fitted = model_curves(&model, &v)?;
    let ci = residual_bootstrap(&fitted, &resid, 7, opts, |yb| {
        let (m, _, _) = fit_exchange_core(&v, yb, &model, &coords, &opts.lm)?;
        Ok(exchange_params(&m).to_vec())
    })?;
    let est = exchange_params(&model);
    let intervals = EXCHANGE_NAMES
        .iter()
        .zip(est)
        .zip(ci)
        .map(|((n, e), (lo, hi))| ParameterInterval { name: n.to_string(), estimate: e, lower: lo, upper: hi })
        .collect();
    let residual_rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    Ok(FitReport { model, intervals, residual_rms, iterations })
}

fn exchange_params(m: &DeviceModel) -> [f64; 7] {
    [m.alpha, m.beta1, m.beta2, m.gamma, m.j_res, m.f_q1, m.f_q2]
}

const NOISE_NAMES: [&str; 3] = ["delta_vB", "delta_fQ1", "delta_fQ2"];

fn t2_curves(m: &DeviceModel, v: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(4 * v.len());
    for &vb in v {
        out.extend_from_slice(&dephasing_times(m, vb)?.as_array());
    }
    Ok(out)
}

fn fit_noise_core(
    v: &[f64],
    t2: &[f64],
    model: &DeviceModel,
    start: [f64; 3],
    lm: &LmOptions,
) -> Result<(DeviceModel, Vec<f64>, usize)> {
    // coordinates: δv_B in mV, δf in kHz; residual is the relative T2* error
    let with = |x: &[f64]| DeviceModel {
        delta_vb: x[0].abs() * 1e-3,
        delta_fq1: x[1].abs() * 1e3,
        delta_fq2: x[2].abs() * 1e3,
        ..model.clone()
    };
    let x0 = [start[0] * 1e3, start[1] / 1e3, start[2] / 1e3];
    let f = |x: &[f64]| -> Result<Vec<f64>> {
        let pred = t2_curves(&with(x), v)?;
        Ok(pred.iter().zip(t2).map(|(p, d)| p / d - 1.0).collect())
    };
    let sol = levenberg_marquardt(f, &x0, &[0.1, 1.0, 1.0], lm)?;
    let m = with(&sol.x);
    let pred = t2_curves(&m, v)?;
    let resid = pred.iter().zip(t2).map(|(p, d)| d - p).collect();
    Ok((m, resid, sol.iterations))
}

/// Linearized start: `σ_k² = Σ_p (∂f_k/∂p)² δ_p²` is linear in `δ_p²`.
fn initial_noise_guess(model: &DeviceModel, data: &[(f64, DephasingTimes)]) -> Result<[f64; 3]> {
    let mut a = nalgebra::DMatrix::<f64>::zeros(4 * data.len(), 3);
    let mut b = nalgebra::DVector::<f64>::zeros(4 * data.len());
    for (i, (v, t2)) in data.iter().enumerate() {
        let d = transition_sensitivities(model, *v, DV_STEP, DF_STEP)?;
        for (k, t) in t2.as_array().iter().enumerate() {
            let sigma = 1.0 / (std::f64::consts::SQRT_2 * std::f64::consts::PI * t);
            // rows weighted by 1/σ² to balance relative errors
            let w = 1.0 / (sigma * sigma);
            for p in 0..3 {
                a[(4 * i + k, p)] = d[k][p].powi(2) * w;
            }
            b[4 * i + k] = 1.0;
        }
    }
    // column scaling keeps the normal equations well conditioned
    let norms: Vec<f64> = (0..3).map(|p| a.column(p).norm().max(1e-300)).collect();
    for p in 0..3 {
        a.column_mut(p).scale_mut(1.0 / norms[p]);
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Singular(e.to_string()))?;
    Ok(std::array::from_fn(|p| {
        let var = sol[p] / norms[p];
        var.max(1e-30).sqrt()
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseFitReport {
    pub delta_vb: f64,
    pub delta_fq1: f64,
    pub delta_fq2: f64,
    pub intervals: Vec<ParameterInterval>,
    pub iterations: usize,
}

/// Fits the rms noise amplitudes to measured `T2*` curves. `model` must
/// already carry the fitted exchange and field-shift parameters.
pub fn fit_noise_model(
    model: &DeviceModel,
    data: &[(f64, DephasingTimes)],
    start: Option<[f64; 3]>,
    opts: &FitOptions,
) -> Result<NoiseFitReport> {
    if data.is_empty() {
        return Err(Error::Domain("no T2* data".into()));
    }
    let start = match start {
        Some(s) => s,
        None => initial_noise_guess(model, data)?,
    };
    let v: Vec<f64> = data.iter().map(|d| d.0).collect();
    let t2: Vec<f64> = data.iter().flat_map(|d| d.1.as_array()).collect();
    let (fit, resid, iterations) = fit_noise_core(&v, &t2, model, start, &opts.lm)?;
    let est = [fit.delta_vb, fit.delta_fq1, fit.delta_fq2];
    let fitted = t2_curves(&fit, &v)?;
    let ci = residual_bootstrap(&fitted, &resid, 3, opts, |yb| {
        let (m, _, _) = fit_noise_core(&v, yb, model, est, &opts.lm)?;
        Ok(vec![m.delta_vb, m.delta_fq1, m.delta_fq2])
    })?;
    let intervals = NOISE_NAMES
        .iter()
        .zip(est)
        .zip(ci)
        .map(|((n, e), (lo, hi))| ParameterInterval { name: n.to_string(), estimate: e, lower: lo, upper: hi })
        .collect();
    Ok(NoiseFitReport { delta_vb: est[0], delta_fq1: est[1], delta_fq2: est[2], intervals, iterations })
}

/// Synthetic frequency sweep with optional Gaussian jitter (Hz rms).
pub fn synthesize_frequency_data(
    model: &DeviceModel,
    v: &[f64],
    noise_hz: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(f64, ConditionalFrequencies)>> {
    let normal = rand_distr::Normal::new(0.0, noise_hz.max(0.0)).map_err(|e| Error::Domain(e.to_string()))?;
    v.iter()
        .map(|&vb| {
            let mut f = conditional_frequencies(model, vb)?.as_array();
            if noise_hz > 0.0 {
                for x in &mut f {
                    *x += rng.sample(normal);
                }
            }
            Ok((vb, ConditionalFrequencies::from_array(f)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_profile_loads_and_validates() {
        let m = DeviceModel::reference();
        m.validate().unwrap();
        assert_eq!(m.alpha, 12.1);
        assert_eq!(m.j_res, 58.8e3);
        assert_eq!(m.f_q1, 11.993e9);
    }

    #[test]
    fn json_keys_carry_units() {
        let s = serde_json::to_string(&DeviceModel::reference()).unwrap();
        for key in ["\"alpha_per_volt\"", "\"J_res_hz\"", "\"delta_vB_volt\"", "\"f_Q1_hz\""] {
            assert!(s.contains(key), "{key}");
        }
    }

    #[test]
    fn exchange_at_zero_is_residual() {
        let m = DeviceModel::reference();
        assert_eq!(exchange(&m, 0.0), m.j_res);
        let j = exchange(&m, 0.1);
        assert!((j / (m.j_res * 2.42f64.exp()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_eigenvalues_match_closed_form() {
        let m = DeviceModel::reference();
        for v in [0.0, 0.1, 0.2] {
            let h = m.hamiltonian(v);
            let hr = nalgebra::Matrix4::from_fn(|r, c| h[(r, c)].re);
            let mut ev: Vec<f64> = hr.symmetric_eigen().eigenvalues.iter().cloned().collect();
            ev.sort_by(|a, b| a.total_cmp(b));
            let (f1, f2) = m.zeeman(v);
            let mut closed = eigenenergies(f1, f2, exchange(&m, v)).unwrap().to_vec();
            closed.sort_by(|a, b| a.total_cmp(b));
            for (a, b) in ev.iter().zip(&closed) {
                assert!((a - b).abs() < 1e-3, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn degenerate_frequencies_are_a_labelling_error() {
        let mut m = DeviceModel::reference();
        m.f_q2 = m.f_q1;
        m.beta2 = m.beta1;
        assert!(matches!(conditional_frequencies(&m, 0.0), Err(Error::Labelling(_))));
    }

    #[test]
    fn vanishing_exchange_gives_bare_frequencies() {
        let mut m = DeviceModel::reference();
        m.j_res = 1e-9;
        let c = conditional_frequencies(&m, 0.0).unwrap();
        assert!((c.f_q1_given_q2_0 - m.f_q1).abs() < 1e-6);
        assert!((c.f_q1_given_q2_1 - m.f_q1).abs() < 1e-6);
        assert!((c.f_q2_given_q1_0 - m.f_q2).abs() < 1e-6);
        assert!((c.f_q2_given_q1_1 - m.f_q2).abs() < 1e-6);
    }

    #[test]
    fn all_zero_noise_is_signalled() {
        let mut m = DeviceModel::reference();
        m.delta_vb = 0.0;
        m.delta_fq1 = 0.0;
        m.delta_fq2 = 0.0;
        assert!(matches!(dephasing_times(&m, 0.1), Err(Error::InfiniteDephasing)));
    }
}
