//! Simulated conventional calibration, GST feedback and the closed loop.
//!
//! Calibration experiments run on noiseless state vectors with exact
//! populations. Ramsey preparation and analysis pulses are ideal so that
//! each experiment isolates the phase it is meant to measure; the pulses
//! under test are the compiled bursts and barrier pulse.

use std::f64::consts::PI;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::dynamics::NoiseSpec;
use crate::gates::{BurstAxis, GateCompiler, GateParams};
use crate::gst::dataset::simulate_dataset;
use crate::gst::estimate::{mle_estimate, MleOptions};
use crate::gst::model::{GateSet, SpamModel};
use crate::gst::{Design, GateLabel};
use crate::linalg::{CMat4, C64};
use crate::metrics::{feedback_coefficients, GateMetrics, FEEDBACK_LABELS};
use crate::qptm::pauli_rotation;
use crate::{Error, Result};

type State = Vector4<C64>;

/// Two-qubit Pauli index of a single-qubit Pauli (`1=X, 2=Y, 3=Z`) on `qubit` (0-based).
fn on(qubit: usize, p: usize) -> usize {
    if qubit == 0 {
        4 * p
    } else {
        p
    }
}

fn ground() -> State {
    Vector4::from_fn(|i, _| if i == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

fn excited_population(psi: &State, qubit: usize) -> f64 {
    (0..4).filter(|i| if qubit == 0 { i >> 1 == 1 } else { i & 1 == 1 }).map(|i| psi[i].norm_sqr()).sum()
}

/// Phase of a Ramsey fringe on `qubit`: the analysis axis is swept over 12
/// angles and `a + b cos ψ + c sin ψ` is fitted by linear least squares.
/// A state `|0⟩ + e^{iδ}|1⟩` returns `δ`.
pub fn fringe_phase(psi: &State, qubit: usize) -> f64 {
    let n = 12;
    let (mut sc, mut ss) = (0.0, 0.0);
    let mut mean = 0.0;
    let mut ys = Vec::with_capacity(n);
    for k in 0..n {
        let psi_k = 2.0 * PI * k as f64 / n as f64;
        let u = pauli_rotation(on(qubit, 2), PI / 2.0) * pauli_rotation(on(qubit, 3), -psi_k);
        let y = excited_population(&(u * psi), qubit);
        ys.push((psi_k, y));
        mean += y / n as f64;
    }
    // on an equispaced full period the normal equations are diagonal
    for (p, y) in ys {
        sc += (y - mean) * p.cos();
        ss += (y - mean) * p.sin();
    }
    ss.atan2(sc)
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Drive-frequency correction for `qubit` from Ramsey delays up to 2 µs,
/// averaged over the other qubit in `|0⟩` and `|1⟩`.
pub fn ramsey_detuning(c: &GateCompiler, qubit: usize) -> Result<f64> {
    let other = 1 - qubit;
    let delays = [0.0, 20e-9, 100e-9, 400e-9, 2e-6];
    let mut est = 0.0;
    for s in 0..2 {
        let mut psi = ground();
        if s == 1 {
            psi = pauli_rotation(on(other, 1), PI) * psi;
        }
        psi = pauli_rotation(on(qubit, 2), PI / 2.0) * psi;
        let mut slope = 0.0;
        let mut last = (0.0, fringe_phase(&psi, qubit));
        for &tau in &delays[1..] {
            let u = c.schedule_unitary(&c.idle_schedule(tau))?;
            let ph = fringe_phase(&(u * psi), qubit);
            let predicted = last.1 + slope * (tau - last.0);
            let unwrapped = predicted + wrap(ph - predicted);
            slope = (unwrapped - fringe_phase(&psi, qubit)) / tau;
            last = (tau, unwrapped);
        }
        // the |1⟩ amplitude turns as e^{−i2π(f − f_d)τ}
        est += -slope / (2.0 * PI) / 2.0;
    }
    Ok(est)
}

/// Rotation angle per burst on `qubit`, fitted from `P₁(n) = sin²(nθ/2)`
/// over `n = 1..=12` applications of the corrected gate.
pub fn rotation_angle(c: &GateCompiler, qubit: usize) -> Result<f64> {
    let u = c.unitary(if qubit == 0 { GateLabel::X1 } else { GateLabel::X2 })?;
    let mut data = Vec::with_capacity(12);
    let mut psi = ground();
    for n in 1..=12 {
        psi = u * psi;
        data.push((n as f64, excited_population(&psi, qubit)));
    }
    let sse = |th: f64| data.iter().map(|(n, y)| (y - (n * th / 2.0).sin().powi(2)).powi(2)).sum::<f64>();
    let (mut best, mut fbest) = (PI / 2.0, f64::INFINITY);
    for k in 0..=2000 {
        let th = PI * (0.3 + 0.4 * k as f64 / 2000.0);
        let f = sse(th);
        if f < fbest {
            best = th;
            fbest = f;
        }
    }
    // golden-section refinement around the grid minimum
    let (mut a, mut b) = (best - 0.4 * PI / 2000.0, best + 0.4 * PI / 2000.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if sse(x1) < sse(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Victim phase per burst from a Ramsey on `victim` interleaved with the
/// raw pair `[X_a, −X_a]`, which measures twice the phase.
pub fn crosstalk_phase(c: &GateCompiler, addressed: usize, victim: usize) -> Result<f64> {
    let t = c.params.t_xy[addressed];
    let ux = c.schedule_unitary(&c.burst_schedule(addressed, BurstAxis::X, t)?)?;
    let um = c.schedule_unitary(&c.burst_schedule(addressed, BurstAxis::MinusX, t)?)?;
    let psi = pauli_rotation(on(victim, 2), PI / 2.0) * ground();
    let p0 = fringe_phase(&psi, victim);
    let p1 = fringe_phase(&(um * ux * psi), victim);
    Ok(wrap(p1 - p0) / 2.0)
}

/// Conditional-phase Ramsey: target fringe phases with the control left in
/// `|0⟩` and after a raw π burst (no virtual corrections), both followed by
/// the compiled CPHASE. Returns `(φ₀, φ₁)`.
pub fn conditional_ramsey(c: &GateCompiler, control: usize, target: usize) -> Result<(f64, f64)> {
    let ucz = c.unitary(GateLabel::CZ)?;
    let pi_burst = c.schedule_unitary(&c.burst_schedule(control, BurstAxis::X, 2.0 * c.params.t_xy[control])?)?;
    let psi = pauli_rotation(on(target, 2), PI / 2.0) * ground();
    Ok((fringe_phase(&(ucz * psi), target), fringe_phase(&(ucz * pi_burst * psi), target)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConventionalReport {
    pub params: GateParams,
    /// Conditional phase seen with Q1 as control (set to 180°), degrees.
    pub conditional_phase_q1_control_deg: f64,
    /// Same with Q2 as control, degrees.
    pub conditional_phase_q2_control_deg: f64,
    /// Deviation of the second experiment from 180°, degrees.
    pub asymmetry_deg: f64,
}

fn conditional_deg(c: &GateCompiler, control: usize, target: usize) -> Result<f64> {
    let (p0, p1) = conditional_ramsey(c, control, target)?;
    Ok((p1 - p0).rem_euclid(2.0 * PI).to_degrees())
}

/// Ramsey-based calibration of all 11 parameters, in the usual order:
/// frequencies, burst times, victim phases, then the CPHASE amplitude
/// (control Q1) and the two single-qubit phases.
pub fn conventional_calibrate(model: &DeviceModel, initial: &GateParams) -> Result<ConventionalReport> {
    let mut c = GateCompiler::new(model.clone(), *initial)?;
    for q in 0..2 {
        let df = ramsey_detuning(&c, q)?;
        if q == 0 {
            c.params.f_q1 += df;
        } else {
            c.params.f_q2 += df;
        }
    }
    for _ in 0..2 {
        for q in 0..2 {
            let th = rotation_angle(&c, q)?;
            c.params.t_xy[q] *= (PI / 2.0) / th;
        }
        for a in 0..2 {
            for v in 0..2 {
                c.params.phi[a][v] = -crosstalk_phase(&c, a, v)?;
            }
        }
    }
    // amplitude: conditional phase of the Q1-control experiment at 180°
    let g = |c: &mut GateCompiler, a: f64| -> Result<f64> {
        c.params.a_vb = a;
        let (p0, p1) = conditional_ramsey(c, 0, 1)?;
        Ok(wrap(p1 - p0 - PI))
    };
    let (mut a0, mut a1) = (c.params.a_vb, c.params.a_vb * 1.02);
    let (mut g0, mut g1) = (g(&mut c, a0)?, g(&mut c, a1)?);
    let mut converged = false;
    for _ in 0..40 {
        if g1.abs() < 1e-9 {
            converged = true;
            break;
        }
        let a2 = (a1 - g1 * (a1 - a0) / (g1 - g0)).max(1.0);
        a0 = a1;
        g0 = g1;
        a1 = a2;
        g1 = g(&mut c, a1)?;
    }
    if !converged && g1.abs() > 1e-6 {
        return Err(Error::NonConvergence { what: "CPHASE amplitude".into(), iterations: 40, residual: g1.abs() });
    }
    c.params.a_vb = a1;
    let (p0, _) = conditional_ramsey(&c, 0, 1)?;
    c.params.theta[1] = wrap(c.params.theta[1] - p0);
    let (p0, _) = conditional_ramsey(&c, 1, 0)?;
    c.params.theta[0] = wrap(c.params.theta[0] - p0);
    let d = conditional_deg(&c, 0, 1)?;
    let e = conditional_deg(&c, 1, 0)?;
    Ok(ConventionalReport {
        params: c.params,
        conditional_phase_q1_control_deg: d,
        conditional_phase_q2_control_deg: e,
        asymmetry_deg: e - 180.0,
    })
}

/// The seven Hamiltonian coefficients of each gate, in gate order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub coefficients: [[f64; 7]; 6],
    pub deltas: [f64; 11],
}

impl FeedbackReport {
    pub fn from_metrics(metrics: &[GateMetrics]) -> Self {
        let mut coefficients = [[0.0; 7]; 6];
        for (i, m) in metrics.iter().enumerate().take(6) {
            coefficients[i] = feedback_coefficients(&m.hamiltonian_errors);
        }
        Self { coefficients, deltas: [0.0; 11] }
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest coefficient the feedback map acts on. Residual-exchange ZZ
    /// during bursts and idles and the off-resonant victim rotations have
    /// no parameter to absorb them.
    pub fn max_correctable(&self) -> f64 {
        CORRECTABLE
            .iter()
            .map(|(g, l)| coef(self, *g, l).abs())
            .fold(0.0, f64::max)
    }
}

const CORRECTABLE: [(GateLabel, &str); 15] = [
    (GateLabel::X1, "XI"),
    (GateLabel::X1, "ZI"),
    (GateLabel::X1, "IZ"),
    (GateLabel::Y1, "YI"),
    (GateLabel::Y1, "ZI"),
    (GateLabel::Y1, "IZ"),
    (GateLabel::X2, "IX"),
    (GateLabel::X2, "ZI"),
    (GateLabel::X2, "IZ"),
    (GateLabel::Y2, "IY"),
    (GateLabel::Y2, "ZI"),
    (GateLabel::Y2, "IZ"),
    (GateLabel::CZ, "ZI"),
    (GateLabel::CZ, "IZ"),
    (GateLabel::CZ, "ZZ"),
];

fn coef(report: &FeedbackReport, gate: GateLabel, label: &str) -> f64 {
    let g = gate.index().expect("physical gate");
    let k = FEEDBACK_LABELS.iter().position(|l| *l == label).expect("feedback label");
    report.coefficients[g][k]
}

/// One correction step. Over-rotations come from the coefficient of the
/// gate's own axis on its own qubit (`XI` for X1, `IY` for Y2, ...), victim
/// phases from the Z coefficients of the single-qubit gates, θ from ZI/IZ
/// of the CPHASE and `A_vB` from its ZZ coefficient through the
/// proportionality of conditional phase and amplitude.
pub fn feedback_update(report: &mut FeedbackReport, params: &GateParams, gain: f64) -> Result<GateParams> {
    if !(gain > 0.0 && gain <= 1.0) {
        return Err(Error::Domain(format!("gain must be in (0, 1], got {gain}")));
    }
    let mut p = *params;
    use GateLabel::*;
    let over = [
        0.5 * (coef(report, X1, "XI") + coef(report, Y1, "YI")),
        0.5 * (coef(report, X2, "IX") + coef(report, Y2, "IY")),
    ];
    for q in 0..2 {
        p.t_xy[q] *= (PI / 2.0) / (PI / 2.0 + gain * over[q]);
    }
    let z = [
        [0.5 * (coef(report, X1, "ZI") + coef(report, Y1, "ZI")), 0.5 * (coef(report, X1, "IZ") + coef(report, Y1, "IZ"))],
        [0.5 * (coef(report, X2, "ZI") + coef(report, Y2, "ZI")), 0.5 * (coef(report, X2, "IZ") + coef(report, Y2, "IZ"))],
    ];
    for a in 0..2 {
        for v in 0..2 {
            p.phi[a][v] -= gain * z[a][v];
        }
    }
    p.theta[0] -= gain * coef(report, CZ, "ZI");
    p.theta[1] -= gain * coef(report, CZ, "IZ");
    // a ZZ coefficient h is an excess conditional phase of 2h, and the
    // conditional phase scales with the amplitude
    let h = coef(report, CZ, "ZZ");
    p.a_vb *= PI / (PI + 2.0 * gain * h);
    let before = params.as_array();
    let after = p.as_array();
    for i in 0..11 {
        report.deltas[i] = after[i] - before[i];
    }
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct LoopOptions {
    pub shots: u64,
    pub max_iterations: usize,
    pub gain: f64,
    /// Stop when every correctable coefficient is below this (rad).
    pub threshold: f64,
    pub trials: usize,
    pub seed: u64,
    pub spam: SpamModel,
    pub design_max_l: usize,
    pub mle: MleOptions,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self {
            shots: 1000,
            max_iterations: 5,
            gain: 1.0,
            threshold: 5e-3,
            trials: 200,
            seed: 1,
            spam: SpamModel::reference(),
            design_max_l: 16,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopIteration {
    pub iteration: usize,
    pub params: GateParams,
    /// Fidelity of the estimated CPHASE.
    pub cphase_fidelity: f64,
    /// Fidelity of the simulated (true) CPHASE channel.
    pub cphase_fidelity_truth: f64,
    pub report: FeedbackReport,
    pub mle_converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopTrace {
    pub iterations: Vec<LoopIteration>,
    pub final_params: GateParams,
    pub converged: bool,
    /// Set when the fidelity dropped twice in a row.
    pub diverged: bool,
}

impl LoopTrace {
    /// `iter,cphase_infidelity,` followed by the CPHASE feedback coefficients.
    pub fn to_csv(&self) -> String {
        let mut s = format!("iter,cphase_infidelity,{}\n", FEEDBACK_LABELS.join(","));
        for it in &self.iterations {
            let c = it.report.coefficients[5].map(|v| format!("{v:.6e}")).join(",");
            s.push_str(&format!("{},{:.6e},{}\n", it.iteration, 1.0 - it.cphase_fidelity, c));
        }
        s
    }
}

/// Simulated GST on the compiled gate set, returning the estimate.
pub fn gst_round(c: &GateCompiler, opts: &LoopOptions, round: u64) -> Result<(GateSet, GateSet, bool)> {
    let mut spec = NoiseSpec::from_model(&c.model, opts.seed.wrapping_add(1000 * round));
    spec.seed = opts.seed.wrapping_add(1000 * round);
    let truth = c.gate_set(&spec, opts.trials, &opts.spam)?;
    let design = Design::standard(opts.design_max_l)?;
    let ds = simulate_dataset(&truth, &design, opts.shots, opts.seed.wrapping_add(1000 * round + 1))?;
    let est = mle_estimate(&ds, &design, &GateSet::target(), &opts.mle)?;
    Ok((truth, est.gate_set, est.converged))
}

/// Compile → simulate GST → estimate → feedback, until the coefficients
/// fall below the threshold or `max_iterations` is reached.
pub fn closed_loop(model: &DeviceModel, initial: &GateParams, opts: &LoopOptions) -> Result<LoopTrace> {
    if opts.max_iterations == 0 {
        return Err(Error::Domain("max_iterations must be at least 1".into()));
    }
    let mut params = *initial;
    let mut iterations: Vec<LoopIteration> = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    for it in 0..opts.max_iterations {
        let c = GateCompiler::new(model.clone(), params)?;
        let (truth, est, mle_ok) = gst_round(&c, opts, it as u64)?;
        let metrics = crate::metrics::gate_set_metrics(&est)?;
        let truth_cz = GateMetrics::compute(GateLabel::CZ, &truth.gate_ptm(GateLabel::CZ))?;
        let mut report = FeedbackReport::from_metrics(&metrics);
        let done = report.max_correctable() < opts.threshold;
        let next = if done { params } else { feedback_update(&mut report, &params, opts.gain)? };
        iterations.push(LoopIteration {
            iteration: it,
            params,
            cphase_fidelity: metrics[5].f_gate,
            cphase_fidelity_truth: truth_cz.f_gate,
            report,
            mle_converged: mle_ok,
        });
        let n = iterations.len();
        if n >= 3 {
            let f: Vec<f64> = iterations[n - 3..].iter().map(|i| i.cphase_fidelity).collect();
            if f[2] < f[1] && f[1] < f[0] {
                diverged = true;
                break;
            }
        }
        if done {
            converged = true;
            break;
        }
        params = next;
    }
    Ok(LoopTrace { iterations, final_params: params, converged, diverged })
}

/// Ideal `|0⟩+e^{iδ}|1⟩` helper for tests.
pub fn phase_state(qubit: usize, delta: f64) -> State {
    let u: CMat4 = pauli_rotation(on(qubit, 3), delta) * pauli_rotation(on(qubit, 2), PI / 2.0);
    u * ground()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fringe_phase_reads_the_azimuth() {
        for q in 0..2 {
            for d in [-2.0, -0.3, 0.0, 0.7, 3.0] {
                assert!((wrap(fringe_phase(&phase_state(q, d), q) - d)).abs() < 1e-12, "{q} {d}");
            }
        }
    }

    #[test]
    fn zero_report_leaves_parameters_unchanged() {
        let p = GateParams::nominal(&DeviceModel::reference()).unwrap();
        let mut r = FeedbackReport { coefficients: [[0.0; 7]; 6], deltas: [1.0; 11] };
        let q = feedback_update(&mut r, &p, 1.0).unwrap();
        assert_eq!(p, q);
        assert!(r.deltas.iter().all(|d| *d == 0.0));
    }
}
