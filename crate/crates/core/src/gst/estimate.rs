//! Linear-inversion seed, CPTP maximum likelihood, gauge fixing and
//! goodness of fit.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::circuit::{Design, GateLabel};
use super::cptp;
use super::dataset::{sample_counts, GstDataset};
use super::model::{design_gradient, design_probabilities, to_m16, GateSet, M16, V16};
use crate::lsq::{levenberg_marquardt, LmOptions};
use crate::optim::{lbfgs, LbfgsOptions};
use crate::qptm::{pauli_rotation, ptm_from_unitary_unchecked};
use crate::{Error, Result};

/// Non-gauge parameters of a trace-preserving two-qubit gate set with six
/// gates and four effects: 6·240 + 15 + 48 − 240.
pub const NON_GAUGE_PARAMS: usize = 6 * 240 + 15 + 48 - 240;

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub lbfgs: LbfgsOptions,
    /// Below this the log is continued quadratically.
    pub min_prob: f64,
    /// Choi eigenvalue floor used when projecting the seed.
    pub seed_floor: f64,
    pub gate_weight: f64,
    pub spam_weight: f64,
    /// Stop once the total log-likelihood gains less than this over
    /// `lbfgs.window` iterations, or sits this close to the saturated model.
    pub loglik_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            lbfgs: LbfgsOptions { memory: 30, max_iterations: 4000, grad_tol: 1e-9, f_tol: 1e-15, window: 50, f_target: f64::NEG_INFINITY },
            min_prob: 1e-9,
            seed_floor: 1e-6,
            gate_weight: 1.0,
            spam_weight: 0.1,
            loglik_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GateSetEstimate {
    pub gate_set: GateSet,
    pub log_likelihood: f64,
    /// Log-likelihood of the maximal model (observed frequencies).
    pub max_log_likelihood: f64,
    pub iterations: usize,
    /// False when the optimizer stopped early; the estimate is then partial.
    pub converged: bool,
    /// Infinity norm of the per-shot objective gradient at the optimum.
    pub grad_norm: f64,
}

fn counts_vec(counts: &[[f64; 4]]) -> Vec<f64> {
    counts.iter().flat_map(|c| c.iter().copied()).collect()
}

/// `Σ N log(N/total)` with `0·log 0 = 0`.
pub fn max_log_likelihood(counts: &[[f64; 4]]) -> f64 {
    counts
        .iter()
        .map(|c| {
            let t: f64 = c.iter().sum();
            c.iter().filter(|n| **n > 0.0).map(|n| n * (n / t).ln()).sum::<f64>()
        })
        .sum()
}

/// `N log p`, continued as a quadratic below `pmin`, and its derivative.
fn term(n: f64, p: f64, pmin: f64) -> (f64, f64) {
    if n == 0.0 {
        return (0.0, 0.0);
    }
    if p >= pmin {
        (n * p.ln(), n / p)
    } else {
        let x = p - pmin;
        (n * (pmin.ln() + x / pmin - 0.5 * x * x / (pmin * pmin)), n * (1.0 / pmin - x / (pmin * pmin)))
    }
}

pub fn log_likelihood(gs: &GateSet, design: &Design, counts: &[[f64; 4]], min_prob: f64) -> f64 {
    let p = design_probabilities(gs, design);
    counts_vec(counts).iter().zip(&p).map(|(n, p)| term(*n, *p, min_prob).0).sum()
}

/// Linear inversion from the `L = 0` block and the single-gate `L = 1`
/// blocks, gauge-fixed towards `target`. The result need not be CPTP.
pub fn lgst(counts: &[[f64; 4]], design: &Design, target: &GateSet) -> Result<GateSet> {
    let nf = design.fiducials.len();
    let null = design
        .fiducials
        .iter()
        .position(|f| f.is_empty())
        .ok_or_else(|| Error::Domain("fiducials must contain the empty circuit".into()))?;
    let block_of = |germ: &[GateLabel], power: usize| {
        design.blocks.iter().position(|b| b.germ == germ && b.power == power)
    };
    let gram_of = |b: usize| {
        DMatrix::from_fn(4 * nf, nf, |row, f| {
            let c = &counts[(b * nf + f) * nf + row / 4];
            c[row % 4] / c.iter().sum::<f64>()
        })
    };
    let b0 = block_of(&[], 0).ok_or_else(|| Error::Domain("design lacks the L = 0 block".into()))?;
    let gram = gram_of(b0);
    let svd = gram.clone().svd(true, true);
    let (u_full, vt_full) = (svd.u.expect("u"), svd.v_t.expect("v"));
    // singular values come sorted in decreasing order
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let keep = &order[..16];
    if svd.singular_values[keep[15]] < 1e-6 * svd.singular_values[keep[0]] {
        return Err(Error::Singular("fiducial Gram matrix has rank < 16".into()));
    }
    let u = DMatrix::from_fn(4 * nf, 16, |r, c| u_full[(r, keep[c])]);
    let v = DMatrix::from_fn(nf, 16, |r, c| vt_full[(keep[c], r)]);
    let sinv = DMatrix::from_fn(16, 16, |r, c| if r == c { 1.0 / svd.singular_values[keep[r]] } else { 0.0 });
    let s = DMatrix::from_fn(16, 16, |r, c| if r == c { svd.singular_values[keep[r]] } else { 0.0 });
    // gauge: T B' ≈ R_target with B' = Σ Vᵀ
    let r_target = DMatrix::from_fn(16, nf, |i, f| (target.sequence(&design.fiducials[f]) * target.rho)[i]);
    let t = &r_target * &v * &sinv;
    let t_inv = t.clone().try_inverse().ok_or_else(|| Error::Singular("LGST gauge".into()))?;
    let mut gates = [M16::zeros(); 6];
    for (gi, label) in GateLabel::GATES.iter().enumerate() {
        let b = block_of(&[*label], 1).ok_or_else(|| Error::Domain(format!("design lacks the germ {label}")))?;
        let g_hat = u.transpose() * gram_of(b) * &v * &sinv;
        gates[gi] = to_m16(&(&t * g_hat * &t_inv));
    }
    let rho_hat = &s * v.row(null).transpose();
    let rho = V16::from_iterator((&t * rho_hat).iter().copied());
    let t_inv_t = t_inv.transpose();
    let effects = std::array::from_fn(|k| {
        let e_hat = u.row(4 * null + k).transpose();
        V16::from_iterator((&t_inv_t * e_hat).iter().copied())
    });
    Ok(GateSet { gates, rho, effects })
}

/// Orthogonal PTM of `exp(−i Σ θ_k P_k / 2)` over the 15 non-identity Paulis.
pub fn unitary_gauge(theta: &[f64]) -> M16 {
    let mut h = crate::linalg::CMat4::zeros();
    for (k, t) in theta.iter().enumerate() {
        h += crate::qptm::pauli_2q(k + 1) * crate::linalg::C64::new(*t, 0.0);
    }
    // exp(−iH/2) with H Hermitian via the 4×4 eigen-decomposition
    let e = h.symmetric_eigen();
    let d = nalgebra::Vector4::from_fn(|i, _| crate::linalg::C64::from_polar(1.0, -0.5 * e.eigenvalues[i]));
    let u = e.eigenvectors * crate::linalg::CMat4::from_diagonal(&d) * e.eigenvectors.adjoint();
    to_m16(ptm_from_unitary_unchecked(&u).entries())
}

/// Minimizes the weighted Frobenius distance to `target` over unitary
/// gauges, which keep every gate CPTP.
pub fn gauge_optimize(gs: &GateSet, target: &GateSet, gate_weight: f64, spam_weight: f64) -> Result<GateSet> {
    let residuals = |theta: &[f64]| -> Result<Vec<f64>> {
        let t = unitary_gauge(theta);
        let (wg, ws) = (gate_weight.sqrt(), spam_weight.sqrt());
        let mut r = Vec::with_capacity(6 * 256 + 80);
        for g in 0..6 {
            let m = t * gs.gates[g] * t.transpose() - target.gates[g];
            r.extend(m.iter().map(|v| wg * v));
        }
        r.extend((t * gs.rho - target.rho).iter().map(|v| ws * v));
        for k in 0..4 {
            r.extend((t * gs.effects[k] - target.effects[k]).iter().map(|v| ws * v));
        }
        Ok(r)
    };
    let opts = LmOptions::default();
    let sol = levenberg_marquardt(residuals, &[0.0; 15], &[1e-3; 15], &opts)?;
    gs.gauge_transform(&unitary_gauge(&sol.x))
}

/// Maximum-likelihood CPTP estimate: LGST seed, L-BFGS over the Kraus
/// parameterization, then unitary gauge fixing.
pub fn mle_estimate(dataset: &GstDataset, design: &Design, target: &GateSet, opts: &MleOptions) -> Result<GateSetEstimate> {
    let counts = dataset.aligned_counts(design)?;
    let seed = lgst(&counts, design, target)?;
    mle_from_seed(&counts, design, target, &seed, opts)
}

pub fn mle_from_seed(
    counts: &[[f64; 4]],
    design: &Design,
    target: &GateSet,
    seed: &GateSet,
    opts: &MleOptions,
) -> Result<GateSetEstimate> {
    let n = counts_vec(counts);
    let total: f64 = n.iter().sum();
    let max_ll = max_log_likelihood(counts);
    let pmin = opts.min_prob;
    // objective: (max log L − log L) per shot
    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let d = cptp::decode(x);
        let p = design_probabilities(&d.gate_set, design);
        let mut ll = 0.0;
        let mut w = vec![0.0; p.len()];
        for i in 0..p.len() {
            let (v, dv) = term(n[i], p[i], pmin);
            ll += v;
            w[i] = -dv / total;
        }
        let g = design_gradient(&d.gate_set, design, &w);
        ((max_ll - ll) / total, cptp::encode_gradient(&d, &g))
    };
    let x0 = cptp::encode(seed, opts.seed_floor);
    // the objective is per shot, so scale the likelihood tolerance to match;
    // it is bounded below by 0, the saturated model
    let tol = opts.loglik_tol / total;
    let lopts = LbfgsOptions { f_tol: opts.lbfgs.f_tol.max(tol), f_target: opts.lbfgs.f_target.max(tol), ..opts.lbfgs.clone() };
    let res = lbfgs(objective, &x0, &lopts);
    if !res.f.is_finite() {
        return Err(Error::Divergence("likelihood became non-finite".into()));
    }
    let gs = cptp::decode(&res.x).gate_set;
    let gs = gauge_optimize(&gs, target, opts.gate_weight, opts.spam_weight)?;
    let ll = log_likelihood(&gs, design, counts, pmin);
    Ok(GateSetEstimate { gate_set: gs, log_likelihood: ll, max_log_likelihood: max_ll, iterations: res.iterations, converged: res.converged, grad_norm: res.grad_norm })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelViolation {
    /// `2(log L_max − log L)`.
    pub two_delta_log_l: f64,
    pub dof: f64,
    pub n_sigma: f64,
    /// `5 − clamp(log10 N_sigma, 0, 5)`, so 5 for `N_sigma ≤ 1`, 0 for `N_sigma ≥ 10⁵`.
    pub goodness: f64,
}

pub fn model_violation(counts: &[[f64; 4]], design: &Design, gs: &GateSet) -> ModelViolation {
    let ll = log_likelihood(gs, design, counts, 1e-9);
    let two = 2.0 * (max_log_likelihood(counts) - ll);
    let dof = (counts.len() * 3) as f64 - NON_GAUGE_PARAMS as f64;
    let n_sigma = (two - dof) / (2.0 * dof).sqrt();
    let goodness = 5.0 - n_sigma.max(1.0).log10().clamp(0.0, 5.0);
    ModelViolation { two_delta_log_l: two, dof, n_sigma, goodness }
}

/// Nonparametric bootstrap: each resample redraws every circuit's counts
/// from its observed frequencies and is refit from the original estimate.
/// Returns `metric(estimate)` for each resample.
pub fn bootstrap<M>(
    dataset: &GstDataset,
    design: &Design,
    target: &GateSet,
    estimate: &GateSetEstimate,
    resamples: usize,
    seed: u64,
    opts: &MleOptions,
    metric: M,
) -> Result<Vec<Vec<f64>>>
where
    M: Fn(&GateSet) -> Result<Vec<f64>>,
{
    let counts = dataset.aligned_counts(design)?;
    let mut out = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut resampled = Vec::with_capacity(counts.len());
        for c in &counts {
            let t: f64 = c.iter().sum();
            let p = c.map(|v| v / t);
            resampled.push(sample_counts(&p, t.round() as u64, &mut rng)?);
        }
        let est = mle_from_seed(&resampled, design, target, &estimate.gate_set, opts)?;
        out.push(metric(&est.gate_set)?);
    }
    Ok(out)
}

/// Per-column percentile interval of bootstrap samples.
pub fn percentile_intervals(samples: &[Vec<f64>], confidence: f64) -> Vec<(f64, f64)> {
    let Some(first) = samples.first() else { return vec![] };
    (0..first.len())
        .map(|j| {
            let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            col.sort_by(f64::total_cmp);
            let q = |a: f64| {
                let pos = a * (col.len() - 1) as f64;
                let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
                col[lo] + (col[hi] - col[lo]) * (pos - lo as f64)
            };
            let a = 0.5 * (1.0 - confidence);
            (q(a), q(1.0 - a))
        })
        .collect()
}

/// Small ZI-like helper used by tests and examples: the target gate set
/// with `X1` followed by an extra `exp(−iθ ZI/2)`.
pub fn with_x1_zi_error(gs: &GateSet, theta: f64) -> GateSet {
    let mut out = gs.clone();
    let err = to_m16(ptm_from_unitary_unchecked(&pauli_rotation(12, theta)).entries());
    out.gates[1] = err * out.gates[1];
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gst::circuit::build_fiducials;
    use crate::gst::dataset::exact_dataset;
    use crate::gst::model::SpamModel;

    fn small_design() -> Design {
        let germs: Vec<Vec<GateLabel>> = GateLabel::GATES.iter().map(|g| vec![*g]).collect();
        Design::new(build_fiducials(), &germs, 2).unwrap()
    }

    #[test]
    fn lgst_recovers_gauge_equivalent_truth_from_exact_data() {
        let design = small_design();
        let spam = SpamModel { prep_error: [0.01, 0.02], readout_f0: [0.98, 0.97], readout_f1: [0.96, 0.95], correlation: 0.0 };
        let target = GateSet::target();
        let mut truth = GateSet::from_ptms(&GateLabel::GATES.map(super::super::model::target_ptm), &spam);
        truth = with_x1_zi_error(&truth, 0.02);
        let ds = exact_dataset(&truth, &design, 1.0).unwrap();
        let counts = ds.aligned_counts(&design).unwrap();
        let est = lgst(&counts, &design, &target).unwrap();
        // gauge-invariant check: predicted probabilities agree
        let pa = design_probabilities(&truth, &design);
        let pb = design_probabilities(&est, &design);
        let err = pa.iter().zip(&pb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn unitary_gauge_is_orthogonal() {
        let t = unitary_gauge(&[0.1, -0.2, 0.05, 0.0, 0.3, 0.0, 0.0, 0.1, 0.0, 0.0, -0.1, 0.0, 0.2, 0.0, 0.0]);
        assert!((t.transpose() * t - M16::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn zero_counts_do_not_produce_nan() {
        let counts = [[0.0, 10.0, 0.0, 0.0], [5.0, 5.0, 0.0, 0.0]];
        assert!(max_log_likelihood(&counts).is_finite());
        assert_eq!(term(0.0, 0.0, 1e-9), (0.0, 0.0));
        assert!(term(3.0, -1e-3, 1e-9).0.is_finite());
    }

    #[test]
    fn percentile_interval_of_uniform_samples() {
        let s: Vec<Vec<f64>> = (0..=100).map(|i| vec![i as f64]).collect();
        let iv = percentile_intervals(&s, 0.9);
        assert!((iv[0].0 - 5.0).abs() < 1e-12 && (iv[0].1 - 95.0).abs() < 1e-12);
    }
}
