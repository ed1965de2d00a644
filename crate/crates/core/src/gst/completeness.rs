//! Numerical completeness check of an experiment design.
//!
//! The Jacobian of every design probability with respect to the
//! trace-preserving gate-set parameters has a null space equal to the gauge
//! (dimension 240) when the germs amplify every other direction. We sketch
//! it with Gaussian row combinations; each sketch row is one reverse pass.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::circuit::Design;
use super::estimate::NON_GAUGE_PARAMS;
use super::model::{design_gradient, design_probabilities, GateSet};

/// Free parameters: PTM rows 1..15 of each gate, prep components 1..15,
/// first three effects.
pub const TP_PARAMS: usize = 6 * 240 + 15 + 48;

#[derive(Debug, Clone)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub expected_rank: usize,
    /// `σ_{expected} / σ_{expected+1}`.
    pub gap: f64,
}

impl RankReport {
    pub fn complete(&self, min_gap: f64) -> bool {
        self.rank == self.expected_rank && self.gap > min_gap
    }
}

/// Sketched Jacobian rank at `gs` using `rows` random combinations.
pub fn jacobian_rank(gs: &GateSet, design: &Design, rows: usize, seed: u64) -> RankReport {
    let n_prob = design_probabilities(gs, design).len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jac = DMatrix::<f64>::zeros(rows, TP_PARAMS);
    for r in 0..rows {
        let w: Vec<f64> = (0..n_prob).map(|_| StandardNormal.sample(&mut rng)).collect();
        let g = design_gradient(gs, design, &w);
        let mut c = 0;
        for m in &g.gates {
            for i in 1..16 {
                for j in 0..16 {
                    jac[(r, c)] = m[(i, j)];
                    c += 1;
                }
            }
        }
        for i in 1..16 {
            jac[(r, c)] = g.rho[i];
            c += 1;
        }
        // the last effect is I minus the others
        for k in 0..3 {
            for i in 0..16 {
                jac[(r, c)] = g.effects[k][i] - g.effects[3][i];
                c += 1;
            }
        }
    }
    let mut sv: Vec<f64> = jac.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let tol = sv[0] * 1e-9 * TP_PARAMS as f64;
    let rank = sv.iter().filter(|s| **s > tol).count();
    let e = NON_GAUGE_PARAMS;
    let gap = if sv.len() > e { sv[e - 1] / sv[e].max(f64::MIN_POSITIVE) } else { f64::INFINITY };
    RankReport { singular_values: sv, rank, expected_rank: e, gap }
}
