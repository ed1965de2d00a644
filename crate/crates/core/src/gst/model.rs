//! Gate sets at the PTM level, SPAM models and the structured likelihood
//! evaluator shared by dataset simulation and estimation.
//!
//! A circuit probability is `p = ẽ_kᵀ F_m G^p F_f r` with `r_i = Tr(P_i ρ)`
//! and `ẽ_{k,i} = Tr(P_i E_k)/4`. Work is organised per germ-power block so
//! the fiducial frames are shared across the 36 × 36 pairs.

use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, Design, GateLabel};
use crate::error::{Error, Result};
use crate::linalg::{kron2, C64};
use crate::qptm::{pauli_2q, pauli_rotation_1q, ptm_from_unitary, DensityMatrix, PauliTransferMatrix};

pub type M16 = SMatrix<f64, 16, 16>;
pub type V16 = SVector<f64, 16>;

pub fn to_m16(m: &DMatrix<f64>) -> M16 {
    M16::from_fn(|i, j| m[(i, j)])
}

pub fn from_m16(m: &M16) -> DMatrix<f64> {
    DMatrix::from_fn(16, 16, |i, j| m[(i, j)])
}

/// Ideal unitary of each physical gate.
pub fn target_unitary(label: GateLabel) -> crate::linalg::CMat4 {
    use std::f64::consts::FRAC_PI_2;
    let id = crate::linalg::CMat2::identity();
    match label {
        GateLabel::I | GateLabel::Null => crate::linalg::CMat4::identity(),
        GateLabel::X1 => kron2(&pauli_rotation_1q(1, FRAC_PI_2), &id),
        GateLabel::Y1 => kron2(&pauli_rotation_1q(2, FRAC_PI_2), &id),
        GateLabel::X2 => kron2(&id, &pauli_rotation_1q(1, FRAC_PI_2)),
        GateLabel::Y2 => kron2(&id, &pauli_rotation_1q(2, FRAC_PI_2)),
        GateLabel::CZ => {
            let mut u = crate::linalg::CMat4::identity();
            u[(3, 3)] = C64::new(-1.0, 0.0);
            u
        }
    }
}

pub fn target_ptm(label: GateLabel) -> PauliTransferMatrix {
    ptm_from_unitary(&target_unitary(label)).expect("target gates are unitary")
}

/// State preparation and readout errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpamModel {
    /// Probability of preparing `|1⟩` instead of `|0⟩`, per qubit.
    pub prep_error: [f64; 2],
    /// `P(read 0 | 0)` per qubit.
    pub readout_f0: [f64; 2],
    /// `P(read 1 | 1)` per qubit.
    pub readout_f1: [f64; 2],
    /// Correlated double flip: for `c > 0` outcomes `01 ↔ 10` swap with
    /// probability `c`; for `c < 0` outcomes `00 ↔ 11` swap with `|c|`.
    pub correlation: f64,
}

impl SpamModel {
    pub fn perfect() -> Self {
        Self { prep_error: [0.0; 2], readout_f0: [1.0; 2], readout_f1: [1.0; 2], correlation: 0.0 }
    }

    /// Modest SPAM used by the calibration loop and examples.
    pub fn reference() -> Self {
        Self { prep_error: [0.005; 2], readout_f0: [0.98; 2], readout_f1: [0.96; 2], correlation: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = self.prep_error.iter().chain(&self.readout_f0).chain(&self.readout_f1);
        if probs.clone().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("SPAM probabilities must lie in [0, 1]".into()));
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return Err(Error::Domain("readout correlation must lie in [-1, 1]".into()));
        }
        Ok(())
    }

    /// Column-stochastic confusion matrix `C[read][true]`.
    pub fn confusion(&self) -> [[f64; 4]; 4] {
        let single = |q: usize| [[self.readout_f0[q], 1.0 - self.readout_f1[q]], [1.0 - self.readout_f0[q], self.readout_f1[q]]];
        let (a, b) = (single(0), single(1));
        let mut c = [[0.0; 4]; 4];
        for o in 0..4 {
            for t in 0..4 {
                c[o][t] = a[o >> 1][t >> 1] * b[o & 1][t & 1];
            }
        }
        let (x, y, w) = if self.correlation >= 0.0 { (1, 2, self.correlation) } else { (0, 3, -self.correlation) };
        for t in 0..4 {
            let (cx, cy) = (c[x][t], c[y][t]);
            c[x][t] = (1.0 - w) * cx + w * cy;
            c[y][t] = (1.0 - w) * cy + w * cx;
        }
        c
    }

    pub fn prep_state(&self) -> DensityMatrix {
        let d = |p: f64| [1.0 - p, p];
        let (a, b) = (d(self.prep_error[0]), d(self.prep_error[1]));
        let mut m = DMatrix::zeros(4, 4);
        for k in 0..4 {
            m[(k, k)] = C64::new(a[k >> 1] * b[k & 1], 0.0);
        }
        DensityMatrix::new_unchecked(m)
    }
}

/// Gate set in PTM form with SPAM vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSet {
    pub gates: [M16; 6],
    pub rho: V16,
    pub effects: [V16; 4],
}

/// Pauli components of a diagonal operator `Σ_k d_k |k⟩⟨k|`, i.e. `Tr(P_i D)`.
fn diagonal_pauli_vector(d: [f64; 4]) -> V16 {
    // only I/Z labels have a diagonal; Z on a qubit gives (−1)^bit
    let mut v = V16::zeros();
    for (i, label) in [0usize, 3, 12, 15].iter().enumerate() {
        let (z1, z2) = (i >> 1, i & 1);
        let mut s = 0.0;
        for (k, dk) in d.iter().enumerate() {
            let sign1 = if z1 == 1 && (k >> 1) == 1 { -1.0 } else { 1.0 };
            let sign2 = if z2 == 1 && (k & 1) == 1 { -1.0 } else { 1.0 };
            s += sign1 * sign2 * dk;
        }
        v[*label] = s;
    }
    v
}

impl GateSet {
    pub fn target() -> Self {
        Self::from_ptms(&GateLabel::GATES.map(target_ptm), &SpamModel::perfect())
    }

    pub fn from_ptms(ptms: &[PauliTransferMatrix; 6], spam: &SpamModel) -> Self {
        let rho = V16::from_iterator(spam.prep_state().pauli_vector());
        let c = spam.confusion();
        let effects = std::array::from_fn(|o| diagonal_pauli_vector([c[o][0], c[o][1], c[o][2], c[o][3]]) / 4.0);
        Self { gates: std::array::from_fn(|g| to_m16(ptms[g].entries())), rho, effects }
    }

    pub fn gate(&self, label: GateLabel) -> M16 {
        match label.index() {
            Some(i) => self.gates[i],
            None => M16::identity(),
        }
    }

    pub fn gate_ptm(&self, label: GateLabel) -> PauliTransferMatrix {
        PauliTransferMatrix::new(2, from_m16(&self.gate(label))).expect("16x16")
    }

    pub fn prep_density(&self) -> DensityMatrix {
        DensityMatrix::from_pauli_vector(self.rho.as_slice())
    }

    /// Effect operators `E_k = Σ_i ẽ_{k,i} P_i`.
    pub fn effect_matrices(&self) -> [DMatrix<C64>; 4] {
        std::array::from_fn(|k| {
            let mut e = DMatrix::zeros(4, 4);
            for i in 0..16 {
                let p = pauli_2q(i);
                e += DMatrix::from_fn(4, 4, |r, c| p[(r, c)]) * C64::new(self.effects[k][i], 0.0);
            }
            e
        })
    }

    /// Time-ordered product of a gate sequence.
    pub fn sequence(&self, labels: &[GateLabel]) -> M16 {
        labels.iter().fold(M16::identity(), |acc, l| self.gate(*l) * acc)
    }

    pub fn probabilities(&self, circuit: &Circuit) -> [f64; 4] {
        let state = self.sequence(&circuit.gates()) * self.rho;
        std::array::from_fn(|k| self.effects[k].dot(&state))
    }

    /// `G → T G T⁻¹`, `ρ → T ρ`, `ẽ → T⁻ᵀ ẽ`.
    pub fn gauge_transform(&self, t: &M16) -> Result<Self> {
        let ti = t.try_inverse().ok_or_else(|| Error::Singular("gauge matrix".into()))?;
        Ok(Self {
            gates: self.gates.map(|g| t * g * ti),
            rho: t * self.rho,
            effects: self.effects.map(|e| ti.transpose() * e),
        })
    }

    /// Flattened real parameters (gates row-major, then ρ, then effects).
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(6 * 256 + 16 + 64);
        for g in &self.gates {
            v.extend(g.transpose().iter());
        }
        v.extend(self.rho.iter());
        for e in &self.effects {
            v.extend(e.iter());
        }
        v
    }
}

/// Gradient of a scalar with respect to every gate-set component.
#[derive(Debug, Clone)]
pub struct GateSetGradient {
    pub gates: [M16; 6],
    pub rho: V16,
    pub effects: [V16; 4],
}

impl GateSetGradient {
    fn zeros() -> Self {
        Self { gates: [M16::zeros(); 6], rho: V16::zeros(), effects: [V16::zeros(); 4] }
    }
}

/// Adds `∂/∂G_l` of `⟨dP, G_{l_n}⋯G_{l_1}⟩` for every gate in the sequence.
fn product_backward(gs: &GateSet, labels: &[GateLabel], dp: &M16, grads: &mut [M16; 6]) {
    let seq: Vec<GateLabel> = labels.iter().copied().filter(|l| l.index().is_some()).collect();
    let n = seq.len();
    if n == 0 {
        return;
    }
    // before[t] = G_{t-1}⋯G_0, after[t] = G_{n-1}⋯G_{t+1}
    let mut before = Vec::with_capacity(n);
    let mut acc = M16::identity();
    for l in &seq {
        before.push(acc);
        acc = gs.gate(*l) * acc;
    }
    let mut after = vec![M16::identity(); n];
    for t in (0..n.saturating_sub(1)).rev() {
        after[t] = after[t + 1] * gs.gate(seq[t + 1]);
    }
    for t in 0..n {
        let idx = seq[t].index().expect("filtered");
        grads[idx] += after[t].transpose() * dp * before[t].transpose();
    }
}

/// Precomputed fiducial frames for one gate set.
struct Frames {
    fid_mats: Vec<M16>,
    /// Column f is `F_f ρ`.
    r: DMatrix<f64>,
    /// Row `4m + k` is `(F_mᵀ ẽ_k)ᵀ`.
    e: DMatrix<f64>,
}

fn frames(gs: &GateSet, design: &Design) -> Frames {
    let nf = design.fiducials.len();
    let fid_mats: Vec<M16> = design.fiducials.iter().map(|f| gs.sequence(f)).collect();
    let mut r = DMatrix::zeros(16, nf);
    let mut e = DMatrix::zeros(4 * nf, 16);
    for (f, fm) in fid_mats.iter().enumerate() {
        r.set_column(f, &(fm * gs.rho));
        for k in 0..4 {
            let row = fm.transpose() * gs.effects[k];
            for i in 0..16 {
                e[(4 * f + k, i)] = row[i];
            }
        }
    }
    Frames { fid_mats, r, e }
}

fn block_matrix(gs: &GateSet, germ: &[GateLabel], power: usize) -> (M16, M16) {
    let g = gs.sequence(germ);
    let mut gp = M16::identity();
    for _ in 0..power {
        gp = g * gp;
    }
    (g, gp)
}

/// Flat probability index of `(block, prep, meas, outcome)`.
pub fn prob_index(nf: usize, block: usize, prep: usize, meas: usize, outcome: usize) -> usize {
    ((block * nf + prep) * nf + meas) * 4 + outcome
}

/// Outcome probabilities of every circuit of the design, in
/// [`Design::circuits`] order with four outcomes each.
pub fn design_probabilities(gs: &GateSet, design: &Design) -> Vec<f64> {
    let nf = design.fiducials.len();
    let fr = frames(gs, design);
    let mut out = vec![0.0; design.blocks.len() * nf * nf * 4];
    for (b, block) in design.blocks.iter().enumerate() {
        let (_, gp) = block_matrix(gs, &block.germ, block.power);
        let x = from_m16(&gp) * &fr.r;
        let p = &fr.e * x;
        for f in 0..nf {
            for m in 0..nf {
                for k in 0..4 {
                    out[prob_index(nf, b, f, m, k)] = p[(4 * m + k, f)];
                }
            }
        }
    }
    out
}

/// Gradient of `Σ w_i p_i` where `weights` follows [`prob_index`] order.
pub fn design_gradient(gs: &GateSet, design: &Design, weights: &[f64]) -> GateSetGradient {
    let nf = design.fiducials.len();
    let fr = frames(gs, design);
    let mut grad = GateSetGradient::zeros();
    let mut d_r = DMatrix::<f64>::zeros(16, nf);
    let mut d_e = DMatrix::<f64>::zeros(4 * nf, 16);
    let mut w = DMatrix::<f64>::zeros(4 * nf, nf);
    for (b, block) in design.blocks.iter().enumerate() {
        for f in 0..nf {
            for m in 0..nf {
                for k in 0..4 {
                    w[(4 * m + k, f)] = weights[prob_index(nf, b, f, m, k)];
                }
            }
        }
        let (g, gp) = block_matrix(gs, &block.germ, block.power);
        let gpd = from_m16(&gp);
        let x = &gpd * &fr.r;
        let dx = fr.e.transpose() * &w;
        d_e += &w * x.transpose();
        d_r += gpd.transpose() * &dx;
        if block.power == 0 {
            continue;
        }
        let d_gp = to_m16(&(&dx * fr.r.transpose()));
        // G^p backward: Σ_i (G^i)ᵀ dGp (G^{p-1-i})ᵀ
        let mut pows = vec![M16::identity(); block.power];
        for i in 1..block.power {
            pows[i] = g * pows[i - 1];
        }
        let mut d_g = M16::zeros();
        for i in 0..block.power {
            d_g += pows[i].transpose() * d_gp * pows[block.power - 1 - i].transpose();
        }
        product_backward(gs, &block.germ, &d_g, &mut grad.gates);
    }
    for (f, fm) in fr.fid_mats.iter().enumerate() {
        let col = V16::from_iterator(d_r.column(f).iter().copied());
        grad.rho += fm.transpose() * col;
        let mut d_f = col * gs.rho.transpose();
        for k in 0..4 {
            let row = V16::from_iterator(d_e.row(4 * f + k).iter().copied());
            grad.effects[k] += fm * row;
            d_f += gs.effects[k] * row.transpose();
        }
        product_backward(gs, &design.fiducials[f], &d_f, &mut grad.gates);
    }
    grad
}
