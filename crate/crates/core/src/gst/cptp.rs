//! CPTP parameterization of a gate set with hand-written gradients.
//!
//! Each gate is a stack of 16 unconstrained 4×4 matrices `Z`, mapped to
//! Kraus operators `K = Z (Z†Z)^{-1/2}`, which is trace preserving by
//! construction; the Choi matrix `Σ |K⟩⟩⟨⟨K|` is positive by construction.
//! The POVM uses the same normalization with `E_k = K_k† K_k`, and the
//! prep state is `ρ = TT†/Tr(TT†)`.
//!
//! Complex gradients are `∂f/∂Re + i ∂f/∂Im`.

use nalgebra::{DMatrix, DVector};

use super::model::{GateSet, GateSetGradient, M16, V16};
use crate::linalg::{CMat4, C64, ZERO};
use crate::qptm::pauli_2q;

/// Kraus operators kept per gate (full Choi rank).
pub const N_KRAUS: usize = 16;
/// Real parameters per gate, prep and POVM.
pub const GATE_PARAMS: usize = N_KRAUS * 16 * 2;
pub const PREP_PARAMS: usize = 32;
pub const POVM_PARAMS: usize = 4 * 16 * 2;
pub const TOTAL_PARAMS: usize = 6 * GATE_PARAMS + PREP_PARAMS + POVM_PARAMS;

fn paulis() -> &'static [CMat4; 16] {
    static CELL: std::sync::OnceLock<[CMat4; 16]> = std::sync::OnceLock::new();
    CELL.get_or_init(|| std::array::from_fn(pauli_2q))
}

fn read_stack(x: &[f64], n: usize) -> Vec<CMat4> {
    (0..n)
        .map(|k| CMat4::from_fn(|r, c| {
            let o = 2 * (16 * k + 4 * r + c);
            C64::new(x[o], x[o + 1])
        }))
        .collect()
}

fn write_stack(stack: &[CMat4], out: &mut [f64]) {
    for (k, m) in stack.iter().enumerate() {
        for r in 0..4 {
            for c in 0..4 {
                let o = 2 * (16 * k + 4 * r + c);
                out[o] = m[(r, c)].re;
                out[o + 1] = m[(r, c)].im;
            }
        }
    }
}

/// Polar normalization `K_k = Z_k S`, `S = (Σ Z_k†Z_k)^{-1/2}`, with the
/// eigendata needed for the backward pass.
struct Normalized {
    k: Vec<CMat4>,
    s: CMat4,
    u: CMat4,
    lambda: [f64; 4],
}

fn normalize(z: &[CMat4]) -> Normalized {
    let a: CMat4 = z.iter().map(|m| m.adjoint() * m).fold(CMat4::zeros(), |acc, x| acc + x);
    let a = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = a.symmetric_eigen();
    let lambda: [f64; 4] = std::array::from_fn(|i| eig.eigenvalues[i].max(1e-300));
    let u = eig.eigenvectors;
    let d = CMat4::from_diagonal(&nalgebra::Vector4::from_fn(|i, _| C64::new(lambda[i].powf(-0.5), 0.0)));
    let s = u * d * u.adjoint();
    Normalized { k: z.iter().map(|m| m * s).collect(), s, u, lambda }
}

/// Pulls a gradient with respect to the normalized stack back to `Z`.
fn normalize_backward(z: &[CMat4], n: &Normalized, g_k: &[CMat4]) -> Vec<CMat4> {
    let h: CMat4 = z.iter().zip(g_k).map(|(z, g)| z.adjoint() * g).fold(CMat4::zeros(), |a, x| a + x);
    let m = n.u.adjoint() * h * n.u;
    let mut gm = CMat4::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let (la, lb) = (n.lambda[a], n.lambda[b]);
            let gamma = if (la - lb).abs() > 1e-10 * la.max(lb) {
                (la.powf(-0.5) - lb.powf(-0.5)) / (la - lb)
            } else {
                -0.5 * la.powf(-1.5)
            };
            gm[(a, b)] = m[(a, b)] * gamma;
        }
    }
    let ga = n.u * gm * n.u.adjoint();
    let herm = (ga + ga.adjoint()) * C64::new(0.5, 0.0);
    z.iter().zip(g_k).map(|(z, g)| g * n.s + z * herm * C64::new(2.0, 0.0)).collect()
}

/// PTM of a Kraus map: `M_ij = ¼ Σ_k Tr(P_i K P_j K†)`.
pub fn ptm_from_kraus(k: &[CMat4]) -> M16 {
    let p = paulis();
    let mut m = M16::zeros();
    for j in 0..16 {
        let a: CMat4 = k.iter().map(|kk| kk * p[j] * kk.adjoint()).fold(CMat4::zeros(), |acc, x| acc + x);
        for i in 0..16 {
            m[(i, j)] = (p[i] * a).trace().re / 4.0;
        }
    }
    m
}

/// `g_K = ½ Σ_ij G_ij P_i K P_j` for each Kraus operator.
fn ptm_kraus_backward(k: &[CMat4], g: &M16) -> Vec<CMat4> {
    let p = paulis();
    let q: Vec<CMat4> = (0..16)
        .map(|j| (0..16).fold(CMat4::zeros(), |acc, i| acc + p[i] * C64::new(g[(i, j)], 0.0)))
        .collect();
    k.iter()
        .map(|kk| (0..16).fold(CMat4::zeros(), |acc, j| acc + q[j] * kk * p[j]) * C64::new(0.5, 0.0))
        .collect()
}

fn pauli_vector(m: &CMat4) -> V16 {
    let p = paulis();
    V16::from_fn(|i, _| (p[i] * m).trace().re)
}

fn from_pauli_gradient(g: &V16, scale: f64) -> CMat4 {
    let p = paulis();
    (0..16).fold(CMat4::zeros(), |acc, i| acc + p[i] * C64::new(g[i] * scale, 0.0))
}

/// Decoded parameter vector.
pub struct Decoded {
    pub gate_set: GateSet,
    gate_z: Vec<Vec<CMat4>>,
    gate_norm: Vec<Normalized>,
    prep_t: CMat4,
    prep_w_trace: f64,
    povm_z: Vec<CMat4>,
    povm_norm: Normalized,
}

pub fn decode(x: &[f64]) -> Decoded {
    let mut gates = [M16::zeros(); 6];
    let mut gate_z = Vec::with_capacity(6);
    let mut gate_norm = Vec::with_capacity(6);
    for g in 0..6 {
        let z = read_stack(&x[g * GATE_PARAMS..(g + 1) * GATE_PARAMS], N_KRAUS);
        let n = normalize(&z);
        gates[g] = ptm_from_kraus(&n.k);
        gate_z.push(z);
        gate_norm.push(n);
    }
    let off = 6 * GATE_PARAMS;
    let t = read_stack(&x[off..off + PREP_PARAMS], 1)[0];
    let w = t * t.adjoint();
    let tr = w.trace().re;
    let rho = pauli_vector(&(w / C64::new(tr, 0.0)));
    let off = off + PREP_PARAMS;
    let povm_z = read_stack(&x[off..off + POVM_PARAMS], 4);
    let povm_norm = normalize(&povm_z);
    let effects = std::array::from_fn(|k| pauli_vector(&(povm_norm.k[k].adjoint() * povm_norm.k[k])) / 4.0);
    Decoded {
        gate_set: GateSet { gates, rho, effects },
        gate_z,
        gate_norm,
        prep_t: t,
        prep_w_trace: tr,
        povm_z,
        povm_norm,
    }
}

/// Gradient with respect to the raw parameter vector.
pub fn encode_gradient(d: &Decoded, g: &GateSetGradient) -> Vec<f64> {
    let mut out = vec![0.0; TOTAL_PARAMS];
    for gi in 0..6 {
        let gk = ptm_kraus_backward(&d.gate_norm[gi].k, &g.gates[gi]);
        let gz = normalize_backward(&d.gate_z[gi], &d.gate_norm[gi], &gk);
        write_stack(&gz, &mut out[gi * GATE_PARAMS..(gi + 1) * GATE_PARAMS]);
    }
    // prep: df = Re Tr(G dρ) with G = Σ (∂f/∂r_i) P_i
    let off = 6 * GATE_PARAMS;
    let gr = from_pauli_gradient(&g.rho, 1.0);
    let rho = d.prep_t * d.prep_t.adjoint() / C64::new(d.prep_w_trace, 0.0);
    let shift = (gr * rho).trace().re;
    let h = (gr - CMat4::identity() * C64::new(shift, 0.0)) / C64::new(d.prep_w_trace, 0.0);
    let gt = h * d.prep_t * C64::new(2.0, 0.0);
    write_stack(&[gt], &mut out[off..off + PREP_PARAMS]);
    let off = off + PREP_PARAMS;
    let gk: Vec<CMat4> = (0..4)
        .map(|k| d.povm_norm.k[k] * from_pauli_gradient(&g.effects[k], 0.25) * C64::new(2.0, 0.0))
        .collect();
    let gz = normalize_backward(&d.povm_z, &d.povm_norm, &gk);
    write_stack(&gz, &mut out[off..off + POVM_PARAMS]);
    out
}

/// Hermitian part with eigenvalues clipped to `floor`, as `(eigvecs, eigvals)`.
fn clipped_eigen(m: &DMatrix<C64>, floor: f64) -> (DMatrix<C64>, Vec<f64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = h.symmetric_eigen();
    (e.eigenvectors, e.eigenvalues.iter().map(|v| v.max(floor)).collect())
}

/// CPTP projection of PTMs and SPAM vectors into the parameterization.
/// Negative Choi eigenvalues are clipped to `floor` (not zero) so that
/// every Kraus direction keeps a nonzero gradient.
pub fn encode(gs: &GateSet, floor: f64) -> Vec<f64> {
    let mut x = vec![0.0; TOTAL_PARAMS];
    for g in 0..6 {
        let ptm = crate::qptm::PauliTransferMatrix::new(2, super::model::from_m16(&gs.gates[g])).expect("16x16");
        let choi = ptm.choi();
        let (v, lam) = clipped_eigen(&choi, floor);
        // Choi index (a·4 + j) holds K_aj; the Choi matrix is normalized by 1/4
        let kraus: Vec<CMat4> = (0..16)
            .map(|k| CMat4::from_fn(|a, j| v[(a * 4 + j, k)] * C64::new((4.0 * lam[k]).sqrt(), 0.0)))
            .collect();
        write_stack(&kraus, &mut x[g * GATE_PARAMS..(g + 1) * GATE_PARAMS]);
    }
    let off = 6 * GATE_PARAMS;
    let rho = DMatrix::from_fn(4, 4, |r, c| {
        (0..16).fold(ZERO, |acc, i| acc + paulis()[i][(r, c)] * C64::new(gs.rho[i] / 4.0, 0.0))
    });
    let (v, lam) = clipped_eigen(&rho, floor);
    let t = CMat4::from_fn(|r, c| v[(r, c)] * C64::new(lam[c].sqrt(), 0.0));
    write_stack(&[t], &mut x[off..off + PREP_PARAMS]);
    let off = off + PREP_PARAMS;
    let roots: Vec<CMat4> = (0..4)
        .map(|k| {
            let e = DMatrix::from_fn(4, 4, |r, c| {
                (0..16).fold(ZERO, |acc, i| acc + paulis()[i][(r, c)] * C64::new(gs.effects[k][i], 0.0))
            });
            let (v, lam) = clipped_eigen(&e, floor);
            let d = DMatrix::from_diagonal(&DVector::from_iterator(4, lam.iter().map(|l| C64::new(l.sqrt(), 0.0))));
            let b = &d * v.adjoint();
            CMat4::from_fn(|r, c| b[(r, c)])
        })
        .collect();
    write_stack(&roots, &mut x[off..off + POVM_PARAMS]);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gst::model::{target_ptm, SpamModel};
    use crate::gst::GateLabel;

    fn noisy_set() -> GateSet {
        let spam = SpamModel { prep_error: [0.02, 0.01], readout_f0: [0.97, 0.98], readout_f1: [0.94, 0.95], correlation: 0.0 };
        let mut gs = GateSet::from_ptms(&GateLabel::GATES.map(target_ptm), &spam);
        for g in gs.gates.iter_mut() {
            for i in 1..16 {
                for j in 1..16 {
                    g[(i, j)] *= 0.99;
                }
            }
        }
        gs
    }

    #[test]
    fn encode_decode_round_trip_for_cptp_input() {
        let gs = noisy_set();
        let d = decode(&encode(&gs, 0.0));
        for g in 0..6 {
            assert!((d.gate_set.gates[g] - gs.gates[g]).abs().max() < 1e-10, "gate {g}");
        }
        assert!((d.gate_set.rho - gs.rho).abs().max() < 1e-10);
        for k in 0..4 {
            assert!((d.gate_set.effects[k] - gs.effects[k]).abs().max() < 1e-10);
        }
    }

    #[test]
    fn decoded_gates_are_cptp() {
        let x: Vec<f64> = (0..TOTAL_PARAMS).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let d = decode(&x);
        for g in &d.gate_set.gates {
            assert!((g[(0, 0)] - 1.0).abs() < 1e-12);
            assert!((1..16).all(|j| g[(0, j)].abs() < 1e-12));
            let p = crate::qptm::PauliTransferMatrix::new(2, super::super::model::from_m16(g)).unwrap();
            assert!(p.min_choi_eigenvalue() > -1e-12);
        }
        let sum: V16 = d.gate_set.effects.iter().sum();
        assert!((sum[0] - 1.0).abs() < 1e-12 && (1..16).all(|i| sum[i].abs() < 1e-12));
        assert!((d.gate_set.rho[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x0 = encode(&noisy_set(), 1e-3);
        // linear functional of every gate-set entry
        let weights = |gs: &GateSet| -> f64 {
            let mut v = 0.0;
            for (g, m) in gs.gates.iter().enumerate() {
                for i in 0..16 {
                    for j in 0..16 {
                        v += m[(i, j)] * (((g * 13 + i * 5 + j) % 7) as f64 - 3.0);
                    }
                }
            }
            v += gs.rho.iter().enumerate().map(|(i, r)| r * (i as f64 - 7.0)).sum::<f64>();
            for (k, e) in gs.effects.iter().enumerate() {
                v += e.iter().enumerate().map(|(i, x)| x * ((i + k) % 5) as f64).sum::<f64>();
            }
            v
        };
        let d = decode(&x0);
        let mut g = GateSetGradient { gates: [M16::zeros(); 6], rho: V16::zeros(), effects: [V16::zeros(); 4] };
        for (gi, m) in g.gates.iter_mut().enumerate() {
            for i in 0..16 {
                for j in 0..16 {
                    m[(i, j)] = (((gi * 13 + i * 5 + j) % 7) as f64) - 3.0;
                }
            }
        }
        g.rho = V16::from_fn(|i, _| i as f64 - 7.0);
        for k in 0..4 {
            g.effects[k] = V16::from_fn(|i, _| ((i + k) % 5) as f64);
        }
        let grad = encode_gradient(&d, &g);
        let h = 1e-6;
        for idx in [0, 1, 37, 511, 700, 2047, 3071, 3072, 3080, 3103, 3104, 3150, 3231] {
            let mut a = x0.clone();
            a[idx] += h;
            let mut b = x0.clone();
            b[idx] -= h;
            let fd = (weights(&decode(&a).gate_set) - weights(&decode(&b).gate_set)) / (2.0 * h);
            assert!((fd - grad[idx]).abs() < 1e-5 * (1.0 + fd.abs()), "idx {idx}: {fd} vs {}", grad[idx]);
        }
    }
}
