//! Two-qubit H₂ eigensolver on the native gate set.
//!
//! The reduced Hamiltonian is `h0 II + h1 ZI + h2 IZ + h3 ZZ + h4 XX + h5 YY`
//! with the left label on Q1. The ansatz `e^{−iθXY}|01⟩` stays in the
//! single-excitation sector, so a one-parameter scan reaches the exact
//! ground state there.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gates::{ptm16, virtual_z};
use crate::gst::dataset::sample_counts;
use crate::gst::model::{target_unitary, GateSet, SpamModel, M16, V16};
use crate::gst::GateLabel;
use crate::linalg::{CMat4, C64};
use crate::qptm::DensityMatrix;
use crate::{Error, Result};

const REFERENCE_CSV: &str = include_str!("../data/h2_sto3g_bk_reduced.csv");
const REFERENCE_SHA: &str = include_str!("../data/h2_sto3g_bk_reduced.csv.sha256");
const HEADER: &str = "R_angstrom,h0,h1,h2,h3,h4,h5";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Hamiltonian {
    pub r_angstrom: f64,
    pub h: [f64; 6],
}

impl H2Hamiltonian {
    pub fn validate(&self) -> Result<()> {
        if !self.r_angstrom.is_finite() || self.h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coefficient at R = {}", self.r_angstrom)));
        }
        if (self.h[4] - self.h[5]).abs() > 1e-9 * self.h[4].abs().max(1.0) {
            return Err(Error::Domain(format!("XX and YY coefficients differ at R = {}", self.r_angstrom)));
        }
        Ok(())
    }

    /// Real symmetric 4×4 matrix in the `2·q1 + q2` basis.
    pub fn matrix(&self) -> Matrix4<f64> {
        let [h0, h1, h2, h3, h4, h5] = self.h;
        let mut m = Matrix4::zeros();
        for k in 0..4 {
            let z1 = if k >> 1 == 1 { -1.0 } else { 1.0 };
            let z2 = if k & 1 == 1 { -1.0 } else { 1.0 };
            m[(k, k)] = h0 + h1 * z1 + h2 * z2 + h3 * z1 * z2;
        }
        // XX flips both bits; YY does too, with sign −1 on |00⟩↔|11⟩
        m[(0, 3)] = h4 - h5;
        m[(3, 0)] = h4 - h5;
        m[(1, 2)] = h4 + h5;
        m[(2, 1)] = h4 + h5;
        m
    }

    pub fn energy(&self, e: &Expectations) -> f64 {
        let [h0, h1, h2, h3, h4, h5] = self.h;
        h0 + h1 * e.zi + h2 * e.iz + h3 * e.zz + h4 * e.xx + h5 * e.yy
    }
}

/// Lowest eigenvalue of the Hamiltonian matrix.
pub fn exact_ground_energy(h: &H2Hamiltonian) -> f64 {
    h.matrix().symmetric_eigenvalues().min()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub rows: Vec<H2Hamiltonian>,
}

impl CoefficientTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.trim() == HEADER => {}
            other => return Err(Error::Parse(format!("expected header {HEADER:?}, got {other:?}"))),
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))?;
            if v.len() != 7 {
                return Err(Error::Parse(format!("row {} has {} fields", n + 1, v.len())));
            }
            let row = H2Hamiltonian { r_angstrom: v[0], h: [v[1], v[2], v[3], v[4], v[5], v[6]] };
            row.validate()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("coefficient table is empty".into()));
        }
        if rows.windows(2).any(|w| w[1].r_angstrom <= w[0].r_angstrom) {
            return Err(Error::Parse("R must be strictly increasing".into()));
        }
        Ok(Self { rows })
    }

    /// Parses `text` after checking it against a `sha256sum`-style line.
    pub fn parse_verified(text: &str, checksum: &str) -> Result<Self> {
        let want = checksum.split_whitespace().next().unwrap_or("");
        let got = hex::encode(Sha256::digest(text.as_bytes()));
        if !want.eq_ignore_ascii_case(&got) {
            return Err(Error::Parse(format!("coefficient checksum mismatch: expected {want}, got {got}")));
        }
        Self::parse(text)
    }

    /// Reads a table; a sibling `<file>.sha256` is verified when present.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut sha = path.as_os_str().to_owned();
        sha.push(".sha256");
        match std::fs::read_to_string(&sha) {
            Ok(sum) => Self::parse_verified(&text, &sum),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Self::parse(&text),
            Err(e) => Err(e.into()),
        }
    }

    /// The pinned STO-3G table shipped with the crate.
    pub fn reference() -> Result<Self> {
        Self::parse_verified(REFERENCE_CSV, REFERENCE_SHA)
    }

    pub fn nearest(&self, r: f64) -> &H2Hamiltonian {
        self.rows
            .iter()
            .min_by(|a, b| (a.r_angstrom - r).abs().total_cmp(&(b.r_angstrom - r).abs()))
            .expect("non-empty table")
    }
}

/// A native gate or an exact frame rotation `exp(−iφZ/2)` on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnsatzStep {
    Gate(GateLabel),
    VirtualZ { qubit: usize, angle: f64 },
}

fn gates(label: GateLabel, n: usize) -> impl Iterator<Item = AnsatzStep> {
    std::iter::repeat_n(AnsatzStep::Gate(label), n)
}

/// CNOT with Q1 as control: `[−Y₂, CZ, Y₂]`, with `−Y₂` as three `Y₂`.
fn cnot() -> Vec<AnsatzStep> {
    gates(GateLabel::Y2, 3).chain(gates(GateLabel::CZ, 1)).chain(gates(GateLabel::Y2, 1)).collect()
}

/// `e^{−iθXY}|01⟩`: flip Q2, map `X⊗Y` onto `Z⊗Z` with `R_y(−π/2) ⊗ R_x(π/2)`,
/// exponentiate `ZZ` as CNOT · `R_z(2θ)` on Q2 · CNOT, then undo the basis change.
pub fn ansatz_circuit(theta: f64) -> Vec<AnsatzStep> {
    use GateLabel::*;
    let mut s: Vec<AnsatzStep> = gates(X2, 2).collect();
    s.extend(gates(Y1, 3).chain(gates(X2, 1)));
    s.extend(cnot());
    s.push(AnsatzStep::VirtualZ { qubit: 1, angle: 2.0 * theta });
    s.extend(cnot());
    s.extend(gates(Y1, 1).chain(gates(X2, 3)));
    s
}

fn step_unitary(step: &AnsatzStep) -> CMat4 {
    match *step {
        AnsatzStep::Gate(g) => target_unitary(g),
        AnsatzStep::VirtualZ { qubit: 0, angle } => virtual_z(angle, 0.0),
        AnsatzStep::VirtualZ { angle, .. } => virtual_z(0.0, angle),
    }
}

/// Ideal-gate state vector of a step list applied to `|00⟩`.
pub fn circuit_state(steps: &[AnsatzStep]) -> Vector4<C64> {
    let mut psi = Vector4::from_fn(|i, _| if i == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    for s in steps {
        psi = step_unitary(s) * psi;
    }
    psi
}

/// Readout confusion: per-qubit fidelities and a correlated `01 ↔ 10` swap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub f0: [f64; 2],
    pub f1: [f64; 2],
    pub correlation: f64,
}

impl ReadoutModel {
    pub fn perfect() -> Self {
        Self { f0: [1.0; 2], f1: [1.0; 2], correlation: 0.0 }
    }

    /// 98% per-qubit readout with the correlation that gives the ≈20 mHa
    /// equilibrium error on the pinned table.
    pub fn reference() -> Self {
        Self { f0: [0.98; 2], f1: [0.98; 2], correlation: 0.0125 }
    }

    fn spam(&self) -> SpamModel {
        SpamModel { prep_error: [0.0; 2], readout_f0: self.f0, readout_f1: self.f1, correlation: self.correlation }
    }

    pub fn validate(&self) -> Result<()> {
        self.spam().validate()
    }

    pub fn apply(&self, p: &[f64; 4]) -> [f64; 4] {
        let c = self.spam().confusion();
        std::array::from_fn(|o| (0..4).map(|t| c[o][t] * p[t]).sum())
    }
}

/// Visibility-normalized expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub zi: f64,
    pub iz: f64,
    pub zz: f64,
    pub xx: f64,
    pub yy: f64,
}

#[derive(Debug, Clone)]
pub struct VqeConfig {
    /// Gate PTMs used for the circuit; SPAM of this set is ignored.
    pub gates: GateSet,
    pub readout: ReadoutModel,
    /// `None` uses exact probabilities.
    pub shots: Option<u64>,
    pub seed: u64,
    pub n_theta: usize,
    /// Shift the curve so that the largest-R point matches theory.
    pub normalize_large_r: bool,
}

impl VqeConfig {
    pub fn noiseless() -> Self {
        Self {
            gates: GateSet::target(),
            readout: ReadoutModel::perfect(),
            shots: None,
            seed: 0,
            n_theta: 24,
            normalize_large_r: false,
        }
    }

    pub fn noisy(gates: GateSet, readout: ReadoutModel, shots: u64, seed: u64) -> Self {
        Self { gates, readout, shots: Some(shots), seed, n_theta: 24, normalize_large_r: false }
    }
}

fn step_ptm(step: &AnsatzStep, gs: &GateSet) -> M16 {
    match *step {
        AnsatzStep::Gate(g) => gs.gate(g),
        _ => ptm16(&step_unitary(step)),
    }
}

fn populations(v: &V16) -> [f64; 4] {
    let rho = DensityMatrix::from_pauli_vector(v.as_slice());
    std::array::from_fn(|k| rho.entries()[(k, k)].re.max(0.0))
}

fn ground_vector() -> V16 {
    V16::from_iterator(DensityMatrix::basis(0).pauli_vector())
}

fn z_moments(p: &[f64; 4]) -> [f64; 3] {
    let total: f64 = p.iter().sum();
    let zi = (p[0] + p[1] - p[2] - p[3]) / total;
    let iz = (p[0] - p[1] + p[2] - p[3]) / total;
    let zz = (p[0] - p[1] - p[2] + p[3]) / total;
    [zi, iz, zz]
}

/// Affine readout correction from `|00⟩` and `|11⟩` references. Offsets
/// and visibilities are per qubit; the correlator uses their product, so a
/// correlated error is left in place.
struct Visibility {
    offset: [f64; 2],
    scale: [f64; 2],
}

impl Visibility {
    fn new(readout: &ReadoutModel) -> Self {
        let m0 = z_moments(&readout.apply(&[1.0, 0.0, 0.0, 0.0]));
        let m1 = z_moments(&readout.apply(&[0.0, 0.0, 0.0, 1.0]));
        Self {
            offset: [0.5 * (m0[0] + m1[0]), 0.5 * (m0[1] + m1[1])],
            scale: [0.5 * (m0[0] - m1[0]), 0.5 * (m0[1] - m1[1])],
        }
    }

    /// `(⟨Z₁⟩, ⟨Z₂⟩, ⟨Z₁Z₂⟩)` from measured frequencies.
    fn correct(&self, p: &[f64; 4]) -> [f64; 3] {
        let [a, b, ab] = z_moments(p);
        let (o, v) = (self.offset, self.scale);
        let z1 = (a - o[0]) / v[0];
        let z2 = (b - o[1]) / v[1];
        let zz = (ab - o[0] * o[1] - o[0] * v[1] * z2 - o[1] * v[0] * z1) / (v[0] * v[1]);
        [z1, z2, zz]
    }
}

/// Expectations at one θ. Settings: Z basis, `Y₁Y₂` before readout for XX
/// and `X₁X₂` for YY. `stream` selects the RNG stream of this point.
pub fn measure_terms(theta: f64, cfg: &VqeConfig, stream: u64) -> Result<Expectations> {
    cfg.readout.validate()?;
    let mut state = ground_vector();
    for s in ansatz_circuit(theta) {
        state = step_ptm(&s, &cfg.gates) * state;
    }
    let vis = Visibility::new(&cfg.readout);
    let settings: [&[GateLabel]; 3] = [&[], &[GateLabel::Y1, GateLabel::Y2], &[GateLabel::X1, GateLabel::X2]];
    let mut out = [[0.0; 3]; 3];
    for (k, rot) in settings.iter().enumerate() {
        let v = cfg.gates.sequence(rot) * state;
        let p = cfg.readout.apply(&populations(&v));
        let freq = match cfg.shots {
            None => p,
            Some(0) => return Err(Error::Domain("shots must be at least 1".into())),
            Some(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(3 * stream + k as u64);
                let total: f64 = p.iter().sum();
                sample_counts(&p.map(|x| x / total), n, &mut rng)?.map(|c| c / n as f64)
            }
        };
        out[k] = vis.correct(&freq);
    }
    Ok(Expectations { zi: out[0][0], iz: out[0][1], zz: out[0][2], xx: out[1][2], yy: out[2][2] })
}

/// `E(θ) = c0 + c1 cos 2θ + c2 sin 2θ` on an equispaced grid over `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub c: [f64; 3],
    pub rms_residual: f64,
}

impl SinusoidFit {
    pub fn minimum(&self) -> (f64, f64) {
        let [c0, c1, c2] = self.c;
        let theta = (0.5 * (-c2).atan2(-c1)).rem_euclid(PI);
        (theta, c0 - c1.hypot(c2))
    }
}

pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

pub fn fit_sinusoid(energies: &[f64]) -> Result<SinusoidFit> {
    let n = energies.len();
    // cos 2θ and sin 2θ are orthogonal on the grid only for n ∉ {1, 2, 4}
    if n < 5 {
        return Err(Error::Domain(format!("sinusoid fit needs at least 5 grid points, got {n}")));
    }
    let grid = theta_grid(n);
    let c0 = energies.iter().sum::<f64>() / n as f64;
    let c1 = 2.0 / n as f64 * grid.iter().zip(energies).map(|(t, e)| e * (2.0 * t).cos()).sum::<f64>();
    let c2 = 2.0 / n as f64 * grid.iter().zip(energies).map(|(t, e)| e * (2.0 * t).sin()).sum::<f64>();
    let ss: f64 = grid
        .iter()
        .zip(energies)
        .map(|(t, e)| (e - c0 - c1 * (2.0 * t).cos() - c2 * (2.0 * t).sin()).powi(2))
        .sum();
    Ok(SinusoidFit { c: [c0, c1, c2], rms_residual: (ss / n as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r_angstrom: f64,
    pub theta_min_rad: f64,
    pub e_vqe_hartree: f64,
    pub e_exact_hartree: f64,
}

/// Scan θ at one bond length and fit the sinusoid.
pub fn scan(h: &H2Hamiltonian, cfg: &VqeConfig, row: u64) -> Result<(Vec<f64>, SinusoidFit)> {
    let e: Vec<f64> = theta_grid(cfg.n_theta)
        .iter()
        .enumerate()
        .map(|(k, t)| measure_terms(*t, cfg, row * cfg.n_theta as u64 + k as u64).map(|x| h.energy(&x)))
        .collect::<Result<_>>()?;
    let fit = fit_sinusoid(&e)?;
    Ok((e, fit))
}

pub fn dissociation_curve(table: &CoefficientTable, cfg: &VqeConfig) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(table.rows.len());
    for (i, h) in table.rows.iter().enumerate() {
        let (_, fit) = scan(h, cfg, i as u64)?;
        let (theta, e) = fit.minimum();
        out.push(CurvePoint { r_angstrom: h.r_angstrom, theta_min_rad: theta, e_vqe_hartree: e, e_exact_hartree: exact_ground_energy(h) });
    }
    if cfg.normalize_large_r {
        let last = *out.last().expect("non-empty table");
        let shift = last.e_exact_hartree - last.e_vqe_hartree;
        for p in &mut out {
            p.e_vqe_hartree += shift;
        }
    }
    Ok(out)
}

/// Grid point with the lowest VQE energy.
pub fn curve_minimum(curve: &[CurvePoint]) -> Option<CurvePoint> {
    curve.iter().copied().min_by(|a, b| a.e_vqe_hartree.total_cmp(&b.e_vqe_hartree))
}

pub fn write_curve_csv<W: std::io::Write>(curve: &[CurvePoint], mut w: W) -> Result<()> {
    writeln!(w, "R_angstrom,theta_min_rad,E_vqe_hartree,E_exact_hartree")?;
    for p in curve {
        writeln!(w, "{:.4},{:.12},{:.12},{:.12}", p.r_angstrom, p.theta_min_rad, p.e_vqe_hartree, p.e_exact_hartree)?;
    }
    Ok(())
}
