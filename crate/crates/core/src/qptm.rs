//! Finite-dimensional quantum primitives: Pauli bases, density matrices,
//! Pauli transfer matrices (PTMs) and error generators.
//!
//! The Pauli basis is un-normalized and ordered identity first,
//! lexicographically: `II, IX, IY, IZ, XI, …, ZZ`. The left label acts on
//! Q1, which is also the most significant bit of the computational index
//! `|q1 q2⟩ → 2·q1 + q2`. PTM entries are `M_ij = Tr(P_i Λ(P_j)) / d`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, kron2, CMat2, CMat4, C64, I, ONE, ZERO};

pub const PAULI_LABELS_1Q: [&str; 4] = ["I", "X", "Y", "Z"];
pub const PAULI_LABELS_2Q: [&str; 16] = [
    "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
];

pub fn pauli_1q(k: usize) -> CMat2 {
    match k {
        0 => CMat2::new(ONE, ZERO, ZERO, ONE),
        1 => CMat2::new(ZERO, ONE, ONE, ZERO),
        2 => CMat2::new(ZERO, -I, I, ZERO),
        3 => CMat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Sparse form of a two-qubit Pauli: each row has exactly one nonzero.
#[derive(Clone, Copy)]
struct SparsePauli {
    col: [usize; 4],
    val: [C64; 4],
}

fn sparse_paulis() -> &'static [SparsePauli; 16] {
    static CELL: OnceLock<[SparsePauli; 16]> = OnceLock::new();
    CELL.get_or_init(|| {
        std::array::from_fn(|k| {
            let p = pauli_2q(k);
            let mut col = [0; 4];
            let mut val = [ZERO; 4];
            for r in 0..4 {
                for c in 0..4 {
                    if p[(r, c)].norm() > 0.5 {
                        col[r] = c;
                        val[r] = p[(r, c)];
                    }
                }
            }
            SparsePauli { col, val }
        })
    })
}

/// Two-qubit Pauli `P_a ⊗ P_b` for basis index `4a + b`.
pub fn pauli_2q(k: usize) -> CMat4 {
    kron2(&pauli_1q(k / 4), &pauli_1q(k % 4))
}

/// `Tr(P_k A)` using the monomial structure of Paulis.
fn pauli_trace(k: usize, a: &CMat4) -> C64 {
    let p = &sparse_paulis()[k];
    (0..4).map(|r| p.val[r] * a[(p.col[r], r)]).sum()
}

/// `P_k · A` computed by row selection.
fn pauli_left_mul(k: usize, a: &CMat4) -> CMat4 {
    let p = &sparse_paulis()[k];
    let mut out = CMat4::zeros();
    for r in 0..4 {
        for c in 0..4 {
            out[(r, c)] = p.val[r] * a[(p.col[r], c)];
        }
    }
    out
}

/// Density matrix of one or two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let dim = entries.nrows();
        if !(dim == 2 || dim == 4) || entries.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: 4, got: dim });
        }
        let herm = (&entries - entries.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if herm > 1e-12 {
            return Err(Error::Domain(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        let tr = entries.trace();
        if (tr - ONE).norm() > 1e-12 {
            return Err(Error::Domain(format!("density matrix trace {tr}")));
        }
        let rho = Self { entries };
        let min_ev = rho.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_ev < -1e-10 {
            return Err(Error::Domain(format!("negative eigenvalue {min_ev:.3e}")));
        }
        Ok(rho)
    }

    /// Builds a state without the positivity check (raw reconstructions).
    pub fn new_unchecked(entries: DMatrix<C64>) -> Self {
        Self { entries }
    }

    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::Domain("zero state vector".into()));
        }
        let v = v / C64::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    /// Computational basis state `|index⟩` of a two-qubit register.
    pub fn basis(index: usize) -> Self {
        let mut m = DMatrix::zeros(4, 4);
        m[(index, index)] = ONE;
        Self { entries: m }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().cloned().collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    /// `Tr(P_k ρ)` for every Pauli of the register, in basis order.
    pub fn pauli_vector(&self) -> Vec<f64> {
        let n = if self.dim() == 4 { 16 } else { 4 };
        (0..n)
            .map(|k| {
                let p = if self.dim() == 4 {
                    pauli_matrix_dyn(k, 2)
                } else {
                    pauli_matrix_dyn(k, 1)
                };
                (&p * &self.entries).trace().re
            })
            .collect()
    }

    pub fn from_pauli_vector(v: &[f64]) -> Self {
        let (dim, nq) = if v.len() == 16 { (4, 2) } else { (2, 1) };
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (k, &c) in v.iter().enumerate() {
            m += pauli_matrix_dyn(k, nq) * C64::new(c / dim as f64, 0.0);
        }
        Self { entries: m }
    }

    /// `⟨ψ|ρ|ψ⟩` for a (not necessarily normalized) target vector.
    pub fn fidelity_to_pure(&self, psi: &[C64]) -> f64 {
        let v = DVector::from_column_slice(psi);
        let v = &v / C64::new(v.norm(), 0.0);
        (v.adjoint() * &self.entries * &v)[(0, 0)].re
    }

    /// Negative eigenvalues clipped to zero and trace renormalized.
    pub fn clipped(&self) -> Self {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let vals: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = vals.iter().sum();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            vals.len(),
            vals.iter().map(|x| C64::new(x / total, 0.0)),
        ));
        Self {
            entries: &eig.eigenvectors * d * eig.eigenvectors.adjoint(),
        }
    }
}

fn pauli_matrix_dyn(k: usize, n_qubits: usize) -> DMatrix<C64> {
    if n_qubits == 2 {
        let p = pauli_2q(k);
        DMatrix::from_fn(4, 4, |r, c| p[(r, c)])
    } else {
        let p = pauli_1q(k);
        DMatrix::from_fn(2, 2, |r, c| p[(r, c)])
    }
}

/// Real Pauli transfer matrix of a one- or two-qubit channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTransferMatrix {
    n_qubits: usize,
    entries: DMatrix<f64>,
}

impl PauliTransferMatrix {
    pub fn new(n_qubits: usize, entries: DMatrix<f64>) -> Result<Self> {
        let dim = 4usize.pow(n_qubits as u32);
        if !(n_qubits == 1 || n_qubits == 2) {
            return Err(Error::Domain(format!("{n_qubits} qubits not supported")));
        }
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: entries.nrows() });
        }
        Ok(Self { n_qubits, entries })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 4usize.pow(n_qubits as u32);
        Self { n_qubits, entries: DMatrix::identity(dim, dim) }
    }

    /// Fully depolarizing-plus-identity channel `diag(1, λ, …, λ)`.
    pub fn depolarizing(n_qubits: usize, lambda: f64) -> Self {
        let mut m = Self::identity(n_qubits);
        for k in 1..m.dim() {
            m.entries[(k, k)] = lambda;
        }
        m
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self { n_qubits: self.n_qubits, entries: &self.entries * &other.entries }
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .entries
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("PTM inverse".into()))?;
        Ok(Self { n_qubits: self.n_qubits, entries: inv })
    }

    pub fn transpose(&self) -> Self {
        Self { n_qubits: self.n_qubits, entries: self.entries.transpose() }
    }

    /// Tensor product of two single-qubit PTMs (`self` on Q1).
    pub fn tensor(&self, other: &Self) -> Self {
        Self { n_qubits: 2, entries: self.entries.kronecker(&other.entries) }
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (0..self.dim()).all(|j| {
            let want = if j == 0 { 1.0 } else { 0.0 };
            (self.entries[(0, j)] - want).abs() <= tol
        })
    }

    /// Liouville superoperator acting on column-stacked density matrices.
    pub fn superoperator(&self) -> DMatrix<C64> {
        let d = if self.n_qubits == 2 { 4 } else { 2 };
        let n = self.dim();
        let vecs: Vec<DVector<C64>> = (0..n)
            .map(|k| {
                let p = pauli_matrix_dyn(k, self.n_qubits);
                DVector::from_iterator(d * d, p.iter().cloned())
            })
            .collect();
        let mut s = DMatrix::<C64>::zeros(d * d, d * d);
        for i in 0..n {
            for j in 0..n {
                let mij = self.entries[(i, j)];
                if mij != 0.0 {
                    s += &vecs[i] * vecs[j].adjoint() * C64::new(mij / d as f64, 0.0);
                }
            }
        }
        s
    }

    /// Choi matrix `Σ_ij Λ(|i⟩⟨j|) ⊗ |i⟩⟨j|`, normalized to unit trace.
    pub fn choi(&self) -> DMatrix<C64> {
        let d = if self.n_qubits == 2 { 4 } else { 2 };
        let s = self.superoperator();
        let mut choi = DMatrix::<C64>::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                // column-stacked vec index of |i⟩⟨j| is i + d·j
                let col = s.column(i + d * j);
                for a in 0..d {
                    for b in 0..d {
                        choi[(a * d + i, b * d + j)] = col[a + d * b] / C64::new(d as f64, 0.0);
                    }
                }
            }
        }
        choi
    }

    /// Smallest eigenvalue of the normalized Choi matrix.
    pub fn min_choi_eigenvalue(&self) -> f64 {
        let c = self.choi();
        let h = (&c + c.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> PtmJson {
        let labels: Vec<String> = if self.n_qubits == 2 {
            PAULI_LABELS_2Q.iter().map(|s| s.to_string()).collect()
        } else {
            PAULI_LABELS_1Q.iter().map(|s| s.to_string()).collect()
        };
        PtmJson {
            n_qubits: self.n_qubits,
            basis_order: labels,
            entries: (0..self.dim())
                .map(|i| (0..self.dim()).map(|j| self.entries[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn from_json(json: &PtmJson) -> Result<Self> {
        let expected: Vec<&str> = if json.n_qubits == 2 {
            PAULI_LABELS_2Q.to_vec()
        } else {
            PAULI_LABELS_1Q.to_vec()
        };
        if json.basis_order.iter().map(String::as_str).ne(expected.iter().cloned()) {
            return Err(Error::Parse("unexpected Pauli basis order".into()));
        }
        let n = expected.len();
        if json.entries.len() != n || json.entries.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: json.entries.len() });
        }
        Self::new(json.n_qubits, DMatrix::from_fn(n, n, |i, j| json.entries[i][j]))
    }
}

/// Wire form of a PTM: row-major entries plus the Pauli basis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtmJson {
    pub n_qubits: usize,
    pub basis_order: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

/// Wire form of a density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub basis_order: Vec<String>,
    pub pauli_vector: Vec<f64>,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

impl DensityMatrix {
    pub fn to_json(&self) -> DensityJson {
        let labels: Vec<String> = if self.dim() == 4 {
            PAULI_LABELS_2Q.iter().map(|s| s.to_string()).collect()
        } else {
            PAULI_LABELS_1Q.iter().map(|s| s.to_string()).collect()
        };
        let d = self.dim();
        DensityJson {
            basis_order: labels,
            pauli_vector: self.pauli_vector(),
            real: (0..d).map(|i| (0..d).map(|j| self.entries[(i, j)].re).collect()).collect(),
            imag: (0..d).map(|i| (0..d).map(|j| self.entries[(i, j)].im).collect()).collect(),
        }
    }
}

/// PTM of a two-qubit unitary.
pub fn ptm_from_unitary(u: &CMat4) -> Result<PauliTransferMatrix> {
    let residual = linalg::unitarity_residual(u);
    if residual > 1e-10 {
        return Err(Error::NotUnitary { residual });
    }
    Ok(ptm_from_unitary_unchecked(u))
}

/// Same as [`ptm_from_unitary`] without the unitarity check (hot loops).
pub fn ptm_from_unitary_unchecked(u: &CMat4) -> PauliTransferMatrix {
    let ud = u.adjoint();
    let mut m = DMatrix::<f64>::zeros(16, 16);
    for j in 0..16 {
        let a = u * pauli_left_mul(j, &ud);
        for i in 0..16 {
            m[(i, j)] = pauli_trace(i, &a).re / 4.0;
        }
    }
    PauliTransferMatrix { n_qubits: 2, entries: m }
}

/// PTM of a single-qubit unitary.
pub fn ptm_from_unitary_1q(u: &CMat2) -> PauliTransferMatrix {
    let ud = u.adjoint();
    let m = DMatrix::from_fn(4, 4, |i, j| {
        (pauli_1q(i) * u * pauli_1q(j) * ud).trace().re / 2.0
    });
    PauliTransferMatrix { n_qubits: 1, entries: m }
}

/// Applies a channel to a state.
pub fn apply_channel(m: &PauliTransferMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if m.dim() != rho.dim() * rho.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: rho.dim() * rho.dim() });
    }
    let v = DVector::from_vec(rho.pauli_vector());
    let out = m.entries() * v;
    Ok(DensityMatrix::from_pauli_vector(out.as_slice()))
}

/// Error generator `L` with `exp(L) = E`, stored as a real PTM-basis matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorGenerator {
    entries: DMatrix<f64>,
}

impl ErrorGenerator {
    pub fn from_entries(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn exp(&self) -> DMatrix<f64> {
        linalg::expm(&self.entries)
    }

    /// Post-gate error generator `log(M_exp · M_ideal⁻¹)`.
    pub fn between(exp: &PauliTransferMatrix, ideal: &PauliTransferMatrix) -> Result<Self> {
        let e = exp.compose(&ideal.inverse()?);
        real_matrix_log(e.entries())
    }

    pub fn as_ptm(&self) -> PauliTransferMatrix {
        PauliTransferMatrix {
            n_qubits: if self.entries.nrows() == 16 { 2 } else { 1 },
            entries: self.entries.clone(),
        }
    }
}

/// Principal real logarithm of an error PTM.
pub fn real_matrix_log(e: &DMatrix<f64>) -> Result<ErrorGenerator> {
    Ok(ErrorGenerator { entries: linalg::logm(e)? })
}

/// Sub-block of a two-qubit PTM on the labels acting as identity on the
/// other qubit: `II, X_j, Y_j, Z_j` (qubit numbered 1 or 2).
pub fn project_subspace(m: &PauliTransferMatrix, qubit: usize) -> Result<PauliTransferMatrix> {
    if m.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 16, got: m.dim() });
    }
    let idx: [usize; 4] = match qubit {
        1 => [0, 4, 8, 12],
        2 => [0, 1, 2, 3],
        q => return Err(Error::InvalidQubit(q)),
    };
    let block = DMatrix::from_fn(4, 4, |i, j| m.entries()[(idx[i], idx[j])]);
    PauliTransferMatrix::new(1, block)
}

/// `exp(-i θ P / 2)` for a two-qubit Pauli index.
pub fn pauli_rotation(k: usize, theta: f64) -> CMat4 {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    CMat4::identity() * c + pauli_2q(k) * s
}

/// `exp(-i θ P / 2)` for a single-qubit Pauli index.
pub fn pauli_rotation_1q(k: usize, theta: f64) -> CMat2 {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    CMat2::identity() * c + pauli_1q(k) * s
}

pub fn pauli_index(label: &str) -> Option<usize> {
    PAULI_LABELS_2Q.iter().position(|l| *l == label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn cphase() -> CMat4 {
        let mut u = CMat4::identity();
        u[(3, 3)] = -ONE;
        u
    }

    /// Brute-force PTM straight from the definition with dense matrices.
    fn ptm_brute(u: &CMat4) -> DMatrix<f64> {
        DMatrix::from_fn(16, 16, |i, j| {
            (pauli_2q(i) * u * pauli_2q(j) * u.adjoint()).trace().re / 4.0
        })
    }

    #[test]
    fn identity_unitary_gives_identity_ptm() {
        let m = ptm_from_unitary(&CMat4::identity()).unwrap();
        assert!(max_abs(&(m.entries() - DMatrix::identity(16, 16))) < 1e-15);
    }

    #[test]
    fn cphase_ptm_matches_brute_force() {
        let m = ptm_from_unitary(&cphase()).unwrap();
        assert!(max_abs(&(m.entries() - ptm_brute(&cphase()))) < 1e-15);
        // CZ maps XI -> XZ
        assert!((m.entries()[(pauli_index("XZ").unwrap(), pauli_index("XI").unwrap())] - 1.0).abs() < 1e-15);
        let mmt = m.entries() * m.entries().transpose();
        assert!(max_abs(&(mmt - DMatrix::identity(16, 16))) < 1e-14);
    }

    #[test]
    fn x_q1_ptm_is_block_rotation() {
        let u = kron2(&pauli_rotation_1q(1, std::f64::consts::FRAC_PI_2), &CMat2::identity());
        let m = ptm_from_unitary(&u).unwrap();
        // closed form single-qubit π/2 X rotation: Y -> Z, Z -> -Y
        let mut r = DMatrix::<f64>::zeros(4, 4);
        r[(0, 0)] = 1.0;
        r[(1, 1)] = 1.0;
        r[(3, 2)] = 1.0;
        r[(2, 3)] = -1.0;
        let expected = r.kronecker(&DMatrix::identity(4, 4));
        assert!(max_abs(&(m.entries() - expected)) < 1e-15);
    }

    #[test]
    fn non_unitary_is_rejected() {
        let mut u = CMat4::identity();
        u[(0, 0)] = C64::new(1.1, 0.0);
        match ptm_from_unitary(&u) {
            Err(Error::NotUnitary { residual }) => assert!(residual > 0.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cphase_channel_matches_conjugation() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // |1⟩ ⊗ |+⟩
        let psi = [ZERO, ZERO, C64::new(s, 0.0), C64::new(s, 0.0)];
        let rho = DensityMatrix::pure(&psi).unwrap();
        let m = ptm_from_unitary(&cphase()).unwrap();
        let out = apply_channel(&m, &rho).unwrap();
        let r4 = CMat4::from_fn(|r, c| rho.entries()[(r, c)]);
        let direct = cphase() * r4 * cphase().adjoint();
        for r in 0..4 {
            for c in 0..4 {
                assert!((out.entries()[(r, c)] - direct[(r, c)]).norm() < 1e-14);
            }
        }
        // ⟨IX⟩ flips sign
        let before = rho.pauli_vector()[1];
        let after = out.pauli_vector()[1];
        assert!((before - 1.0).abs() < 1e-14 && (after + 1.0).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_gives_maximally_mixed() {
        let rho = DensityMatrix::basis(3);
        let out = apply_channel(&PauliTransferMatrix::depolarizing(2, 0.0), &rho).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 0.25 } else { 0.0 };
                assert!((out.entries()[(r, c)] - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let rho = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        assert!(apply_channel(&PauliTransferMatrix::identity(2), &rho).is_err());
    }

    #[test]
    fn zi_rotation_log_is_analytic_generator() {
        let theta = 1f64.to_radians();
        let m = ptm_from_unitary(&pauli_rotation(12, theta)).unwrap();
        let l = real_matrix_log(m.entries()).unwrap();
        // generator of a Z rotation on Q1: X_1 -> Y_1 at rate θ
        let mut g = DMatrix::<f64>::zeros(16, 16);
        for b in 0..4 {
            g[(8 + b, 4 + b)] = theta;
            g[(4 + b, 8 + b)] = -theta;
        }
        assert!(max_abs(&(l.entries() - g)) < 1e-12);
    }

    #[test]
    fn subspace_projection_of_y_q1() {
        let u = kron2(&pauli_rotation_1q(2, std::f64::consts::FRAC_PI_2), &CMat2::identity());
        let m = ptm_from_unitary(&u).unwrap();
        let q1 = project_subspace(&m, 1).unwrap();
        let single = ptm_from_unitary_1q(&pauli_rotation_1q(2, std::f64::consts::FRAC_PI_2));
        assert!(max_abs(&(q1.entries() - single.entries())) < 1e-15);
        let q2 = project_subspace(&m, 2).unwrap();
        assert!(max_abs(&(q2.entries() - DMatrix::identity(4, 4))) < 1e-15);
        assert!(matches!(project_subspace(&m, 3), Err(Error::InvalidQubit(3))));
        let id = project_subspace(&PauliTransferMatrix::identity(2), 1).unwrap();
        assert!(max_abs(&(id.entries() - DMatrix::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn choi_of_unitary_is_rank_one_psd() {
        let m = ptm_from_unitary(&cphase()).unwrap();
        assert!(m.min_choi_eigenvalue() > -1e-12);
        let c = m.choi();
        assert!((c.trace() - ONE).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip_keeps_basis_order() {
        let m = ptm_from_unitary(&cphase()).unwrap();
        let json = serde_json::to_string(&m.to_json()).unwrap();
        assert!(json.contains("\"II\",\"IX\",\"IY\",\"IZ\",\"XI\""));
        let back: PtmJson = serde_json::from_str(&json).unwrap();
        assert_eq!(PauliTransferMatrix::from_json(&back).unwrap(), m);
    }
}
