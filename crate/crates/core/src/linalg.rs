//! Small dense linear-algebra helpers that nalgebra does not provide directly:
//! real matrix exponential/logarithm/square root and the propagator of a
//! Hermitian 4×4 generator.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat2 = Matrix2<C64>;
pub type CMat4 = Matrix4<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = norm1(a);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Principal square root by the Denman–Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for it in 0..100 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("square-root iteration".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("square-root iteration".into()))?;
        let y_next = (&y + &zi) * 0.5;
        let z_next = (&z + &yi) * 0.5;
        let delta = max_abs(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta < 1e-15 * max_abs(&y).max(1.0) {
            return Ok(y);
        }
        if it == 99 {
            return Err(Error::NonConvergence {
                what: "matrix square root",
                iterations: 100,
                residual: delta,
            });
        }
    }
    Ok(y)
}

/// Principal real logarithm by inverse scaling and squaring.
///
/// Eigenvalues on the closed negative real axis make the real principal
/// logarithm undefined and are reported as [`Error::BranchAmbiguity`].
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    // |λ − 1| ≤ ‖A − I‖ keeps the spectrum off the negative axis near the
    // identity, where the Schur iteration also struggles with degeneracy
    if norm1(&(a - &id)) >= 1.0 {
        // Schur::new has no iteration cap
        let schur = a
            .clone()
            .try_schur(1e-13, 10_000)
            .ok_or(Error::NonConvergence { what: "Schur decomposition", iterations: 10_000, residual: f64::NAN })?;
        for ev in schur.complex_eigenvalues().iter() {
            if ev.re <= 0.0 && ev.im.abs() <= 1e-10 * ev.norm().max(1.0) {
                return Err(Error::BranchAmbiguity { re: ev.re, im: ev.im });
            }
        }
    }
    let mut x = a.clone();
    let mut k = 0;
    while norm1(&(&x - &id)) > 0.1 {
        x = sqrtm(&x)?;
        k += 1;
        if k > 60 {
            return Err(Error::NonConvergence {
                what: "inverse scaling and squaring",
                iterations: k,
                residual: norm1(&(&x - &id)),
            });
        }
    }
    // log(X) = 2 atanh(Y), Y = (X - I)(X + I)^{-1}
    let xpi = (&x + &id)
        .try_inverse()
        .ok_or_else(|| Error::Singular("logarithm Cayley transform".into()))?;
    let y = (&x - &id) * xpi;
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut sum = y.clone();
    for j in 1..60 {
        term = &term * &y2;
        let contrib = &term / (2 * j + 1) as f64;
        sum += &contrib;
        if max_abs(&contrib) < 1e-19 {
            break;
        }
    }
    Ok(sum * 2.0 * 2f64.powi(k as i32))
}

/// Unitary `exp(-i 2π t H)` of a Hermitian generator given in Hz.
pub fn hermitian_propagator(h: &CMat4, t: f64) -> CMat4 {
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let mut d = CMat4::zeros();
    for k in 0..4 {
        let phase = -2.0 * std::f64::consts::PI * t * eig.eigenvalues[k];
        d[(k, k)] = C64::from_polar(1.0, phase);
    }
    v * d * v.adjoint()
}

pub fn kron2(a: &CMat2, b: &CMat2) -> CMat4 {
    let mut out = CMat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn unitarity_residual(u: &CMat4) -> f64 {
    let prod = u * u.adjoint() - CMat4::identity();
    prod.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_of_identity_is_zero() {
        let l = logm(&DMatrix::identity(16, 16)).unwrap();
        assert!(max_abs(&l) < 1e-15);
    }

    #[test]
    fn exp_log_round_trip_on_small_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let l0 = DMatrix::from_fn(16, 16, |_, _| rng.random_range(-0.05..0.05));
            let back = logm(&expm(&l0)).unwrap();
            assert!(max_abs(&(back - &l0)) < 1e-8);
        }
    }

    #[test]
    fn negative_eigenvalue_is_rejected() {
        let mut m = DMatrix::<f64>::identity(4, 4);
        m[(2, 2)] = -0.5;
        assert!(matches!(logm(&m), Err(Error::BranchAmbiguity { .. })));
        // π rotation: eigenvalues -1, -1 (complex pair collapsed onto the axis)
        let mut r = DMatrix::<f64>::identity(4, 4);
        r[(1, 1)] = -1.0;
        r[(2, 2)] = -1.0;
        assert!(logm(&r).is_err());
    }

    #[test]
    fn large_rotation_log_matches_generator() {
        // 2x2 rotation by 2.5 rad sits far from identity and needs several square roots
        let theta = 2.5;
        let g = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let back = logm(&expm(&g)).unwrap();
        assert!(max_abs(&(back - g)) < 1e-10);
    }

    #[test]
    fn hermitian_propagator_is_unitary() {
        let mut h = CMat4::zeros();
        h[(0, 1)] = C64::new(1e6, 2e5);
        h[(1, 0)] = h[(0, 1)].conj();
        h[(2, 2)] = C64::new(5e7, 0.0);
        h[(3, 3)] = C64::new(-3e7, 0.0);
        let u = hermitian_propagator(&h, 1e-8);
        assert!(unitarity_residual(&u) < 1e-13);
    }
}
