//! Damped least squares (Levenberg–Marquardt) with a numerical Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub cost_tolerance: f64,
    /// Stop when every scaled step component falls below this.
    pub step_tolerance: f64,
    /// Forward-difference step, relative to `max(|x|, scale)`.
    pub jacobian_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, cost_tolerance: 1e-15, step_tolerance: 1e-13, jacobian_step: 1e-7 }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() * 0.5
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], scale: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let step = h * x[k].abs().max(scale[k]);
        // central differences keep the Jacobian accurate enough for 1e-6 recovery
        xp[k] = x[k] + step;
        let rp = f(&xp)?;
        xp[k] = x[k] - step;
        let rm = f(&xp)?;
        xp[k] = x[k];
        for i in 0..r0.len() {
            jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// Minimizes `½‖f(x)‖²`. `scale` gives the typical magnitude of each
/// parameter and sets the finite-difference step.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], scale: &[f64], opts: &LmOptions) -> Result<LmSolution>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::Divergence("non-finite initial residual".into()));
    }
    let mut lambda = 1e-3;
    for it in 0..opts.max_iterations {
        let jac = jacobian(&f, &x, &r, scale, opts.jacobian_step)?;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * DVector::from_column_slice(&r);
        let diag: Vec<f64> = (0..n).map(|k| jtj[(k, k)].max(1e-300)).collect();
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * diag[k];
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = match f(&xn) {
                Ok(v) => v,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let cn = cost(&rn);
            if cn.is_finite() && cn <= c {
                let small_step = step
                    .iter()
                    .enumerate()
                    .all(|(k, s)| s.abs() <= opts.step_tolerance * x[k].abs().max(scale[k]));
                let small_gain = c - cn <= opts.cost_tolerance * c.max(1e-300);
                x = xn;
                r = rn;
                c = cn;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small_step || small_gain || c == 0.0 {
                    return Ok(LmSolution { x, residuals: r, cost: c, iterations: it + 1 });
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left: already at a numerical minimum
            return Ok(LmSolution { x, residuals: r, cost: c, iterations: it + 1 });
        }
    }
    Err(Error::NonConvergence {
        what: "Levenberg-Marquardt",
        iterations: opts.max_iterations,
        residual: (2.0 * c).sqrt(),
    })
}
