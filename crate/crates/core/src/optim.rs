//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `‖g‖∞ ≤ grad_tol · max(1, |f|)`.
    pub grad_tol: f64,
    /// Stop when the relative decrease over `window` iterations is below this.
    pub f_tol: f64,
    pub window: usize,
    /// Stop as soon as f reaches this value, for objectives with a known floor.
    pub f_target: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 20, max_iterations: 2000, grad_tol: 1e-10, f_tol: 1e-14, window: 1, f_target: f64::NEG_INFINITY }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which returns value and gradient.
pub fn lbfgs<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut recent: VecDeque<f64> = VecDeque::from([fx]);
    for it in 0..opts.max_iterations {
        let gn = inf_norm(&g);
        if gn <= opts.grad_tol * fx.abs().max(1.0) || fx <= opts.f_target {
            return LbfgsResult { x, f: fx, grad_norm: gn, iterations: it, converged: true };
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = hist.back().map(|(s, y, _)| dot(s, y) / dot(y, y)).unwrap_or(1.0 / gn.max(1e-300));
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v / gn).collect();
            slope = dot(&g, &d);
        }
        let Some((step, fnew, gnew)) = wolfe(&mut f, &x, fx, slope, &d) else {
            if hist.is_empty() {
                return LbfgsResult { x, f: fx, grad_norm: gn, iterations: it, converged: false };
            }
            hist.clear();
            continue;
        };
        let xnew = axpy(&x, step, &d);
        let s: Vec<f64> = xnew.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > opts.memory {
                hist.pop_front();
            }
        }
        x = xnew;
        fx = fnew;
        g = gnew;
        recent.push_back(fx);
        if recent.len() <= opts.window.max(1) {
            continue;
        }
        let decrease = recent.pop_front().unwrap_or(fx) - fx;
        if decrease.abs() <= opts.f_tol * fx.abs().max(1.0) {
            let gn = inf_norm(&g);
            return LbfgsResult { x, f: fx, grad_norm: gn, iterations: it + 1, converged: true };
        }
    }
    let gn = inf_norm(&g);
    LbfgsResult { x, f: fx, grad_norm: gn, iterations: opts.max_iterations, converged: false }
}

/// Strong-Wolfe search along `d` (c1 = 1e-4, c2 = 0.9).
fn wolfe<F>(f: &mut F, x: &[f64], f0: f64, slope0: f64, d: &[f64]) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let eval = |f: &mut F, a: f64| {
        let (v, g) = f(&axpy(x, a, d));
        let s = dot(&g, d);
        (v, g, s)
    };
    let (mut a_prev, mut f_prev, mut s_prev) = (0.0, f0, slope0);
    let mut a = 1.0;
    for i in 0..30 {
        let (fa, ga, sa) = eval(f, a);
        if !fa.is_finite() {
            a = 0.5 * (a_prev + a);
            continue;
        }
        if fa > f0 + C1 * a * slope0 || (i > 0 && fa >= f_prev) {
            return zoom(f, x, d, f0, slope0, (a_prev, f_prev, s_prev), (a, fa, sa));
        }
        if sa.abs() <= -C2 * slope0 {
            return Some((a, fa, ga));
        }
        if sa >= 0.0 {
            return zoom(f, x, d, f0, slope0, (a, fa, sa), (a_prev, f_prev, s_prev));
        }
        a_prev = a;
        f_prev = fa;
        s_prev = sa;
        a *= 2.0;
    }
    None
}

fn zoom<F>(
    f: &mut F,
    x: &[f64],
    d: &[f64],
    f0: f64,
    slope0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for _ in 0..40 {
        // cubic interpolation, safeguarded toward the bracket centre
        let (a0, f0_, s0) = lo;
        let (a1, f1, s1) = hi;
        let d1 = s0 + s1 - 3.0 * (f0_ - f1) / (a0 - a1);
        let disc = d1 * d1 - s0 * s1;
        let mut a = if disc >= 0.0 {
            let d2 = (a1 - a0).signum() * disc.sqrt();
            a1 - (a1 - a0) * (s1 + d2 - d1) / (s1 - s0 + 2.0 * d2)
        } else {
            0.5 * (a0 + a1)
        };
        let (lo_b, hi_b) = (a0.min(a1), a0.max(a1));
        let margin = 0.1 * (hi_b - lo_b);
        if !a.is_finite() || a < lo_b + margin || a > hi_b - margin {
            a = 0.5 * (a0 + a1);
        }
        let (fa, ga, sa) = {
            let (v, g) = f(&axpy(x, a, d));
            let s = dot(&g, d);
            (v, g, s)
        };
        if fa <= f0 + C1 * a * slope0 && best.as_ref().is_none_or(|b| fa < b.1) {
            best = Some((a, fa, ga.clone()));
        }
        if fa > f0 + C1 * a * slope0 || fa >= lo.1 {
            hi = (a, fa, sa);
        } else {
            if sa.abs() <= -C2 * slope0 {
                return Some((a, fa, ga));
            }
            if sa * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, fa, sa);
        }
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1e-300) {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = 100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2);
            let g = vec![-400.0 * a * (b - a * a) - 2.0 * (1.0 - a), 200.0 * (b - a * a)];
            (v, g)
        };
        let r = lbfgs(f, &[-1.2, 1.0], &LbfgsOptions { grad_tol: 1e-12, f_tol: 0.0, ..Default::default() });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn minimizes_ill_conditioned_quadratic() {
        let scales: Vec<f64> = (0..50).map(|i| 10f64.powf(i as f64 / 16.0)).collect();
        let f = |x: &[f64]| {
            let v = x.iter().zip(&scales).map(|(x, s)| 0.5 * s * (x - 1.0).powi(2)).sum();
            let g = x.iter().zip(&scales).map(|(x, s)| s * (x - 1.0)).collect();
            (v, g)
        };
        let r = lbfgs(f, &vec![0.0; 50], &LbfgsOptions { f_tol: 0.0, grad_tol: 1e-9, ..Default::default() });
        assert!(r.converged, "{} {} {}", r.iterations, r.f, r.grad_norm);
        assert!(r.x.iter().all(|x| (x - 1.0).abs() < 1e-6));
    }

    #[test]
    fn stops_at_target_value() {
        let f = |x: &[f64]| (x[0] * x[0] + 10.0 * x[1] * x[1], vec![2.0 * x[0], 20.0 * x[1]]);
        let o = LbfgsOptions { f_tol: 0.0, grad_tol: 0.0, f_target: 1e-3, ..Default::default() };
        let r = lbfgs(f, &[3.0, 1.0], &o);
        assert!(r.converged && r.f <= 1e-3 && r.f > 0.0, "{r:?}");
    }

    #[test]
    fn longer_window_keeps_going_through_slow_stretches() {
        let scales: Vec<f64> = (0..50).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let f = |x: &[f64]| {
            let v = x.iter().zip(&scales).map(|(x, s)| 0.5 * s * (x - 1.0).powi(2)).sum();
            let g = x.iter().zip(&scales).map(|(x, s)| s * (x - 1.0)).collect();
            (v, g)
        };
        let run = |window| lbfgs(f, &vec![0.0; 50], &LbfgsOptions { f_tol: 1e-4, grad_tol: 0.0, memory: 3, window, ..Default::default() });
        let (short, long) = (run(1), run(20));
        assert!(short.converged && long.converged);
        assert!(long.iterations >= short.iterations.max(20), "{} vs {}", long.iterations, short.iterations);
        assert!(long.f <= short.f);
    }
}
