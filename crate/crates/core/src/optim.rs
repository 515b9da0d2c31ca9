//! Limited-memory BFGS with a backtracking Armijo line search.

use crate::linalg::{axpy, dot, norm};

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when ‖∇f‖ ≤ grad_tol.
    pub grad_tol: f64,
    /// Stop when the relative decrease over one step falls below this.
    pub f_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { max_iter: 500, memory: 10, grad_tol: 1e-8, f_tol: 1e-14 }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f`, which writes its gradient into the second argument and
/// returns the value. `early_stop` is checked after every accepted step.
pub fn lbfgs<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions, early_stop: Option<&dyn Fn(f64) -> bool>) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut it = 0;
    let mut converged = false;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    while it < opts.max_iter {
        let gn = norm(&g);
        if gn <= opts.grad_tol || !fx.is_finite() {
            converged = gn <= opts.grad_tol;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &q);
            axpy(-alpha[i], &y_hist[i], &mut q);
        }
        if m > 0 {
            let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let sc = 1.0 / gn.max(1e-300);
            q.iter_mut().for_each(|v| *v *= sc);
        }
        for i in 0..m {
            let beta = rho_hist[i] * dot(&y_hist[i], &q);
            axpy(alpha[i] - beta, &s_hist[i], &mut q);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction: fall back to steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = g.iter().map(|v| -v / gn).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        it += 1;
        if !accepted {
            break;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * norm(&s) * norm(&y) {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        let decrease = fx - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if let Some(stop) = early_stop {
            if stop(fx) {
                break;
            }
        }
        if decrease <= opts.f_tol * fx.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    let grad_norm = norm(&g);
    LbfgsResult { x, f: fx, grad_norm, iterations: it, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let r = lbfgs(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            vec![-1.2, 1.0],
            &LbfgsOptions { max_iter: 2000, ..Default::default() },
            None,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn early_stop_fires() {
        let r = lbfgs(
            |x, g| {
                g[0] = 1.0;
                x[0]
            },
            vec![0.0],
            &LbfgsOptions::default(),
            Some(&|f| f < -3.0),
        );
        assert!(r.f < -3.0 && r.iterations < 50);
    }
}
