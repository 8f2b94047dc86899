//! Bound-constrained limited-memory quasi-Newton minimisation.
//!
//! Projected L-BFGS: the two-loop recursion gives a search direction on the
//! variables not pinned at a bound, and a projected backtracking Armijo search
//! keeps iterates feasible. Gradients come from central differences, switching
//! to one-sided differences against a bound.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn scalar(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    fn project(&self, x: &mut [f64]) {
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsbOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// stop when the projected gradient's max norm drops below this
    pub pgtol: f64,
    /// stop when the relative decrease of f drops below this
    pub ftol: f64,
    pub fd_step: f64,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 100,
            pgtol: 1e-7,
            ftol: 1e-10,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub x_initial: Vec<f64>,
    pub f_initial: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn numeric_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    x: &[f64],
    fx: f64,
    bounds: &Bounds,
    step: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        let up = (x[i] + h).min(bounds.upper[i]);
        let dn = (x[i] - h).max(bounds.lower[i]);
        let (fu, fd) = if up > x[i] && dn < x[i] {
            probe[i] = up;
            let fu = f.call(&probe);
            probe[i] = dn;
            let fd = f.call(&probe);
            (fu, fd)
        } else if up > x[i] {
            probe[i] = up;
            (f.call(&probe), fx)
        } else if dn < x[i] {
            probe[i] = dn;
            (fx, f.call(&probe))
        } else {
            (fx, fx)
        };
        probe[i] = x[i];
        let width = up - dn;
        g[i] = if width > 0.0 && fu.is_finite() && fd.is_finite() {
            (fu - fd) / width
        } else {
            0.0
        };
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f` over the box `bounds` starting from `x0` (projected into it).
///
/// Fails only when `f` is non-finite at the start point; every accepted step
/// satisfies an Armijo decrease, so `result.f <= result.f_initial`.
pub fn minimize<F>(f: F, x0: &[f64], bounds: &Bounds, opts: &LbfgsbOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    if x0.len() != bounds.lower.len() {
        return Err(Error::DimensionMismatch {
            expected: bounds.lower.len(),
            got: x0.len(),
        });
    }
    let mut f = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = f.call(&x);
    if !fx.is_finite() {
        return Err(Error::FitFailed("objective is not finite at the start point".into()));
    }
    let x_initial = x.clone();
    let f_initial = fx;
    let mut g = numeric_gradient(&mut f, &x, fx, bounds, opts.fd_step);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;
    let dim = x.len();

    while iterations < opts.max_iter {
        iterations += 1;

        let pg_norm = (0..dim)
            .map(|i| ((x[i] - g[i]).clamp(bounds.lower[i], bounds.upper[i]) - x[i]).abs())
            .fold(0.0, f64::max);
        if pg_norm < opts.pgtol {
            converged = true;
            break;
        }

        // variables held at a bound by the gradient
        let free: Vec<bool> = (0..dim)
            .map(|i| {
                !((x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0))
            })
            .collect();
        let gf: Vec<f64> = (0..dim).map(|i| if free[i] { g[i] } else { 0.0 }).collect();

        // two-loop recursion
        let mut q = gf.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .filter(|v| v.is_finite() && *v > 0.0)
            .unwrap_or(1.0);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = (0..dim).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&d, &g) >= 0.0 {
            d = gf.iter().map(|v| -v).collect();
            history.clear();
        }

        let mut step = if history.is_empty() {
            let norm = dot(&d, &d).sqrt();
            if norm > 0.0 {
                (1.0 / norm).min(1.0)
            } else {
                1.0
            }
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            bounds.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
            let decrease = dot(&g, &moved);
            if moved.iter().all(|m| *m == 0.0) {
                break;
            }
            let ft = f.call(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && ft <= fx {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no decrease along the projected path: treat as stationary
            converged = pg_norm < opts.pgtol.sqrt();
            break;
        };

        let g_new = numeric_gradient(&mut f, &x_new, f_new, bounds, opts.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            history.push_back((s, y, 1.0 / sy));
            if history.len() > opts.memory {
                history.pop_front();
            }
        }

        let rel = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if rel < opts.ftol {
            converged = true;
            break;
        }
    }

    Ok(OptimResult {
        x,
        f: fx,
        x_initial,
        f_initial,
        iterations,
        evaluations: f.evals,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_quadratic() {
        let b = Bounds::new(vec![-10.0; 2], vec![10.0; 2]).unwrap();
        let r = minimize(
            |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2),
            &[5.0, 5.0],
            &b,
            &LbfgsbOptions::default(),
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 2.0).abs() < 1e-5, "{r:?}");
        assert!(r.f <= r.f_initial);
    }

    #[test]
    fn active_bound() {
        let b = Bounds::scalar(2.0, 5.0).unwrap();
        let r = minimize(|x| (x[0] - 1.0).powi(2), &[4.0], &b, &LbfgsbOptions::default()).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock_in_box() {
        let b = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let opts = LbfgsbOptions {
            max_iter: 500,
            ftol: 1e-15,
            ..Default::default()
        };
        let r = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &b,
            &opts,
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 2e-3, "{r:?}");
    }

    #[test]
    fn non_finite_start_fails() {
        let b = Bounds::scalar(0.0, 1.0).unwrap();
        assert!(minimize(|_| f64::NAN, &[0.5], &b, &LbfgsbOptions::default()).is_err());
    }
}
