//! Bound-constrained limited-memory quasi-Newton minimization.
//!
//! A projected L-BFGS: the two-loop recursion runs over the variables that
//! are not pinned at an active bound, and the step is a backtracking Armijo
//! search along the projected path `P(x + t·d)`. This is enough for the
//! smooth, low-dimensional problems here (GP hyperparameters and acquisition
//! surfaces) without the Cauchy-point machinery of full L-BFGS-B.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub pg_tol: f64,
    /// Stop when the relative objective decrease falls below this.
    pub f_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig { max_iters: 200, memory: 10, pg_tol: 1e-7, f_tol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Components fixed at a bound because the gradient pushes outward.
fn pinned(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<bool> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0))
        .collect()
}

fn projected_grad_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| ((xi - gi).clamp(lo, hi) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `objective` over the box `[lower, upper]` starting from `x0`.
///
/// `objective` returns `None` where it cannot be evaluated; such trial points
/// are treated as infinitely bad by the line search. The start point must be
/// evaluable.
pub fn minimize_box<F>(
    mut objective: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    config: &LbfgsConfig,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::arg("bounds and start point dimensions differ"));
    }
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut f, mut g) = objective(&x)
        .filter(|(v, g)| v.is_finite() && g.iter().all(|d| d.is_finite()))
        .ok_or_else(|| Error::Evaluation("objective not evaluable at the start point".into()))?;

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut iterations = 0;

    while iterations < config.max_iters {
        if projected_grad_norm(&x, &g, lower, upper) < config.pg_tol {
            break;
        }
        iterations += 1;
        let fixed = pinned(&x, &g, lower, upper);
        let masked = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(&fixed).map(|(&a, &p)| if p { 0.0 } else { a }).collect()
        };

        // Two-loop recursion on the free subspace.
        let mut q = masked(&g);
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(&masked(s), &q);
            for (qi, yi) in q.iter_mut().zip(masked(y)) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let (s, y) = (masked(s), masked(y));
            let yy = dot(&y, &y);
            let sy = dot(&s, &y);
            if yy > 0.0 && sy > 0.0 {
                let gamma = sy / yy;
                q.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(&masked(y), &q);
            for (qi, si) in q.iter_mut().zip(masked(s)) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            dir = masked(&g).iter().map(|v| -v).collect();
            history.clear();
        }

        let mut step = if history.is_empty() {
            let norm = dot(&dir, &dir).sqrt();
            if norm > 0.0 { (1.0 / norm).min(1.0) } else { 1.0 }
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if moved.iter().all(|m| *m == 0.0) {
                break;
            }
            if let Some((ft, gt)) = objective(&trial) {
                if ft.is_finite() && gt.iter().all(|d| d.is_finite()) && ft <= f + 1e-4 * decrease {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let rel = (f - f_new).abs() / f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if rel < config.f_tol {
            break;
        }
    }

    Ok(Minimum { x, value: f, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn unconstrained_minimum_inside_box() {
        let m = minimize_box(rosenbrock, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &LbfgsConfig::default())
            .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn active_bound_is_respected() {
        // minimum of (x-3)² + (y+1)² over [0,1]² sits at (1, 0)
        let f = |x: &[f64]| {
            Some(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]))
        };
        let m = minimize_box(f, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &LbfgsConfig::default()).unwrap();
        assert_eq!(m.x, vec![1.0, 0.0]);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| Some(((3.0 * x[0]).sin() + x[0] * x[0], vec![3.0 * (3.0 * x[0]).cos() + 2.0 * x[0]]));
        for start in [-2.0, -0.3, 0.0, 1.1, 2.0] {
            let f0 = f(&[start]).unwrap().0;
            let m = minimize_box(f, &[start], &[-2.0], &[2.0], &LbfgsConfig::default()).unwrap();
            assert!(m.value <= f0);
        }
    }

    #[test]
    fn unevaluable_start_is_an_error() {
        let f = |_: &[f64]| None;
        assert!(minimize_box(f, &[0.0], &[-1.0], &[1.0], &LbfgsConfig::default()).is_err());
    }
}
