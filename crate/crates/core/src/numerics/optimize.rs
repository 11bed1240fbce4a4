use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};

/// Per-coordinate box `lower[i] <= x[i] <= upper[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("bounds need matching, non-empty lower and upper"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(invalid("bounds must be finite with lower < upper"));
        }
        Ok(Bounds { lower, upper })
    }

    /// The same interval on every coordinate.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.max(*l).min(*u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeOptions {
    /// Stop once the infinity norm of the projected gradient is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of curvature pairs kept for the quasi-Newton direction.
    pub memory: usize,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            tolerance: 1e-6,
            max_iterations: 500,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxOptimum {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit or the line search stalled
    /// before the projected gradient reached the tolerance.
    pub converged: bool,
    pub projected_gradient: f64,
}

/// Maximizes a smooth objective over a box with a projected limited-memory
/// BFGS iteration.
///
/// `objective(x, grad)` returns `f(x)` and writes `∇f(x)` into `grad`.
/// Only steps that pass an Armijo test along the projected path are taken,
/// so the returned value is never below the value at `init`.
pub fn maximize_box<F>(
    mut objective: F,
    bounds: &Bounds,
    init: &[f64],
    options: MaximizeOptions,
) -> Result<BoxOptimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = bounds.dim();
    if !bounds.contains(init) {
        return Err(invalid("initial point must lie inside the bounds"));
    }
    // internally we minimize phi = -f
    let mut eval = |x: &[f64], g: &mut [f64]| {
        let v = objective(x, g);
        g.iter_mut().for_each(|gi| *gi = -*gi);
        -v
    };

    let mut x = init.to_vec();
    let mut grad = vec![0.0; dim];
    let mut phi = eval(&x, &mut grad);
    if !phi.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(invalid("objective is not finite at the initial point"));
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trial = vec![0.0; dim];
    let mut trial_grad = vec![0.0; dim];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        if projected_gradient_norm(&x, &grad, bounds) <= options.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let free: Vec<bool> = (0..dim)
            .map(|i| {
                let at_lower = x[i] <= bounds.lower[i] && grad[i] > 0.0;
                let at_upper = x[i] >= bounds.upper[i] && grad[i] < 0.0;
                !(at_lower || at_upper)
            })
            .collect();
        let masked: Vec<f64> = grad
            .iter()
            .zip(&free)
            .map(|(&g, &f)| if f { g } else { 0.0 })
            .collect();

        let mut dir = two_loop(&masked, &history);
        for (d, &f) in dir.iter_mut().zip(&free) {
            if !f {
                *d = 0.0;
            }
        }
        if dot(&dir, &grad) >= 0.0 {
            history.clear();
            dir = masked.iter().map(|g| -g).collect();
        }

        let mut step = if history.is_empty() {
            let scale = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if scale > 1.0 {
                1.0 / scale
            } else {
                1.0
            }
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..dim {
                trial[i] = x[i] + step * dir[i];
            }
            bounds.project(&mut trial);
            if trial == x {
                break;
            }
            let phi_trial = eval(&trial, &mut trial_grad);
            let decrease: f64 = (0..dim).map(|i| grad[i] * (trial[i] - x[i])).sum();
            if phi_trial.is_finite()
                && trial_grad.iter().all(|g| g.is_finite())
                && phi_trial <= phi + 1e-4 * decrease
            {
                accepted = Some(phi_trial);
                break;
            }
            step *= 0.5;
        }

        match accepted {
            Some(phi_trial) => {
                let s: Vec<f64> = (0..dim).map(|i| trial[i] - x[i]).collect();
                let y: Vec<f64> = (0..dim).map(|i| trial_grad[i] - grad[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
                    if history.len() == options.memory {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
                x.copy_from_slice(&trial);
                grad.copy_from_slice(&trial_grad);
                phi = phi_trial;
            }
            None if !history.is_empty() => history.clear(),
            // no descent along steepest descent: at the precision floor
            None => break,
        }
    }

    let projected_gradient = projected_gradient_norm(&x, &grad, bounds);
    Ok(BoxOptimum {
        argmax: x,
        value: -phi,
        iterations,
        converged: converged || projected_gradient <= options.tolerance,
        projected_gradient,
    })
}

fn projected_gradient_norm(x: &[f64], grad: &[f64], bounds: &Bounds) -> f64 {
    (0..x.len())
        .map(|i| {
            let moved = (x[i] - grad[i]).max(bounds.lower[i]).min(bounds.upper[i]);
            (moved - x[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// `-H g` for the inverse-Hessian approximation held in `history`.
fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_1d(target: f64) -> impl FnMut(&[f64], &mut [f64]) -> f64 {
        move |x, g| {
            g[0] = -2.0 * (x[0] - target);
            -(x[0] - target).powi(2)
        }
    }

    #[test]
    fn interior_quadratic() {
        let b = Bounds::uniform(1, 0.0, 10.0).unwrap();
        let r = maximize_box(quad_1d(3.0), &b, &[1.0], MaximizeOptions::default()).unwrap();
        assert!((r.argmax[0] - 3.0).abs() <= 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn active_upper_bound() {
        let b = Bounds::uniform(1, 0.0, 2.0).unwrap();
        let r = maximize_box(quad_1d(3.0), &b, &[1.0], MaximizeOptions::default()).unwrap();
        assert_eq!(r.argmax[0], 2.0);
        assert!((r.value + 1.0).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn anisotropic_quadratic() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = -2.0 * (x[0] - 1.0);
            g[1] = -20.0 * (x[1] - 2.0);
            -(x[0] - 1.0).powi(2) - 10.0 * (x[1] - 2.0).powi(2)
        };
        let b = Bounds::uniform(2, 0.0, 5.0).unwrap();
        let r = maximize_box(f, &b, &[0.5, 0.5], MaximizeOptions::default()).unwrap();
        assert!((r.argmax[0] - 1.0).abs() <= 1e-6);
        assert!((r.argmax[1] - 2.0).abs() <= 1e-6);
    }

    #[test]
    fn rosenbrock_in_a_box() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -(-2.0 * (1.0 - a) - 400.0 * a * (b - a * a));
            g[1] = -(200.0 * (b - a * a));
            -((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
        };
        let b = Bounds::uniform(2, -2.0, 2.0).unwrap();
        let r = maximize_box(f, &b, &[-1.2, 1.0], MaximizeOptions::default()).unwrap();
        assert!((r.argmax[0] - 1.0).abs() < 1e-4, "{:?}", r);
        assert!((r.argmax[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Bounds::new(vec![1.0], vec![1.0]).is_err());
        assert!(Bounds::new(vec![0.0], vec![f64::INFINITY]).is_err());
        let b = Bounds::uniform(1, 0.0, 1.0).unwrap();
        assert!(maximize_box(quad_1d(0.5), &b, &[2.0], MaximizeOptions::default()).is_err());
        let nan = |_: &[f64], g: &mut [f64]| {
            g[0] = 0.0;
            f64::NAN
        };
        assert!(maximize_box(nan, &b, &[0.5], MaximizeOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_is_a_flag_not_an_error() {
        let b = Bounds::uniform(2, -2.0, 2.0).unwrap();
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, c) = (x[0], x[1]);
            g[0] = -(-2.0 * (1.0 - a) - 400.0 * a * (c - a * a));
            g[1] = -(200.0 * (c - a * a));
            -((1.0 - a).powi(2) + 100.0 * (c - a * a).powi(2))
        };
        let opts = MaximizeOptions {
            max_iterations: 2,
            ..Default::default()
        };
        let r = maximize_box(f, &b, &[-1.2, 1.0], opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }
}
