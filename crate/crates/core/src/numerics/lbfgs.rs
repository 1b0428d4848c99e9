//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop once the infinity norm of the gradient falls to this value.
    pub gradient_tolerance: f64,
    pub history_size: usize,
    pub line_search_max_steps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            history_size: 10,
            line_search_max_steps: 20,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.history_size == 0 || self.line_search_max_steps == 0 {
            return Err(Error::validation("optimizer counts must be at least 1"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::validation("gradient_tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Infinity norm of the gradient at `argmin`.
    pub gradient_norm: f64,
    /// Objective value after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize a smooth convex function given as `objective(x, grad) -> value`.
///
/// The closure must fill `grad` with the gradient at `x`. Every evaluated
/// point must yield a finite value and gradient, otherwise the run aborts
/// with [`Error::Numerical`] carrying that point.
pub fn minimize_convex<F>(mut objective: F, initial_point: &[f64], config: &OptimizerConfig) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    config.validate()?;
    let n = initial_point.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], g: &mut [f64]| -> Result<f64> {
        evaluations += 1;
        let f = objective(x, g);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                message: "objective or gradient is not finite".into(),
                point: x.to_vec(),
            });
        }
        Ok(f)
    };

    let mut x = initial_point.to_vec();
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g)?;
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.history_size);

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut direction = vec![0.0; n];
    let mut alpha = vec![0.0; config.history_size];
    let mut iterations = 0;

    while inf_norm(&g) > config.gradient_tolerance && iterations < config.max_iterations {
        iterations += 1;

        // Two-loop recursion: direction = -H g.
        direction.copy_from_slice(&g);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &direction);
            for (d, yi) in direction.iter_mut().zip(y) {
                *d -= alpha[k] * yi;
            }
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / dot(&g, &g).sqrt().max(1.0),
        };
        direction.iter_mut().for_each(|d| *d *= gamma);
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &direction);
            for (d, si) in direction.iter_mut().zip(s) {
                *d += (alpha[k] - beta) * si;
            }
        }
        direction.iter_mut().for_each(|d| *d = -*d);

        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            history.clear();
            for (d, gi) in direction.iter_mut().zip(&g) {
                *d = -gi / dot(&g, &g).sqrt().max(1.0);
            }
            slope = dot(&g, &direction);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..config.line_search_max_steps {
            for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&direction) {
                *xn = xi + step * di;
            }
            let f_trial = eval(&x_new, &mut g_new)?;
            if f_trial <= f + ARMIJO_C1 * step * slope {
                accepted = Some(f_trial);
                break;
            }
            step *= 0.5;
        }
        let Some(f_next) = accepted else {
            if history.is_empty() {
                // Steepest descent cannot make progress: numerical floor reached.
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == config.history_size {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_next;
        trace.push(f);
    }

    let gradient_norm = inf_norm(&g);
    Ok(Minimum {
        argmin: x,
        value: f,
        converged: gradient_norm <= config.gradient_tolerance,
        iterations,
        evaluations,
        gradient_norm,
        trace,
    })
}
