//! Limited-memory BFGS with a decaying step size.
//!
//! There is no line search: each iteration tries `x + step·d` once, where
//! `d` comes from the two-loop recursion. A trial that does not lower the
//! loss is rejected and shrinks `step` by `decay_rate`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub learning_rate: f64,
    /// Step-size multiplier applied after every rejected step.
    pub decay_rate: f64,
    /// Stop as soon as the best loss drops below this value.
    pub early_stop_threshold: f64,
    /// Consecutive non-improving iterations tolerated (0 behaves like 1).
    pub patience: usize,
    pub max_iterations: usize,
    pub history_size: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            learning_rate: 0.25,
            decay_rate: 0.9,
            early_stop_threshold: 0.5,
            patience: 10,
            max_iterations: 200,
            history_size: 10,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Precondition(format!(
                "learning_rate {} must be > 0",
                self.learning_rate
            )));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::Precondition(format!(
                "decay_rate {} not in (0, 1]",
                self.decay_rate
            )));
        }
        if self.max_iterations == 0 || self.history_size == 0 {
            return Err(Error::Precondition(
                "max_iterations and history_size must be positive".into(),
            ));
        }
        if self.early_stop_threshold.is_nan() {
            return Err(Error::Precondition("early_stop_threshold is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Threshold,
    Patience,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    /// Best iterate seen.
    pub x: Vec<f64>,
    pub loss: f64,
    /// Loss at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_finite(loss: f64, grad: &[f64], x_len: usize, iteration: usize) -> Result<()> {
    if grad.len() != x_len {
        return Err(Error::Optimization(format!(
            "gradient has {} components, expected {x_len}",
            grad.len()
        )));
    }
    if !loss.is_finite() {
        return Err(Error::Optimization(format!(
            "loss is {loss} at iteration {iteration}"
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Optimization(format!(
            "gradient component {i} is {} at iteration {iteration}",
            grad[i]
        )));
    }
    Ok(())
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `-H·g`.
fn direction(history: &VecDeque<Pair>, grad: &[f64]) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for p in history.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for (p, a) in history.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        q.iter_mut()
            .zip(&p.s)
            .for_each(|(qi, si)| *qi += si * (a - b));
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `objective`, which returns the loss and its gradient.
pub fn lbfgs_minimize<F>(mut objective: F, x0: &[f64], opts: &FitOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    opts.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut loss, mut grad) = objective(&x)?;
    check_finite(loss, &grad, n, 0)?;
    let mut evaluations = 1;
    let mut trace = vec![loss];
    let result = |x: Vec<f64>, loss, trace, iterations, evaluations, stop| LbfgsResult {
        x,
        loss,
        trace,
        iterations,
        evaluations,
        stop,
    };
    if loss < opts.early_stop_threshold {
        return Ok(result(
            x,
            loss,
            trace,
            0,
            evaluations,
            StopReason::Threshold,
        ));
    }

    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.history_size);
    let mut step = opts.learning_rate;
    let mut stale = 0usize;
    let patience = opts.patience.max(1);

    for iteration in 1..=opts.max_iterations {
        let mut d = direction(&history, &grad);
        if dot(&d, &grad) >= 0.0 {
            history.clear();
            d = grad.iter().map(|g| -g).collect();
        }
        let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
        let (trial_loss, trial_grad) = objective(&trial)?;
        evaluations += 1;
        check_finite(trial_loss, &trial_grad, n, iteration)?;

        if trial_loss < loss {
            let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
                if history.len() == opts.history_size {
                    history.pop_front();
                }
                history.push_back(Pair {
                    s,
                    y,
                    rho: 1.0 / sy,
                });
            }
            x = trial;
            loss = trial_loss;
            grad = trial_grad;
            trace.push(loss);
            stale = 0;
        } else {
            step *= opts.decay_rate;
            stale += 1;
        }

        if loss < opts.early_stop_threshold {
            return Ok(result(
                x,
                loss,
                trace,
                iteration,
                evaluations,
                StopReason::Threshold,
            ));
        }
        if stale >= patience {
            return Ok(result(
                x,
                loss,
                trace,
                iteration,
                evaluations,
                StopReason::Patience,
            ));
        }
    }
    let iterations = opts.max_iterations;
    Ok(result(
        x,
        loss,
        trace,
        iterations,
        evaluations,
        StopReason::MaxIterations,
    ))
}
