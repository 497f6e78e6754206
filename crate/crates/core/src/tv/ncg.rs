use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{init_estimate, InitMode, Problem, TvConfig};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::mask::Measurements;

/// Floor for the gradient norm below which the iterate is stationary
/// regardless of the relative tolerance.
const ABS_GRAD_TOL: f64 = 1e-10;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Accepted step length; 0 for the starting point.
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Final iterate clamped to `[0, 255]`.
    pub image: GrayImage,
    pub iterations: usize,
    /// One record for the starting point and one per accepted step.
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub final_grad_norm: f64,
}

impl RecoveryResult {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    /// True when no accepted step increased the objective.
    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].objective <= w[0].objective)
    }

    /// CSV with columns `iteration,objective,grad_norm,step_size`.
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for rec in &self.trace {
            w.serialize(rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy_into(out: &mut [f64], x: &[f64], t: f64, d: &[f64]) {
    for ((o, xi), di) in out.iter_mut().zip(x).zip(d) {
        *o = xi + t * di;
    }
}

fn finite(value: f64, what: &str, iteration: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!("{what} became {value} at iteration {iteration}")))
    }
}

/// Minimizes the TV-regularized misfit with Polak–Ribière+ nonlinear CG.
///
/// Each iteration probes the curvature along the search direction with one
/// extra gradient, uses the resulting secant step as the first trial, and
/// backtracks until the Armijo condition holds. Iterates are not clamped;
/// only the returned image is.
pub fn recover(meas: &Measurements, cfg: &TvConfig, init: InitMode) -> Result<RecoveryResult> {
    cfg.validate()?;
    if meas.is_empty() {
        return Err(Error::InvalidArgument("recovery needs at least one measurement".into()));
    }
    let problem = Problem::new(meas, cfg)?;
    let start = init_estimate(meas, init)?;
    let (width, height) = start.dims();
    let n = problem.len();

    let mut x = start.into_pixels();
    let mut grad = vec![0.0; n];
    let mut value = finite(problem.value_and_gradient(&x, &mut grad), "objective", 0)?;
    let mut grad_sq = dot(&grad, &grad);
    let initial_norm = grad_sq.sqrt();
    let stop_norm = (cfg.grad_tol * initial_norm).max(ABS_GRAD_TOL);

    let mut trace = vec![IterationRecord {
        iteration: 0,
        objective: value,
        grad_norm: initial_norm,
        step_size: 0.0,
    }];
    let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut trial = vec![0.0; n];
    let mut probe_grad = vec![0.0; n];
    let mut new_grad = vec![0.0; n];
    // scale of the first probe: move the largest pixel by one level
    let mut last_step = 1.0 / dir.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1e-300);
    let mut converged = grad_sq.sqrt() <= stop_norm;
    let mut since_restart = 0;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iters {
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -g);
            slope = -grad_sq;
            since_restart = 0;
        }

        // secant estimate of the minimizing step along dir
        axpy_into(&mut trial, &x, last_step, &dir);
        problem.value_and_gradient(&trial, &mut probe_grad);
        let curvature = (dot(&probe_grad, &dir) - slope) / last_step;
        let mut step = if curvature > 0.0 && curvature.is_finite() {
            -slope / curvature
        } else {
            2.0 * last_step
        };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            axpy_into(&mut trial, &x, step, &dir);
            let v = problem.value(&trial);
            if v.is_finite() && v <= value + cfg.armijo * step * slope {
                accepted = Some(v);
                break;
            }
            step *= cfg.shrink;
        }
        let Some(new_value) = accepted else {
            if since_restart == 0 {
                // even steepest descent cannot make progress: stalled
                break;
            }
            since_restart = 0;
            dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -g);
            continue;
        };

        iterations += 1;
        std::mem::swap(&mut x, &mut trial);
        let v = finite(problem.value_and_gradient(&x, &mut new_grad), "objective", iterations)?;
        // the gradient pass recomputes the same sum; keep the line-search
        // value so the trace is exactly the accepted objective
        debug_assert!((v - new_value).abs() <= 1e-9 * v.abs().max(1.0));
        value = new_value.min(v);
        let new_sq = dot(&new_grad, &new_grad);
        finite(new_sq, "gradient norm", iterations)?;

        since_restart += 1;
        let beta = if since_restart >= cfg.restart_every {
            since_restart = 0;
            0.0
        } else {
            let cross = dot(&new_grad, &grad);
            ((new_sq - cross) / grad_sq).max(0.0)
        };
        std::mem::swap(&mut grad, &mut new_grad);
        grad_sq = new_sq;
        for (d, g) in dir.iter_mut().zip(&grad) {
            *d = -g + beta * *d;
        }
        last_step = step;

        trace.push(IterationRecord {
            iteration: iterations,
            objective: value,
            grad_norm: grad_sq.sqrt(),
            step_size: step,
        });
        converged = grad_sq.sqrt() <= stop_norm;
    }

    let image = GrayImage::new(width, height, x)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .clamped();
    Ok(RecoveryResult {
        image,
        iterations,
        trace,
        converged,
        final_grad_norm: grad_sq.sqrt(),
    })
}
