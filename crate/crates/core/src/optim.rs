//! Classical minimizers driving the variational loop.
//!
//! Three families are provided: COBYLA (linear-approximation trust region,
//! derivative free), a limited-memory BFGS with central-difference
//! gradients, and a sequential-quadratic quasi-Newton method with a dense
//! damped BFGS Hessian and forward-difference gradients. Every objective call
//! goes through an evaluation budget, and the best point seen is returned.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerFamily {
    /// Derivative-free linear approximation (COBYLA).
    Cobyla,
    /// Limited-memory quasi-Newton with finite-difference gradients.
    Lbfgs,
    /// Sequential quadratic programming with a dense quasi-Newton model.
    Slsqp,
}

impl OptimizerFamily {
    pub const ALL: [OptimizerFamily; 3] = [OptimizerFamily::Cobyla, OptimizerFamily::Lbfgs, OptimizerFamily::Slsqp];

    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerFamily::Cobyla => "cobyla",
            OptimizerFamily::Lbfgs => "lbfgs",
            OptimizerFamily::Slsqp => "slsqp",
        }
    }
}

impl fmt::Display for OptimizerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cobyla" => Ok(OptimizerFamily::Cobyla),
            "lbfgs" | "l-bfgs-b" | "l_bfgs_b" | "lbfgsb" => Ok(OptimizerFamily::Lbfgs),
            "slsqp" => Ok(OptimizerFamily::Slsqp),
            other => Err(Error::Parse(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub family: OptimizerFamily,
    /// Hard cap on objective evaluations, gradient probes included.
    pub max_evaluations: usize,
    /// Stop once successive accepted objective values differ by less than this.
    pub tolerance: f64,
    /// Finite-difference step for the gradient-based families.
    pub fd_step: f64,
}

impl OptimizerSpec {
    pub const DEFAULT_MAX_EVALUATIONS: usize = 1000;
    pub const DEFAULT_TOLERANCE: f64 = 1e-6;
    pub const DEFAULT_FD_STEP: f64 = 1e-6;

    pub fn new(family: OptimizerFamily) -> Self {
        OptimizerSpec {
            family,
            max_evaluations: Self::DEFAULT_MAX_EVALUATIONS,
            tolerance: Self::DEFAULT_TOLERANCE,
            fd_step: Self::DEFAULT_FD_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations < 1 {
            return Err(Error::Optimizer("max_evaluations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Optimizer(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Optimizer(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    BudgetExhausted,
    /// The objective returned NaN or an infinity.
    NonFinite,
    /// Line search or trust region could not make progress.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective value of every evaluation, in call order.
    pub trace: Vec<f64>,
}

/// Counts evaluations, records the trace and tracks the best point.
struct Budget<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    max: usize,
    trace: Vec<f64>,
    best_x: Vec<f64>,
    best_f: f64,
    non_finite: bool,
}

impl<'a> Budget<'a> {
    fn new(objective: &'a mut dyn FnMut(&[f64]) -> f64, max: usize, x0: &[f64]) -> Self {
        Budget {
            objective,
            max,
            trace: Vec::new(),
            best_x: x0.to_vec(),
            best_f: f64::INFINITY,
            non_finite: false,
        }
    }

    fn remaining(&self) -> usize {
        if self.non_finite {
            0
        } else {
            self.max - self.trace.len()
        }
    }

    /// `None` once the budget is spent or the objective went non-finite.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.remaining() == 0 {
            return None;
        }
        let f = (self.objective)(x);
        if !f.is_finite() {
            self.non_finite = true;
            return None;
        }
        self.trace.push(f);
        if f < self.best_f {
            self.best_f = f;
            self.best_x.copy_from_slice(x);
        }
        Some(f)
    }

    fn finish(self, converged: bool, stalled: bool) -> Outcome {
        let termination = if self.non_finite {
            Termination::NonFinite
        } else if converged {
            Termination::Converged
        } else if stalled {
            Termination::Stalled
        } else {
            Termination::BudgetExhausted
        };
        Outcome {
            evaluations: self.trace.len(),
            x: self.best_x,
            fx: self.best_f,
            termination,
            trace: self.trace,
        }
    }
}

/// Minimizes `objective` from `x0` with the configured family.
pub fn minimize(spec: &OptimizerSpec, objective: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64]) -> Result<Outcome> {
    spec.validate()?;
    if x0.is_empty() {
        return Err(Error::Optimizer("cannot optimize over zero parameters".into()));
    }
    let budget = Budget::new(objective, spec.max_evaluations, x0);
    Ok(match spec.family {
        OptimizerFamily::Cobyla => run_cobyla(spec, budget, x0),
        OptimizerFamily::Lbfgs => run_lbfgs(spec, budget, x0),
        OptimizerFamily::Slsqp => run_sqp(spec, budget, x0),
    })
}

const COBYLA_RHO_BEGIN: f64 = std::f64::consts::PI;
const COBYLA_RHO_END: f64 = 1e-4;

fn run_cobyla(spec: &OptimizerSpec, budget: Budget<'_>, x0: &[f64]) -> Outcome {
    let cell = RefCell::new(budget);
    let func = |x: &[f64], _: &mut ()| cell.borrow_mut().eval(x).unwrap_or(f64::INFINITY);
    let bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); x0.len()];
    let cons: Vec<&dyn cobyla::Func<()>> = Vec::new();
    let status = cobyla::minimize(
        func,
        x0,
        &bounds,
        &cons,
        (),
        spec.max_evaluations,
        cobyla::RhoBeg::All(COBYLA_RHO_BEGIN),
        Some(cobyla::StopTols {
            ftol_abs: spec.tolerance,
            xtol_rel: COBYLA_RHO_END / COBYLA_RHO_BEGIN,
            ..cobyla::StopTols::default()
        }),
    );
    let budget = cell.into_inner();
    let converged = matches!(
        status,
        Ok((cobyla::SuccessStatus::FtolReached | cobyla::SuccessStatus::XtolReached | cobyla::SuccessStatus::Success, _, _))
    );
    let stalled = status.is_err();
    budget.finish(converged, stalled)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
}

fn central_gradient(budget: &mut Budget<'_>, x: &[f64], h: f64) -> Option<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = budget.eval(&probe)?;
        probe[i] = x[i] - h;
        let fm = budget.eval(&probe)?;
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Some(g)
}

fn forward_gradient(budget: &mut Budget<'_>, x: &[f64], fx: f64, h: f64) -> Option<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        g[i] = (budget.eval(&probe)? - fx) / h;
        probe[i] = x[i];
    }
    Some(g)
}

enum Search {
    Accepted { alpha: f64, fx: f64 },
    Failed,
    OutOfBudget,
}

/// Backtracking Armijo search with safeguarded quadratic interpolation.
fn armijo_search(budget: &mut Budget<'_>, x: &[f64], fx: f64, d: &[f64], slope: f64, alpha0: f64, min_shrink: f64, tries: usize) -> Search {
    const C1: f64 = 1e-4;
    let mut alpha = alpha0;
    for _ in 0..tries {
        let trial = axpy(x, alpha, d);
        let Some(ft) = budget.eval(&trial) else {
            return Search::OutOfBudget;
        };
        if ft <= fx + C1 * alpha * slope {
            return Search::Accepted { alpha, fx: ft };
        }
        // minimizer of the quadratic through f(0), f'(0) and f(alpha)
        let denom = 2.0 * (ft - fx - slope * alpha);
        let next = if denom > 0.0 { -slope * alpha * alpha / denom } else { 0.5 * alpha };
        alpha = next.clamp(min_shrink * alpha, 0.5 * alpha);
    }
    Search::Failed
}

const GRAD_TOL: f64 = 1e-8;
const LBFGS_MEMORY: usize = 10;

fn converged_on_change(f_old: f64, f_new: f64, tol: f64) -> bool {
    (f_old - f_new).abs() <= tol
}

fn run_lbfgs(spec: &OptimizerSpec, mut budget: Budget<'_>, x0: &[f64]) -> Outcome {
    let h = spec.fd_step;
    let mut x = x0.to_vec();
    let Some(mut fx) = budget.eval(&x) else {
        return budget.finish(false, false);
    };
    let Some(mut g) = central_gradient(&mut budget, &x, h) else {
        return budget.finish(false, false);
    };
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut first = true;
    loop {
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm <= GRAD_TOL {
            return budget.finish(true, false);
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let alpha0 = if first { (1.0 / gnorm).min(1.0) } else { 1.0 };
        first = false;
        let (alpha, f_new) = match armijo_search(&mut budget, &x, fx, &d, slope, alpha0, 0.1, 20) {
            Search::Accepted { alpha, fx } => (alpha, fx),
            Search::Failed => return budget.finish(false, true),
            Search::OutOfBudget => return budget.finish(false, false),
        };
        let x_new = axpy(&x, alpha, &d);
        let Some(g_new) = central_gradient(&mut budget, &x_new, h) else {
            return budget.finish(false, false);
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let done = converged_on_change(fx, f_new, spec.tolerance);
        x = x_new;
        fx = f_new;
        g = g_new;
        if done {
            return budget.finish(true, false);
        }
    }
}

fn run_sqp(spec: &OptimizerSpec, mut budget: Budget<'_>, x0: &[f64]) -> Outcome {
    let h = spec.fd_step;
    let n = x0.len();
    let mut x = x0.to_vec();
    let Some(mut fx) = budget.eval(&x) else {
        return budget.finish(false, false);
    };
    let Some(mut g) = forward_gradient(&mut budget, &x, fx, h) else {
        return budget.finish(false, false);
    };
    let mut hess = DMatrix::<f64>::identity(n, n);
    loop {
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm <= GRAD_TOL {
            return budget.finish(true, false);
        }
        // quadratic subproblem: min g.d + d.B.d / 2
        let gv = DVector::from_column_slice(&g);
        let d: Vec<f64> = match hess.clone().cholesky() {
            Some(ch) => (-ch.solve(&gv)).iter().copied().collect(),
            None => {
                hess = DMatrix::identity(n, n);
                g.iter().map(|v| -v).collect()
            }
        };
        let slope = dot(&g, &d);
        let (alpha, f_new) = match armijo_search(&mut budget, &x, fx, &d, slope, 1.0, 0.1, 10) {
            Search::Accepted { alpha, fx } => (alpha, fx),
            Search::Failed => return budget.finish(false, true),
            Search::OutOfBudget => return budget.finish(false, false),
        };
        let x_new = axpy(&x, alpha, &d);
        let Some(g_new) = forward_gradient(&mut budget, &x_new, f_new, h) else {
            return budget.finish(false, false);
        };
        // Powell-damped BFGS update keeps the model positive definite
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, g_new.iter().zip(&g).map(|(a, b)| a - b));
        let bs = &hess * &s;
        let sbs = s.dot(&bs);
        let sy = s.dot(&y);
        if sbs > 0.0 {
            let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
            let r = &y * theta + &bs * (1.0 - theta);
            let sr = s.dot(&r);
            if sr > 0.0 {
                hess += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
            }
        }
        let done = converged_on_change(fx, f_new, spec.tolerance);
        x = x_new;
        fx = f_new;
        g = g_new;
        if done {
            return budget.finish(true, false);
        }
    }
}
