use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ansatz::{CircuitTemplate, Family};
use crate::error::{Error, Result};
use crate::ising::{brute_force_minimum, IsingModel};
use crate::optim::{minimize, OptimizerFamily, OptimizerSpec, Termination};
use crate::statevector::{argmax_bitstring, expectation_from_table, DiagonalObservable, Statevector};
use crate::vrp::Assignment;

/// Gap below which a run counts as having found the classical minimum.
pub const REACHED_TOL: f64 = 1e-6;

/// A template paired with the energy diagonal of its observable.
pub struct CostFunction<'a> {
    template: &'a CircuitTemplate,
    diagonal: Vec<f64>,
}

impl<'a> CostFunction<'a> {
    pub fn new(template: &'a CircuitTemplate, model: &IsingModel) -> Result<Self> {
        if template.num_qubits() != model.num_vars() {
            return Err(Error::Dimension {
                expected: model.num_vars(),
                got: template.num_qubits(),
            });
        }
        Ok(CostFunction {
            template,
            diagonal: DiagonalObservable::new(model).table(),
        })
    }

    pub fn state(&self, params: &[f64]) -> Result<Statevector> {
        Statevector::run(self.template.num_qubits(), &self.template.bind(params)?)
    }

    pub fn eval(&self, params: &[f64]) -> Result<f64> {
        expectation_from_table(&self.state(params)?, &self.diagonal)
    }

    pub fn energy_of(&self, a: &Assignment) -> f64 {
        self.diagonal[a.to_index() as usize]
    }

    pub fn gradient(&self, params: &[f64], step: f64) -> Result<Vec<f64>> {
        if !(step > 0.0) {
            return Err(Error::Optimizer(format!("finite-difference step must be positive, got {step}")));
        }
        let mut probe = params.to_vec();
        let mut grad = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            probe[i] = params[i] + step;
            let up = self.eval(&probe)?;
            probe[i] = params[i] - step;
            let down = self.eval(&probe)?;
            probe[i] = params[i];
            grad.push((up - down) / (2.0 * step));
        }
        Ok(grad)
    }
}

/// Expectation of the model's energy in the state prepared by `template`.
pub fn evaluate_cost(template: &CircuitTemplate, params: &[f64], model: &IsingModel) -> Result<f64> {
    CostFunction::new(template, model)?.eval(params)
}

/// Central-difference gradient of [`evaluate_cost`].
pub fn finite_diff_gradient(template: &CircuitTemplate, params: &[f64], model: &IsingModel, step: f64) -> Result<Vec<f64>> {
    CostFunction::new(template, model)?.gradient(params, step)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VqeRunRecord {
    pub run_index: usize,
    pub seed: u64,
    pub encoding: Family,
    pub layers: usize,
    pub optimizer: OptimizerFamily,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
    pub initial_expectation: f64,
    pub final_expectation: f64,
    pub argmax_assignment: String,
    pub argmax_energy: f64,
    pub oracle_min: f64,
    pub oracle_gap: f64,
    pub evaluations_used: usize,
    pub reached_minimum: bool,
    pub termination: Termination,
    /// Set when the objective went non-finite and the run was abandoned.
    pub failure: Option<String>,
    /// Objective value at every evaluation, in order.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl VqeRunRecord {
    pub const CSV_HEADER: &'static str =
        "run_index,seed,encoding,layers,optimizer,final_expectation,argmax_energy,oracle_min,reached_minimum,evaluations_used";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.run_index,
            self.seed,
            self.encoding,
            self.layers,
            self.optimizer,
            self.final_expectation,
            self.argmax_energy,
            self.oracle_min,
            self.reached_minimum,
            self.evaluations_used
        )
    }

    /// Lowest objective value among all evaluations.
    pub fn best_observed(&self) -> f64 {
        self.trace.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Uniform draws from `[0, 2pi)`.
pub fn initial_parameters(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Runs one optimization, computing the oracle minimum by enumeration.
pub fn run_vqe(template: &CircuitTemplate, model: &IsingModel, opt: &OptimizerSpec, seed: u64) -> Result<VqeRunRecord> {
    let oracle = brute_force_minimum(model)?;
    run_vqe_with_oracle(template, model, opt, seed, oracle.min_energy)
}

pub fn run_vqe_with_oracle(
    template: &CircuitTemplate,
    model: &IsingModel,
    opt: &OptimizerSpec,
    seed: u64,
    oracle_min: f64,
) -> Result<VqeRunRecord> {
    opt.validate()?;
    let cost = CostFunction::new(template, model)?;
    let x0 = initial_parameters(template.param_count(), seed);
    let initial_expectation = cost.eval(&x0)?;

    let mut objective = |x: &[f64]| cost.eval(x).unwrap_or(f64::NAN);
    let outcome = minimize(opt, &mut objective, &x0)?;

    let final_params = outcome.x;
    let final_expectation = cost.eval(&final_params)?;
    let argmax = argmax_bitstring(&cost.state(&final_params)?);
    let argmax_energy = cost.energy_of(&argmax);
    let oracle_gap = argmax_energy - oracle_min;
    let failure = (outcome.termination == Termination::NonFinite)
        .then(|| "objective returned a non-finite value".to_string());
    Ok(VqeRunRecord {
        run_index: 0,
        seed,
        encoding: template.family(),
        layers: template.layers(),
        optimizer: opt.family,
        initial_params: x0,
        final_params,
        initial_expectation,
        final_expectation,
        argmax_assignment: argmax.to_string(),
        argmax_energy,
        oracle_min,
        oracle_gap,
        evaluations_used: outcome.evaluations,
        reached_minimum: failure.is_none() && oracle_gap.abs() <= REACHED_TOL,
        termination: outcome.termination,
        failure,
        trace: outcome.trace,
    })
}
