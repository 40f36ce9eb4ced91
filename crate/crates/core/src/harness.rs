//! Batch experiments: many seeded VQE runs per cell, accuracy statistics and
//! report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_amplitude_with_limit, build, CircuitTemplate, Family, AMPLITUDE_MAX_QUBITS};
use crate::error::{Error, Result};
use crate::ising::{brute_force_minimum, compile_qubo, qubo_to_ising, IsingModel};
use crate::optim::{OptimizerFamily, OptimizerSpec};
use crate::vqe::{run_vqe_with_oracle, VqeRunRecord};
use crate::vrp::VrpInstance;

/// Largest circuit the harness will simulate.
pub const MAX_HARNESS_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianMode {
    /// One weight matrix shared by every run.
    Fixed,
    /// A fresh weight matrix per run.
    Variable,
}

impl HamiltonianMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            HamiltonianMode::Fixed => "fixed",
            HamiltonianMode::Variable => "variable",
        }
    }
}

impl std::str::FromStr for HamiltonianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(HamiltonianMode::Fixed),
            "variable" => Ok(HamiltonianMode::Variable),
            other => Err(Error::Parse(format!("unknown hamiltonian mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cities: usize,
    /// Defaults to 2 when absent.
    pub vehicles: Option<usize>,
    pub encoding: Family,
    pub layers: usize,
    pub optimizer: OptimizerFamily,
    pub runs: usize,
    pub hamiltonian: HamiltonianMode,
    pub master_seed: u64,
    pub penalty_a: Option<f64>,
    pub max_evaluations: usize,
    pub tolerance: f64,
    pub fd_step: f64,
    /// Permit amplitude encoding beyond its usual qubit limit.
    pub allow_large_amplitude: bool,
    pub time_limit_secs: f64,
    pub parallel: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cities: 3,
            vehicles: None,
            encoding: Family::Angle,
            layers: 1,
            optimizer: OptimizerFamily::Cobyla,
            runs: 50,
            hamiltonian: HamiltonianMode::Fixed,
            master_seed: 0,
            penalty_a: None,
            max_evaluations: OptimizerSpec::DEFAULT_MAX_EVALUATIONS,
            tolerance: OptimizerSpec::DEFAULT_TOLERANCE,
            fd_step: OptimizerSpec::DEFAULT_FD_STEP,
            allow_large_amplitude: false,
            time_limit_secs: 1800.0,
            parallel: true,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn vehicles(&self) -> usize {
        self.vehicles.unwrap_or(2)
    }

    pub fn qubits(&self) -> usize {
        self.cities * self.cities.saturating_sub(1)
    }

    pub fn optimizer_spec(&self) -> OptimizerSpec {
        OptimizerSpec {
            family: self.optimizer,
            max_evaluations: self.max_evaluations,
            tolerance: self.tolerance,
            fd_step: self.fd_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.qubits();
        if self.cities < 2 || m > MAX_HARNESS_QUBITS {
            return Err(Error::Config(format!(
                "cities must give between 2 and {MAX_HARNESS_QUBITS} qubits, got {} cities",
                self.cities
            )));
        }
        let k = self.vehicles();
        if k < 1 || k > self.cities - 1 {
            return Err(Error::Config(format!("vehicles must be in 1..={}, got {k}", self.cities - 1)));
        }
        if self.layers < 1 {
            return Err(Error::Config("layers must be at least 1".into()));
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if let Some(a) = self.penalty_a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("penalty_a must be positive, got {a}")));
            }
        }
        if self.encoding == Family::Amplitude && m > AMPLITUDE_MAX_QUBITS && !self.allow_large_amplitude {
            return Err(Error::Config(format!(
                "amplitude encoding is limited to {AMPLITUDE_MAX_QUBITS} qubits without allow_large_amplitude"
            )));
        }
        if !(self.time_limit_secs > 0.0) {
            return Err(Error::Config("time_limit_secs must be positive".into()));
        }
        self.optimizer_spec().validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Short name used for per-cell report files.
    pub fn cell_name(&self) -> String {
        format!(
            "{}_{}_L{}_n{}_k{}_{}",
            self.encoding,
            self.optimizer,
            self.layers,
            self.cities,
            self.vehicles(),
            self.hamiltonian.as_str()
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a key path into a 64-bit value.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |h, &k| splitmix64(h ^ splitmix64(k)))
}

const WEIGHT_DOMAIN: u64 = 1;
const PARAM_DOMAIN: u64 = 2;
const FIXED_STREAM: u64 = u64::MAX;

/// Seed for run `run_index`'s initial parameters.
pub fn run_seed(master: u64, run_index: usize) -> u64 {
    derive_seed(master, &[PARAM_DOMAIN, run_index as u64])
}

/// Uniform `[0, 1)` weights keyed by `(master, stream, edge)`; the diagonal is zero.
pub fn draw_weights(master: u64, stream: u64, n: usize) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j {
                let h = derive_seed(master, &[WEIGHT_DOMAIN, stream, (i * n + j) as u64]);
                *cell = (h >> 11) as f64 / (1u64 << 53) as f64;
            }
        }
    }
    w
}

/// Instance used by run `run_index` of a cell.
pub fn instance_for(cfg: &ExperimentConfig, run_index: usize) -> Result<VrpInstance> {
    let stream = match cfg.hamiltonian {
        HamiltonianMode::Fixed => FIXED_STREAM,
        HamiltonianMode::Variable => run_index as u64,
    };
    VrpInstance::new(cfg.cities, cfg.vehicles(), draw_weights(cfg.master_seed, stream, cfg.cities), cfg.penalty_a)
}

fn template_for(cfg: &ExperimentConfig, model: &IsingModel) -> Result<CircuitTemplate> {
    match cfg.encoding {
        Family::Amplitude if cfg.allow_large_amplitude => build_amplitude_with_limit(cfg.qubits(), MAX_HARNESS_QUBITS),
        family => build(family, cfg.qubits(), cfg.layers, Some(model)),
    }
}

struct Problem {
    model: IsingModel,
    oracle_min: f64,
    template: CircuitTemplate,
}

fn prepare(cfg: &ExperimentConfig, run_index: usize) -> Result<Problem> {
    let inst = instance_for(cfg, run_index)?;
    let model = qubo_to_ising(&compile_qubo(&inst));
    let oracle_min = brute_force_minimum(&model)?.min_energy;
    let template = template_for(cfg, &model)?;
    Ok(Problem {
        model,
        oracle_min,
        template,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    pub config: ExperimentConfig,
    pub records: Vec<VqeRunRecord>,
    /// True when the time limit stopped the cell before all runs started.
    pub truncated: bool,
    pub wall_time: Duration,
}

impl AccuracyReport {
    /// T: runs completed.
    pub fn total(&self) -> usize {
        self.records.len()
    }

    /// N: runs whose solution reached the classical minimum.
    pub fn reached(&self) -> usize {
        self.records.iter().filter(|r| r.reached_minimum).count()
    }

    pub fn missed(&self) -> usize {
        self.total() - self.reached()
    }

    pub fn acc(&self) -> f64 {
        ratio(self.reached(), self.total())
    }

    pub fn err(&self) -> f64 {
        ratio(self.missed(), self.total())
    }

    pub fn mean_gap(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.oracle_gap).sum::<f64>() / self.records.len() as f64
    }

    /// Per-run CSV preceded by `#` summary lines. Wall time is left out so
    /// the content depends only on the configuration.
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "# {k}={v}");
        };
        line("encoding", c.encoding.to_string());
        line("optimizer", c.optimizer.to_string());
        line("layers", c.layers.to_string());
        line("cities", c.cities.to_string());
        line("vehicles", c.vehicles().to_string());
        line("qubits", c.qubits().to_string());
        line("hamiltonian", c.hamiltonian.as_str().to_string());
        line("master_seed", c.master_seed.to_string());
        line("penalty_a", c.penalty_a.map_or("default".to_string(), |a| a.to_string()));
        line("max_evaluations", c.max_evaluations.to_string());
        line("runs", self.total().to_string());
        line("no_deviation", self.reached().to_string());
        line("with_deviation", self.missed().to_string());
        line("acc", self.acc().to_string());
        line("err", self.err().to_string());
        line("mean_oracle_gap", self.mean_gap().to_string());
        line("truncated", self.truncated.to_string());
        out.push_str(VqeRunRecord::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Runs every seeded optimization of one cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AccuracyReport> {
    cfg.validate()?;
    let start = Instant::now();
    let limit = Duration::from_secs_f64(cfg.time_limit_secs);
    let spec = cfg.optimizer_spec();
    let shared = match cfg.hamiltonian {
        HamiltonianMode::Fixed => Some(prepare(cfg, 0)?),
        HamiltonianMode::Variable => None,
    };

    let one_run = |i: usize| -> Option<Result<VqeRunRecord>> {
        if start.elapsed() > limit {
            return None;
        }
        let run = || {
            let own;
            let p = match &shared {
                Some(p) => p,
                None => {
                    own = prepare(cfg, i)?;
                    &own
                }
            };
            let mut rec = run_vqe_with_oracle(&p.template, &p.model, &spec, run_seed(cfg.master_seed, i), p.oracle_min)?;
            rec.run_index = i;
            Ok(rec)
        };
        Some(run())
    };

    let results: Vec<Option<Result<VqeRunRecord>>> = if cfg.parallel {
        (0..cfg.runs).into_par_iter().map(one_run).collect()
    } else {
        (0..cfg.runs).map(one_run).collect()
    };
    let truncated = results.iter().any(Option::is_none);
    let records = results.into_iter().flatten().collect::<Result<Vec<_>>>()?;
    Ok(AccuracyReport {
        config: cfg.clone(),
        records,
        truncated,
        wall_time: start.elapsed(),
    })
}

/// Outcome of one sweep cell; failures are kept as messages.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub config: ExperimentConfig,
    pub report: std::result::Result<AccuracyReport, String>,
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
}

/// Cartesian grid over encodings, optimizers and layer counts, in that
/// nesting order, sharing every other setting with `base`.
pub fn grid(base: &ExperimentConfig, encodings: &[Family], optimizers: &[OptimizerFamily], layers: &[usize]) -> Vec<ExperimentConfig> {
    let mut cfgs = Vec::new();
    for &encoding in encodings {
        for &optimizer in optimizers {
            for &l in layers {
                cfgs.push(ExperimentConfig {
                    encoding,
                    optimizer,
                    layers: l,
                    ..base.clone()
                });
            }
        }
    }
    cfgs
}

pub fn sweep(cfgs: &[ExperimentConfig]) -> Result<SweepSummary> {
    if cfgs.is_empty() {
        return Err(Error::Config("sweep needs at least one cell".into()));
    }
    let cells = cfgs
        .iter()
        .map(|cfg| SweepCell {
            config: cfg.clone(),
            report: run_experiment(cfg).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepSummary { cells })
}

impl SweepSummary {
    pub const CSV_HEADER: &'static str = "encoding,optimizer,layers,qubits,hamiltonian,iterations,no_deviation,with_deviation,acc,err,status";

    fn row_cells(cell: &SweepCell) -> Vec<String> {
        let c = &cell.config;
        let mut row = vec![
            c.encoding.to_string(),
            c.optimizer.to_string(),
            c.layers.to_string(),
            c.qubits().to_string(),
            c.hamiltonian.as_str().to_string(),
        ];
        match &cell.report {
            Ok(r) => row.extend([
                r.total().to_string(),
                r.reached().to_string(),
                r.missed().to_string(),
                r.acc().to_string(),
                r.err().to_string(),
                if r.truncated { "truncated" } else { "ok" }.to_string(),
            ]),
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push(format!("failed: {}", e.replace([',', '\n'], ";")));
            }
        }
        row
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.cells.first() {
            let c = &first.config;
            let _ = writeln!(out, "# master_seed={}", c.master_seed);
            let _ = writeln!(out, "# cities={}", c.cities);
            let _ = writeln!(out, "# vehicles={}", c.vehicles());
        }
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            out.push_str(&Self::row_cells(cell).join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Encoding | Optimizer | Layers | Qubits | Hamiltonian | Iterations | No Devn. | With Devn. | Acc | Err | Status |\n",
        );
        out.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
        for cell in &self.cells {
            let mut row = Self::row_cells(cell);
            if let Ok(r) = &cell.report {
                row[8] = format!("{:.0}%", 100.0 * r.acc());
                row[9] = format!("{:.0}%", 100.0 * r.err());
            }
            let _ = writeln!(out, "| {} |", row.join(" | "));
        }
        out
    }

    /// Writes `summary.csv`, `summary.md` and one CSV per successful cell.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("summary.csv"), &self.to_csv())?;
        write_file(&dir.join("summary.md"), &self.to_markdown())?;
        for cell in &self.cells {
            if let Ok(r) = &cell.report {
                write_file(&dir.join(format!("{}.csv", cell.config.cell_name())), &r.to_csv())?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Writes a single-cell report.
pub fn emit_report(report: &AccuracyReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Markdown => SweepSummary {
            cells: vec![SweepCell {
                config: report.config.clone(),
                report: Ok(report.clone()),
            }],
        }
        .to_markdown(),
    };
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
