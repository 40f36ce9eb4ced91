use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vrp_vqe::ansatz::Family;
use vrp_vqe::harness::{self, draw_weights, ExperimentConfig, HamiltonianMode, ReportFormat};
use vrp_vqe::ising::{compile_qubo, instance_minimum, brute_force_minimum, qubo_to_ising, IsingModel};
use vrp_vqe::kernel::{gram_matrix, solve_ls_svm, Dataset, DEFAULT_GAMMA};
use vrp_vqe::optim::OptimizerFamily;
use vrp_vqe::vrp::VrpInstance;
use vrp_vqe::{Error, Result};

#[derive(Parser)]
#[command(name = "vrp-vqe", version, about = "Vehicle routing via variational circuits on a statevector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile an instance to an Ising model in text form.
    Compile(CompileArgs),
    /// Exact minimum of an Ising model or instance.
    Oracle(OracleArgs),
    /// Run one experiment cell.
    Vqe(CellArgs),
    /// Run a grid of cells.
    Sweep(SweepArgs),
    /// Gram matrix and least-squares SVM for a labeled dataset.
    Kernel(KernelArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance JSON file; random weights are drawn when absent.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    cities: usize,
    #[arg(long)]
    vehicles: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "penalty-a")]
    penalty_a: Option<f64>,
}

impl InstanceArgs {
    fn load(&self) -> Result<VrpInstance> {
        match &self.instance {
            Some(path) => VrpInstance::load(path),
            None => VrpInstance::new(
                self.cities,
                self.vehicles.unwrap_or(2),
                draw_weights(self.seed, u64::MAX, self.cities),
                self.penalty_a,
            ),
        }
    }
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Ising text file; overrides the instance options.
    #[arg(long)]
    ising: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
}

#[derive(Args)]
struct CellArgs {
    /// JSON config; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cities: Option<usize>,
    #[arg(long)]
    vehicles: Option<usize>,
    #[arg(long)]
    encoding: Option<Family>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    optimizer: Option<OptimizerFamily>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hamiltonian: Option<HamiltonianMode>,
    #[arg(long = "penalty-a")]
    penalty_a: Option<f64>,
    #[arg(long = "max-evaluations")]
    max_evaluations: Option<usize>,
    /// Allow amplitude encoding above six qubits.
    #[arg(long)]
    allow_large_amplitude: bool,
    /// Run sequentially instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Report path (vqe) or directory (sweep).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CellArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    cfg.$field = v;
                }
            };
        }
        set!(cities, self.cities);
        set!(encoding, self.encoding);
        set!(layers, self.layers);
        set!(optimizer, self.optimizer);
        set!(runs, self.runs);
        set!(master_seed, self.seed);
        set!(hamiltonian, self.hamiltonian);
        set!(max_evaluations, self.max_evaluations);
        if self.vehicles.is_some() {
            cfg.vehicles = self.vehicles;
        }
        if self.penalty_a.is_some() {
            cfg.penalty_a = self.penalty_a;
        }
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }
        cfg.allow_large_amplitude |= self.allow_large_amplitude;
        cfg.parallel &= !self.serial;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Encodings to include (comma separated); all four when absent.
    #[arg(long, value_delimiter = ',')]
    encodings: Vec<Family>,
    /// Optimizers to include; all three when absent.
    #[arg(long, value_delimiter = ',')]
    optimizers: Vec<OptimizerFamily>,
    /// Layer counts to include; 1 and 2 when absent.
    #[arg(long = "layer-set", value_delimiter = ',')]
    layer_set: Vec<usize>,
}

#[derive(Args)]
struct KernelArgs {
    /// CSV dataset with the label in the last column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "angle")]
    encoding: Family,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Gram matrix CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn compile(args: &CompileArgs) -> Result<()> {
    let inst = args.instance.load()?;
    let model = qubo_to_ising(&compile_qubo(&inst));
    write_or_print(args.out.as_deref(), &model.to_text())
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let result = match &args.ising {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            brute_force_minimum(&IsingModel::from_text(&text)?)?
        }
        None => {
            let inst = args.instance.load()?;
            instance_minimum(&inst, &qubo_to_ising(&compile_qubo(&inst)))?
        }
    };
    println!("min_energy={}", result.min_energy);
    if let Some(f) = result.feasible_min {
        println!("feasible={f}");
    }
    for a in &result.argmin_set {
        println!("argmin={a}");
    }
    Ok(())
}

fn summarize(report: &harness::AccuracyReport) {
    eprintln!(
        "{} {} L={} runs={} N={} acc={:.2} err={:.2} time={:.1}s{}",
        report.config.encoding,
        report.config.optimizer,
        report.config.layers,
        report.total(),
        report.reached(),
        report.acc(),
        report.err(),
        report.wall_time.as_secs_f64(),
        if report.truncated { " (truncated)" } else { "" }
    );
}

fn vqe(args: &CellArgs) -> Result<()> {
    let cfg = args.config()?;
    let report = harness::run_experiment(&cfg)?;
    summarize(&report);
    match &cfg.output_dir {
        Some(path) => harness::emit_report(&report, ReportFormat::Csv, path),
        None => write_or_print(None, &report.to_csv()),
    }
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let base = args.cell.config()?;
    let encodings = if args.encodings.is_empty() { Family::ENCODINGS.to_vec() } else { args.encodings.clone() };
    let optimizers = if args.optimizers.is_empty() { OptimizerFamily::ALL.to_vec() } else { args.optimizers.clone() };
    let layers = if args.layer_set.is_empty() { vec![1, 2] } else { args.layer_set.clone() };
    let summary = harness::sweep(&harness::grid(&base, &encodings, &optimizers, &layers))?;
    for cell in &summary.cells {
        match &cell.report {
            Ok(r) => summarize(r),
            Err(e) => eprintln!("{}: {e}", cell.config.cell_name()),
        }
    }
    let dir = base.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    summary.write_to(&dir)?;
    print!("{}", summary.to_markdown());
    Ok(())
}

fn kernel(args: &KernelArgs) -> Result<()> {
    let data = Dataset::load(&args.data)?;
    let k = gram_matrix(&data.features, args.encoding, args.layers)?;
    write_or_print(args.out.as_deref(), &k.to_csv())?;
    let svm = solve_ls_svm(&k, &data.labels, args.gamma)?;
    let correct = (0..k.size()).filter(|&i| svm.classify(&k.row(i)) == data.labels[i]).count();
    eprintln!("bias={} residual={:e}", svm.bias, svm.residual);
    eprintln!("alphas={:?}", svm.alphas);
    eprintln!("training accuracy {correct}/{}", k.size());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Compile(a) => compile(a),
        Command::Oracle(a) => oracle(a),
        Command::Vqe(a) => vqe(a),
        Command::Sweep(a) => sweep(a),
        Command::Kernel(a) => kernel(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
