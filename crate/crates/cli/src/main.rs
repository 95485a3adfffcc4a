//! `vsvm`: run the V-matrix estimator on a dataset and report the Gram
//! spectrum, solver outcome and feasibility analysis.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vsvm_core::experiment::{compare, run_experiment, DatasetSource, ExperimentConfig, VSource};
use vsvm_core::kernels::KernelKind;
use vsvm_core::Error;

#[derive(Parser)]
#[command(
    name = "vsvm",
    version,
    about = "V-matrix conditional probability estimation with rank and feasibility diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one configuration and print its report.
    Run(RunArgs),
    /// Run every dataset × kernel combination and print a summary table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Shared {
    /// RBF width parameter.
    #[arg(long, default_value_t = 1.0)]
    rbf_param: f64,
    /// Weight of the RKHS norm term.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Seed for the Gaussian mixture.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// `identity` or `csv:<path>`.
    #[arg(long, default_value = "identity")]
    v_matrix: VSource,
    /// Add this multiple of the identity to the quadratic term (off by default).
    #[arg(long)]
    regularization: Option<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// `xor`, `gauss` or `csv:<path>`.
    #[arg(long, default_value = "xor")]
    dataset: DatasetSource,
    /// `rbf` or `ink0`.
    #[arg(long, default_value = "rbf")]
    kernel: KernelKind,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated datasets.
    #[arg(long, value_delimiter = ',', default_value = "xor,gauss")]
    dataset: Vec<DatasetSource>,
    /// Comma-separated kernels.
    #[arg(long, value_delimiter = ',', default_value = "rbf,ink0")]
    kernel: Vec<KernelKind>,
    #[command(flatten)]
    shared: Shared,
}

fn config(dataset: DatasetSource, kernel: KernelKind, shared: &Shared) -> ExperimentConfig {
    ExperimentConfig {
        dataset,
        kernel,
        rbf_param: shared.rbf_param,
        gamma: shared.gamma,
        seed: shared.seed,
        v_matrix: shared.v_matrix.clone(),
        regularization: shared.regularization,
        report_path: None,
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invariant(_) | Error::SingularMatrix { .. } | Error::RangeViolation { .. } => 2,
        _ => 1,
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = config(args.dataset, args.kernel, &args.shared);
            cfg.report_path = args.shared.report;
            let report = run_experiment(&cfg)?;
            print!("{}", report.summary());
        }
        Command::Compare(args) => {
            let mut configs = Vec::new();
            for dataset in &args.dataset {
                for &kernel in &args.kernel {
                    configs.push(config(dataset.clone(), kernel, &args.shared));
                }
            }
            let table = compare(&configs)?;
            print!("{}", table.render());
            if let Some(path) = &args.shared.report {
                let mut json = table.to_json()?;
                json.push('\n');
                std::fs::write(path, json).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
