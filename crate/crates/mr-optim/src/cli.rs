//! Command-line front end: `illustrative`, `train`, `check`, and `grid`
//! subcommands with a stable exit-code contract for scripting:
//! 0 success, 1 usage/parameter errors, 2 runtime abort on non-finite
//! values, 3 checker failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::checks;
use crate::error::{Error, Result};
use crate::illustrative::{
    self, linear_ls_run, linear_mr_gd_run, linear_mr_ls_run, logistic_mr_gd, logistic_noisy_gd,
    make_setup, OneDKind, OneDTrace,
};
use crate::tensor::SeededRng;
use crate::trainer::{grid_search_eta, run_experiment, ExperimentSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mr-optim",
    version,
    about = "Multiplicative reweighting of training examples: 1D reproductions, experiments, grid search, and convergence checkers"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed override for data generation and initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reproduce a 1D run and write its trace CSV.
    Illustrative {
        #[arg(value_enum)]
        kind: IllustrativeCmd,
        /// Epochs (trace has epochs + 1 rows).
        #[arg(long)]
        epochs: Option<usize>,
        /// Corruption fraction in [0, 1/2).
        #[arg(long)]
        sigma: Option<f64>,
        /// Corruption magnitude (linear case).
        #[arg(long)]
        epsilon: Option<f64>,
        /// MW step size (linear reweighted runs; the logistic analysis pins
        /// eta = alpha = 1).
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Run a training experiment from a JSON spec; writes trace.csv and
    /// summary.json.
    Train {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run a convergence checker suite; exit 0 iff every instance passes.
    Check {
        #[arg(value_enum)]
        theorem: TheoremCmd,
        /// Random instances for the descent/bound suites.
        #[arg(long)]
        instances: Option<usize>,
        /// Monte-Carlo seeds for the sampled-variant suite.
        #[arg(long)]
        seeds: Option<usize>,
        /// Epochs for the linear-case suites.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// MW step-size grid search from a JSON spec; writes grid.csv.
    Grid {
        #[arg(long)]
        spec: PathBuf,
        /// Comma-separated step-size candidates.
        #[arg(long, value_delimiter = ',')]
        etas: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IllustrativeCmd {
    /// Plain GD on the noisy logistic objective (sigma 0 gives the clean run).
    LogisticGd,
    /// Reweighted GD on the noisy logistic problem (eta = alpha = 1).
    LogisticMr,
    /// Unweighted least squares on the noisy linear problem.
    LinearLs,
    /// Alternating weighted least squares and MW updates.
    LinearMrLs,
    /// Reweighted full-batch GD with the squared loss.
    LinearMrGd,
}

impl IllustrativeCmd {
    fn file_stem(self) -> &'static str {
        match self {
            IllustrativeCmd::LogisticGd => "logistic-gd",
            IllustrativeCmd::LogisticMr => "logistic-mr",
            IllustrativeCmd::LinearLs => "linear-ls",
            IllustrativeCmd::LinearMrLs => "linear-mr-ls",
            IllustrativeCmd::LinearMrGd => "linear-mr-gd",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TheoremCmd {
    /// Per-epoch descent inequality on random smooth ensembles.
    Descent,
    /// Averaged-gradient convergence bound.
    Thm1,
    /// Monte-Carlo bound for the sampled variant.
    Thm2,
    /// Clean-probability floor in the linear case.
    BoundedP,
    /// Error decay of the reweighted WLS iterates.
    Thm4Decay,
}

/// Parses and dispatches; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Abort { .. } => EXIT_ABORT,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Illustrative {
            kind,
            epochs,
            sigma,
            epsilon,
            eta,
        } => cmd_illustrative(&cli.out, cli.seed, kind, epochs, sigma, epsilon, eta),
        Command::Train { spec } => cmd_train(&cli.out, cli.seed, &spec),
        Command::Check {
            theorem,
            instances,
            seeds,
            epochs,
        } => cmd_check(theorem, instances, seeds, epochs),
        Command::Grid { spec, etas } => cmd_grid(&cli.out, cli.seed, &spec, &etas),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_illustrative(
    out: &Path,
    seed: Option<u64>,
    kind: IllustrativeCmd,
    epochs: Option<usize>,
    sigma: Option<f64>,
    epsilon: Option<f64>,
    eta: Option<f64>,
) -> Result<i32> {
    let n = 15;
    let sigma = sigma.unwrap_or(1.0 / 3.0);
    let epsilon = epsilon.unwrap_or(1.0);
    let epochs = epochs.unwrap_or(1000);
    let seed = seed.unwrap_or(0);
    let mut rng = SeededRng::new(seed);

    let trace: OneDTrace = match kind {
        IllustrativeCmd::LogisticGd => {
            let setup = make_setup(n, sigma, epsilon, OneDKind::Logistic, &mut rng)?;
            logistic_noisy_gd(&setup, 1.0, epochs)?
        }
        IllustrativeCmd::LogisticMr => {
            let setup = make_setup(n, sigma, epsilon, OneDKind::Logistic, &mut rng)?;
            logistic_mr_gd(&setup, epochs)?
        }
        IllustrativeCmd::LinearLs => {
            let setup = make_setup(n, sigma, epsilon, OneDKind::Linear, &mut rng)?;
            linear_ls_run(&setup, epochs)?
        }
        IllustrativeCmd::LinearMrLs => {
            let setup = make_setup(n, sigma, epsilon, OneDKind::Linear, &mut rng)?;
            linear_mr_ls_run(&setup, eta.unwrap_or(0.01), epochs)?
        }
        IllustrativeCmd::LinearMrGd => {
            let setup = make_setup(n, sigma, epsilon, OneDKind::Linear, &mut rng)?;
            linear_mr_gd_run(&setup, 1.0, eta.unwrap_or(0.01), epochs)?
        }
    };

    let path = out.join(format!("{}.csv", kind.file_stem()));
    std::fs::write(&path, trace.to_csv_string())?;
    let last = trace.final_record();
    println!(
        "{}: {} rows -> {} (final theta {:.6}, clean loss {:.6})",
        kind.file_stem(),
        trace.records.len(),
        path.display(),
        last.theta,
        last.clean_loss
    );
    if matches!(kind, IllustrativeCmd::LinearLs | IllustrativeCmd::LinearMrLs) {
        let setup_floor = {
            let mut floor_rng = SeededRng::new(seed);
            let setup = make_setup(n, sigma, epsilon, OneDKind::Linear, &mut floor_rng)?;
            illustrative::noisy_ls_loss_floor(&setup)
        };
        println!("unweighted-LS clean-loss floor: {setup_floor:.6}");
    }
    Ok(EXIT_OK)
}

fn cmd_train(out: &Path, seed: Option<u64>, spec_path: &Path) -> Result<i32> {
    let mut spec = ExperimentSpec::from_json_file(spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let trace = run_experiment(&spec)?;
    let trace_path = out.join("trace.csv");
    let summary_path = out.join("summary.json");
    trace.write_csv(&trace_path)?;
    trace.write_summary(&summary_path)?;
    println!(
        "trained {} epochs: test accuracy {:.4}, clean train loss {:.4}",
        trace.records.len().saturating_sub(1),
        trace.final_test.accuracy,
        trace.final_clean_train.mean_loss
    );
    println!("trace -> {}", trace_path.display());
    println!("summary -> {}", summary_path.display());
    Ok(EXIT_OK)
}

fn cmd_check(
    theorem: TheoremCmd,
    instances: Option<usize>,
    seeds: Option<usize>,
    epochs: Option<usize>,
) -> Result<i32> {
    let instances = instances.unwrap_or(50);
    let seeds = seeds.unwrap_or(200);
    let epochs = epochs.unwrap_or(1000);
    let outcomes = match theorem {
        TheoremCmd::Descent => checks::descent_suite(instances, 1)?,
        TheoremCmd::Thm1 => checks::thm1_suite(instances, 1)?,
        TheoremCmd::Thm2 => checks::thm2_suite(seeds, 1000, 0.1)?,
        TheoremCmd::BoundedP => checks::bounded_p_suite(epochs, 0.01)?,
        TheoremCmd::Thm4Decay => checks::thm4_decay_suite(epochs, 0.01)?,
    };
    for o in &outcomes {
        println!("{} {} — {}", if o.passed { "PASS" } else { "FAIL" }, o.label, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed == 0 {
        println!("all {} instance(s) passed", outcomes.len());
        Ok(EXIT_OK)
    } else {
        println!("{failed} of {} instance(s) FAILED", outcomes.len());
        Ok(EXIT_CHECK_FAILED)
    }
}

fn cmd_grid(out: &Path, seed: Option<u64>, spec_path: &Path, etas: &[f64]) -> Result<i32> {
    if etas.is_empty() {
        return Err(Error::parameter("grid: provide at least one eta via --etas"));
    }
    let mut spec = ExperimentSpec::from_json_file(spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let table = grid_search_eta(&spec, etas)?;
    if table.duplicates_removed > 0 {
        eprintln!(
            "warning: removed {} duplicate eta candidate(s)",
            table.duplicates_removed
        );
    }
    let path = out.join("grid.csv");
    std::fs::write(&path, table.to_csv_string())?;
    for row in &table.rows {
        println!(
            "eta {:>10}: test accuracy {:.4}, final noisy mass {:.4}{}",
            row.eta,
            row.test_accuracy,
            row.final_noisy_mass,
            if row.degenerate { " [degenerate]" } else { "" }
        );
    }
    println!("selected eta: {}", table.selected_eta);
    println!("table -> {}", path.display());
    Ok(EXIT_OK)
}
