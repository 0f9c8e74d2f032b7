//! `elastica`: elastic regression for curves from the command line.
//!
//! Exit codes: 0 success, 1 other failures, 2 invalid input or usage,
//! 3 rank deficiency or too few degrees of freedom, 4 non-convergence
//! under `--strict`.

mod commands;
mod error;
mod io;
mod model_file;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "elastica", version, about = "Elastic regression for curves modulo re-parametrization")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ELASTICA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Input curves and covariates.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Long-format CSV `curve_id[,t],c1,..,cd`.
    #[arg(long)]
    pub curves: PathBuf,
    /// CSV `curve_id,<covariate>,..`; omit for an intercept-only model.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
}

/// Spline basis and fitting controls.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Degree of the SRV-level spline basis.
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, default_value_t = 11)]
    pub knots: usize,
    /// Treat curves as closed (periodic basis, closed predictions).
    #[arg(long)]
    pub closed: bool,
    /// Convergence threshold on the squared coefficient change.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Alignment lattice size.
    #[arg(long, default_value_t = 200)]
    pub grid_size: usize,
    /// Points per predicted curve.
    #[arg(long, default_value_t = 201)]
    pub target_points: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Start the quotient fit from identity warpings only.
    #[arg(long)]
    pub no_prealign_start: bool,
    /// Ridge factor on the covariate cross-product.
    #[arg(long)]
    pub ridge: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a regression model and write it as JSON.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value = "quotient",
              value_parser = ["quotient", "prealign-srv", "prealign-curve", "iterate-curve", "frechet"])]
        method: String,
        /// Covariate rows to predict at (required for frechet).
        #[arg(long)]
        at: Option<PathBuf>,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Fit report (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Predicted curves at `--at` as CSV.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Exit with code 4 if the fit did not converge.
        #[arg(long)]
        strict: bool,
    },
    /// Predict curves from a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        at: Option<PathBuf>,
        /// Points per predicted curve (default: as fitted).
        #[arg(long)]
        points: Option<usize>,
        /// Centre predictions at their centroid instead of the origin.
        #[arg(long)]
        centered: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Elastic distances between curves.
    Distance {
        #[arg(long)]
        curves: PathBuf,
        #[arg(long)]
        closed: bool,
        /// Two curve ids; all pairs if omitted.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        ids: Option<Vec<String>>,
        #[arg(long, default_value_t = 200)]
        grid_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Elastic mean of a set of curves.
    Mean {
        #[arg(long)]
        curves: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Case bootstrap: coefficient ellipses and distance-based regions.
    Bootstrap {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Covariate rows for prediction regions.
        #[arg(long)]
        at: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n_boot: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Start replicates from the full-data warpings.
        #[arg(long)]
        warm_start: bool,
        #[arg(long, default_value = "bootstrap")]
        out_dir: PathBuf,
    },
    /// Permutation, coefficient and out-of-bag tests.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Permutation test of no covariate effect.
        #[arg(long)]
        global: bool,
        /// Bootstrap tests of every effect.
        #[arg(long)]
        coef: bool,
        /// Out-of-bag comparison with reduced models.
        #[arg(long)]
        oob: bool,
        /// Comma-separated covariates removed in a reduced model; repeatable.
        #[arg(long)]
        drop: Vec<String>,
        #[arg(long, default_value_t = 199)]
        n_perm: usize,
        #[arg(long, default_value_t = 100)]
        n_boot: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a training and a test dataset.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value = "simulated")]
        out_dir: PathBuf,
    },
    /// Compare estimators on simulated replicates.
    Bench {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        /// Comma-separated methods (default: all five).
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, value_parser = ["1", "2", "3", "coef-test"])]
    pub scenario: String,
    /// Noise level (default: the scenario's smaller one).
    #[arg(long)]
    pub sd: Option<f64>,
    /// Points kept per curve as `MIN,MAX`.
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure {n} threads: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Fit { data, fit, method, at, out, report, predictions, svg, strict } => {
            commands::fit(&data, &fit, &method, commands::FitOutputs { at, out, report, predictions, svg, strict })
        }
        Command::Predict { model, at, points, centered, out, svg } => {
            commands::predict(&model, at.as_deref(), points, centered, out.as_deref(), svg.as_deref())
        }
        Command::Distance { curves, closed, ids, grid_size, out } => {
            commands::distance(&curves, closed, ids.as_deref(), grid_size, out.as_deref())
        }
        Command::Mean { curves, fit, out, svg } => commands::mean(&curves, &fit, out.as_deref(), svg.as_deref()),
        Command::Bootstrap { data, fit, at, n_boot, alpha, warm_start, out_dir } => {
            commands::bootstrap(&data, &fit, at.as_deref(), n_boot, alpha, warm_start, &out_dir)
        }
        Command::Test { data, fit, global, coef, oob, drop, n_perm, n_boot, alpha, out } => commands::test(
            &data,
            &fit,
            commands::TestChoice { global, coef, oob, drop, n_perm, n_boot, alpha },
            out.as_deref(),
        ),
        Command::Simulate { sim, out_dir } => commands::simulate(&sim, &out_dir),
        Command::Bench { sim, replicates, methods, out } => {
            commands::bench(&sim, replicates, methods.as_deref(), out.as_deref())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
