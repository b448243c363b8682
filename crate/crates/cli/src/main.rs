mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Learned heat-flux closures for the 1D Euler-Poisson system.
#[derive(Debug, Parser)]
#[command(name = "heatflux", version, about)]
pub struct Cli {
    /// TOML run configuration; defaults are used for anything missing.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `output_dir` from the configuration).
    #[arg(long, global = true, env = "HEATFLUX_OUT")]
    pub out: Option<PathBuf>,

    /// Overrides every seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled dataset with the kinetic solver.
    Datagen {
        /// Number of Knudsen numbers.
        #[arg(long)]
        n_eps: Option<usize>,
        /// Initial conditions per Knudsen number.
        #[arg(long)]
        inits: Option<usize>,
        /// Recorded times per run.
        #[arg(long)]
        times: Option<usize>,
        /// Spatial points.
        #[arg(long)]
        nx: Option<usize>,
        /// Velocity points.
        #[arg(long)]
        nv: Option<usize>,
        /// Draw Knudsen numbers at random instead of on a grid.
        #[arg(long)]
        random_eps: bool,
        /// Use discontinuous initial conditions.
        #[arg(long)]
        discontinuous: bool,
        /// File name inside the output directory.
        #[arg(long, default_value = "dataset.hfd")]
        name: String,
    },
    /// Train the network on a dataset.
    Train {
        /// Dataset file to train on.
        #[arg(long)]
        dataset: PathBuf,
        /// Training series (the learning rate restarts each series).
        #[arg(long)]
        series: Option<usize>,
        /// Epochs per series.
        #[arg(long)]
        epochs: Option<usize>,
        /// Windows per gradient step.
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, default_value = "model.hfm")]
        name: String,
    },
    /// Heat-flux prediction errors of a model over a dataset.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::All)]
        split: SplitArg,
        /// Smoothing width (defaults to the model's).
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Run one fluid simulation with the chosen closure.
    Sim {
        #[arg(long, value_enum)]
        closure: ClosureArg,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = InitArg::Smooth)]
        init: InitArg,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Final time.
        #[arg(long)]
        t_end: Option<f64>,
        /// Spatial points of the fluid grid.
        #[arg(long)]
        nx: Option<usize>,
        /// Interval between recorded states.
        #[arg(long)]
        record_dt: Option<f64>,
        /// Random stream of the initial condition.
        #[arg(long, default_value_t = 0)]
        run_id: u64,
    },
    /// Run an evaluation suite and write its CSV.
    Eval {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Overrides the run count of the suite.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Describe a dataset or model file.
    Info { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    All,
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClosureArg {
    Zero,
    Ns,
    Kinetic,
    Neural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Uniform,
    Smooth,
    Discontinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Prediction errors over a dataset split.
    Pred,
    /// Estimate errors along kinetic runs.
    Time,
    /// Window layout and reconstruction weights.
    Windows,
    /// Parameter counts over a hyper-parameter grid.
    Params,
    /// Electric-energy comparison of the simulation models.
    Compare,
    /// Fluid+Network survival per smoothing width.
    Stability,
    /// Prediction error per smoothing width.
    Smoothing,
    /// Prediction error at other resolutions.
    Resolution,
    /// Fluid+Network runs from discontinuous data.
    Discontinuity,
}

fn exit_code(e: &heatflux::Error) -> u8 {
    use heatflux::Error as E;
    match e {
        E::Config(_) | E::Shape(_) => 2,
        E::Io(_) | E::Format(_) => 4,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
