//! `qmemsim`: lifetime experiments for qubit- and qudit-based quantum memories.

mod args;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, CommandFactory, Parser, Subcommand};
use qmemsim_core::experiments::Profile;
use qmemsim_core::{Error, IntegratorConfig};
use serde::Serialize;

use args::{ModelArg, Qubits, StateArg, Targets};

pub const PROFILE_ENV: &str = "QMEMSIM_PROFILE";

#[derive(Parser, Debug)]
#[command(name = "qmemsim", version, about = "Quantum memory lifetime simulator")]
pub struct Cli {
    /// Directory for result files and the run manifest.
    #[arg(long, short, global = true, default_value = "qmemsim-out")]
    pub out: PathBuf,

    /// Worker threads for multi-state experiments.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Damping rate for models given by name; times are in units of 1/gamma.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub gamma: f64,

    /// Default seed for random states and ensembles.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, default_value_t = 1e-8)]
    pub rtol: f64,

    #[arg(long, global = true, default_value_t = 1e-10)]
    pub atol: f64,

    /// Attempted-step budget per integration.
    #[arg(long, global = true)]
    pub max_steps: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fidelity trace of one state under one model.
    #[command(group(ArgGroup::new("stop").required(true).multiple(true).args(["t_end", "target"])))]
    Simulate {
        #[arg(long)]
        state: StateArg,
        #[arg(long)]
        model: ModelArg,
        #[arg(long)]
        t_end: Option<f64>,
        /// Also locate the time the fidelity first reaches this value.
        #[arg(long, visible_alias = "ftarget")]
        target: Option<f64>,
        /// Sample on this many evenly spaced times instead of the solver steps.
        #[arg(long)]
        samples: Option<usize>,
        /// Use the non-Hermitian (no-jump) evolution.
        #[arg(long, conflicts_with = "target")]
        nh: bool,
    },
    /// Lifetime ratio t_a/t_b of one state in two models.
    Ratio {
        #[arg(long)]
        state: StateArg,
        #[arg(long)]
        a: ModelArg,
        #[arg(long)]
        b: ModelArg,
        #[arg(long, visible_alias = "target", default_value_t = 0.75)]
        ftarget: f64,
    },
    /// Qubit register versus qudit ratios for the whole state catalog.
    Table {
        #[arg(long)]
        profile: Option<Profile>,
        /// Directory with qaoa_*.json and vqe_*.json amplitude files.
        #[arg(long)]
        states_dir: Option<PathBuf>,
        /// Instances per random category.
        #[arg(long, default_value_t = 10)]
        ensemble: usize,
        #[arg(long, visible_alias = "target", default_value_t = 0.75)]
        ftarget: f64,
    },
    /// Lifetime gain from sorting amplitudes by magnitude.
    Reorder {
        #[arg(long)]
        state: StateArg,
        #[arg(long)]
        model: ModelArg,
        #[arg(long, visible_alias = "target", default_value_t = 0.75)]
        ftarget: f64,
    },
    /// Lindblad and non-Hermitian fidelity on a shared grid.
    CompareNh {
        #[arg(long)]
        state: StateArg,
        #[arg(long)]
        model: ModelArg,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Ratios at several target fidelities, grouped by target.
    Sweep {
        #[arg(long, default_value = "0.7,0.75,0.9")]
        ftargets: Targets,
        /// States to sweep; each is paired with a dephased register and a qudit of its dimension.
        #[arg(long)]
        state: Vec<StateArg>,
        /// GHZ register sizes, e.g. `4..10` or `4,6,8`; used when no --state is given.
        #[arg(long)]
        qubits: Option<Qubits>,
        #[arg(long)]
        profile: Option<Profile>,
    },
    /// GHZ ratios versus register size.
    GhzSweep {
        #[arg(long)]
        qubits: Option<Qubits>,
        #[arg(long, visible_alias = "target", default_value_t = 0.75)]
        ftarget: f64,
        #[arg(long)]
        profile: Option<Profile>,
    },
}

impl Cli {
    pub fn integrator(&self) -> IntegratorConfig {
        let mut config = IntegratorConfig::default().with_tolerances(self.rtol, self.atol);
        if let Some(n) = self.max_steps {
            config.max_steps = n;
        }
        config
    }
}

/// Exit status: 2 for bad arguments or inputs, 3 when the integration itself fails.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::IntegrationFailure { .. } | Error::Stiffness { .. } | Error::NoCrossing { .. } | Error::Solver(_),
        ) => 3,
        Some(Error::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::InvalidValue | ErrorKind::ValueValidation) => {
            let _ = e.print();
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
