//! Flags, subcommands and the resolved run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mflq::backward::BsdeOptions;
use mflq::forward::MeanMode;
use mflq::hamiltonian::{HamiltonianOptions, TransformMode};
use mflq::{ProblemSpec, TimeGrid};

use crate::error::{RunError, RunResult};

#[derive(Parser, Debug)]
#[command(name = "mflq", version, about = "Infinite-horizon mean-field LQ control with jumps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Dissipation constants, definiteness check and admissible K windows.
    Analyze { problem: PathBuf },
    /// Simulate the uncontrolled state equation and check its integrability estimate.
    Simulate { problem: PathBuf },
    /// Solve the adjoint equation of the uncontrolled state and check its estimate.
    SolveBsde { problem: PathBuf },
    /// Solve the Hamiltonian system by continuation.
    SolveHamiltonian { problem: PathBuf },
    /// Continuation, control synthesis and optimality report.
    Optimize {
        problem: PathBuf,
        /// number of random probe directions
        #[arg(long, default_value_t = 8)]
        probes: usize,
    },
    /// Run the acceptance suite.
    Verify {
        /// criteria to run (default: all)
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// The scalar worked example with a closed-form solution.
    Example31 {
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        x0: f64,
        /// constant value of the parameter a(.)
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 8)]
        probes: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Simulate { .. } => "simulate",
            Command::SolveBsde { .. } => "solve-bsde",
            Command::SolveHamiltonian { .. } => "solve-hamiltonian",
            Command::Optimize { .. } => "optimize",
            Command::Verify { .. } => "verify",
            Command::Example31 { .. } => "example31",
        }
    }

    pub fn problem(&self) -> Option<&PathBuf> {
        match self {
            Command::Analyze { problem }
            | Command::Simulate { problem }
            | Command::SolveBsde { problem }
            | Command::SolveHamiltonian { problem }
            | Command::Optimize { problem, .. } => Some(problem),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    ExactMean,
    Empirical,
}

impl From<ModeArg> for MeanMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ExactMean => MeanMode::ExactMean,
            ModeArg::Empirical => MeanMode::Empirical,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformArg {
    Auto,
    Off,
}

impl From<TransformArg> for TransformMode {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Auto => TransformMode::Auto,
            TransformArg::Off => TransformMode::Off,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// truncation horizon
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    /// Monte Carlo paths M
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// weight exponent K (overrides the problem file)
    #[arg(long = "K", global = true, allow_hyphen_values = true)]
    pub weight_k: Option<f64>,
    #[arg(long, global = true)]
    pub alpha_step: Option<f64>,
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    /// Picard tolerance of the continuation levels
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum, default_value = "auto")]
    pub transform: TransformArg,
    /// allow K below the guaranteed Hamiltonian window
    #[arg(long, global = true)]
    pub exploratory: bool,
    /// paths written individually to paths.csv
    #[arg(long, global = true, default_value_t = 10)]
    pub write_paths: usize,
    #[arg(long, global = true, env = "MFLQ_OUT_DIR", default_value = "mflq-out")]
    pub out: PathBuf,
}

/// Everything a run depends on, after defaults are applied.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub problem: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub paths: usize,
    #[serde(rename = "K")]
    pub weight_k: Option<f64>,
    pub mode: ModeArg,
    pub transform: TransformArg,
    pub exploratory: bool,
    pub write_paths: usize,
    pub out: String,
    pub hamiltonian: HamiltonianOptions,
}

pub const DEFAULT_PATHS: usize = 500;

impl RunConfig {
    pub fn resolve(cmd: &Command, args: &RunArgs) -> RunResult<Self> {
        let default_paths = match cmd {
            // the worked example is deterministic at the optimum
            Command::Example31 { .. } => 8,
            _ => DEFAULT_PATHS,
        };
        let paths = args.paths.unwrap_or(default_paths);
        if paths == 0 {
            return Err(RunError::Usage("--paths must be positive".into()));
        }
        if let Some(t) = args.threads {
            if t == 0 {
                return Err(RunError::Usage("--threads must be positive".into()));
            }
        }
        for (name, v) in [("--dt", args.dt), ("--T", args.horizon), ("--tol", args.tol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(RunError::Usage(format!("{name}={v} must be positive and finite")));
                }
            }
        }
        if let Some(k) = args.weight_k {
            if !k.is_finite() {
                return Err(RunError::Usage(format!("--K={k} must be finite")));
            }
        }
        let mode = args.mode.unwrap_or(ModeArg::ExactMean);
        let mut ham = HamiltonianOptions { mode: mode.into(), exploratory: args.exploratory, bsde: BsdeOptions::default(), ..Default::default() };
        if let Some(a) = args.alpha_step {
            if !(a > 0.0 && a <= 1.0) {
                return Err(RunError::Usage(format!("--alpha-step={a} must lie in (0, 1]")));
            }
            ham.alpha_step = a;
        }
        if let Some(d) = args.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(RunError::Usage(format!("--damping={d} must lie in (0, 1]")));
            }
            ham.damping = d;
        }
        if let Some(t) = args.tol {
            ham.tol = t;
        }
        Ok(Self {
            problem: cmd.problem().map(|p| p.display().to_string()),
            seed: args.seed,
            threads: args.threads,
            dt: args.dt,
            horizon: args.horizon,
            paths,
            weight_k: args.weight_k,
            mode,
            transform: args.transform,
            exploratory: args.exploratory,
            write_paths: args.write_paths,
            out: args.out.display().to_string(),
            hamiltonian: ham,
        })
    }

    pub fn mean_mode(&self) -> MeanMode {
        self.mode.into()
    }

    /// Grid and K overrides applied to a parsed problem.
    pub fn apply(&self, spec: ProblemSpec) -> RunResult<ProblemSpec> {
        let mut spec = spec;
        if self.dt.is_some() || self.horizon.is_some() {
            let g = &spec.grid;
            let grid = TimeGrid::new(g.t0, self.horizon.unwrap_or(g.horizon), self.dt.unwrap_or(g.dt))?;
            spec = spec.with_grid(grid)?;
        }
        if let Some(k) = self.weight_k {
            spec = spec.with_weight(k);
        }
        Ok(spec)
    }
}
