//! cohdist: command-line front end for coherence-core. Every number it
//! prints comes from the library; this binary only parses, dispatches, and
//! formats.

mod commands;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spec::{FamilyArg, FigureArg, InjectArg, StateSpec, TargetSpec};

/// Exit codes: 0 success, 1 I/O, 2 usage, 3 infeasible conversion,
/// 4 failed validation. Clap's own usage errors also exit with 2.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self { code: 1, message: format!("{}: {err}", path.display()) }
    }
}

impl From<coherence_core::CoherenceError> for Failure {
    fn from(err: coherence_core::CoherenceError) -> Self {
        let code = match err {
            coherence_core::CoherenceError::Infeasible { .. } => 3,
            _ => 2,
        };
        Self { code, message: err.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "cohdist", version, about = "One-shot coherence distillation toolkit")]
struct Cli {
    /// Machine-readable JSON on stdout (ignored by sweep, which is CSV).
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Distillation fidelity and norm decomposition for one state and m.
    Fidelity {
        #[command(flatten)]
        state: StateSpec,
        /// Target uniform-state dimension.
        #[arg(long)]
        m: usize,
    },
    /// One-shot distillation report at a given error budget.
    Distill {
        #[command(flatten)]
        state: StateSpec,
        /// Accepted infidelity in [0, 1].
        #[arg(long)]
        eps: f64,
    },
    /// Sweep a family over alpha and emit a fidelity/coherence CSV.
    Sweep(SweepArgs),
    /// Alpha intervals where the family distills to each m within eps.
    Boundaries {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Accepted infidelity in [0, 1).
        #[arg(long)]
        eps: f64,
        /// Target dimensions to report, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3])]
        m: Vec<usize>,
    },
    /// Plan a state conversion and emit its Kraus channel.
    Synthesize(SynthesizeArgs),
    /// Run a benchmark circuit and report readout tomography.
    Simulate {
        /// Benchmark circuit id.
        #[arg(long, value_enum)]
        figure: FigureArg,
        /// Family coefficient, within the circuit regime.
        #[arg(long)]
        alpha: f64,
        /// Write the JSON report here as well as stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-check the whole stack; nonzero exit on any failing invariant.
    Validate {
        #[arg(long, hide = true, value_enum)]
        inject: Option<InjectArg>,
    },
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Grid start; defaults to the family domain edge.
    #[arg(long)]
    pub start: Option<f64>,
    /// Grid end; defaults to the family domain edge.
    #[arg(long)]
    pub end: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Fidelity columns to emit, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3])]
    pub m: Vec<usize>,
    /// Error budgets, comma separated; the first also sets the region label.
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    /// Worker threads for row evaluation; output is identical for any count.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Destination file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub state: StateSpec,
    #[command(flatten)]
    pub target: TargetSpec,
    /// Channel JSON destination.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Fidelity { state, m } => commands::fidelity(&state.build()?, m, cli.json),
        Cmd::Distill { state, eps } => commands::distill(&state.build()?, eps, cli.json),
        Cmd::Sweep(args) => commands::sweep(&args),
        Cmd::Boundaries { family, eps, m } => commands::boundaries(family, eps, &m, cli.json),
        Cmd::Synthesize(args) => commands::synthesize(&args, cli.json),
        Cmd::Simulate { figure, alpha, output } => {
            commands::simulate(figure, alpha, output.as_deref(), cli.json)
        }
        Cmd::Validate { inject } => commands::validate(inject, cli.json),
    }
}

fn main() -> ExitCode {
    // die quietly instead of panicking when a downstream pipe closes early
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
