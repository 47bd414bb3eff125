//! Command-line front end: learnability analysis, CB simulation, decay
//! fitting, feasibility regions, and gauge-equivalence checks.
//!
//! Exit codes: 0 success, 2 validation failure, 3 infeasible or empty
//! region, 4 parse error.

mod commands;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pauli-learn", version, about = "Pauli noise learnability toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learnability analysis of a gate set: UDF/LDF, learnable basis,
    /// per-Pauli table, DOT graph.
    Analyze {
        /// Gate-set JSON file.
        #[arg(long)]
        gateset: String,
        /// Output directory.
        #[arg(long)]
        out: String,
        /// Comma-separated subset of {json,md,dot}.
        #[arg(long, default_value = "json,md,dot")]
        format: String,
    },
    /// Simulate cycle-benchmarking experiments and write datasets.
    Simulate {
        #[arg(long)]
        gateset: String,
        /// Pauli noise-model JSON (pauli_fast or ptm_dense engine).
        #[arg(long)]
        noise: Option<String>,
        /// General CPTP noise spec JSON (ptm_dense engine only).
        #[arg(long)]
        cptp: Option<String>,
        /// Simulation config JSON; flags below override its fields.
        #[arg(long)]
        config: Option<String>,
        /// suite | standard | interleaved | intercept
        #[arg(long)]
        protocol: Option<String>,
        /// Target gate name (defaults to the first gate).
        #[arg(long)]
        gate: Option<String>,
        /// Comma-separated Paulis (defaults to all 4^n).
        #[arg(long)]
        paulis: Option<String>,
        /// Comma-separated depth list.
        #[arg(long)]
        depths: Option<String>,
        /// Comma-separated intercept l values.
        #[arg(long)]
        l_values: Option<String>,
        #[arg(long)]
        circuits: Option<u32>,
        /// 0 selects infinite-shot (analytic) mode.
        #[arg(long)]
        shots: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// pauli_fast | ptm_dense
        #[arg(long)]
        engine: Option<String>,
        #[arg(long)]
        out: String,
    },
    /// Fit datasets and reconstruct all learnable functionals.
    Fit {
        #[arg(long)]
        gateset: String,
        /// Dataset JSON written by `simulate`.
        #[arg(long)]
        data: String,
        #[arg(long)]
        bootstrap: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "json,csv")]
        format: String,
        #[arg(long)]
        out: String,
    },
    /// Feasibility region of the unlearnable degrees of freedom.
    Feasible {
        #[arg(long)]
        gateset: String,
        /// learnable.json written by `fit`.
        #[arg(long)]
        fits: String,
        /// Slack on the positivity constraints; defaults to the largest
        /// bootstrap standard deviation among the fidelity estimates.
        #[arg(long)]
        eps: Option<f64>,
        /// Grid points per axis.
        #[arg(long, default_value_t = 401)]
        grid: usize,
        #[arg(long, default_value = "json,csv")]
        format: String,
        #[arg(long)]
        out: String,
    },
    /// Certify two noise models (or a model and its gauged image)
    /// indistinguishable by exact dense evaluation.
    GaugeCheck {
        #[arg(long)]
        gateset: String,
        #[arg(long)]
        noise: String,
        /// Gauge spec JSON to apply to --noise.
        #[arg(long)]
        gauge: Option<String>,
        /// Second model to compare against instead of a gauge.
        #[arg(long)]
        noise2: Option<String>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
    /// End-to-end study: analyze, simulate the learnable suite, fit,
    /// compute the feasible region, and write a combined summary.
    Report {
        #[arg(long)]
        gateset: String,
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        cptp: Option<String>,
        #[arg(long)]
        circuits: Option<u32>,
        #[arg(long)]
        shots: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { gateset, out, format } => commands::analyze(&gateset, &out, &format),
        Command::Simulate {
            gateset,
            noise,
            cptp,
            config,
            protocol,
            gate,
            paulis,
            depths,
            l_values,
            circuits,
            shots,
            seed,
            engine,
            out,
        } => commands::simulate(commands::SimulateArgs {
            gateset,
            noise,
            cptp,
            config,
            protocol,
            gate,
            paulis,
            depths,
            l_values,
            circuits,
            shots,
            seed,
            engine,
            out,
        }),
        Command::Fit { gateset, data, bootstrap, seed, format, out } => {
            commands::fit(&gateset, &data, bootstrap, seed, &format, &out)
        }
        Command::Feasible { gateset, fits, eps, grid, format, out } => {
            commands::feasible(&gateset, &fits, eps, grid, &format, &out)
        }
        Command::GaugeCheck { gateset, noise, gauge, noise2, trials, seed, out } => {
            commands::gauge_check(&gateset, &noise, gauge.as_deref(), noise2.as_deref(), trials, seed, &out)
        }
        Command::Report { gateset, noise, cptp, circuits, shots, seed, out } => {
            commands::report(&gateset, noise.as_deref(), cptp.as_deref(), circuits, shots, seed, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
