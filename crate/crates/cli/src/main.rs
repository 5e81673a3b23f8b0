//! `rfpc`: run power-control scenarios, EVM sweeps, detector calibrations and
//! PID gain searches, writing CSV traces, SVG plots and a manifest.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rfpc", version, about = "Closed-loop mmWave power control simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GlobalOpts {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override the scenario's random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the scenario's sampling period (s).
    #[arg(long, global = true)]
    pub ts: Option<f64>,
    /// Skip SVG output.
    #[arg(long, global = true)]
    pub no_plots: bool,
    /// Print errors only.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario (or several controllers on it with --compare).
    Run {
        /// Scenario file; the built-in default when omitted.
        scenario: Option<PathBuf>,
        /// Comma-separated controllers to compare, e.g. `i,fi`.
        #[arg(long, value_delimiter = ',')]
        compare: Vec<String>,
    },
    /// Compare controllers on one scenario.
    Compare {
        scenario: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "i,fi")]
        controllers: Vec<String>,
    },
    /// EVM against output power for each configured attenuation.
    SweepEvm {
        scenario: Option<PathBuf>,
        /// Treat the PA as linear.
        #[arg(long)]
        no_compression: bool,
    },
    /// Fit the detector law to a `p_in_dbm,v_out_volts` sweep.
    Calibrate {
        /// Sweep CSV to fit.
        input: Option<PathBuf>,
        /// Generate a noisy sweep from the default detector instead.
        #[arg(long, conflicts_with = "input")]
        synthetic: bool,
        /// Detector noise for --synthetic (V RMS).
        #[arg(long, default_value_t = 0.002)]
        noise_v: f64,
        /// Points in the synthetic sweep.
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Grid-search PID gains for the edge of limit cycling.
    FindUnstablePid {
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        kp_max: f64,
        #[arg(long, default_value_t = 0.25)]
        kp_step: f64,
        #[arg(long, default_value_t = 1.0)]
        kd_max: f64,
        #[arg(long, default_value_t = 0.05)]
        kd_step: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let g = &cli.global;
    let result = match cli.command {
        Command::Run { scenario, compare } => commands::run(g, scenario.as_deref(), &compare),
        Command::Compare {
            scenario,
            controllers,
        } => commands::run(g, scenario.as_deref(), &controllers),
        Command::SweepEvm {
            scenario,
            no_compression,
        } => commands::sweep_evm(g, scenario.as_deref(), no_compression),
        Command::Calibrate {
            input,
            synthetic,
            noise_v,
            points,
        } => commands::calibrate(g, input.as_deref(), synthetic, noise_v, points),
        Command::FindUnstablePid {
            scenario,
            kp_max,
            kp_step,
            kd_max,
            kd_step,
        } => commands::find_unstable_pid(g, scenario.as_deref(), (kp_max, kp_step), (kd_max, kd_step)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rfpc: {e}");
            ExitCode::from(e.code())
        }
    }
}
