//! `rcwave`: scenario runner for radially symmetric supersonic gas flow.
//!
//! A run takes a TOML config, builds the initial data from a preset,
//! integrates it with the finite-volume solver, replays the a-priori
//! bounds against the snapshots, and writes a self-contained run
//! directory. `verify` re-runs the checks on such a directory, `sweep`
//! fans a parameter grid out over worker threads, and `affine` inspects
//! the exact affine core without running anything.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{AffineArgs, RunArgs, SweepArgs};

#[derive(Parser)]
#[command(name = "rcwave", version, about = "Radial supersonic flow runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a config file, verify it, write a run dir.
    Run {
        config: PathBuf,
        /// Output directory for the run artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Accept initial data outside the sign hypotheses.
        #[arg(long)]
        waive_assumptions: bool,
        /// Grid-refinement multiplier applied to the cell count.
        #[arg(long, default_value_t = 1)]
        refine: u32,
    },
    /// Run a grid of parameter overrides against a base config.
    Sweep {
        config: PathBuf,
        /// TOML file with [[cells]] override tables.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        /// Concurrent cells; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        waive_assumptions: bool,
    },
    /// Re-run the verification checks on a stored run directory.
    Verify { run_dir: PathBuf },
    /// Admissibility report and trajectory for the exact affine core.
    Affine {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        entropy_k: f64,
        /// 1 for cylindrical symmetry, 2 for spherical.
        #[arg(long, default_value_t = 1)]
        symmetry: u32,
        /// Central density of the affine profile.
        #[arg(long)]
        rho_c: f64,
        /// Initial expansion rate (velocity is v_a times radius).
        #[arg(long)]
        v_a: f64,
        /// Patch edge radius.
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Directory for the trajectory CSV; omitted means report only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version land here with a zero exit code; genuine
            // usage errors fall under the config-failure exit
            let code = if e.exit_code() == 0 { 0 } else { 4 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, out, waive_assumptions, refine } => {
            commands::cmd_run(&RunArgs { config, out, waive: waive_assumptions, refine })
        }
        Command::Sweep { config, grid, out, workers, waive_assumptions } => {
            commands::cmd_sweep(&SweepArgs { config, grid, out, workers, waive: waive_assumptions })
        }
        Command::Verify { run_dir } => commands::cmd_verify(&run_dir),
        Command::Affine { gamma, entropy_k, symmetry, rho_c, v_a, b, horizon, out } => {
            commands::cmd_affine(&AffineArgs {
                gamma,
                entropy_k,
                symmetry,
                rho_c,
                v_a,
                b,
                horizon,
                out,
            })
        }
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(4);
        }
    }
}
