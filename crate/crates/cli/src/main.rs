//! `osd`: one subcommand each for synthetic data generation, head training,
//! open-set detection, evaluation, threshold sweeps, and BEV plots.
//!
//! Every command is deterministic given its flags; randomness comes only
//! from explicit `--seed` values. Exit codes: 0 success, 1 bad input,
//! 2 completed with diagnostics (see the run manifest for details).

mod detect;
mod eval;
mod manifest;
mod plot;
mod sweep;
mod synth;
mod train;
mod util;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "osd", version, about = "Open-set 3D object detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes with simulated closed-set detections.
    Synth(synth::SynthArgs),
    /// Train a detection head on labeled scenes.
    Train(train::TrainArgs),
    /// Run open-set detection over a scene directory.
    Detect(detect::DetectArgs),
    /// Score detection documents against ground truth.
    Eval(eval::EvalArgs),
    /// Sweep a threshold grid and mark the operating point.
    Sweep(sweep::SweepArgs),
    /// Render a scene and its detections as a standalone SVG.
    Plot(plot::PlotArgs),
}

/// OSD_THREADS caps the worker pool; unset leaves the rayon default.
fn init_thread_pool() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("OSD_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("OSD_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; only real usage errors
            // go to stderr and exit 1 (clap's own exit code 2 is taken by
            // completed-with-diagnostics).
            let failed = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(u8::from(failed));
        }
    };
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Train(args) => train::run(args),
        Command::Detect(args) => detect::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Plot(args) => plot::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
