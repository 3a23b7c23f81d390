//! `armpose`: simulate sensor sessions, train the two networks, run
//! streaming inference, evaluate, and render plots.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error,
//! 3 numerical failure.

use clap::{Parser, Subcommand};

use armpose_cli::commands::{
    cmd_eval, cmd_infer, cmd_plot, cmd_simulate, cmd_train, EvalArgs, InferArgs, PlotArgs,
    SimulateArgs, TrainArgs,
};

#[derive(Parser)]
#[command(
    name = "armpose",
    version,
    about = "Arm pose estimation from smartwatch/smartphone UWB + IMU data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-subject session corpus.
    Simulate(SimulateArgs),
    /// Train the UWB corrector and pose estimator end to end.
    Train(TrainArgs),
    /// Replay a session through the rolling buffer, emitting poses.
    Infer(InferArgs),
    /// Evaluate a model (or run cross-validation / the ablation).
    Eval(EvalArgs),
    /// Render an eval CSV artifact as SVG.
    Plot(PlotArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Train(args) => cmd_train(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Plot(args) => cmd_plot(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        let code = match e {
            armpose::Error::InvalidInput(_) => 1,
            armpose::Error::Numerical(_) => 3,
            _ => 2,
        };
        std::process::exit(code);
    }
}
