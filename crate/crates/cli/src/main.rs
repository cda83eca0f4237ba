//! `gsagcn`: training runs, spectral diagnostics, synthetic data and
//! replayable run manifests.

mod commands;
mod config;
mod dataset;
mod manifest;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::decompose::DecomposeCmd;
use commands::dropedge::DropEdgeCmd;
use commands::eval::EvalCmd;
use commands::gen_synth::GenSynthCmd;
use commands::lemmas::LemmasCmd;
use commands::oversmooth::OversmoothCmd;
use commands::replay::ReplayCmd;
use commands::train::TrainCmd;
use commands::{run, Status};
use config::UsageError;

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;
const EXIT_BOUNDARY: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "gsagcn", version, about = "GCN and globally self-attentive GCN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Train a node or graph classifier.
    Train(TrainCmd),
    /// Evaluate a trained checkpoint.
    Eval(EvalCmd),
    /// Train plain and attentive stacks per depth and trace the distance to
    /// the invariant subspace.
    Oversmooth(OversmoothCmd),
    /// Check the positive-definiteness and singular-value amplification
    /// properties on sampled instances.
    Lemmas(LemmasCmd),
    /// Count neighbour influences cancelled by attention on regular graphs.
    DropedgeSim(DropEdgeCmd),
    /// Split a checkpoint's last-layer loss argument into geometry and
    /// feature terms.
    DecomposeLoss(DecomposeCmd),
    /// Write a synthetic dataset in the export format.
    GenSynth(GenSynthCmd),
    /// Rerun a manifest and compare every output byte for byte.
    Replay(ReplayCmd),
}

fn dispatch(cmd: Cmd) -> Result<Status> {
    let status = match cmd {
        Cmd::Train(a) => run(&a.resolve()?, &a.common.out_dir("train"))?.0,
        Cmd::Eval(a) => run(&a.resolve()?, &a.out_dir())?.0,
        Cmd::Oversmooth(a) => run(&a.resolve()?, &a.common.out_dir("oversmooth"))?.0,
        Cmd::Lemmas(a) => run(&a.resolve()?, &a.common.out_dir("lemmas"))?.0,
        Cmd::DropedgeSim(a) => run(&a.resolve()?, &a.common.out_dir("dropedge-sim"))?.0,
        Cmd::DecomposeLoss(a) => run(&a.resolve()?, &a.out_dir())?.0,
        Cmd::GenSynth(a) => run(&a.resolve()?, &a.common.out_dir("synth"))?.0,
        Cmd::Replay(a) => a.execute()?,
    };
    Ok(status)
}

fn error_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<gsagcn_core::Error>() {
        Some(gsagcn_core::Error::Divergence { .. }) => EXIT_DIVERGENCE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Ok(Status::Boundary) => ExitCode::from(EXIT_BOUNDARY),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
