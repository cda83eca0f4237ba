use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde_json::Value;

use super::decompose::DecomposeConfig;
use super::dropedge::DropEdgeConfig;
use super::eval::EvalConfig;
use super::gen_synth::GenSynthConfig;
use super::lemmas::LemmasConfig;
use super::oversmooth::OversmoothConfig;
use super::train::TrainRunConfig;
use super::{run, Command, Status};
use crate::config::usage;
use crate::manifest::{resolve_out, RunManifest};

#[derive(Args, Debug)]
pub struct ReplayCmd {
    /// `manifest.json` of an earlier run.
    pub manifest: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn rerun<C: Command + DeserializeOwned>(config: Value, out: &Path) -> Result<(Status, RunManifest)> {
    let cfg: C = serde_json::from_value(config).map_err(|e| usage(format!("manifest config does not parse: {e}")))?;
    run(&cfg, out)
}

/// Runs the recorded command again into `out`.
pub fn rerun_manifest(m: &RunManifest, out: &Path) -> Result<(Status, RunManifest)> {
    let config = m.config.clone();
    match m.command.as_str() {
        TrainRunConfig::NAME => rerun::<TrainRunConfig>(config, out),
        EvalConfig::NAME => rerun::<EvalConfig>(config, out),
        OversmoothConfig::NAME => rerun::<OversmoothConfig>(config, out),
        LemmasConfig::NAME => rerun::<LemmasConfig>(config, out),
        DropEdgeConfig::NAME => rerun::<DropEdgeConfig>(config, out),
        DecomposeConfig::NAME => rerun::<DecomposeConfig>(config, out),
        GenSynthConfig::NAME => rerun::<GenSynthConfig>(config, out),
        other => bail!(usage(format!("manifest names unknown command {other:?}"))),
    }
}

impl ReplayCmd {
    pub fn execute(&self) -> Result<Status> {
        let original = RunManifest::load(&self.manifest).map_err(|e| usage(format!("{e:#}")))?;
        let out = resolve_out(self.out.as_deref(), "replay");
        let source_dir = self.manifest.parent().unwrap_or(Path::new("."));
        if out.canonicalize().ok().is_some_and(|o| Some(o) == source_dir.canonicalize().ok()) {
            bail!(usage("replay output must differ from the original run directory"));
        }
        let (_, replayed) = rerun_manifest(&original, &out)?;
        let mut differing: Vec<&str> = original
            .outputs
            .iter()
            .filter(|(name, hash)| replayed.outputs.get(*name) != Some(*hash))
            .map(|(name, _)| name.as_str())
            .collect();
        differing.extend(
            replayed
                .outputs
                .keys()
                .filter(|k| !original.outputs.contains_key(*k))
                .map(String::as_str),
        );
        if !differing.is_empty() {
            bail!("replay differs from the original run in: {}", differing.join(", "));
        }
        if replayed.dataset_fingerprint != original.dataset_fingerprint {
            bail!("replay read a different dataset (fingerprint changed)");
        }
        println!("replayed {}: {} outputs identical", original.command, original.outputs.len());
        Ok(Status::Ok)
    }
}
