//! Run manifests. Every command writes one next to its outputs, after all
//! other files, so a present manifest marks a completed run and carries
//! everything needed to reproduce it: the resolved configuration, the
//! input and output paths, and diagnostics counters.

use anyhow::Context;
use osd_core::data::write_json_pretty;
use osd_core::pipeline::PipelineDiagnostics;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Resolved configuration after defaults and overrides; round-trips
    /// through serde back into the config types.
    pub config: Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
    pub diagnostics: PipelineDiagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_losses: Option<Vec<f64>>,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: Value) -> Self {
        ManifestBuilder {
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                duration_seconds: 0.0,
                diagnostics: PipelineDiagnostics::default(),
                epoch_losses: None,
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.manifest.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.display().to_string());
        self
    }

    pub fn diagnostics(&mut self, d: PipelineDiagnostics) -> &mut Self {
        self.manifest.diagnostics = d;
        self
    }

    pub fn epoch_losses(&mut self, losses: Vec<f64>) -> &mut Self {
        self.manifest.epoch_losses = Some(losses);
        self
    }

    /// Stamp the duration and write the manifest; call this last.
    pub fn write(mut self, path: &Path) -> anyhow::Result<()> {
        self.manifest.duration_seconds = self.started.elapsed().as_secs_f64();
        write_json_pretty(&self.manifest, path)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}

/// Manifest path for a command whose primary output is a single file.
pub fn sibling_manifest_path(out: &Path) -> std::path::PathBuf {
    out.with_extension("manifest.json")
}
