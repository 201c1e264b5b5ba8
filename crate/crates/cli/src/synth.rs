//! `osd synth`: generate scenes plus detection sidecars into one dataset
//! directory.

use crate::manifest::ManifestBuilder;
use crate::util::MANIFEST_FILE;
use anyhow::{ensure, Context};
use clap::Args;
use osd_core::data::synth::{synth_generate, SynthConfig};
use osd_core::data::{save_detection_input, save_scene};
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Args)]
pub struct SynthArgs {
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of scenes to generate.
    #[arg(long, default_value_t = 10)]
    scenes: usize,
    /// Fraction of objects drawn from the held-out shape classes.
    #[arg(long)]
    unknown_ratio: Option<f64>,
    /// Angular sampling density multiplier; 2 doubles the rays per degree.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: SynthArgs) -> anyhow::Result<u8> {
    ensure!(
        args.density.is_finite() && args.density > 0.0,
        "--density must be positive"
    );
    let mut cfg = SynthConfig {
        seed: args.seed,
        scenes: args.scenes,
        ..SynthConfig::default()
    };
    if let Some(ratio) = args.unknown_ratio {
        cfg.unknown_ratio = ratio;
    }
    cfg.azimuth_step_deg /= args.density;
    cfg.elevation_step_deg /= args.density;
    cfg.validate()?;

    let mut mb = ManifestBuilder::new("synth", serde_json::to_value(&cfg)?);
    let scenes_dir = args.out.join("scenes");
    let dets_dir = args.out.join("detections");
    std::fs::create_dir_all(&scenes_dir)
        .with_context(|| format!("creating {}", scenes_dir.display()))?;
    std::fs::create_dir_all(&dets_dir)?;

    let generated = synth_generate(&cfg)?;
    generated.par_iter().try_for_each(|s| {
        let name = format!("{}.json", s.scene.scene_id);
        save_scene(&s.scene, &scenes_dir.join(&name))?;
        save_detection_input(&s.detections, &dets_dir.join(&name))?;
        osd_core::Result::Ok(())
    })?;
    for s in &generated {
        let name = format!("{}.json", s.scene.scene_id);
        mb.output(&scenes_dir.join(&name));
        mb.output(&dets_dir.join(&name));
    }
    mb.write(&args.out.join(MANIFEST_FILE))?;
    Ok(0)
}
