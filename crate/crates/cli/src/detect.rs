//! `osd detect`: open-set inference over a dataset directory, one result
//! document per scene.
//!
//! The model fixes the class order the sidecar embeddings are scored in;
//! a sidecar produced under a different class list is rejected.

use crate::manifest::ManifestBuilder;
use crate::util::{load_scenes, load_sidecars, pair_by_scene_id, MANIFEST_FILE};
use anyhow::{bail, Context};
use clap::Args;
use osd_core::clustering::ClusterConfig;
use osd_core::data::{read_json, save_open_set_doc, OpenSetDoc};
use osd_core::metric_head::HeadModel;
use osd_core::pipeline::{run_mluc, run_naive, score_detections, PipelineDiagnostics};
use osd_core::PipelineConfig;
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["lambda_eds", "naive"]))]
pub struct DetectArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory (scenes/ and detections/).
    #[arg(long)]
    scenes: PathBuf,
    /// EDS proposal threshold; detections strictly below it are re-fit by
    /// clustering.
    #[arg(long)]
    lambda_eds: Option<f64>,
    /// Relabeling baseline: no clustering, geometry kept.
    #[arg(long)]
    naive: bool,
    /// Confidence threshold for --naive (max class probability).
    #[arg(long, requires = "naive")]
    lambda_naive: Option<f64>,
    /// ClusterConfig JSON overriding the defaults.
    #[arg(long)]
    cluster_config: Option<PathBuf>,
    /// Seed for the random seed-pick mode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for result documents.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: DetectArgs) -> anyhow::Result<u8> {
    let model = HeadModel::load(&args.model)?;
    let cluster: ClusterConfig = match &args.cluster_config {
        Some(path) => read_json(path)?,
        None => ClusterConfig::default(),
    };
    let cfg = PipelineConfig {
        lambda_eds: args.lambda_eds.unwrap_or(0.0),
        lambda_naive: args.lambda_naive.unwrap_or(0.5),
        cluster,
        rng_seed: args.seed,
        ..PipelineConfig::default()
    };
    cfg.validate()?;

    let pairs = pair_by_scene_id(load_scenes(&args.scenes)?, load_sidecars(&args.scenes)?)?;
    let protos = model.prototypes();
    for (_, sidecar) in &pairs {
        if sidecar.classes != model.classes {
            bail!(
                "scene {}: sidecar classes {:?} do not match the model's {:?}",
                sidecar.scene_id,
                sidecar.classes,
                model.classes
            );
        }
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let naive = args.naive;
    let docs: Vec<(String, PipelineDiagnostics)> = pairs
        .par_iter()
        .map(|(scene, sidecar)| {
            let dets: Vec<_> = sidecar
                .dets
                .iter()
                .map(|d| (d.bbox.clone(), d.embedding.clone()))
                .collect();
            let result = if naive {
                run_naive(&score_detections(&dets, &protos, model.kind)?, &cfg)
            } else {
                run_mluc(&scene.points, &dets, &protos, model.kind, &cfg)?
            };
            let doc = OpenSetDoc {
                scene_id: scene.scene_id.clone(),
                known: result.known,
                unknown: result.unknown,
            };
            save_open_set_doc(&doc, &args.out.join(format!("{}.json", scene.scene_id)))?;
            Ok((scene.scene_id.clone(), result.diagnostics))
        })
        .collect::<osd_core::Result<_>>()?;

    let mut totals = PipelineDiagnostics::default();
    for (_, d) in &docs {
        totals.merge(d);
    }
    let config = serde_json::json!({
        "mode": if naive { "naive" } else { "mluc" },
        "pipeline": cfg,
        "head": model.kind,
        "classes": model.classes,
    });
    let mut mb = ManifestBuilder::new("detect", config);
    mb.input(&args.model).input(&args.scenes).diagnostics(totals);
    for (id, _) in &docs {
        mb.output(&args.out.join(format!("{id}.json")));
    }
    mb.write(&args.out.join(MANIFEST_FILE))?;

    // partial coverage is not a failure, but the caller should know
    Ok(if totals.skipped_proposals > 0 { 2 } else { 0 })
}
