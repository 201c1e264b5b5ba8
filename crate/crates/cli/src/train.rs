//! `osd train`: fit a head on the labeled boxes of a scene directory.
//!
//! Each known ground-truth box becomes one sample: shape statistics of the
//! points it captures, labeled with the box class. Classes are the sorted
//! distinct known labels, which fixes the anchor index space.

use crate::manifest::{sibling_manifest_path, ManifestBuilder};
use crate::util::load_scenes;
use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use osd_core::data::features::feature_extract;
use osd_core::geometry::point_in_box;
use osd_core::metric_head::{train, HeadKind, TrainConfig, TrainSample};
use osd_core::UNKNOWN_LABEL;
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadArg {
    Metric,
    Softmax,
}

impl From<HeadArg> for HeadKind {
    fn from(value: HeadArg) -> Self {
        match value {
            HeadArg::Metric => HeadKind::Metric,
            HeadArg::Softmax => HeadKind::SoftmaxClassifier,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Scene directory (dataset root or a plain directory of scenes).
    #[arg(long)]
    data: PathBuf,
    /// Head architecture.
    #[arg(long, value_enum, default_value_t = HeadArg::Metric)]
    head: HeadArg,
    /// Full passes over the data; 0 persists the seeded initialization.
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    /// Initialization and shuffle seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: TrainArgs) -> anyhow::Result<u8> {
    let scenes = load_scenes(&args.data)?;
    let classes: Vec<String> = scenes
        .iter()
        .flat_map(|s| s.gt_boxes.iter())
        .map(|b| b.label.clone())
        .filter(|l| l != UNKNOWN_LABEL)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.is_empty() {
        bail!("no known-class boxes in {}", args.data.display());
    }

    let mut samples = Vec::new();
    for scene in &scenes {
        for bbox in &scene.gt_boxes {
            let Some(label) = classes.iter().position(|c| *c == bbox.label) else {
                continue;
            };
            let captured: Vec<_> = scene
                .points
                .iter()
                .filter(|p| point_in_box(p, bbox))
                .copied()
                .collect();
            if captured.is_empty() {
                // occluded or out-of-range box: nothing to featurize
                continue;
            }
            samples.push(TrainSample {
                features: feature_extract(&captured, bbox),
                label,
            });
        }
    }

    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let outcome = train(&samples, &classes, args.head.into(), &cfg)
        .with_context(|| format!("training on {} samples", samples.len()))?;
    outcome.model.save(&args.out)?;

    let config = serde_json::json!({
        "train": cfg,
        "head": outcome.model.kind,
        "classes": classes,
        "num_samples": samples.len(),
    });
    let mut mb = ManifestBuilder::new("train", config);
    mb.input(&args.data)
        .output(&args.out)
        .epoch_losses(outcome.epoch_losses);
    mb.write(&sibling_manifest_path(&args.out))?;
    Ok(0)
}
