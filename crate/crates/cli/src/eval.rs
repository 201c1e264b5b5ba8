//! `osd eval`: score result documents against ground-truth scenes.
//!
//! Every result document must name an existing scene; a scene without a
//! result document counts as zero detections, so sparse detector output
//! still evaluates.

use crate::manifest::{sibling_manifest_path, ManifestBuilder};
use crate::util::{document_files, load_scenes};
use anyhow::{bail, Context};
use clap::Args;
use osd_core::data::{load_open_set_doc, read_json, write_json_pretty, OpenSetDoc};
use osd_core::eval::{evaluate, ScenePair};
use osd_core::pipeline::OpenSetResult;
use osd_core::EvalConfig;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Args)]
pub struct EvalArgs {
    /// Ground-truth scene directory.
    #[arg(long)]
    gt: PathBuf,
    /// Directory of result documents (as written by detect).
    #[arg(long)]
    det: PathBuf,
    /// EvalConfig JSON overriding the defaults.
    #[arg(long)]
    iou_config: Option<PathBuf>,
    /// Report file to write.
    #[arg(long)]
    report: PathBuf,
}

pub fn run(args: EvalArgs) -> anyhow::Result<u8> {
    let cfg: EvalConfig = match &args.iou_config {
        Some(path) => read_json(path)?,
        None => EvalConfig::default(),
    };
    cfg.validate()?;

    let scenes = load_scenes(&args.gt)?;
    let mut docs: BTreeMap<String, OpenSetDoc> = BTreeMap::new();
    for path in document_files(&args.det)? {
        let doc = load_open_set_doc(&path)
            .with_context(|| format!("loading detections {}", path.display()))?;
        docs.insert(doc.scene_id.clone(), doc);
    }
    let known_ids: std::collections::BTreeSet<&str> =
        scenes.iter().map(|s| s.scene_id.as_str()).collect();
    let orphans: Vec<&str> = docs
        .keys()
        .map(String::as_str)
        .filter(|id| !known_ids.contains(id))
        .collect();
    if !orphans.is_empty() {
        bail!(
            "detection documents reference unmatched scene ids: {}",
            orphans.join(", ")
        );
    }

    let pairs: Vec<ScenePair> = scenes
        .iter()
        .map(|scene| {
            let result = match docs.remove(&scene.scene_id) {
                Some(doc) => OpenSetResult {
                    known: doc.known,
                    unknown: doc.unknown,
                    diagnostics: Default::default(),
                },
                None => OpenSetResult {
                    known: Vec::new(),
                    unknown: Vec::new(),
                    diagnostics: Default::default(),
                },
            };
            ScenePair {
                gt: scene.gt_boxes.clone(),
                result,
            }
        })
        .collect();

    let report = evaluate(&pairs, &cfg)?;
    write_json_pretty(&report, &args.report)?;

    let mut mb = ManifestBuilder::new("eval", serde_json::to_value(&cfg)?);
    mb.input(&args.gt).input(&args.det).output(&args.report);
    mb.write(&sibling_manifest_path(&args.report))?;
    Ok(0)
}
