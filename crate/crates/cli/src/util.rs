//! Shared directory conventions: a dataset directory holds `scenes/` and
//! `detections/` subdirectories (as written by `osd synth`), but a plain
//! directory of scene documents works everywhere too.

use anyhow::{bail, Context};
use osd_core::data::{
    list_json_files, load_detection_input, load_scene, DetectionInput, Scene,
};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

fn subdir_or_self(dir: &Path, sub: &str) -> PathBuf {
    let candidate = dir.join(sub);
    if candidate.is_dir() {
        candidate
    } else {
        dir.to_path_buf()
    }
}

/// Scene documents under `dir/scenes` (or `dir` itself), sorted by file
/// name, skipping any manifest.
pub fn load_scenes(dir: &Path) -> anyhow::Result<Vec<Scene>> {
    let scene_dir = subdir_or_self(dir, "scenes");
    let files = document_files(&scene_dir)?;
    if files.is_empty() {
        bail!("no scene documents in {}", scene_dir.display());
    }
    files
        .iter()
        .map(|p| load_scene(p).with_context(|| format!("loading scene {}", p.display())))
        .collect()
}

/// Detection sidecars under `dir/detections` (or `dir` itself), sorted by
/// file name.
pub fn load_sidecars(dir: &Path) -> anyhow::Result<Vec<DetectionInput>> {
    let det_dir = subdir_or_self(dir, "detections");
    let files = document_files(&det_dir)?;
    if files.is_empty() {
        bail!("no detection documents in {}", det_dir.display());
    }
    files
        .iter()
        .map(|p| {
            load_detection_input(p).with_context(|| format!("loading detections {}", p.display()))
        })
        .collect()
}

/// JSON documents in a directory, excluding the run manifest.
pub fn document_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let files = list_json_files(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .into_iter()
        .filter(|p| p.file_name().and_then(|n| n.to_str()) != Some(MANIFEST_FILE))
        .collect();
    Ok(files)
}

/// Pair each sidecar with the scene of the same id; every sidecar must have
/// a scene and vice versa, so stale directories fail loudly.
pub fn pair_by_scene_id(
    scenes: Vec<Scene>,
    sidecars: Vec<DetectionInput>,
) -> anyhow::Result<Vec<(Scene, DetectionInput)>> {
    let mut dets: std::collections::BTreeMap<String, DetectionInput> = sidecars
        .into_iter()
        .map(|d| (d.scene_id.clone(), d))
        .collect();
    let mut pairs = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let Some(det) = dets.remove(&scene.scene_id) else {
            bail!("scene {} has no detection sidecar", scene.scene_id);
        };
        pairs.push((scene, det));
    }
    if let Some(id) = dets.keys().next() {
        bail!("detections reference unmatched scene id {id}");
    }
    Ok(pairs)
}
