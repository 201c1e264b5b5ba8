//! Scene and detection document I/O plus dataset adapters.
//!
//! The native formats are single JSON documents per scene: a `Scene` holds
//! the cloud and ground-truth boxes, a `DetectionInput` carries closed-set
//! boxes with their embeddings, and an `OpenSetDoc` stores a pipeline
//! result. All readers validate invariants and report the offending file.

pub mod features;
pub mod kitti;
pub mod synth;

use crate::error::{Error, Result};
use crate::geometry::{Box7, Point3};
use crate::metric_head::Embedding;
use crate::pipeline::Detection;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

/// One LIDAR frame: the point cloud and its ground-truth boxes. Labels of
/// held-out classes are the literal string "unknown".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub points: Vec<Point3>,
    #[serde(rename = "boxes")]
    pub gt_boxes: Vec<Box7>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.scene_id.is_empty() {
            return Err(Error::InvalidScene {
                scene_id: String::from("<empty>"),
                msg: String::from("scene_id must be non-empty"),
            });
        }
        let bad = |msg: String| Error::InvalidScene {
            scene_id: self.scene_id.clone(),
            msg,
        };
        if let Some(i) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(bad(format!("point {i} has non-finite coordinates")));
        }
        for (i, b) in self.gt_boxes.iter().enumerate() {
            b.validate()
                .map_err(|e| bad(format!("box {i}: {e}")))?;
        }
        Ok(())
    }
}

/// Closed-set detector output for one scene: boxes with embeddings, ready
/// for scoring and open-set processing. `classes` fixes the class order the
/// embeddings were produced under (the anchor index space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionInput {
    pub scene_id: String,
    pub classes: Vec<String>,
    pub dets: Vec<InputDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDetection {
    #[serde(flatten)]
    pub bbox: Box7,
    pub embedding: Embedding,
}

impl DetectionInput {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Error::InvalidScene {
            scene_id: self.scene_id.clone(),
            msg,
        };
        if self.scene_id.is_empty() {
            return Err(bad(String::from("scene_id must be non-empty")));
        }
        if self.classes.is_empty() {
            return Err(bad(String::from("detection input lists no classes")));
        }
        for (i, d) in self.dets.iter().enumerate() {
            d.bbox
                .validate()
                .map_err(|e| bad(format!("detection {i}: {e}")))?;
            if d.embedding.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("detection {i}: non-finite embedding")));
            }
        }
        Ok(())
    }
}

/// Persisted open-set result for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSetDoc {
    pub scene_id: String,
    pub known: Vec<Detection>,
    pub unknown: Vec<Box7>,
}

/// Write any document as compact JSON (large point arrays dominate; compact
/// keeps files small and byte-stable).
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, value).map_err(|e| Error::format_at(path, e.to_string()))?;
    use std::io::Write;
    w.write_all(b"\n")?;
    Ok(())
}

/// Write any document as pretty JSON (reports, models, manifests).
pub fn write_json_pretty<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::format_at(path, e.to_string()))?;
    use std::io::Write;
    w.write_all(b"\n")?;
    Ok(())
}

/// Read a JSON document; parse failures carry the path and position.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path)?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::format_at(path, e.to_string()))
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    scene.validate()?;
    write_json(scene, path)
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let scene: Scene = read_json(path)?;
    scene.validate()?;
    Ok(scene)
}

pub fn save_detection_input(input: &DetectionInput, path: &Path) -> Result<()> {
    input.validate()?;
    write_json(input, path)
}

pub fn load_detection_input(path: &Path) -> Result<DetectionInput> {
    let input: DetectionInput = read_json(path)?;
    input.validate()?;
    Ok(input)
}

pub fn save_open_set_doc(doc: &OpenSetDoc, path: &Path) -> Result<()> {
    write_json(doc, path)
}

pub fn load_open_set_doc(path: &Path) -> Result<OpenSetDoc> {
    read_json(path)
}

/// JSON files of a directory, sorted by file name for deterministic order.
pub fn list_json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
