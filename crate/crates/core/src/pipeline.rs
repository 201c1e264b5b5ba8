//! End-to-end open-set detection.
//!
//! Closed-set boxes are scored from their embeddings; boxes whose EDS falls
//! below the threshold become unknown-object proposals. Each proposal seeds
//! a depth-clustering pass inside a cylindrical region, the cluster gets a
//! tight minimum-area box, and heavily overlapping unknown boxes are
//! suppressed largest-first. The naive baseline instead relabels
//! low-confidence boxes as unknown with their geometry untouched.
//!
//! The sensor is assumed to sit at the coordinate origin, which is where
//! both the synthetic scanner and the KITTI cloud frame put it.

use crate::clustering::{build_index, extract_region, grow_cluster, ClusterConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    box_volume, iou_3d, min_oriented_box, point_in_box, Box7, Point3, UNKNOWN_LABEL,
};
use crate::metric_head::{
    eds, kind_probabilities, naive_confidence, Embedding, HeadKind, Prototypes,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A scored closed-set detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub bbox: Box7,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
    pub probs: Vec<f64>,
    /// Max class probability.
    pub naive_score: f64,
    /// Summed squared distance to the class anchors; low means unknown-like.
    pub eds_score: f64,
}

/// How the cluster seed is picked among the points inside a proposal box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPick {
    /// In-box point nearest the box center (ties by lowest index).
    CenterNearest,
    /// Uniform over in-box points from the seeded generator.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Detections with EDS strictly below this become unknown proposals.
    pub lambda_eds: f64,
    /// Naive baseline: detections with max probability strictly below this
    /// are relabeled unknown.
    pub lambda_naive: f64,
    pub cluster: ClusterConfig,
    /// Unknown boxes with IoU above this against a kept box are suppressed.
    pub nms_iou: f64,
    pub seed_pick: SeedPick,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lambda_eds: 0.0,
            lambda_naive: 0.5,
            cluster: ClusterConfig::default(),
            nms_iou: 0.1,
            seed_pick: SeedPick::CenterNearest,
            rng_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.nms_iou) {
            return Err(Error::format("nms_iou must be in [0, 1)"));
        }
        if !(0.0 < self.lambda_naive && self.lambda_naive < 1.0) {
            return Err(Error::format("lambda_naive must be in (0, 1)"));
        }
        if !(self.lambda_eds >= 0.0) {
            return Err(Error::format("lambda_eds must be nonnegative"));
        }
        self.cluster.validate()
    }
}

/// Per-scene counters for non-fatal pipeline events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    /// Proposals with no cloud point inside their box.
    pub skipped_proposals: usize,
    /// Clusters below the minimum point count.
    pub dropped_clusters: usize,
}

impl PipelineDiagnostics {
    pub fn merge(&mut self, other: &PipelineDiagnostics) {
        self.skipped_proposals += other.skipped_proposals;
        self.dropped_clusters += other.dropped_clusters;
    }
}

/// Output of one scene: class-labeled known detections and fitted unknown
/// boxes (scored by volume downstream).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSetResult {
    pub known: Vec<Detection>,
    pub unknown: Vec<Box7>,
    pub diagnostics: PipelineDiagnostics,
}

/// Score boxes from their embeddings: class probabilities, max-probability
/// confidence, EDS, and the argmax class label (ties to the lowest index).
pub fn score_detections(
    dets: &[(Box7, Embedding)],
    protos: &Prototypes,
    kind: HeadKind,
) -> Result<Vec<Detection>> {
    dets.iter()
        .map(|(bbox, e)| {
            let probs = kind_probabilities(kind, e, protos)?;
            let naive_score = naive_confidence(&probs)?;
            let argmax = (0..probs.len())
                .max_by(|&a, &b| {
                    probs[a]
                        .partial_cmp(&probs[b])
                        .expect("probabilities are finite")
                        .then(b.cmp(&a))
                })
                .expect("probs non-empty");
            let mut bbox = bbox.clone();
            bbox.label = protos.label(argmax).to_string();
            Ok(Detection {
                bbox,
                eds_score: eds(e, protos)?,
                embedding: Some(e.clone()),
                probs,
                naive_score,
            })
        })
        .collect()
}

/// Split scored detections into (proposals, known): proposals are those
/// with EDS strictly below `lambda_eds`, both sides in input order.
pub fn select_unknown_proposals(
    dets: &[Detection],
    lambda_eds: f64,
) -> (Vec<Detection>, Vec<Detection>) {
    dets.iter()
        .cloned()
        .partition(|d| d.eds_score < lambda_eds)
}

/// Pick the clustering seed among the cloud points inside the box, or None
/// when the box is empty (the caller skips the proposal).
pub fn pick_seed(
    bbox: &Box7,
    cloud: &[Point3],
    mode: SeedPick,
    rng: &mut ChaCha8Rng,
) -> Option<Point3> {
    let inside: Vec<usize> = (0..cloud.len())
        .filter(|&i| point_in_box(&cloud[i], bbox))
        .collect();
    if inside.is_empty() {
        return None;
    }
    let pick = match mode {
        SeedPick::CenterNearest => {
            let center = bbox.center();
            *inside
                .iter()
                .min_by(|&&a, &&b| {
                    cloud[a]
                        .distance(&center)
                        .partial_cmp(&cloud[b].distance(&center))
                        .expect("finite points")
                        .then(a.cmp(&b))
                })
                .expect("non-empty")
        }
        SeedPick::Random => inside[rng.gen_range(0..inside.len())],
    };
    Some(cloud[pick])
}

/// Greedy suppression with larger volumes first (ties by input order): a
/// box is kept iff its IoU with every kept box is at most the threshold.
pub fn nms_largest_first(boxes: &[Box7], iou_threshold: f64) -> Vec<Box7> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        box_volume(&boxes[b])
            .partial_cmp(&box_volume(&boxes[a]))
            .expect("finite volumes")
            .then(a.cmp(&b))
    });
    let mut kept: Vec<Box7> = Vec::new();
    for i in order {
        if kept.iter().all(|k| iou_3d(k, &boxes[i]) <= iou_threshold) {
            kept.push(boxes[i].clone());
        }
    }
    kept
}

/// Run the full open-set pipeline on one scene.
///
/// Per-proposal failures (no in-box point, undersized cluster) are counted
/// in the diagnostics rather than aborting the scene. With `lambda_eds` = 0
/// the output is exactly the closed-set detections.
pub fn run_mluc(
    cloud: &[Point3],
    dets: &[(Box7, Embedding)],
    protos: &Prototypes,
    kind: HeadKind,
    cfg: &PipelineConfig,
) -> Result<OpenSetResult> {
    cfg.validate()?;
    let scored = score_detections(dets, protos, kind)?;
    let (proposals, known) = select_unknown_proposals(&scored, cfg.lambda_eds);
    let mut diagnostics = PipelineDiagnostics::default();
    let mut unknown = Vec::new();
    if !proposals.is_empty() {
        let active: Vec<Point3> = match cfg.cluster.ground_z {
            Some(z) => cloud.iter().filter(|p| p.z >= z).cloned().collect(),
            None => cloud.to_vec(),
        };
        let index = build_index(&active, cfg.cluster.neighbor_radius);
        let origin = Point3::new(0.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let mut candidates = Vec::new();
        for det in &proposals {
            let Some(seed) = pick_seed(&det.bbox, &active, cfg.seed_pick, &mut rng) else {
                diagnostics.skipped_proposals += 1;
                continue;
            };
            // the seed is a cloud point, so its region is never empty
            let region = extract_region(&active, &seed, cfg.cluster.region_radius)?;
            let cluster = grow_cluster(&active, &index, &region, &cfg.cluster, &origin)?;
            if cluster.len() < cfg.cluster.min_cluster_points {
                diagnostics.dropped_clusters += 1;
                continue;
            }
            let pts: Vec<Point3> = cluster.iter().map(|&i| active[i]).collect();
            candidates.push(min_oriented_box(&pts, cfg.cluster.min_box_extent)?);
        }
        unknown = nms_largest_first(&candidates, cfg.nms_iou);
    }
    Ok(OpenSetResult {
        known,
        unknown,
        diagnostics,
    })
}

/// Naive open-set baseline: relabel low-confidence detections as unknown,
/// keeping their geometry; everything else stays known.
pub fn run_naive(dets: &[Detection], cfg: &PipelineConfig) -> OpenSetResult {
    let (low, known): (Vec<Detection>, Vec<Detection>) = dets
        .iter()
        .cloned()
        .partition(|d| d.naive_score < cfg.lambda_naive);
    let unknown = low
        .into_iter()
        .map(|d| {
            let mut bbox = d.bbox;
            bbox.label = UNKNOWN_LABEL.to_string();
            bbox
        })
        .collect();
    OpenSetResult {
        known,
        unknown,
        diagnostics: PipelineDiagnostics::default(),
    }
}
