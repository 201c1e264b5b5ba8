//! Open-set 3D object detection on point clouds.
//!
//! A closed-set detector's boxes and embeddings come in; boxes whose
//! embedding sits far from every known-class anchor (low Euclidean distance
//! sum) are re-segmented by depth clustering and re-fit with tight oriented
//! boxes, so unknown objects come out with usable geometry instead of a
//! wrong class label. The crate also ships the surrounding harness: metric
//! and softmax heads with training, open-set metrics with a threshold
//! sweep, a deterministic synthetic LIDAR generator, and KITTI readers.

pub mod clustering;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod metric_head;
pub mod pipeline;

pub use clustering::{build_index, extract_region, grow_cluster, pair_angle, ClusterConfig};
pub use error::{Error, Result};
pub use eval::{evaluate, map_harm, sweep_thresholds, EvalConfig, EvalReport};
pub use geometry::{iou_3d, min_oriented_box, Box7, Point3, UNKNOWN_LABEL};
pub use metric_head::{eds, train, Embedding, HeadKind, HeadModel, Prototypes, TrainConfig};
pub use pipeline::{run_mluc, run_naive, OpenSetResult, PipelineConfig};
