//! `osd sweep`: evaluate a threshold grid and mark the operating point.

use crate::manifest::{sibling_manifest_path, ManifestBuilder};
use crate::util::{load_scenes, load_sidecars, pair_by_scene_id};
use anyhow::{bail, ensure, Context};
use clap::Args;
use osd_core::clustering::ClusterConfig;
use osd_core::data::read_json;
use osd_core::eval::{render_sweep_csv, SweepMode, SweepScene};
use osd_core::metric_head::HeadModel;
use osd_core::{sweep_thresholds, EvalConfig, PipelineConfig};
use std::path::PathBuf;

#[derive(Args)]
pub struct SweepArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory (scenes/ and detections/).
    #[arg(long)]
    scenes: PathBuf,
    /// Threshold grid start:stop:step, both ends inclusive.
    #[arg(long)]
    thresholds: String,
    /// Sweep the baseline confidence threshold instead of the EDS one.
    #[arg(long)]
    naive: bool,
    /// EvalConfig JSON overriding the defaults.
    #[arg(long)]
    iou_config: Option<PathBuf>,
    /// ClusterConfig JSON overriding the defaults.
    #[arg(long)]
    cluster_config: Option<PathBuf>,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
}

/// Parse `a:b:step` into the inclusive grid a, a+step, ..., b. The stop end
/// is inclusive within 1e-12 so fractional steps still land on it.
fn parse_thresholds(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        bail!("--thresholds must be start:stop:step, got {spec:?}");
    };
    let parse = |s: &str, name: &str| -> anyhow::Result<f64> {
        let v: f64 = s
            .parse()
            .with_context(|| format!("{name} in --thresholds is not a number: {s:?}"))?;
        ensure!(v.is_finite(), "{name} in --thresholds must be finite");
        Ok(v)
    };
    let (a, b, step) = (parse(a, "start")?, parse(b, "stop")?, parse(step, "step")?);
    ensure!(step > 0.0, "--thresholds step must be positive");
    ensure!(a <= b, "--thresholds start must not exceed stop");
    let mut grid = Vec::new();
    for i in 0.. {
        let t = a + i as f64 * step;
        if t > b + 1e-12 {
            break;
        }
        grid.push(t);
    }
    Ok(grid)
}

pub fn run(args: SweepArgs) -> anyhow::Result<u8> {
    let grid = parse_thresholds(&args.thresholds)?;
    let model = HeadModel::load(&args.model)?;
    let eval_cfg: EvalConfig = match &args.iou_config {
        Some(path) => read_json(path)?,
        None => EvalConfig::default(),
    };
    let cluster: ClusterConfig = match &args.cluster_config {
        Some(path) => read_json(path)?,
        None => ClusterConfig::default(),
    };
    let pipe = PipelineConfig {
        cluster,
        ..PipelineConfig::default()
    };
    let mode = if args.naive {
        SweepMode::Naive
    } else {
        SweepMode::Eds
    };

    let pairs = pair_by_scene_id(load_scenes(&args.scenes)?, load_sidecars(&args.scenes)?)?;
    let sweep_scenes: Vec<SweepScene> = pairs
        .into_iter()
        .map(|(scene, sidecar)| SweepScene {
            cloud: scene.points,
            dets: sidecar
                .dets
                .into_iter()
                .map(|d| (d.bbox, d.embedding))
                .collect(),
            gt: scene.gt_boxes,
        })
        .collect();

    let sweep = sweep_thresholds(
        &sweep_scenes,
        &grid,
        &model.prototypes(),
        model.kind,
        &pipe,
        &eval_cfg,
        mode,
    )?;
    std::fs::write(&args.out, render_sweep_csv(&sweep))
        .with_context(|| format!("writing {}", args.out.display()))?;

    let config = serde_json::json!({
        "thresholds": grid,
        "mode": if args.naive { "naive" } else { "eds" },
        "pipeline": pipe,
        "eval": eval_cfg,
    });
    let mut mb = ManifestBuilder::new("sweep", config);
    mb.input(&args.model).input(&args.scenes).output(&args.out);
    mb.write(&sibling_manifest_path(&args.out))?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::parse_thresholds;

    #[test]
    fn grids() {
        assert_eq!(parse_thresholds("0:2:1").unwrap(), vec![0.0, 1.0, 2.0]);
        assert_eq!(parse_thresholds("5:5:1").unwrap(), vec![5.0]);
        // 0.1 steps accumulate representation error; the end stays included
        let g = parse_thresholds("0:0.3:0.1").unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.3).abs() < 1e-12);
        // step overshooting the stop keeps only the start
        assert_eq!(parse_thresholds("1:1.5:2").unwrap(), vec![1.0]);
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in ["", "1:2", "1:2:3:4", "2:1:1", "1:2:0", "1:2:-1", "a:2:1"] {
            assert!(parse_thresholds(bad).is_err(), "{bad:?} accepted");
        }
    }
}
