//! Open-set detection metrics and the threshold sweep.
//!
//! Known classes are scored with per-class IoU thresholds and N-point
//! interpolated AP; unknown objects are evaluated class-agnostically at a
//! loose threshold, with box volume standing in for a confidence score.
//! `map_harm` combines the two sides, and `sweep_thresholds` picks the
//! operating point: best harmonic mAP among thresholds that keep known mAP
//! within a configured fraction of the closed-set baseline.

use crate::error::{Error, Result};
use crate::geometry::{box_volume, iou_3d, Box7, Point3};
use crate::metric_head::{Embedding, HeadKind, Prototypes};
use crate::pipeline::{run_mluc, run_naive, score_detections, OpenSetResult, PipelineConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Precision-recall interpolation scheme for AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Sample precision at N evenly spaced recall levels (i+1)/N.
    Points(usize),
    /// Exact area under the interpolated precision envelope.
    Continuous,
}

impl Default for Interpolation {
    fn default() -> Self {
        Interpolation::Points(40)
    }
}

/// Score used to rank unknown boxes on the precision-recall curve; they
/// carry no classifier confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownScore {
    Volume,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Known classes and their matching IoU thresholds.
    pub known_iou: BTreeMap<String, f64>,
    /// Class-agnostic IoU threshold for unknown objects.
    pub unknown_iou: f64,
    pub interpolation: Interpolation,
    /// Fraction of closed-set known mAP the operating point may give up.
    pub max_known_map_degradation: f64,
    pub unknown_score: UnknownScore,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let known_iou = [("car", 0.5), ("cyclist", 0.5), ("pedestrian", 0.5)]
            .into_iter()
            .map(|(c, t)| (c.to_string(), t))
            .collect();
        EvalConfig {
            known_iou,
            unknown_iou: 0.1,
            interpolation: Interpolation::default(),
            max_known_map_degradation: 0.10,
            unknown_score: UnknownScore::Volume,
        }
    }
}

impl EvalConfig {
    /// KITTI-style thresholds: strict on cars, looser on the small classes.
    pub fn kitti() -> Self {
        let known_iou = [("car", 0.7), ("cyclist", 0.5), ("pedestrian", 0.5)]
            .into_iter()
            .map(|(c, t)| (c.to_string(), t))
            .collect();
        EvalConfig {
            known_iou,
            ..EvalConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.known_iou.is_empty() {
            return Err(Error::format("known_iou must name at least one class"));
        }
        for (class, thr) in &self.known_iou {
            if !(0.0 < *thr && *thr <= 1.0) {
                return Err(Error::format(format!(
                    "IoU threshold for {class} must be in (0, 1], got {thr}"
                )));
            }
        }
        if !(0.0 < self.unknown_iou && self.unknown_iou <= 1.0) {
            return Err(Error::format("unknown_iou must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.max_known_map_degradation) {
            return Err(Error::format("max_known_map_degradation must be in [0, 1)"));
        }
        if let Interpolation::Points(n) = self.interpolation {
            if n == 0 {
                return Err(Error::format("interpolation points must be >= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean AP over known classes with at least one ground-truth box.
    pub map_known: f64,
    pub ap_unknown: f64,
    pub recall_unknown: f64,
    pub map_harm: f64,
    /// AP per configured known class (0 when the class never appears).
    pub per_class_ap: BTreeMap<String, f64>,
    /// Mean IoU of matched unknown detections (0 when none match).
    pub mean_matched_unknown_iou: f64,
    pub num_known_gt: usize,
    pub num_unknown_gt: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub recall_unknown: f64,
    pub ap_unknown: f64,
    pub map_known: f64,
    pub map_harm: f64,
}

/// Greedy matching of one class's detections against its ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matches {
    /// (score, is_true_positive) in score-descending order.
    pub scored_flags: Vec<(f64, bool)>,
    pub matched_gts: usize,
    /// IoU of each matched pair, in match order.
    pub matched_ious: Vec<f64>,
}

/// Match detections to ground truth greedily by descending score: each
/// detection takes the unmatched GT with the highest IoU if that IoU
/// reaches the threshold, and each GT is matched at most once.
pub fn match_detections(dets: &[(Box7, f64)], gts: &[Box7], iou_threshold: f64) -> Matches {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .1
            .partial_cmp(&dets[a].1)
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut gt_taken = vec![false; gts.len()];
    let mut out = Matches::default();
    for i in order {
        let (bbox, score) = &dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_taken[g] {
                continue;
            }
            let iou = iou_3d(bbox, gt);
            if iou >= iou_threshold && best.map_or(true, |(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        let tp = if let Some((g, iou)) = best {
            gt_taken[g] = true;
            out.matched_gts += 1;
            out.matched_ious.push(iou);
            true
        } else {
            false
        };
        out.scored_flags.push((*score, tp));
    }
    out
}

/// Interpolated average precision as a percentage.
///
/// `dets` are (score, is_true_positive) pairs in any order; they are ranked
/// by descending score before the curve is built. Zero ground truth yields
/// 0 by convention.
pub fn average_precision(dets: &[(f64, bool)], num_gt: usize, interp: Interpolation) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut sorted = dets.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));
    // raw curve point after each detection
    let mut curve = Vec::with_capacity(sorted.len());
    let (mut tp, mut seen) = (0usize, 0usize);
    for (_, flag) in &sorted {
        seen += 1;
        if *flag {
            tp += 1;
        }
        curve.push((tp as f64 / num_gt as f64, tp as f64 / seen as f64));
    }
    // precision envelope: best precision at recall >= r
    let mut env = curve.clone();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i].1 = env[i].1.max(env[i + 1].1);
    }
    let ap = match interp {
        Interpolation::Points(n) => {
            let mut sum = 0.0;
            for i in 0..n {
                let r = (i + 1) as f64 / n as f64;
                let p = env
                    .iter()
                    .find(|(recall, _)| *recall >= r - 1e-12)
                    .map_or(0.0, |(_, p)| *p);
                sum += p;
            }
            sum / n as f64
        }
        Interpolation::Continuous => {
            let mut area = 0.0;
            let mut prev_r = 0.0;
            for (r, p) in &env {
                if *r > prev_r {
                    area += (r - prev_r) * p;
                    prev_r = *r;
                }
            }
            area
        }
    };
    100.0 * ap
}

/// Harmonic mean of the known and unknown sides, as a percentage.
pub fn map_harm(map_known: f64, ap_unknown: f64) -> f64 {
    if map_known + ap_unknown == 0.0 {
        return 0.0;
    }
    2.0 * map_known * ap_unknown / (map_known + ap_unknown)
}

/// Fraction of unknown ground-truth boxes matched by any unknown detection,
/// class-agnostic, as a percentage. Zero ground truth yields 0.
pub fn recall_unknown(dets: &[Box7], gts: &[Box7], iou_threshold: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let scored: Vec<(Box7, f64)> = dets.iter().map(|b| (b.clone(), box_volume(b))).collect();
    let m = match_detections(&scored, gts, iou_threshold);
    100.0 * m.matched_gts as f64 / gts.len() as f64
}

/// Ground truth and pipeline output for one scene.
#[derive(Debug, Clone)]
pub struct ScenePair {
    pub gt: Vec<Box7>,
    pub result: OpenSetResult,
}

fn unknown_det_score(b: &Box7, mode: UnknownScore) -> f64 {
    match mode {
        UnknownScore::Volume => box_volume(b),
        UnknownScore::Constant => 1.0,
    }
}

/// Evaluate pipeline outputs against ground truth over a scene set.
///
/// Matching is per scene; precision-recall pooling and AP are global.
/// Ground-truth boxes whose label is not a configured known class count as
/// unknown.
pub fn evaluate(pairs: &[ScenePair], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let mut per_class_ap = BTreeMap::new();
    let mut known_aps = Vec::new();
    let mut num_known_gt = 0;
    for (class, thr) in &cfg.known_iou {
        let mut pool = Vec::new();
        let mut num_gt = 0;
        for pair in pairs {
            let dets: Vec<(Box7, f64)> = pair
                .result
                .known
                .iter()
                .filter(|d| &d.bbox.label == class)
                .map(|d| (d.bbox.clone(), d.naive_score))
                .collect();
            let gts: Vec<Box7> = pair
                .gt
                .iter()
                .filter(|g| &g.label == class)
                .cloned()
                .collect();
            num_gt += gts.len();
            pool.extend(match_detections(&dets, &gts, *thr).scored_flags);
        }
        let ap = average_precision(&pool, num_gt, cfg.interpolation);
        per_class_ap.insert(class.clone(), ap);
        if num_gt > 0 {
            known_aps.push(ap);
            num_known_gt += num_gt;
        }
    }
    let map_known = if known_aps.is_empty() {
        0.0
    } else {
        known_aps.iter().sum::<f64>() / known_aps.len() as f64
    };

    let mut pool = Vec::new();
    let mut ious = Vec::new();
    let (mut num_gt, mut matched) = (0usize, 0usize);
    for pair in pairs {
        let dets: Vec<(Box7, f64)> = pair
            .result
            .unknown
            .iter()
            .map(|b| (b.clone(), unknown_det_score(b, cfg.unknown_score)))
            .collect();
        let gts: Vec<Box7> = pair
            .gt
            .iter()
            .filter(|g| !cfg.known_iou.contains_key(&g.label))
            .cloned()
            .collect();
        num_gt += gts.len();
        let m = match_detections(&dets, &gts, cfg.unknown_iou);
        matched += m.matched_gts;
        ious.extend(m.matched_ious);
        pool.extend(m.scored_flags);
    }
    let ap_unknown = average_precision(&pool, num_gt, cfg.interpolation);
    let recall = if num_gt == 0 {
        0.0
    } else {
        100.0 * matched as f64 / num_gt as f64
    };
    let mean_iou = if ious.is_empty() {
        0.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    };
    Ok(EvalReport {
        map_harm: map_harm(map_known, ap_unknown),
        map_known,
        ap_unknown,
        recall_unknown: recall,
        per_class_ap,
        mean_matched_unknown_iou: mean_iou,
        num_known_gt,
        num_unknown_gt: num_gt,
    })
}

/// Input to the threshold sweep: one scene's cloud, closed-set detections
/// with embeddings, and ground truth.
#[derive(Debug, Clone)]
pub struct SweepScene {
    pub cloud: Vec<Point3>,
    pub dets: Vec<(Box7, Embedding)>,
    pub gt: Vec<Box7>,
}

/// Which threshold the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Vary the EDS proposal threshold and run the full pipeline.
    Eds,
    /// Vary the confidence threshold of the relabeling baseline.
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Index of the chosen operating point.
    pub chosen: usize,
    pub closed_set_map_known: f64,
    /// True when no point kept known mAP above the floor and the lowest
    /// threshold was returned instead.
    pub fallback: bool,
}

/// Evaluate every threshold over the scene set and pick the operating
/// point: the best harmonic mAP among points whose known mAP stays within
/// the configured degradation of the closed-set baseline.
pub fn sweep_thresholds(
    scenes: &[SweepScene],
    thresholds: &[f64],
    protos: &Prototypes,
    kind: HeadKind,
    pipe: &PipelineConfig,
    cfg: &EvalConfig,
    mode: SweepMode,
) -> Result<Sweep> {
    if thresholds.is_empty() {
        return Err(Error::format("threshold list must be non-empty"));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::format("thresholds must be sorted ascending"));
    }
    cfg.validate()?;
    pipe.validate()?;
    let scored: Vec<_> = scenes
        .iter()
        .map(|s| score_detections(&s.dets, protos, kind))
        .collect::<Result<Vec<_>>>()?;

    let closed_pairs: Vec<ScenePair> = scenes
        .iter()
        .zip(&scored)
        .map(|(s, dets)| ScenePair {
            gt: s.gt.clone(),
            result: OpenSetResult {
                known: dets.clone(),
                unknown: Vec::new(),
                diagnostics: Default::default(),
            },
        })
        .collect();
    let closed_set_map_known = evaluate(&closed_pairs, cfg)?.map_known;

    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let pairs: Vec<ScenePair> = match mode {
            SweepMode::Eds => {
                let cfg_t = PipelineConfig {
                    lambda_eds: threshold,
                    ..pipe.clone()
                };
                scenes
                    .par_iter()
                    .map(|s| {
                        Ok(ScenePair {
                            gt: s.gt.clone(),
                            result: run_mluc(&s.cloud, &s.dets, protos, kind, &cfg_t)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            SweepMode::Naive => {
                let cfg_t = PipelineConfig {
                    lambda_naive: threshold,
                    ..pipe.clone()
                };
                scenes
                    .iter()
                    .zip(&scored)
                    .map(|(s, dets)| ScenePair {
                        gt: s.gt.clone(),
                        result: run_naive(dets, &cfg_t),
                    })
                    .collect()
            }
        };
        let report = evaluate(&pairs, cfg)?;
        points.push(SweepPoint {
            threshold,
            recall_unknown: report.recall_unknown,
            ap_unknown: report.ap_unknown,
            map_known: report.map_known,
            map_harm: report.map_harm,
        });
    }

    let floor = (1.0 - cfg.max_known_map_degradation) * closed_set_map_known;
    let qualified: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].map_known >= floor)
        .collect();
    let (chosen, fallback) = match qualified
        .iter()
        .copied()
        .max_by(|&a, &b| {
            points[a]
                .map_harm
                .partial_cmp(&points[b].map_harm)
                .expect("finite map_harm")
                .then(b.cmp(&a))
        }) {
        Some(best) => (best, false),
        None => (0, true),
    };
    Ok(Sweep {
        points,
        chosen,
        closed_set_map_known,
        fallback,
    })
}

/// Render a sweep as comma-separated rows with a trailing comment line
/// naming the operating point.
pub fn render_sweep_csv(sweep: &Sweep) -> String {
    let mut out = String::from("threshold,recall_unknown,ap_unknown,map_known,map_harm\n");
    for p in &sweep.points {
        writeln!(
            out,
            "{:.4},{:.4},{:.4},{:.4},{:.4}",
            p.threshold, p.recall_unknown, p.ap_unknown, p.map_known, p.map_harm
        )
        .expect("string write");
    }
    let p = &sweep.points[sweep.chosen];
    writeln!(
        out,
        "# operating point: threshold {:.4} (map_harm {:.4}, closed-set map_known {:.4})",
        p.threshold, p.map_harm, sweep.closed_set_map_known
    )
    .expect("string write");
    if sweep.fallback {
        out.push_str("# warning: no threshold kept map_known above the floor; lowest returned\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::PipelineDiagnostics;
    use approx::assert_relative_eq;

    fn boxed(label: &str, cx: f64, w: f64, l: f64, h: f64) -> Box7 {
        Box7::new(label, cx, 0.0, 0.0, w, l, h, 0.0)
    }

    fn unit(label: &str, cx: f64) -> Box7 {
        boxed(label, cx, 1.0, 1.0, 1.0)
    }

    #[test]
    fn match_basic_cases() {
        let gt = vec![unit("car", 0.0)];
        // near-perfect overlap
        let dets = vec![(boxed("car", 0.05, 1.0, 1.0, 1.0), 0.9)];
        let m = match_detections(&dets, &gt, 0.5);
        assert_eq!(m.scored_flags, vec![(0.9, true)]);
        assert_eq!(m.matched_gts, 1);
        assert!(m.matched_ious[0] > 0.8);

        // two detections on one ground-truth box: single match rule
        let dets = vec![
            (unit("car", 0.0), 0.7),
            (boxed("car", 0.05, 1.0, 1.0, 1.0), 0.95),
        ];
        let m = match_detections(&dets, &gt, 0.5);
        assert_eq!(m.scored_flags, vec![(0.95, true), (0.7, false)]);
        assert_eq!(m.matched_gts, 1);

        // overlap below threshold
        let dets = vec![(unit("car", 0.95), 0.9)];
        let m = match_detections(&dets, &gt, 0.1);
        assert_eq!(m.scored_flags, vec![(0.9, false)]);
        assert_eq!(m.matched_gts, 0);
    }

    #[test]
    fn match_prefers_highest_iou_gt() {
        let gt = vec![unit("car", 0.4), unit("car", 0.1)];
        let dets = vec![(unit("car", 0.0), 0.9)];
        let m = match_detections(&dets, &gt, 0.05);
        assert_eq!(m.matched_gts, 1);
        // the closer box (index 1) is taken, leaving index 0 free
        let m2 = match_detections(
            &[(unit("car", 0.0), 0.9), (unit("car", 0.45), 0.8)],
            &gt,
            0.05,
        );
        assert_eq!(m2.matched_gts, 2);
    }

    #[test]
    fn ap_examples() {
        let interp = Interpolation::default();
        assert_relative_eq!(average_precision(&[(0.9, true)], 1, interp), 100.0);
        assert_relative_eq!(average_precision(&[], 1, interp), 0.0);
        assert_relative_eq!(average_precision(&[(0.9, false)], 0, interp), 0.0);
        // FP ranked after the TP never lowers the envelope
        assert_relative_eq!(
            average_precision(&[(0.9, true), (0.8, false)], 1, interp),
            100.0
        );
        // FP ranked first halves precision everywhere
        assert_relative_eq!(
            average_precision(&[(0.9, false), (0.8, true)], 1, interp),
            50.0
        );
        // half recall reached at precision 1
        assert_relative_eq!(average_precision(&[(0.9, true)], 2, interp), 50.0);
        // input order must not matter
        assert_relative_eq!(
            average_precision(&[(0.8, false), (0.9, true)], 1, interp),
            100.0
        );
    }

    #[test]
    fn ap_continuous_matches_fine_grid() {
        let dets = vec![
            (0.95, true),
            (0.9, false),
            (0.85, true),
            (0.8, true),
            (0.7, false),
            (0.6, true),
        ];
        let cont = average_precision(&dets, 5, Interpolation::Continuous);
        let fine = average_precision(&dets, 5, Interpolation::Points(200_000));
        assert_relative_eq!(cont, fine, epsilon = 1e-2);
    }

    #[test]
    fn ap_monotone_in_prepended_tp() {
        let base = vec![(0.9, true), (0.8, false), (0.7, true), (0.6, false)];
        for interp in [
            Interpolation::Points(11),
            Interpolation::Points(40),
            Interpolation::Continuous,
        ] {
            let before = average_precision(&base, 5, interp);
            let mut plus = base.clone();
            plus.insert(0, (0.99, true));
            let after = average_precision(&plus, 5, interp);
            assert!(after >= before, "{interp:?}: {after} < {before}");
        }
    }

    #[test]
    fn harm_examples_and_properties() {
        assert_relative_eq!(map_harm(79.4, 13.2), 22.6, epsilon = 0.1);
        assert_relative_eq!(map_harm(66.8, 9.7), 16.9, epsilon = 0.1);
        assert_relative_eq!(map_harm(37.5, 0.0), 0.0);
        assert_relative_eq!(map_harm(0.0, 0.0), 0.0);
        for (a, b) in [(10.0, 90.0), (33.3, 66.6), (5.0, 5.0)] {
            assert_relative_eq!(map_harm(a, b), map_harm(b, a), epsilon = 1e-12);
            assert!(map_harm(a, b) <= 2.0 * a.min(b) + 1e-12);
        }
        assert_relative_eq!(map_harm(42.0, 42.0), 42.0, epsilon = 1e-12);
    }

    #[test]
    fn recall_examples() {
        let gts = vec![unit("u", 0.0), unit("u", 5.0), unit("u", 10.0)];
        let all = gts.clone();
        assert_relative_eq!(recall_unknown(&all, &gts, 0.1), 100.0);
        assert_relative_eq!(recall_unknown(&[], &gts, 0.1), 0.0);
        let two = vec![gts[0].clone(), gts[2].clone()];
        assert_relative_eq!(recall_unknown(&two, &gts, 0.1), 66.67, epsilon = 0.01);
        assert_relative_eq!(recall_unknown(&all, &[], 0.1), 0.0);
    }

    fn known_det(label: &str, cx: f64, score: f64) -> crate::pipeline::Detection {
        crate::pipeline::Detection {
            bbox: unit(label, cx),
            embedding: None,
            probs: vec![score, 1.0 - score],
            naive_score: score,
            eds_score: 0.0,
        }
    }

    #[test]
    fn evaluate_mixed_scene() {
        let gt = vec![
            unit("car", 0.0),
            unit("pedestrian", 5.0),
            unit("golf_cart", 10.0),
        ];
        let result = OpenSetResult {
            known: vec![known_det("car", 0.02, 0.9)],
            unknown: vec![boxed("unknown", 10.1, 1.0, 1.0, 1.0)],
            diagnostics: PipelineDiagnostics::default(),
        };
        let pairs = vec![ScenePair { gt, result }];
        let report = evaluate(&pairs, &EvalConfig::default()).unwrap();
        // car AP 100, pedestrian AP 0 (missed), cyclist absent -> excluded
        assert_relative_eq!(report.per_class_ap["car"], 100.0);
        assert_relative_eq!(report.per_class_ap["pedestrian"], 0.0);
        assert_relative_eq!(report.per_class_ap["cyclist"], 0.0);
        assert_relative_eq!(report.map_known, 50.0);
        assert_relative_eq!(report.ap_unknown, 100.0);
        assert_relative_eq!(report.recall_unknown, 100.0);
        assert!(report.mean_matched_unknown_iou > 0.7);
        assert_eq!(report.num_known_gt, 2);
        assert_eq!(report.num_unknown_gt, 1);
        assert_relative_eq!(
            report.map_harm,
            map_harm(report.map_known, report.ap_unknown)
        );
    }

    #[test]
    fn evaluate_matching_is_per_scene() {
        // det in scene 2 must not match the GT of scene 1
        let pairs = vec![
            ScenePair {
                gt: vec![unit("car", 0.0)],
                result: OpenSetResult {
                    known: vec![],
                    unknown: vec![],
                    diagnostics: PipelineDiagnostics::default(),
                },
            },
            ScenePair {
                gt: vec![],
                result: OpenSetResult {
                    known: vec![known_det("car", 0.0, 0.9)],
                    unknown: vec![],
                    diagnostics: PipelineDiagnostics::default(),
                },
            },
        ];
        let report = evaluate(&pairs, &EvalConfig::default()).unwrap();
        assert_relative_eq!(report.per_class_ap["car"], 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        assert!(EvalConfig::kitti().validate().is_ok());
        let mut bad = EvalConfig::default();
        bad.known_iou.insert("car".into(), 0.0);
        assert!(bad.validate().is_err());
        let bad = EvalConfig {
            max_known_map_degradation: 1.0,
            ..EvalConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvalConfig {
            interpolation: Interpolation::Points(0),
            ..EvalConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvalConfig {
            known_iou: BTreeMap::new(),
            ..EvalConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    /// The two sensor-facing faces of a yaw-45 square footprint whose near
    /// corner sits at (apex_x, 0): the view that clusters into the full
    /// footprint rather than a single-face sliver.
    fn corner_faces(apex_x: f64, leg: f64, height: f64, step: f64) -> Vec<Point3> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut pts = Vec::new();
        let mut u = 0.0;
        while u <= leg + 1e-9 {
            let mut z = 0.0;
            while z <= height + 1e-9 {
                pts.push(Point3::new(apex_x - s * u, s * u, z));
                if u > 0.0 {
                    pts.push(Point3::new(apex_x + s * u, s * u, z));
                }
                z += step;
            }
            u += step;
        }
        pts
    }

    fn sweep_fixture() -> (Vec<SweepScene>, Prototypes) {
        let protos =
            Prototypes::new(vec!["car".into(), "cyclist".into(), "pedestrian".into()]).unwrap();
        // one unknown square object seen corner-on, one known car face
        let mut cloud = corner_faces(10.0, 2.0, 1.2, 0.2);
        for p in face_points(-8.0, 0.8, 1.0, 0.2) {
            cloud.push(p);
        }
        let gt = vec![
            Box7::new(
                "golf_cart",
                10.0,
                std::f64::consts::SQRT_2,
                0.6,
                2.0,
                2.0,
                1.2,
                std::f64::consts::FRAC_PI_4,
            ),
            Box7::new("car", -8.3, 0.0, 0.75, 1.8, 4.2, 1.5, 0.0),
        ];
        let dets = vec![
            // unknown picked up as a car-shaped box, embedding far from anchors
            (
                Box7::new("car", 10.0, 0.7, 0.75, 1.8, 4.2, 1.5, 0.0),
                vec![0.1, 0.0, -0.1],
            ),
            // confident true car
            (
                Box7::new("car", -8.3, 0.0, 0.75, 1.8, 4.2, 1.5, 0.0),
                vec![3.0, 0.0, 0.0],
            ),
        ];
        let scene = SweepScene { cloud, dets, gt };
        (vec![scene], protos)
    }

    fn face_points(range: f64, half_width: f64, height: f64, step: f64) -> Vec<Point3> {
        let mut pts = Vec::new();
        let mut y = -half_width;
        while y <= half_width + 1e-9 {
            let mut z = 0.0;
            while z <= height + 1e-9 {
                pts.push(Point3::new(range, y, z));
                z += step;
            }
            y += step;
        }
        pts
    }

    #[test]
    fn sweep_monotone_recall_and_zero_threshold() {
        let (scenes, protos) = sweep_fixture();
        let thresholds = [0.0, 30.0, 50.0];
        let sweep = sweep_thresholds(
            &scenes,
            &thresholds,
            &protos,
            HeadKind::Metric,
            &PipelineConfig::default(),
            &EvalConfig::default(),
            SweepMode::Eds,
        )
        .unwrap();
        assert_eq!(sweep.points.len(), 3);
        let zero = &sweep.points[0];
        assert_relative_eq!(zero.recall_unknown, 0.0);
        assert_relative_eq!(zero.map_known, sweep.closed_set_map_known);
        for w in sweep.points.windows(2) {
            assert!(w[1].recall_unknown >= w[0].recall_unknown - 1e-9);
        }
        // the EDS of the unknown-like embedding is ~27, of the car ~36:
        // threshold 30 diverts only the unknown and must dominate
        assert_eq!(sweep.chosen, 1);
        assert!(!sweep.fallback);
        let mid = &sweep.points[1];
        assert!(mid.recall_unknown > 99.0);
        assert!(mid.map_harm > zero.map_harm);

        let csv = render_sweep_csv(&sweep);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "threshold,recall_unknown,ap_unknown,map_known,map_harm"
        );
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.0000,"));
        assert!(lines[4].starts_with("# operating point: threshold 30.0000"));
    }

    #[test]
    fn sweep_single_threshold_and_naive_mode() {
        let (scenes, protos) = sweep_fixture();
        let sweep = sweep_thresholds(
            &scenes,
            &[0.6],
            &protos,
            HeadKind::Metric,
            &PipelineConfig::default(),
            &EvalConfig::default(),
            SweepMode::Naive,
        )
        .unwrap();
        assert_eq!(sweep.points.len(), 1);
        assert_eq!(sweep.chosen, 0);
        // the near-uniform det (score ~0.54) is relabeled; geometry is the
        // car-shaped box, which still overlaps the unknown GT at IoU 0.1
        assert_relative_eq!(sweep.points[0].recall_unknown, 100.0);
    }

    #[test]
    fn sweep_rejects_bad_thresholds() {
        let (scenes, protos) = sweep_fixture();
        for bad in [vec![], vec![2.0, 1.0]] {
            let r = sweep_thresholds(
                &scenes,
                &bad,
                &protos,
                HeadKind::Metric,
                &PipelineConfig::default(),
                &EvalConfig::default(),
                SweepMode::Eds,
            );
            assert!(r.is_err());
        }
    }
}
