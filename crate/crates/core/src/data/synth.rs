//! Deterministic synthetic LIDAR scenes.
//!
//! A scanner at the origin sweeps a full azimuth circle over a fan of
//! elevation rings and ray-casts against boxes resting on the ground plane,
//! so every point lies exactly on an object surface and carries its source
//! object id. Objects never overlap in azimuth (no occlusion) and keep a
//! minimum gap, which makes per-object clusters well separated.
//!
//! Each scene also gets simulated closed-set detections: known objects keep
//! their ground-truth box and an embedding near their class anchor; unknown
//! objects get one or two boxes of the most size-confusable known class's
//! nominal shape with jittered pose, and embeddings near the origin of the
//! embedding space. Everything is a pure function of the config seed.

use crate::data::{DetectionInput, InputDetection, Scene};
use crate::error::{Error, Result};
use crate::geometry::{normalize_yaw, Box7, Point3};
use crate::metric_head::Prototypes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Object shape class: uniform size ranges (meters) per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTemplate {
    pub label: String,
    pub l: (f64, f64),
    pub w: (f64, f64),
    pub h: (f64, f64),
}

impl ShapeTemplate {
    pub fn new(label: &str, l: (f64, f64), w: (f64, f64), h: (f64, f64)) -> Self {
        ShapeTemplate {
            label: label.to_string(),
            l,
            w,
            h,
        }
    }

    /// Mid-range size, the class's anchor shape.
    pub fn nominal(&self) -> (f64, f64, f64) {
        (
            (self.l.0 + self.l.1) / 2.0,
            (self.w.0 + self.w.1) / 2.0,
            (self.h.0 + self.h.1) / 2.0,
        )
    }

    fn nominal_volume(&self) -> f64 {
        let (l, w, h) = self.nominal();
        l * w * h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub scenes: usize,
    pub known_templates: Vec<ShapeTemplate>,
    pub unknown_templates: Vec<ShapeTemplate>,
    /// Inclusive range of objects per scene.
    pub objects_per_scene: (usize, usize),
    /// Probability that an object is drawn from the unknown templates.
    pub unknown_ratio: f64,
    /// Minimum clearance between object circumcircles, meters.
    pub min_gap: f64,
    /// Scanner azimuth resolution, degrees.
    pub azimuth_step_deg: f64,
    /// Elevation fan (inclusive start, exclusive-ish end), degrees above horizon.
    pub elevation_range_deg: (f64, f64),
    pub elevation_step_deg: f64,
    /// Object center distance range from the sensor, meters.
    pub range_limits: (f64, f64),
    /// Extra angular clearance between object azimuth intervals, degrees.
    pub min_azimuth_gap_deg: f64,
    /// When set, yaw is `azimuth + U(lo, hi)` radians instead of uniform.
    /// This pins the incidence of the line of sight on the box faces: the
    /// default band keeps both visible faces at least ~33 degrees off
    /// grazing, so neither degenerates to a sparse sliver. `None` restores
    /// fully uniform yaw (some objects then show a single grazing face).
    pub yaw_to_azimuth: Option<(f64, f64)>,
    /// Isotropic embedding noise scale.
    pub sigma: f64,
    /// Center jitter of simulated unknown-object detections, meters.
    pub center_jitter: f64,
    /// Yaw jitter of simulated unknown-object detections, radians.
    pub yaw_jitter: f64,
    /// Probability that an unknown object gets a duplicate detection.
    pub duplicate_prob: f64,
    pub max_place_retries: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            scenes: 10,
            known_templates: vec![
                ShapeTemplate::new("car", (3.8, 4.6), (1.7, 2.0), (1.5, 1.8)),
                ShapeTemplate::new("pedestrian", (0.5, 0.8), (0.5, 0.8), (1.6, 1.9)),
                ShapeTemplate::new("cyclist", (1.6, 2.0), (0.6, 0.8), (1.6, 1.9)),
            ],
            unknown_templates: vec![
                ShapeTemplate::new("golf_cart", (2.6, 3.2), (1.2, 1.5), (1.7, 2.0)),
                ShapeTemplate::new("forklift", (2.2, 2.8), (1.1, 1.4), (2.0, 2.4)),
            ],
            objects_per_scene: (3, 5),
            unknown_ratio: 0.35,
            min_gap: 1.0,
            azimuth_step_deg: 0.2,
            elevation_range_deg: (0.4, 28.0),
            elevation_step_deg: 0.25,
            range_limits: (6.0, 11.0),
            min_azimuth_gap_deg: 2.0,
            yaw_to_azimuth: Some((0.6, 1.0)),
            sigma: 0.3,
            center_jitter: 0.35,
            yaw_jitter: 0.26,
            duplicate_prob: 0.6,
            max_place_retries: 200,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.known_templates.is_empty() {
            return Err(Error::format("need at least one known template"));
        }
        let mut labels: Vec<&str> = self
            .known_templates
            .iter()
            .chain(&self.unknown_templates)
            .map(|t| t.label.as_str())
            .collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::format("template labels must be distinct"));
        }
        if labels.contains(&"unknown") {
            return Err(Error::format("\"unknown\" is reserved, not a template label"));
        }
        if self.min_gap <= 0.0 || self.sigma < 0.0 {
            return Err(Error::format("min_gap must be positive and sigma nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.unknown_ratio)
            || !(0.0..=1.0).contains(&self.duplicate_prob)
        {
            return Err(Error::format("ratios must be within [0, 1]"));
        }
        if self.azimuth_step_deg <= 0.0 || self.elevation_step_deg <= 0.0 {
            return Err(Error::format("angular steps must be positive"));
        }
        if self.objects_per_scene.0 > self.objects_per_scene.1 {
            return Err(Error::format("objects_per_scene range is inverted"));
        }
        if self.range_limits.0 <= 0.0 || self.range_limits.0 > self.range_limits.1 {
            return Err(Error::format("range_limits must satisfy 0 < min <= max"));
        }
        if let Some((lo, hi)) = self.yaw_to_azimuth {
            if lo > hi {
                return Err(Error::format("yaw_to_azimuth band is inverted"));
            }
        }
        Ok(())
    }

    /// Class labels of the known templates, sorted; this fixed order defines
    /// class indices everywhere downstream.
    pub fn known_classes(&self) -> Vec<String> {
        let mut classes: Vec<String> = self
            .known_templates
            .iter()
            .map(|t| t.label.clone())
            .collect();
        classes.sort();
        classes
    }
}

/// One generated scene with its clustering ground truth and simulated
/// closed-set detections.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub scene: Scene,
    /// Source object index (into `scene.gt_boxes`) for each point.
    pub point_object: Vec<usize>,
    pub detections: DetectionInput,
}

/// splitmix64 step, used to derive independent per-scene seeds.
fn mix_seed(seed: u64, idx: u64) -> u64 {
    let mut z = seed.wrapping_add(idx.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draw (Box-Muller).
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Entry distance of the ray `t * dir` (from the origin) into a box, or
/// None if it misses. `dir` must be unit length for `t` to be meters.
fn ray_box_entry(dir: [f64; 3], b: &Box7) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    let o = [
        c * -b.cx + s * -b.cy,
        -s * -b.cx + c * -b.cy,
        -b.cz,
    ];
    let d = [
        c * dir[0] + s * dir[1],
        -s * dir[0] + c * dir[1],
        dir[2],
    ];
    let half = [b.l / 2.0, b.w / 2.0, b.h / 2.0];
    let mut t_in = 0.0f64;
    let mut t_out = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-12 {
            if o[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let ta = (-half[i] - o[i]) / d[i];
        let tb = (half[i] - o[i]) / d[i];
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        t_in = t_in.max(lo);
        t_out = t_out.min(hi);
        if t_in > t_out {
            return None;
        }
    }
    // the sensor is always outside every box, so the entry t is positive
    (t_in > 1e-9).then_some(t_in)
}

struct Placed {
    bbox: Box7,
    is_unknown: bool,
    azimuth: f64,
    half_angle: f64,
}

fn place_objects(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Placed>> {
    let count = rng.gen_range(cfg.objects_per_scene.0..=cfg.objects_per_scene.1);
    let az_gap = cfg.min_azimuth_gap_deg.to_radians();
    let mut placed: Vec<Placed> = Vec::with_capacity(count);
    for _ in 0..count {
        let is_unknown = !cfg.unknown_templates.is_empty() && rng.gen_bool(cfg.unknown_ratio);
        let set = if is_unknown {
            &cfg.unknown_templates
        } else {
            &cfg.known_templates
        };
        let template = rng.gen_range(0..set.len());
        let tpl = &set[template];
        let l = rng.gen_range(tpl.l.0..=tpl.l.1);
        let w = rng.gen_range(tpl.w.0..=tpl.w.1);
        let h = rng.gen_range(tpl.h.0..=tpl.h.1);
        let circum = 0.5 * l.hypot(w);

        let mut ok = false;
        for _ in 0..cfg.max_place_retries {
            let d = rng.gen_range(cfg.range_limits.0..=cfg.range_limits.1);
            let azimuth = rng.gen_range(-PI..PI);
            let yaw = match cfg.yaw_to_azimuth {
                Some((lo, hi)) => azimuth + rng.gen_range(lo..=hi),
                None => rng.gen_range(-PI..PI),
            };
            if d - circum < cfg.min_gap {
                continue; // keep the sensor clear of the object
            }
            let half_angle = (circum / d).min(1.0).asin();
            let clear = placed.iter().all(|p| {
                let center_gap = ((p.bbox.cx - d * azimuth.cos()).powi(2)
                    + (p.bbox.cy - d * azimuth.sin()).powi(2))
                .sqrt();
                let circ_p = 0.5 * p.bbox.l.hypot(p.bbox.w);
                let ang = normalize_yaw(p.azimuth - azimuth).abs();
                center_gap >= circ_p + circum + cfg.min_gap
                    && ang >= p.half_angle + half_angle + az_gap
            });
            if !clear {
                continue;
            }
            let label = if is_unknown { "unknown" } else { &tpl.label };
            placed.push(Placed {
                bbox: Box7::new(label, d * azimuth.cos(), d * azimuth.sin(), h / 2.0, w, l, h, yaw),
                is_unknown,
                azimuth,
                half_angle,
            });
            ok = true;
            break;
        }
        if !ok {
            return Err(Error::PlacementInfeasible {
                retries: cfg.max_place_retries,
            });
        }
    }
    Ok(placed)
}

fn cast_rays(cfg: &SynthConfig, objects: &[Placed]) -> (Vec<Point3>, Vec<usize>) {
    let az_step = cfg.azimuth_step_deg.to_radians();
    let el_step = cfg.elevation_step_deg.to_radians();
    let (el_lo, el_hi) = (
        cfg.elevation_range_deg.0.to_radians(),
        cfg.elevation_range_deg.1.to_radians(),
    );
    let az_steps = (TAU / az_step).round() as usize;
    let rings = ((el_hi - el_lo) / el_step).floor() as usize + 1;
    let mut points = Vec::new();
    let mut ids = Vec::new();
    for k in 0..az_steps {
        let az = -PI + k as f64 * az_step;
        let (saz, caz) = az.sin_cos();
        for r in 0..rings {
            let el = el_lo + r as f64 * el_step;
            let (sel, cel) = el.sin_cos();
            let dir = [cel * caz, cel * saz, sel];
            let mut best: Option<(f64, usize)> = None;
            for (i, obj) in objects.iter().enumerate() {
                if let Some(t) = ray_box_entry(dir, &obj.bbox) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, i));
                    }
                }
            }
            if let Some((t, i)) = best {
                points.push(Point3::new(t * dir[0], t * dir[1], t * dir[2]));
                ids.push(i);
            }
        }
    }
    (points, ids)
}

/// Known template whose nominal volume is nearest (log scale) to `volume`.
fn confusable_template(cfg: &SynthConfig, volume: f64) -> &ShapeTemplate {
    cfg.known_templates
        .iter()
        .min_by(|a, b| {
            let da = (volume / a.nominal_volume()).ln().abs();
            let db = (volume / b.nominal_volume()).ln().abs();
            da.partial_cmp(&db).expect("finite volumes")
        })
        .expect("validated: at least one known template")
}

fn simulate_detections(
    cfg: &SynthConfig,
    objects: &[Placed],
    points: &[Point3],
    point_object: &[usize],
    protos: &Prototypes,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<InputDetection>> {
    let c = protos.num_classes();
    let mut dets = Vec::new();
    let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..c)
            .map(|_| if cfg.sigma > 0.0 { cfg.sigma * gauss(rng) } else { 0.0 })
            .collect()
    };
    // BEV centroid of each object's visible points. Detections of shapes the
    // detector was not trained on center on the visible surface mass, not the
    // true object center.
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); objects.len()];
    for (p, &obj) in points.iter().zip(point_object) {
        sums[obj].0 += p.x;
        sums[obj].1 += p.y;
        sums[obj].2 += 1;
    }
    for (idx, obj) in objects.iter().enumerate() {
        if obj.is_unknown {
            // The closed-set detector mistakes the object for its most
            // size-confusable known class: anchor-shaped box over the visible
            // points, jittered pose, sometimes duplicated; embedding near the
            // origin, the center of the embedding space where inputs far from
            // every trained class land.
            let volume = obj.bbox.w * obj.bbox.l * obj.bbox.h;
            let tpl = confusable_template(cfg, volume);
            let (al, aw, ah) = tpl.nominal();
            let (sx, sy, n) = sums[idx];
            let (cx, cy) = if n > 0 {
                (sx / n as f64, sy / n as f64)
            } else {
                (obj.bbox.cx, obj.bbox.cy)
            };
            let copies = 1 + usize::from(cfg.duplicate_prob > 0.0 && rng.gen_bool(cfg.duplicate_prob));
            for _ in 0..copies {
                let jx = rng.gen_range(-cfg.center_jitter..=cfg.center_jitter);
                let jy = rng.gen_range(-cfg.center_jitter..=cfg.center_jitter);
                let jyaw = rng.gen_range(-cfg.yaw_jitter..=cfg.yaw_jitter);
                let mut e = vec![0.0; c];
                for (ei, n) in e.iter_mut().zip(noise(rng)) {
                    *ei += n;
                }
                dets.push(InputDetection {
                    bbox: Box7::new(
                        tpl.label.clone(),
                        cx + jx,
                        cy + jy,
                        ah / 2.0,
                        aw,
                        al,
                        ah,
                        obj.bbox.yaw + jyaw,
                    ),
                    embedding: e,
                });
            }
        } else {
            let t = protos
                .class_index(&obj.bbox.label)
                .expect("known labels come from the template set");
            let mut e = protos.vector(t)?;
            for (ei, n) in e.iter_mut().zip(noise(rng)) {
                *ei += n;
            }
            dets.push(InputDetection {
                bbox: obj.bbox.clone(),
                embedding: e,
            });
        }
    }
    Ok(dets)
}

/// Generate `cfg.scenes` scenes. Scenes are independent and generated in
/// parallel from per-scene derived seeds, so output is identical regardless
/// of thread schedule.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<SynthScene>> {
    cfg.validate()?;
    let classes = cfg.known_classes();
    let protos = Prototypes::new(classes.clone())?;
    (0..cfg.scenes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, i as u64 + 1));
            let objects = place_objects(cfg, &mut rng)?;
            let (points, point_object) = cast_rays(cfg, &objects);
            let dets =
                simulate_detections(cfg, &objects, &points, &point_object, &protos, &mut rng)?;
            let scene_id = format!("s{i:05}");
            Ok(SynthScene {
                scene: Scene {
                    scene_id: scene_id.clone(),
                    points,
                    gt_boxes: objects.into_iter().map(|o| o.bbox).collect(),
                },
                point_object,
                detections: DetectionInput {
                    scene_id,
                    classes: classes.clone(),
                    dets,
                },
            })
        })
        .collect()
}
