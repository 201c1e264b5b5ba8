//! Property tests for invariants that must hold on arbitrary inputs, not
//! just the worked examples in the unit tests.

use osd_core::clustering::{build_index, extract_region, grow_cluster, pair_angle, ClusterConfig};
use osd_core::data::Scene;
use osd_core::eval::{average_precision, map_harm, match_detections, Interpolation};
use osd_core::geometry::{
    bev_hull_area, bev_intersection_area, box_volume, iou_3d, min_oriented_box, normalize_yaw,
    point_in_box_tol, yaw_mod_quarter, Box7, Point3,
};
use osd_core::metric_head::{class_probabilities, eds, loss_gradient, metric_loss, Prototypes};
use proptest::prelude::*;

fn protos(c: usize) -> Prototypes {
    let classes: Vec<String> = (0..c).map(|t| format!("class_{t}")).collect();
    Prototypes::new(classes).unwrap()
}

fn arb_embedding() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=8).prop_flat_map(|c| proptest::collection::vec(-10.0..10.0f64, c))
}

fn arb_box() -> impl Strategy<Value = Box7> {
    (
        -10.0..10.0f64,
        -10.0..10.0f64,
        -3.0..3.0f64,
        0.1..5.0f64,
        0.1..5.0f64,
        0.1..5.0f64,
        -10.0..10.0f64,
    )
        .prop_map(|(cx, cy, cz, w, l, h, yaw)| Box7::new("obj", cx, cy, cz, w, l, h, yaw))
}

fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point3>> {
    proptest::collection::vec((-8.0..8.0f64, -8.0..8.0f64, -2.0..2.0f64), 1..max)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3 { x, y, z }).collect())
}

proptest! {
    #[test]
    fn probabilities_form_distribution_ranked_by_distance(e in arb_embedding()) {
        let pr = protos(e.len());
        let p = class_probabilities(&e, &pr).unwrap();
        prop_assert_eq!(p.len(), e.len());
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));

        // Closer prototype, higher probability.
        let d2: Vec<f64> = (0..e.len())
            .map(|t| pr.squared_distance(&e, t).unwrap())
            .collect();
        for i in 0..e.len() {
            for j in 0..e.len() {
                if d2[i] < d2[j] {
                    prop_assert!(p[i] >= p[j] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_components_sum_to_zero(e in arb_embedding(), y_raw in 0usize..8) {
        // With one-hot prototypes the gradient is -2*sum_t (p_t - y_t) m_t,
        // and the residuals p_t - y_t sum to zero.
        let pr = protos(e.len());
        let y = y_raw % e.len();
        let g = loss_gradient(&e, y, &pr).unwrap();
        let sum: f64 = g.iter().sum();
        prop_assert!(sum.abs() < 1e-7, "gradient sum {sum}");
    }

    #[test]
    fn loss_is_nonnegative_and_finite(e in arb_embedding(), y_raw in 0usize..8) {
        let pr = protos(e.len());
        let y = y_raw % e.len();
        let loss = metric_loss(&e, y, &pr).unwrap();
        prop_assert!(loss.is_finite());
        prop_assert!(loss >= -1e-12);
    }

    #[test]
    fn eds_never_beats_the_centroid(e in arb_embedding()) {
        // Sum of squared distances to all prototypes is minimized at their
        // centroid, where it equals c^2 (c - 1).
        let c = e.len();
        let pr = protos(c);
        let v = eds(&e, &pr).unwrap();
        let floor = (c * c * (c - 1)) as f64;
        prop_assert!(v >= floor - 1e-9, "eds {v} below {floor}");
    }

    #[test]
    fn iou_is_symmetric_unit_bounded(a in arb_box(), b in arb_box()) {
        let ab = iou_3d(&a, &b);
        let ba = iou_3d(&b, &a);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!((iou_3d(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn intersection_bounded_by_smaller_footprint(a in arb_box(), b in arb_box()) {
        let inter = bev_intersection_area(&a, &b);
        prop_assert!(inter >= -1e-12);
        prop_assert!(inter <= a.w * a.l + 1e-9);
        prop_assert!(inter <= b.w * b.l + 1e-9);
        prop_assert!((inter - bev_intersection_area(&b, &a)).abs() < 1e-9);
    }

    #[test]
    fn yaw_normalization_ranges(yaw in -100.0..100.0f64) {
        let n = normalize_yaw(yaw);
        prop_assert!(-std::f64::consts::PI < n && n <= std::f64::consts::PI + 1e-12);
        let q = yaw_mod_quarter(yaw);
        prop_assert!((0.0..std::f64::consts::FRAC_PI_2 + 1e-12).contains(&q));
    }

    #[test]
    fn fitted_box_covers_points_and_stays_tight(pts in arb_points(40)) {
        let fit = min_oriented_box(&pts, 0.05).unwrap();
        for p in &pts {
            prop_assert!(point_in_box_tol(p, &fit, 1e-7), "point {p:?} outside {fit:?}");
        }

        // No larger than the axis-aligned candidate unless the extent floor
        // kicked in, and never tighter than the hull itself.
        let (mut xs, mut ys) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for p in &pts {
            xs = (xs.0.min(p.x), xs.1.max(p.x));
            ys = (ys.0.min(p.y), ys.1.max(p.y));
        }
        let aabb = (xs.1 - xs.0).max(0.05) * (ys.1 - ys.0).max(0.05);
        prop_assert!(fit.w * fit.l <= aabb + 1e-9);
        prop_assert!(fit.w * fit.l + 1e-9 >= bev_hull_area(&pts));
    }

    #[test]
    fn fitted_box_ignores_point_order(pts in arb_points(30), seed in 0u64..1000) {
        let a = min_oriented_box(&pts, 0.05).unwrap();
        let mut shuffled = pts.clone();
        // Cheap deterministic shuffle; proptest already varies the order.
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = min_oriented_box(&shuffled, 0.05).unwrap();
        prop_assert!((a.w * a.l - b.w * b.l).abs() < 1e-9);
        prop_assert!((box_volume(&a) - box_volume(&b)).abs() < 1e-9);
        prop_assert!((a.cx - b.cx).abs() < 1e-9 && (a.cy - b.cy).abs() < 1e-9);
    }

    #[test]
    fn grid_neighbors_match_brute_force(pts in arb_points(60), radius in 0.2..3.0f64, probe in 0usize..60) {
        let index = build_index(&pts, radius);
        let q = &pts[probe % pts.len()];
        let mut got = index.neighbors_within(q);
        got.sort_unstable();
        let expected: Vec<usize> = (0..pts.len())
            .filter(|&i| pts[i].distance(q) <= radius)
            .collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn cluster_stays_inside_region(pts in arb_points(60), cx in -6.0..6.0f64, cy in -6.0..6.0f64) {
        let cfg = ClusterConfig::default();
        let center = Point3 { x: cx, y: cy, z: 0.0 };
        let Ok(region) = extract_region(&pts, &center, cfg.region_radius) else {
            return Ok(());
        };
        let index = build_index(&pts, cfg.neighbor_radius);
        let origin = Point3 { x: 0.0, y: 0.0, z: 0.0 };
        let members = grow_cluster(&pts, &index, &region, &cfg, &origin).unwrap();
        prop_assert!(members.contains(&region.seed_index));
        prop_assert!(members.windows(2).all(|w| w[0] < w[1]), "indices not sorted");
        for m in &members {
            prop_assert!(region.indices.contains(m), "member {m} outside region");
        }
    }

    #[test]
    fn pair_angle_is_a_valid_angle(ox in -5.0..5.0f64, oy in -5.0..5.0f64,
                                   t in arb_points(2), s in arb_points(2)) {
        let o = Point3 { x: ox, y: oy, z: 0.0 };
        let (t, s) = (t[0], s[0]);
        if t.distance(&s) < 1e-9 {
            return Ok(());
        }
        match pair_angle(&o, &t, &s) {
            Ok(angle) => {
                prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&angle));
                let swapped = pair_angle(&o, &s, &t).unwrap();
                prop_assert!((angle - swapped).abs() < 1e-9);
            }
            // Sensor coinciding with a point is the documented error case.
            Err(_) => {
                prop_assert!(o.distance(&t) < 1e-9 || o.distance(&s) < 1e-9);
            }
        }
    }

    #[test]
    fn ap_bounded_and_hurt_by_false_positives(
        flags in proptest::collection::vec((0.0..1.0f64, any::<bool>()), 1..40),
        extra_score in 0.0..1.0f64,
    ) {
        let tp = flags.iter().filter(|(_, hit)| *hit).count();
        let num_gt = tp.max(1) + 2;
        let ap = average_precision(&flags, num_gt, Interpolation::Points(40));
        prop_assert!((0.0..=100.0 + 1e-9).contains(&ap));

        let mut with_fp = flags.clone();
        with_fp.push((extra_score, false));
        let worse = average_precision(&with_fp, num_gt, Interpolation::Points(40));
        prop_assert!(worse <= ap + 1e-9, "fp raised ap {ap} -> {worse}");
    }

    #[test]
    fn perfect_detections_score_perfectly(n in 1usize..20) {
        let flags: Vec<(f64, bool)> = (0..n).map(|i| (1.0 - i as f64 * 0.01, true)).collect();
        let ap = average_precision(&flags, n, Interpolation::Points(40));
        prop_assert!((ap - 100.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_mean_sits_between_inputs(a in 0.0..100.0f64, b in 0.0..100.0f64) {
        let h = map_harm(a, b);
        prop_assert!(h <= a.max(b) + 1e-9);
        prop_assert!(h >= 0.0);
        if a > 0.0 && b > 0.0 {
            prop_assert!(h >= a.min(b) - 1e-9);
        } else {
            prop_assert_eq!(h, 0.0);
        }
        prop_assert!((map_harm(a, b) - map_harm(b, a)).abs() < 1e-12);
        prop_assert!((map_harm(a, a) - a).abs() < 1e-9);
    }

    #[test]
    fn matching_respects_counts_and_threshold(
        dets in proptest::collection::vec((arb_box(), 0.0..1.0f64), 0..12),
        gts in proptest::collection::vec(arb_box(), 0..8),
        threshold in 0.05..0.9f64,
    ) {
        let m = match_detections(&dets, &gts, threshold);
        prop_assert_eq!(m.scored_flags.len(), dets.len());
        prop_assert!(m.matched_gts <= gts.len());
        let tp = m.scored_flags.iter().filter(|(_, hit)| *hit).count();
        prop_assert_eq!(tp, m.matched_gts);
        prop_assert_eq!(m.matched_ious.len(), m.matched_gts);
        prop_assert!(m.matched_ious.iter().all(|&v| v >= threshold));
        prop_assert!(m.scored_flags.windows(2).all(|w| w[0].0 >= w[1].0));
    }

    #[test]
    fn scene_roundtrips_through_json(
        pts in arb_points(20),
        boxes in proptest::collection::vec(arb_box(), 0..5),
        id in "[a-z0-9]{1,12}",
    ) {
        let scene = Scene { scene_id: id, points: pts, gt_boxes: boxes };
        let text = serde_json::to_string(&scene).unwrap();
        let back: Scene = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(scene, back);
    }
}
