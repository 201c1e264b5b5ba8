//! Per-box feature vectors feeding the trainable head.

use crate::geometry::{bev_hull_area, Box7, Point3};

/// Feature vector length produced by [`feature_extract`].
pub const FEATURE_DIM: usize = 9;

/// Deterministic shape statistics of the points captured by a box:
///
/// 0..3  box extents w, l, h (meters)
/// 3     log1p(point count)
/// 4..7  centroid offset from the box center, in the box's local frame
/// 7     z spread: population std of point z divided by h
/// 8     BEV convex hull area of the points divided by the box footprint
///
/// An empty point set yields the zero vector.
pub fn feature_extract(points: &[Point3], b: &Box7) -> Vec<f64> {
    if points.is_empty() {
        return vec![0.0; FEATURE_DIM];
    }
    let n = points.len() as f64;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut cz = 0.0;
    for p in points {
        cx += p.x;
        cy += p.y;
        cz += p.z;
    }
    let centroid = Point3::new(cx / n, cy / n, cz / n);
    let local = b.to_local(&centroid);
    let z_mean = cz / n;
    let z_var = points.iter().map(|p| (p.z - z_mean).powi(2)).sum::<f64>() / n;
    let hull_ratio = bev_hull_area(points) / (b.w * b.l);
    vec![
        b.w,
        b.l,
        b.h,
        n.ln_1p(),
        local.x,
        local.y,
        local.z,
        z_var.sqrt() / b.h,
        hull_ratio,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_box() -> Box7 {
        Box7::new("car", 2.0, -1.0, 0.8, 1.8, 4.2, 1.6, 0.4)
    }

    #[test]
    fn empty_yields_zero_vector() {
        assert_eq!(feature_extract(&[], &sample_box()), vec![0.0; FEATURE_DIM]);
    }

    #[test]
    fn deterministic_for_same_input() {
        let pts = vec![
            Point3::new(2.1, -0.8, 0.5),
            Point3::new(1.8, -1.2, 1.1),
            Point3::new(2.4, -1.0, 0.7),
        ];
        let b = sample_box();
        assert_eq!(feature_extract(&pts, &b), feature_extract(&pts, &b));
    }

    #[test]
    fn doubling_h_changes_only_h_terms() {
        let pts = vec![
            Point3::new(2.1, -0.8, 0.5),
            Point3::new(1.8, -1.2, 1.1),
            Point3::new(2.4, -1.0, 0.7),
        ];
        let b = sample_box();
        let mut tall = b.clone();
        tall.h *= 2.0;
        let f1 = feature_extract(&pts, &b);
        let f2 = feature_extract(&pts, &tall);
        for i in 0..FEATURE_DIM {
            match i {
                2 => assert_relative_eq!(f2[i], 2.0 * f1[i], epsilon = 1e-12),
                7 => assert_relative_eq!(f2[i], f1[i] / 2.0, epsilon = 1e-12),
                _ => assert_eq!(f1[i], f2[i], "feature {i} should not move"),
            }
        }
    }

    #[test]
    fn centroid_offset_is_local_frame() {
        // box rotated 90 degrees: world +x offset appears as local -y
        let b = Box7::new("t", 0.0, 0.0, 0.0, 2.0, 4.0, 2.0, std::f64::consts::FRAC_PI_2);
        let pts = vec![Point3::new(0.5, 0.0, 0.0)];
        let f = feature_extract(&pts, &b);
        assert_relative_eq!(f[4], 0.0, epsilon = 1e-12);
        assert_relative_eq!(f[5], -0.5, epsilon = 1e-12);
        assert_relative_eq!(f[3], 2f64.ln(), epsilon = 1e-12);
        // single point: no z spread, degenerate hull
        assert_eq!(f[7], 0.0);
        assert_eq!(f[8], 0.0);
    }
}
