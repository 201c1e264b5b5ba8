//! Oriented-box and point-set geometry.
//!
//! Boxes are yaw-rotated cuboids: `l` runs along the local x axis (the
//! heading), `w` along local y, `h` along z. BEV (bird's-eye view) means the
//! xy-plane projection, where rotated-rectangle intersection is computed by
//! convex polygon clipping.

use crate::error::{Error, Result};
use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Label given to boxes that do not belong to any trained class.
pub const UNKNOWN_LABEL: &str = "unknown";

/// Intersections with BEV area below this are treated as empty (slivers from
/// near-degenerate clips).
const SLIVER_AREA: f64 = 1e-12;

/// A point of the LIDAR cloud, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn xy_distance(&self, other: &Point3) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }
}

// Points serialize as bare [x, y, z] triples; clouds are large.
impl Serialize for Point3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(3)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.serialize_element(&self.z)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Point3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct P3Visitor;
        impl<'de> Visitor<'de> for P3Visitor {
            type Value = Point3;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a [x, y, z] triple")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Point3, A::Error> {
                let x = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(0, &self))?;
                let y = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(1, &self))?;
                let z = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(2, &self))?;
                Ok(Point3 { x, y, z })
            }
        }
        deserializer.deserialize_tuple(3, P3Visitor)
    }
}

/// Oriented 3D bounding box `[cx, cy, cz, w, l, h, yaw]` with a class label.
///
/// `l` is the extent along the local x axis (heading), `w` along local y,
/// `h` along z; `yaw` rotates about z and is kept in `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box7 {
    pub label: String,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub w: f64,
    pub l: f64,
    pub h: f64,
    pub yaw: f64,
}

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut r = yaw.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid can return exactly TAU after rounding for tiny negatives
    if r <= -PI {
        r += TAU;
    }
    r
}

impl Box7 {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        cx: f64,
        cy: f64,
        cz: f64,
        w: f64,
        l: f64,
        h: f64,
        yaw: f64,
    ) -> Self {
        Box7 {
            label: label.into(),
            cx,
            cy,
            cz,
            w,
            l,
            h,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn is_unknown(&self) -> bool {
        self.label == UNKNOWN_LABEL
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.cx, self.cy, self.cz)
    }

    /// Check the type invariants (positive finite extents, finite pose).
    pub fn validate(&self) -> Result<()> {
        let fields = [self.cx, self.cy, self.cz, self.w, self.l, self.h, self.yaw];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("box has non-finite fields"));
        }
        if self.w <= 0.0 || self.l <= 0.0 || self.h <= 0.0 {
            return Err(Error::format(format!(
                "box extents must be positive (w={}, l={}, h={})",
                self.w, self.l, self.h
            )));
        }
        Ok(())
    }

    /// BEV corners in world coordinates, counter-clockwise.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (self.l / 2.0, self.w / 2.0);
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[x, y]| [self.cx + c * x - s * y, self.cy + s * x + c * y])
    }

    /// World point expressed in the box's local frame.
    pub fn to_local(&self, p: &Point3) -> Point3 {
        let (dx, dy, dz) = (p.x - self.cx, p.y - self.cy, p.z - self.cz);
        let (s, c) = self.yaw.sin_cos();
        Point3::new(c * dx + s * dy, -s * dx + c * dy, dz)
    }
}

/// True iff `p` lies inside `b`; boundary points count as inside.
pub fn point_in_box(p: &Point3, b: &Box7) -> bool {
    point_in_box_tol(p, b, 0.0)
}

/// `point_in_box` with an extra boundary tolerance in meters.
pub fn point_in_box_tol(p: &Point3, b: &Box7, tol: f64) -> bool {
    let q = b.to_local(p);
    q.x.abs() <= b.l / 2.0 + tol && q.y.abs() <= b.w / 2.0 + tol && q.z.abs() <= b.h / 2.0 + tol
}

/// Volume `w*l*h`; the priority key for unknown-box suppression.
pub fn box_volume(b: &Box7) -> f64 {
    b.w * b.l * b.h
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc.abs() / 2.0
}

/// Clip a convex polygon by the half-plane left of the directed edge a->b.
fn clip_by_edge(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let nxt = poly[(i + 1) % poly.len()];
        let (dc, dn) = (side(cur), side(nxt));
        if dc >= 0.0 {
            out.push(cur);
        }
        if (dc > 0.0 && dn < 0.0) || (dc < 0.0 && dn > 0.0) {
            let t = dc / (dc - dn);
            out.push([cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])]);
        }
    }
    out
}

/// Area of intersection of two yaw-rotated rectangles in the xy-plane.
pub fn bev_intersection_area(a: &Box7, b: &Box7) -> f64 {
    let clip = b.bev_corners();
    let mut poly: Vec<[f64; 2]> = a.bev_corners().to_vec();
    for i in 0..4 {
        poly = clip_by_edge(&poly, clip[i], clip[(i + 1) % 4]);
        if poly.len() < 3 {
            return 0.0;
        }
    }
    let area = polygon_area(&poly);
    if area < SLIVER_AREA {
        0.0
    } else {
        area
    }
}

/// 3D intersection-over-union of two yaw-oriented boxes.
pub fn iou_3d(a: &Box7, b: &Box7) -> f64 {
    let z_lo = (a.cz - a.h / 2.0).max(b.cz - b.h / 2.0);
    let z_hi = (a.cz + a.h / 2.0).min(b.cz + b.h / 2.0);
    let dz = (z_hi - z_lo).max(0.0);
    if dz == 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * dz;
    let union = box_volume(a) + box_volume(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Convex hull of 2D points (monotone chain). Input order does not matter:
/// points are sorted first, so the hull is canonical. Collinear points are
/// dropped. Returns fewer than 3 vertices for degenerate inputs.
fn convex_hull_xy(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = pts.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    let n = pts.len();
    if n <= 2 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Area of the convex hull of the points' xy projection; 0 for degenerate
/// sets. Used as a shape statistic by feature extraction.
pub fn bev_hull_area(points: &[Point3]) -> f64 {
    let xy: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    polygon_area(&convex_hull_xy(&xy))
}

/// Minimum-BEV-area yaw-oriented box enclosing all points.
///
/// Searches hull edge directions (rotating calipers); area ties resolve to
/// the smaller perimeter. The z extent is `[min z, max z]`. Every extent is
/// floored at `min_extent` so degenerate clusters still produce usable
/// boxes. The result is labeled `"unknown"`.
pub fn min_oriented_box(points: &[Point3], min_extent: f64) -> Result<Box7> {
    if points.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let xy: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    let hull = convex_hull_xy(&xy);

    // Candidate edge directions (unit vectors). Degenerate hulls get a single
    // direction: along the segment for 2 points, x-axis for a single point.
    let mut dirs: Vec<[f64; 2]> = Vec::new();
    if hull.len() >= 3 {
        for i in 0..hull.len() {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let norm = dx.hypot(dy);
            if norm > 0.0 {
                dirs.push([dx / norm, dy / norm]);
            }
        }
    } else if hull.len() == 2 {
        let (dx, dy) = (hull[1][0] - hull[0][0], hull[1][1] - hull[0][1]);
        let norm = dx.hypot(dy);
        dirs.push([dx / norm, dy / norm]);
    } else {
        dirs.push([1.0, 0.0]);
    }

    let extents = |dir: [f64; 2], pts: &[[f64; 2]]| {
        let mut u_min = f64::INFINITY;
        let mut u_max = f64::NEG_INFINITY;
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        for &[x, y] in pts {
            let u = x * dir[0] + y * dir[1];
            let v = -x * dir[1] + y * dir[0];
            u_min = u_min.min(u);
            u_max = u_max.max(u);
            v_min = v_min.min(v);
            v_max = v_max.max(v);
        }
        (u_min, u_max, v_min, v_max)
    };

    // Minimum area wins. Right-angled hulls (an object seen corner-on shows
    // two perpendicular faces) tie every edge direction at the same area, so
    // exact ties fall to the smaller perimeter: the most compact of the tied
    // rectangles, which for an L-shaped hull is the leg-aligned one.
    let search_pts: &[[f64; 2]] = if hull.is_empty() { &xy } else { &hull };
    let mut best_dir = dirs[0];
    let mut best_area = f64::INFINITY;
    let mut best_perim = f64::INFINITY;
    for &dir in &dirs {
        let (u0, u1, v0, v1) = extents(dir, search_pts);
        let area = (u1 - u0) * (v1 - v0);
        let perim = (u1 - u0) + (v1 - v0);
        let tied = (area - best_area).abs() <= 1e-9 * best_area;
        if (!tied && area < best_area) || (tied && perim < best_perim) {
            best_area = best_area.min(area);
            best_perim = perim;
            best_dir = dir;
        }
    }

    // Final fit over all points so nothing sticks out of the returned box.
    let (u0, u1, v0, v1) = extents(best_dir, &xy);
    let (mut z_min, mut z_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        z_min = z_min.min(p.z);
        z_max = z_max.max(p.z);
    }
    let (uc, vc) = ((u0 + u1) / 2.0, (v0 + v1) / 2.0);
    Ok(Box7::new(
        UNKNOWN_LABEL,
        uc * best_dir[0] - vc * best_dir[1],
        uc * best_dir[1] + vc * best_dir[0],
        (z_min + z_max) / 2.0,
        (v1 - v0).max(min_extent),
        (u1 - u0).max(min_extent),
        (z_max - z_min).max(min_extent),
        best_dir[1].atan2(best_dir[0]),
    ))
}

/// Fold a yaw into `[0, pi/2)`, the symmetry class of a rectangle's
/// orientation. Handy for comparing fitted boxes against expected ones.
pub fn yaw_mod_quarter(yaw: f64) -> f64 {
    yaw.rem_euclid(FRAC_PI_2)
}
