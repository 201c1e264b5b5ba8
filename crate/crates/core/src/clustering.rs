//! Depth clustering over raw point clouds.
//!
//! Adjacency between two sensor returns is decided by the angle at the
//! farther point between the segment joining them and the ray back to the
//! sensor: large angles mean the points lie on a near-tangential surface
//! (one object), small angles mean a radial depth gap (different objects).
//! Clusters grow breadth-first from a seed, restricted to a z-unbounded
//! cylinder around the seed.

use crate::error::{Error, Result};
use crate::geometry::Point3;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::f64::consts::FRAC_PI_2;

/// Merge rule direction for the pair angle test.
///
/// `AngleAbove` (default) merges near-tangential pairs (angle above the
/// threshold), which groups surface points and splits depth gaps.
/// `AngleBelow` is the inverse reading and is kept selectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeWhen {
    AngleAbove,
    AngleBelow,
}

/// Region-growing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    /// Pair-angle threshold, radians.
    pub lambda_theta: f64,
    /// Proposal cylinder radius r, meters.
    pub region_radius: f64,
    /// Neighbor search radius, meters.
    pub neighbor_radius: f64,
    pub merge_when: MergeWhen,
    /// Clusters with fewer points are discarded as noise.
    pub min_cluster_points: usize,
    /// Extent floor handed to box fitting, meters.
    pub min_box_extent: f64,
    /// Drop points below this height before clustering; None disables.
    pub ground_z: Option<f64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            lambda_theta: 65f64.to_radians(),
            region_radius: 4.0,
            neighbor_radius: 0.5,
            merge_when: MergeWhen::AngleAbove,
            min_cluster_points: 5,
            min_box_extent: 0.1,
            ground_z: None,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_theta > 0.0 && self.lambda_theta < FRAC_PI_2) {
            return Err(Error::format("lambda_theta must be in (0, pi/2)"));
        }
        if self.region_radius <= 0.0 || self.neighbor_radius <= 0.0 {
            return Err(Error::format("region and neighbor radii must be positive"));
        }
        if self.min_box_extent <= 0.0 {
            return Err(Error::format("min_box_extent must be positive"));
        }
        Ok(())
    }
}

/// Uniform grid over a point set answering exact radius queries. The cell
/// size equals the query radius, so scanning the 27 cells around a query
/// point covers every candidate.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    radius: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Point3>,
}

impl NeighborIndex {
    fn key(&self, p: &Point3) -> [i64; 3] {
        [
            (p.x / self.radius).floor() as i64,
            (p.y / self.radius).floor() as i64,
            (p.z / self.radius).floor() as i64,
        ]
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of all points within `radius` of `p` (inclusive boundary).
    /// Includes the query point itself when it is part of the set.
    pub fn neighbors_within(&self, p: &Point3) -> Vec<usize> {
        let [kx, ky, kz] = self.key(p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.cells.get(&[kx + dx, ky + dy, kz + dz]) else {
                        continue;
                    };
                    for &i in bucket {
                        if self.points[i].distance(p) <= self.radius {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Build the radius index. `radius` must be positive; empty clouds are fine.
pub fn build_index(points: &[Point3], radius: f64) -> NeighborIndex {
    assert!(radius > 0.0, "neighbor radius must be positive");
    let mut index = NeighborIndex {
        radius,
        cells: HashMap::new(),
        points: points.to_vec(),
    };
    for (i, p) in points.iter().enumerate() {
        let key = index.key(p);
        index.cells.entry(key).or_default().push(i);
    }
    index
}

/// Angle at the farther of `t`, `s` between the segment to the nearer point
/// and the ray back to the sensor `o`, by the law of cosines. Always in
/// [0, pi]; exactly 0 for sensor-collinear pairs at distinct ranges.
pub fn pair_angle(o: &Point3, t: &Point3, s: &Point3) -> Result<f64> {
    let d = t.distance(s);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let (rt, rs) = (o.distance(t), o.distance(s));
    let l_long = rt.max(rs);
    let l_short = rt.min(rs);
    let cos = (l_long * l_long + d * d - l_short * l_short) / (2.0 * d * l_long);
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// Cylindrical proposal region: the cloud points whose xy-distance to the
/// picked point is at most r, plus the seed (the nearest cloud point).
#[derive(Debug, Clone)]
pub struct ProposalRegion {
    pub seed_index: usize,
    pub seed: Point3,
    pub indices: Vec<usize>,
}

/// Collect the z-unbounded cylinder of radius `r` around `p`. If `p` is not
/// itself a cloud point, the region point nearest to it (ties by lowest
/// index) becomes the seed.
pub fn extract_region(points: &[Point3], p: &Point3, r: f64) -> Result<ProposalRegion> {
    let mut indices = Vec::new();
    let mut seed_index = None;
    let mut best = f64::INFINITY;
    for (i, q) in points.iter().enumerate() {
        if q.xy_distance(p) <= r {
            indices.push(i);
            let d = q.distance(p);
            if d < best {
                best = d;
                seed_index = Some(i);
            }
        }
    }
    let Some(seed_index) = seed_index else {
        return Err(Error::EmptyProposalRegion);
    };
    Ok(ProposalRegion {
        seed_index,
        seed: points[seed_index],
        indices,
    })
}

/// Grow a cluster breadth-first from `region.seed_index`.
///
/// A frontier point expands to a neighbor iff the neighbor is not yet
/// merged, its xy-distance to the seed is within the region radius, and the
/// pair-angle predicate holds. Rejected neighbors stay eligible from other
/// frontier points, so the result is the closure of the merge relation and
/// is independent of point ordering. Coincident points always merge.
///
/// Returns sorted point indices; always contains the seed.
pub fn grow_cluster(
    points: &[Point3],
    index: &NeighborIndex,
    region: &ProposalRegion,
    cfg: &ClusterConfig,
    origin: &Point3,
) -> Result<Vec<usize>> {
    let seed = region.seed_index;
    if !region.indices.contains(&seed) {
        return Err(Error::SeedOutsideRegion(seed));
    }
    let mut merged = vec![false; points.len()];
    merged[seed] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(t) = queue.pop_front() {
        for s in index.neighbors_within(&points[t]) {
            if merged[s] {
                continue;
            }
            if points[s].xy_distance(&region.seed) > cfg.region_radius {
                continue;
            }
            let merge = match pair_angle(origin, &points[t], &points[s]) {
                Ok(theta) => match cfg.merge_when {
                    MergeWhen::AngleAbove => theta > cfg.lambda_theta,
                    MergeWhen::AngleBelow => theta < cfg.lambda_theta,
                },
                Err(Error::CoincidentPoints) => true,
                Err(e) => return Err(e),
            };
            if merge {
                merged[s] = true;
                queue.push_back(s);
            }
        }
    }
    Ok((0..points.len()).filter(|&i| merged[i]).collect())
}
