//! KITTI ingestion: velodyne binary clouds and label/calibration text.

use crate::error::{Error, Result};
use crate::geometry::{Box7, Point3};
use std::f64::consts::FRAC_PI_2;

/// One velodyne return; intensity is carried through unused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelodynePoint {
    pub point: Point3,
    pub intensity: f32,
}

/// Decode a velodyne scan: little-endian (x, y, z, intensity) float32
/// quadruples. Byte lengths not divisible by 16 fail with the offset of the
/// first incomplete record.
pub fn read_kitti_velodyne(bytes: &[u8]) -> Result<Vec<VelodynePoint>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::TruncatedVelodyne {
            len: bytes.len(),
            offset: bytes.len() - bytes.len() % 16,
        });
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes(rec[i..i + 4].try_into().expect("4 bytes"));
            VelodynePoint {
                point: Point3::new(f(0) as f64, f(4) as f64, f(8) as f64),
                intensity: f(12),
            }
        })
        .collect())
}

/// Rigid transform `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            r: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            t: [0.0; 3],
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let mut out = self.t;
        for i in 0..3 {
            for j in 0..3 {
                out[i] += self.r[i][j] * p[j];
            }
        }
        out
    }

    /// Inverse of a rigid transform: `x -> R^T (x - t)`.
    pub fn inverse(&self) -> Self {
        let mut rt = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rt[i][j] = self.r[j][i];
            }
        }
        let mut t = [0.0; 3];
        for (i, ti) in t.iter_mut().enumerate() {
            *ti = -(rt[i][0] * self.t[0] + rt[i][1] * self.t[1] + rt[i][2] * self.t[2]);
        }
        RigidTransform { r: rt, t }
    }
}

/// Name of the calibration entry mapping cloud coordinates to camera
/// coordinates (a 3x4 row-major matrix in KITTI calib files).
pub const VELO_TO_CAM_KEY: &str = "Tr_velo_to_cam";

/// Parse the cloud-to-camera rigid transform out of a KITTI calibration
/// file. Fails naming the entry when it is absent or malformed.
pub fn parse_kitti_calib(calib: &str) -> Result<RigidTransform> {
    for line in calib.lines() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        if key.trim() != VELO_TO_CAM_KEY {
            continue;
        }
        let vals: Vec<f64> = rest
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::MissingCalibEntry(VELO_TO_CAM_KEY.into()))?;
        if vals.len() != 12 {
            return Err(Error::MissingCalibEntry(VELO_TO_CAM_KEY.into()));
        }
        let row = |i: usize| [vals[i * 4], vals[i * 4 + 1], vals[i * 4 + 2]];
        return Ok(RigidTransform {
            r: [row(0), row(1), row(2)],
            t: [vals[3], vals[7], vals[11]],
        });
    }
    Err(Error::MissingCalibEntry(VELO_TO_CAM_KEY.into()))
}

/// Map a KITTI object type to this artifact's label space. Van and Truck
/// are the held-out classes; trainable classes pass through lowercased;
/// everything else (DontCare, Misc, Tram, Person_sitting) is dropped.
fn map_type(kitti_type: &str) -> Option<String> {
    match kitti_type {
        "Car" | "Pedestrian" | "Cyclist" => Some(kitti_type.to_lowercase()),
        "Van" | "Truck" => Some(String::from("unknown")),
        _ => None,
    }
}

/// Parse KITTI label lines into cloud-frame boxes.
///
/// Label positions are bottom centers in camera coordinates; they are
/// carried into the cloud frame through the inverse calibration transform
/// and lifted by h/2 along cloud z to volumetric centers. The camera-frame
/// rotation_y maps to cloud yaw as `-ry - pi/2`, the usual relation for the
/// KITTI sensor rig.
pub fn read_kitti_labels(labels: &str, calib: &str) -> Result<Vec<Box7>> {
    let cam_to_velo = parse_kitti_calib(calib)?.inverse();
    let mut boxes = Vec::new();
    for (lineno, line) in labels.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 15 {
            return Err(Error::format(format!(
                "label line {}: expected 15 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let Some(label) = map_type(fields[0]) else {
            continue;
        };
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| {
                Error::format(format!(
                    "label line {}: field {} is not a number",
                    lineno + 1,
                    i
                ))
            })
        };
        let (h, w, l) = (num(8)?, num(9)?, num(10)?);
        let cam = [num(11)?, num(12)?, num(13)?];
        let ry = num(14)?;
        let velo = cam_to_velo.apply(cam);
        boxes.push(Box7::new(
            label,
            velo[0],
            velo[1],
            velo[2] + h / 2.0,
            w,
            l,
            h,
            -ry - FRAC_PI_2,
        ));
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn encode(points: &[(f32, f32, f32, f32)]) -> Vec<u8> {
        let mut bytes = Vec::new();
        for &(x, y, z, i) in points {
            for v in [x, y, z, i] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    #[test]
    fn velodyne_roundtrip() {
        let bytes = encode(&[
            (1.0, 0.0, 0.0, 0.5),
            (-2.5, 3.25, -0.125, 0.0),
            (100.0, -100.0, 7.5, 1.0),
        ]);
        assert_eq!(bytes.len(), 48);
        let pts = read_kitti_velodyne(&bytes).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].point, Point3::new(1.0, 0.0, 0.0));
        assert_eq!(pts[0].intensity, 0.5);
        assert_eq!(pts[1].point, Point3::new(-2.5, 3.25, -0.125));
        assert_eq!(pts[2].point, Point3::new(100.0, -100.0, 7.5));
    }

    #[test]
    fn velodyne_empty_ok() {
        assert!(read_kitti_velodyne(&[]).unwrap().is_empty());
    }

    #[test]
    fn velodyne_truncation_reports_offset() {
        let bytes = vec![0u8; 17];
        match read_kitti_velodyne(&bytes) {
            Err(Error::TruncatedVelodyne { len: 17, offset: 16 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    const IDENTITY_CALIB: &str =
        "P2: 1 0 0 0 0 1 0 0 0 0 1 0\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";

    #[test]
    fn labels_identity_transform_lifts_z() {
        let labels = "Car 0.0 0 -1.0 0 0 50 50 2.0 1.6 3.9 0.0 1.0 10.0 0.0\n";
        let boxes = read_kitti_labels(labels, IDENTITY_CALIB).unwrap();
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0];
        assert_eq!(b.label, "car");
        assert_relative_eq!(b.cx, 0.0);
        assert_relative_eq!(b.cy, 1.0);
        assert_relative_eq!(b.cz, 11.0); // bottom center lifted by h/2
        assert_eq!((b.h, b.w, b.l), (2.0, 1.6, 3.9));
        assert_relative_eq!(b.yaw, -FRAC_PI_2);
    }

    #[test]
    fn labels_map_and_drop_types() {
        let labels = "\
Van 0 0 0 0 0 1 1 2.0 1.8 5.0 1.0 2.0 20.0 0.1
DontCare -1 -1 -10 0 0 1 1 -1 -1 -1 -1000 -1000 -1000 -10
Truck 0 0 0 0 0 1 1 3.0 2.5 8.0 -2.0 1.5 15.0 0.0
Pedestrian 0 0 0 0 0 1 1 1.8 0.6 0.7 3.0 1.2 8.0 1.2
";
        let boxes = read_kitti_labels(labels, IDENTITY_CALIB).unwrap();
        let labels: Vec<&str> = boxes.iter().map(|b| b.label.as_str()).collect();
        assert_eq!(labels, vec!["unknown", "unknown", "pedestrian"]);
    }

    #[test]
    fn labels_apply_inverse_transform() {
        // velo->cam: swap axes (x,y,z)_cam = (-y, -z, x)_velo, translate cam x by 0.5
        let calib = "Tr_velo_to_cam: 0 -1 0 0.5 0 0 -1 0 1 0 0 0\n";
        let labels = "Car 0 0 0 0 0 1 1 2.0 1.6 3.9 0.5 -1.0 7.0 0.0\n";
        let b = &read_kitti_labels(labels, calib).unwrap()[0];
        // cam (0.5,-1,7): undo translation -> (0,-1,7); R^T -> velo (7, 0, 1)
        assert_relative_eq!(b.cx, 7.0, epsilon = 1e-12);
        assert_relative_eq!(b.cy, 0.0, epsilon = 1e-12);
        assert_relative_eq!(b.cz, 1.0 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn missing_calib_entry_is_named() {
        let labels = "Car 0 0 0 0 0 1 1 2 1.6 3.9 0 1 10 0\n";
        match read_kitti_labels(labels, "P2: 1 0 0 0\n") {
            Err(Error::MissingCalibEntry(name)) => assert_eq!(name, "Tr_velo_to_cam"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn transform_inverse_roundtrip() {
        // exactly orthonormal rotation (axis permutation with sign flips)
        let t = parse_kitti_calib("Tr_velo_to_cam: 0 -1 0 0.5 0 0 -1 0.25 1 0 0 -0.125\n").unwrap();
        let inv = t.inverse();
        let p = [3.7, -1.2, 0.8];
        let back = inv.apply(t.apply(p));
        for i in 0..3 {
            assert_relative_eq!(back[i], p[i], epsilon = 1e-12);
        }
    }
}
