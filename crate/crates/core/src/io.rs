//! Dataset file formats: calibration, odometry, masks, trajectories and
//! the pipeline's diagnostic dumps.
//!
//! A dataset directory looks like
//!
//! ```text
//! dataset/
//!   calib.txt          # key-value calibration (see CalibFile)
//!   odometry.csv       # stamp,x,y,z,roll,pitch,yaw  (absolute, integrated)
//!   masks/000000.png   # one 8-bit binary mask per frame (0 / 255)
//!   groundtruth.tum    # optional: stamp x y z qx qy qz qw
//!   annotations.json   # optional: generator annotations for evaluation
//! ```

use crate::camera::{CameraModel, VirtualCamera};
use crate::eval::ScenarioAnnotations;
use crate::geom::Mat3;
use crate::mask::BinaryMask;
use crate::pose::Pose6;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

impl IoError {
    fn file(path: &Path, source: std::io::Error) -> Self {
        Self::File { path: path.display().to_string(), source }
    }

    fn format(path: &Path, msg: impl Into<String>) -> Self {
        Self::Format { path: path.display().to_string(), msg: msg.into() }
    }
}

/// Calibration file contents (units: meters, radians, pixels).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibFile {
    pub f_m: f64,
    pub h_c: f64,
    pub alpha: f64,
    pub pixel_pitch: f64,
    pub principal_point: [f64; 2],
    pub image_size: [u32; 2],
    pub virtual_camera: VirtualBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualBlock {
    pub k_v: [[f64; 3]; 3],
    pub x_c: f64,
    pub z_c: f64,
    pub bev_size: [u32; 2],
}

impl CalibFile {
    pub fn from_models(cam: &CameraModel<f64>, vc: &VirtualCamera<f64>) -> Self {
        Self {
            f_m: cam.f_m,
            h_c: cam.h_c,
            alpha: cam.alpha,
            pixel_pitch: cam.pixel_pitch,
            principal_point: [cam.principal_point.0, cam.principal_point.1],
            image_size: [cam.image_size.0, cam.image_size.1],
            virtual_camera: VirtualBlock {
                k_v: vc.k_v.m,
                x_c: vc.x_c,
                z_c: vc.z_c,
                bev_size: [vc.bev_size.0, vc.bev_size.1],
            },
        }
    }

    pub fn into_models(self) -> Result<(CameraModel<f64>, VirtualCamera<f64>), String> {
        let cam = CameraModel::new(
            self.f_m,
            self.h_c,
            self.alpha,
            (self.image_size[0], self.image_size[1]),
            self.pixel_pitch,
            (self.principal_point[0], self.principal_point[1]),
        )
        .map_err(|e| e.to_string())?;
        let v = self.virtual_camera;
        let vc = VirtualCamera::new(
            Mat3 { m: v.k_v },
            v.x_c,
            v.z_c,
            (v.bev_size[0], v.bev_size[1]),
        )
        .map_err(|e| e.to_string())?;
        Ok((cam, vc))
    }
}

pub fn write_calib(path: &Path, cam: &CameraModel<f64>, vc: &VirtualCamera<f64>) -> Result<(), IoError> {
    let text = toml::to_string_pretty(&CalibFile::from_models(cam, vc))
        .expect("calibration always serializes");
    std::fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn read_calib(path: &Path) -> Result<(CameraModel<f64>, VirtualCamera<f64>), IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let calib: CalibFile =
        toml::from_str(&text).map_err(|e| IoError::format(path, e.to_string()))?;
    calib.into_models().map_err(|msg| IoError::format(path, msg))
}

pub fn write_odometry(path: &Path, poses: &[Pose6<f64>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::format(path, e.to_string()))?;
    w.write_record(["stamp", "x", "y", "z", "roll", "pitch", "yaw"])
        .map_err(|e| IoError::format(path, e.to_string()))?;
    for p in poses {
        w.write_record([
            format!("{:.6}", p.stamp),
            format!("{:.9}", p.x),
            format!("{:.9}", p.y),
            format!("{:.9}", p.z),
            format!("{:.9}", p.roll),
            format!("{:.9}", p.pitch),
            format!("{:.9}", p.yaw),
        ])
        .map_err(|e| IoError::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| IoError::file(path, e))
}

pub fn read_odometry(path: &Path) -> Result<Vec<Pose6<f64>>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| IoError::format(path, e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| IoError::format(path, e.to_string()))?;
        if rec.len() != 7 {
            return Err(IoError::format(path, format!("row {}: expected 7 columns", i + 2)));
        }
        let mut vals = [0.0f64; 7];
        for (k, field) in rec.iter().enumerate() {
            vals[k] = field.trim().parse().map_err(|_| {
                IoError::format(path, format!("row {}: bad number {field:?}", i + 2))
            })?;
        }
        out.push(Pose6::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6]));
    }
    Ok(out)
}

/// TUM trajectory format: `stamp x y z qx qy qz qw` per line.
pub fn write_tum(path: &Path, poses: &[Pose6<f64>]) -> Result<(), IoError> {
    let mut buf = String::new();
    for p in poses {
        let [qx, qy, qz, qw] = p.quaternion();
        buf.push_str(&format!(
            "{:.6} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}\n",
            p.stamp, p.x, p.y, p.z, qx, qy, qz, qw
        ));
    }
    std::fs::write(path, buf).map_err(|e| IoError::file(path, e))
}

pub fn read_tum(path: &Path) -> Result<Vec<Pose6<f64>>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let vals = vals
            .map_err(|_| IoError::format(path, format!("line {}: bad number", i + 1)))?;
        if vals.len() != 8 {
            return Err(IoError::format(path, format!("line {}: expected 8 fields", i + 1)));
        }
        let (qx, qy, qz, qw) = (vals[4], vals[5], vals[6], vals[7]);
        // recover yaw/pitch/roll from the quaternion (ZYX order)
        let yaw = (2.0 * (qw * qz + qx * qy)).atan2(1.0 - 2.0 * (qy * qy + qz * qz));
        let sinp = 2.0 * (qw * qy - qz * qx);
        let pitch = sinp.clamp(-1.0, 1.0).asin();
        let roll = (2.0 * (qw * qx + qy * qz)).atan2(1.0 - 2.0 * (qx * qx + qy * qy));
        out.push(Pose6::new(vals[0], vals[1], vals[2], vals[3], roll, pitch, yaw));
    }
    Ok(out)
}

pub fn mask_path(dir: &Path, frame: usize) -> std::path::PathBuf {
    dir.join(format!("{frame:06}.png"))
}

pub fn write_mask_png(path: &Path, mask: &BinaryMask) -> Result<(), IoError> {
    let img = image::GrayImage::from_fn(mask.width, mask.height, |u, v| {
        image::Luma([if mask.get(u, v) { 255u8 } else { 0 }])
    });
    img.save(path).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn read_mask_png(path: &Path) -> Result<BinaryMask, IoError> {
    let img = image::open(path)
        .map_err(|e| IoError::format(path, e.to_string()))?
        .into_luma8();
    let mut mask = BinaryMask::new(img.width(), img.height());
    for (u, v, px) in img.enumerate_pixels() {
        if px.0[0] > 127 {
            mask.set(u, v, true);
        }
    }
    Ok(mask)
}

pub fn write_annotations(path: &Path, ann: &ScenarioAnnotations) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(ann).expect("annotations always serialize");
    std::fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn read_annotations(path: &Path) -> Result<ScenarioAnnotations, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::format(path, e.to_string()))
}

/// Simple SVG overlay of trajectories (ground truth, odometry, optimized).
pub fn write_overlay_svg(
    path: &Path,
    series: &[(&str, &str, &[Pose6<f64>])],
) -> Result<(), IoError> {
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, _, poses)| poses.iter().map(|p| (p.x, p.y)))
        .collect();
    if all.is_empty() {
        return std::fs::write(path, "<svg xmlns=\"http://www.w3.org/2000/svg\"/>")
            .map_err(|e| IoError::file(path, e));
    }
    let min_x = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - 2.0;
    let max_x = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + 2.0;
    let min_y = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - 2.0;
    let max_y = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + 2.0;
    let scale = 900.0 / (max_x - min_x).max(max_y - min_y);
    let w = ((max_x - min_x) * scale).ceil();
    let h = ((max_y - min_y) * scale).ceil();
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n"
    ));
    for (name, color, poses) in series {
        out.push_str(&format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" data-name=\"{name}\" points=\""));
        for p in poses.iter() {
            let sx = (p.x - min_x) * scale;
            let sy = (max_y - p.y) * scale;
            out.push_str(&format!("{sx:.2},{sy:.2} "));
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out).map_err(|e| IoError::file(path, e))
}

/// Line-delimited loop-constraint log:
/// `pose_i pose_j zx zy zyaw rms group shift`.
pub fn write_constraint_log(
    path: &Path,
    rows: &[(usize, usize, f64, f64, f64, f64, usize, usize)],
) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path).map_err(|e| IoError::file(path, e))?;
    writeln!(f, "# pose_i pose_j zx zy zyaw rms group shift").map_err(|e| IoError::file(path, e))?;
    for &(i, j, zx, zy, zyaw, rms, group, shift) in rows {
        writeln!(f, "{i} {j} {zx:.9} {zy:.9} {zyaw:.9} {rms:.9} {group} {shift}")
            .map_err(|e| IoError::file(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{default_camera, default_virtual_camera};

    #[test]
    fn calibration_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        let cam = default_camera();
        let vc = default_virtual_camera();
        write_calib(&path, &cam, &vc).unwrap();
        let (cam2, vc2) = read_calib(&path).unwrap();
        assert_eq!(cam.f_m, cam2.f_m);
        assert_eq!(cam.image_size, cam2.image_size);
        assert_eq!(vc.k_v.m, vc2.k_v.m);
        assert_eq!(vc.bev_size, vc2.bev_size);
    }

    #[test]
    fn unknown_calibration_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.txt");
        let cam = default_camera();
        let vc = default_virtual_camera();
        write_calib(&path, &cam, &vc).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.insert_str(0, "mystery_key = 3\n");
        std::fs::write(&path, text).unwrap();
        assert!(read_calib(&path).is_err());
    }

    #[test]
    fn odometry_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("odometry.csv");
        let poses: Vec<Pose6<f64>> = (0..5)
            .map(|i| Pose6::new(i as f64 * 0.1, i as f64, -0.5 * i as f64, 0.0, 0.01, -0.02, 0.3))
            .collect();
        write_odometry(&path, &poses).unwrap();
        let back = read_odometry(&path).unwrap();
        assert_eq!(back.len(), poses.len());
        for (a, b) in back.iter().zip(poses.iter()) {
            assert!((a.x - b.x).abs() < 1e-9);
            assert!((a.pitch - b.pitch).abs() < 1e-9);
        }
    }

    #[test]
    fn tum_round_trips_planar_poses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.tum");
        let poses: Vec<Pose6<f64>> = (0..5)
            .map(|i| Pose6::new(i as f64 * 0.1, i as f64, 2.0, 0.0, 0.05, -0.1, 0.8))
            .collect();
        write_tum(&path, &poses).unwrap();
        let back = read_tum(&path).unwrap();
        for (a, b) in back.iter().zip(poses.iter()) {
            assert!((a.x - b.x).abs() < 1e-8);
            assert!((a.yaw - b.yaw).abs() < 1e-8);
            assert!((a.pitch - b.pitch).abs() < 1e-8);
            assert!((a.roll - b.roll).abs() < 1e-8);
        }
    }

    #[test]
    fn mask_png_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mut mask = BinaryMask::new(64, 48);
        for v in 10..20 {
            for u in 30..44 {
                mask.set(u, v, true);
            }
        }
        write_mask_png(&path, &mask).unwrap();
        let back = read_mask_png(&path).unwrap();
        assert_eq!(back, mask);
    }
}
