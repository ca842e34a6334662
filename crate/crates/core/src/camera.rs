//! Motion-compensated inverse perspective mapping.
//!
//! A forward-looking camera at height `h_c` with its optical axis
//! depressed by `alpha` sees the ground plane ahead. Pixel coordinates are
//! first converted to metric image-plane coordinates, de-rolled, and then
//! intersected with the ground plane; a pitch-change term is folded into
//! the depression angle. The resulting ground points are re-projected
//! through a nadir-looking virtual camera to form the bird's-eye view.
//!
//! Roll/pitch change angles come from a sliding queue of recent poses, so
//! transient unevenness (speed bumps, cracks) is compensated while
//! sustained slopes fade into the local reference plane.

use crate::mask::BinaryMask;
use crate::pose::Pose6;
use crate::scalar::Real;
use crate::geom::{Mat3, Vec3};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    /// The pixel ray misses the ground ahead of the camera.
    #[error("ray does not intersect the ground ahead")]
    Horizon,
    /// Compensation was requested from an empty pose queue.
    #[error("pose queue is empty")]
    EmptyQueue,
    /// A mask with the wrong dimensions was supplied.
    #[error("mask is {got_w}x{got_h}, camera expects {want_w}x{want_h}")]
    DimensionMismatch { got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(&'static str),
}

/// A point on the ground plane, in meters, relative to the camera's
/// ground-projected position: `x` forward, `y` left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> GroundPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

/// Front-camera intrinsics and mounting extrinsics.
#[derive(Debug, Clone, Copy)]
pub struct CameraModel<T> {
    /// Focal length, meters.
    pub f_m: T,
    /// Camera height above the ground plane, meters.
    pub h_c: T,
    /// Depression angle between optical axis and ground plane, radians.
    pub alpha: T,
    /// Image width and height, pixels.
    pub image_size: (u32, u32),
    /// Meters per pixel on the sensor plane.
    pub pixel_pitch: T,
    /// Principal point `(u0, v0)`, pixels.
    pub principal_point: (T, T),
}

impl<T: Real> CameraModel<T> {
    pub fn new(
        f_m: T,
        h_c: T,
        alpha: T,
        image_size: (u32, u32),
        pixel_pitch: T,
        principal_point: (T, T),
    ) -> Result<Self, CameraError> {
        if !(h_c > T::zero()) {
            return Err(CameraError::InvalidCalibration("h_c must be positive"));
        }
        if !(alpha > T::zero() && alpha < T::of(std::f64::consts::FRAC_PI_2)) {
            return Err(CameraError::InvalidCalibration("alpha must lie in (0, pi/2)"));
        }
        if !(f_m > T::zero()) {
            return Err(CameraError::InvalidCalibration("f_m must be positive"));
        }
        if !(pixel_pitch > T::zero()) {
            return Err(CameraError::InvalidCalibration("pixel_pitch must be positive"));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(CameraError::InvalidCalibration("image_size must be nonzero"));
        }
        Ok(Self { f_m, h_c, alpha, image_size, pixel_pitch, principal_point })
    }

    /// Pixel -> metric image-plane coordinates. `c` grows to the right,
    /// `r` grows toward the image bottom, matching the projection below
    /// (rows nearer the bottom hit the ground closer to the camera).
    pub fn metric_from_pixel(&self, u: T, v: T) -> (T, T) {
        let c = (u - self.principal_point.0) * self.pixel_pitch;
        let r = (v - self.principal_point.1) * self.pixel_pitch;
        (c, r)
    }

    pub fn pixel_from_metric(&self, c: T, r: T) -> (T, T) {
        (
            self.principal_point.0 + c / self.pixel_pitch,
            self.principal_point.1 + r / self.pixel_pitch,
        )
    }
}

/// Nadir virtual camera producing the BEV image.
#[derive(Debug, Clone, Copy)]
pub struct VirtualCamera<T> {
    /// 3x3 intrinsic matrix of the virtual camera.
    pub k_v: Mat3<T>,
    /// Forward offset of the virtual camera center, meters.
    pub x_c: T,
    /// Height of the virtual camera center, meters.
    pub z_c: T,
    /// BEV image width and height, pixels.
    pub bev_size: (u32, u32),
}

impl<T: Real> VirtualCamera<T> {
    pub fn new(k_v: Mat3<T>, x_c: T, z_c: T, bev_size: (u32, u32)) -> Result<Self, CameraError> {
        if !(z_c > T::zero()) {
            return Err(CameraError::InvalidCalibration("z_c must be positive"));
        }
        let m = &k_v.m;
        let lower_zero = m[1][0] == T::zero() && m[2][0] == T::zero() && m[2][1] == T::zero();
        if !lower_zero || !(m[0][0] > T::zero()) || !(m[1][1] > T::zero()) {
            return Err(CameraError::InvalidCalibration(
                "k_v must be upper triangular with positive focal entries",
            ));
        }
        if bev_size.0 == 0 || bev_size.1 == 0 {
            return Err(CameraError::InvalidCalibration("bev_size must be nonzero"));
        }
        Ok(Self { k_v, x_c, z_c, bev_size })
    }

    /// Default nadir camera: 10 m high, centered `x_c` meters ahead,
    /// square BEV covering `range` meters of forward ground.
    pub fn nadir(bev_size: (u32, u32), range: T, z_c: T) -> Result<Self, CameraError> {
        let w = T::of_usize(bev_size.0 as usize);
        let h = T::of_usize(bev_size.1 as usize);
        let half = T::of(0.5);
        // pixels-per-meter chosen so `range` meters of forward ground span the image
        let focal = z_c * h / range;
        let k_v = Mat3::from_rows(
            [focal, T::zero(), w * half],
            [T::zero(), focal, h * half],
            [T::zero(), T::zero(), T::one()],
        );
        Self::new(k_v, range * half, z_c, bev_size)
    }

    /// Fixed remap of ground coordinates into the virtual camera frame.
    fn ground_remap(&self) -> Mat3<T> {
        Mat3::from_rows(
            [T::zero(), -T::one(), T::zero()],
            [-T::one(), T::zero(), self.x_c],
            [T::zero(), T::zero(), self.z_c],
        )
    }
}

/// Roll and pitch change relative to the local ground reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState<T> {
    /// Roll change, radians.
    pub psi: T,
    /// Pitch change, radians; positive tips the camera toward the ground.
    pub theta: T,
}

impl<T: Real> MotionState<T> {
    pub fn new(psi: T, theta: T) -> Self {
        Self { psi, theta }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }
}

/// Roll compensation: rotate metric image coordinates by `-psi` before
/// projecting to the ground.
pub fn roll_compensate<T: Real>(c: T, r: T, psi: T) -> (T, T) {
    let (s, co) = psi.sin_cos();
    (c * co + r * s, -c * s + r * co)
}

/// Project a pixel onto the ground plane with roll/pitch compensation.
///
/// `x = h_c * cot(alpha + phi + theta)` with `phi = atan(r_psi / f_m)`;
/// the lateral coordinate follows the rotated-pinhole geometry,
/// `y = -x * (c_psi / f_m) * cos(phi) / cos(alpha + phi + theta)`, which
/// agrees with a 3D ray cast through the camera pitched by `alpha +
/// theta` and rolled by `psi` about its optical axis.
pub fn pixel_to_ground<T: Real>(
    u: T,
    v: T,
    cam: &CameraModel<T>,
    m: &MotionState<T>,
) -> Result<GroundPoint<T>, CameraError> {
    let (c, r) = cam.metric_from_pixel(u, v);
    let (c_psi, r_psi) = roll_compensate(c, r, m.psi);
    let phi = (r_psi / cam.f_m).atan();
    let arg = cam.alpha + phi + m.theta;
    if !(arg > T::zero()) || !(arg < T::of(std::f64::consts::FRAC_PI_2)) {
        return Err(CameraError::Horizon);
    }
    let sa = arg.sin();
    let ca = arg.cos();
    let x = cam.h_c * ca / sa;
    // y = -x * (c_psi/f_m) * cos(phi)/cos(arg), with the cot folded in
    let y = -cam.h_c * (c_psi / cam.f_m) * phi.cos() / sa;
    Ok(GroundPoint::new(x, y))
}

/// Exact inverse of [`pixel_to_ground`]: project a ground point into the
/// front image under the same motion state. `None` when the point is not
/// ahead of the camera or falls outside any finite image plane.
pub fn ground_to_pixel<T: Real>(
    p: GroundPoint<T>,
    cam: &CameraModel<T>,
    m: &MotionState<T>,
) -> Option<(T, T)> {
    if !(p.x > T::zero()) {
        return None;
    }
    let arg = cam.h_c.atan2(p.x);
    let phi = arg - cam.alpha - m.theta;
    let quarter = T::of(std::f64::consts::FRAC_PI_2 - 1e-6);
    if phi.abs() >= quarter {
        return None;
    }
    let r_psi = cam.f_m * phi.tan();
    let cos_phi = phi.cos();
    if cos_phi.abs() < T::of(1e-12) {
        return None;
    }
    let hyp = (cam.h_c * cam.h_c + p.x * p.x).sqrt();
    let c_psi = -p.y * cam.f_m / (hyp * cos_phi);
    // undo the roll compensation
    let (s, co) = m.psi.sin_cos();
    let c = c_psi * co - r_psi * s;
    let r = c_psi * s + r_psi * co;
    Some(cam.pixel_from_metric(c, r))
}

/// Project a ground point into the BEV image (homogeneous-normalized).
pub fn ground_to_bev<T: Real>(p: GroundPoint<T>, vc: &VirtualCamera<T>) -> (T, T) {
    let g = vc.ground_remap().mul_vec(Vec3::new(p.x, p.y, T::one()));
    let n = Vec3::new(g.v[0] / g.v[2], g.v[1] / g.v[2], T::one());
    let px = vc.k_v.mul_vec(n);
    (px.v[0] / px.v[2], px.v[1] / px.v[2])
}

/// Exact inverse of [`ground_to_bev`].
pub fn bev_to_ground<T: Real>(u_bev: T, v_bev: T, vc: &VirtualCamera<T>) -> GroundPoint<T> {
    let chain = vc.k_v.mul(&vc.ground_remap().scale(T::one() / vc.z_c));
    let inv = chain.inverse().expect("BEV projection chain is full rank");
    let g = inv.mul_vec(Vec3::new(u_bev, v_bev, T::one()));
    GroundPoint::new(g.v[0] / g.v[2], g.v[1] / g.v[2])
}

/// Sliding queue of recent poses used to estimate the local ground
/// reference attitude.
#[derive(Debug, Clone)]
pub struct PoseQueue<T> {
    capacity: usize,
    pitch_gate: T,
    entries: VecDeque<Pose6<T>>,
}

pub const DEFAULT_QUEUE_LEN: usize = 50;
pub const DEFAULT_PITCH_GATE: f64 = 0.025;

impl<T: Real> PoseQueue<T> {
    pub fn new(capacity: usize, pitch_gate: T) -> Self {
        Self { capacity, pitch_gate, entries: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, pose: Pose6<T>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(pose);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Pose6<T>> {
        self.entries.iter()
    }

    pub fn pitch_gate(&self) -> T {
        self.pitch_gate
    }
}

impl<T: Real> Default for PoseQueue<T> {
    fn default() -> Self {
        Self::new(DEFAULT_QUEUE_LEN, T::of(DEFAULT_PITCH_GATE))
    }
}

/// Roll/pitch change of `current` relative to the gated queue mean.
///
/// Two passes: mean pitch over the whole queue, then entries deviating
/// from it by more than the gate are dropped (speed bumps), then the
/// reference attitude is the mean over what is left.
pub fn compensation_from_queue<T: Real>(
    q: &PoseQueue<T>,
    current: &Pose6<T>,
) -> Result<MotionState<T>, CameraError> {
    if q.is_empty() {
        return Err(CameraError::EmptyQueue);
    }
    let n = T::of_usize(q.len());
    let mean_pitch = q.entries().map(|p| p.pitch).sum::<T>() / n;
    let gate = q.pitch_gate();
    let kept: Vec<&Pose6<T>> = q
        .entries()
        .filter(|p| (p.pitch - mean_pitch).abs() <= gate)
        .collect();
    let (ref_roll, ref_pitch) = if kept.is_empty() {
        // everything gated out: fall back to the ungated mean
        let mean_roll = q.entries().map(|p| p.roll).sum::<T>() / n;
        (mean_roll, mean_pitch)
    } else {
        let k = T::of_usize(kept.len());
        (
            kept.iter().map(|p| p.roll).sum::<T>() / k,
            kept.iter().map(|p| p.pitch).sum::<T>() / k,
        )
    };
    Ok(MotionState::new(current.roll - ref_roll, current.pitch - ref_pitch))
}

/// BEV mask plus the projection footprint it was resampled from. Pixels
/// outside `valid` had no source pixel (above the horizon, behind the
/// near limit, or outside the front image).
#[derive(Debug, Clone)]
pub struct BevMask {
    pub mask: BinaryMask,
    pub valid: BinaryMask,
}

/// Inverse-warp a front-camera binary mask into the BEV image with
/// nearest-neighbor sampling. Every set BEV pixel traces back to a set
/// source pixel.
pub fn warp_mask_to_bev<T: Real>(
    mask: &BinaryMask,
    cam: &CameraModel<T>,
    vc: &VirtualCamera<T>,
    m: &MotionState<T>,
) -> Result<BevMask, CameraError> {
    if (mask.width, mask.height) != cam.image_size {
        return Err(CameraError::DimensionMismatch {
            got_w: mask.width,
            got_h: mask.height,
            want_w: cam.image_size.0,
            want_h: cam.image_size.1,
        });
    }
    let (bw, bh) = vc.bev_size;
    let mut out = BinaryMask::new(bw, bh);
    let mut valid = BinaryMask::new(bw, bh);

    let k = &vc.k_v.m;
    let axis_aligned = k[0][1] == T::zero();
    if axis_aligned {
        warp_rows_fast(mask, cam, vc, m, &mut out, &mut valid);
    } else {
        for j in 0..bh {
            for i in 0..bw {
                let g = bev_to_ground(T::of_usize(i as usize), T::of_usize(j as usize), vc);
                if let Some((u, v)) = ground_to_pixel(g, cam, m) {
                    sample_nn(mask, u.as_f64(), v.as_f64(), i, j, &mut out, &mut valid);
                }
            }
        }
    }
    Ok(BevMask { mask: out, valid })
}

/// Row-wise warp for axis-aligned virtual cameras: each BEV row maps to a
/// constant forward distance, so the source pixel moves linearly along
/// the row and the trigonometry is hoisted out of the inner loop.
fn warp_rows_fast<T: Real>(
    mask: &BinaryMask,
    cam: &CameraModel<T>,
    vc: &VirtualCamera<T>,
    m: &MotionState<T>,
    out: &mut BinaryMask,
    valid: &mut BinaryMask,
) {
    let (bw, bh) = vc.bev_size;
    let k = &vc.k_v.m;
    let (fx, fy) = (k[0][0], k[1][1]);
    let (cx, cy) = (k[0][2], k[1][2]);
    let (sin_psi, cos_psi) = m.psi.sin_cos();

    for j in 0..bh {
        let x = vc.x_c - vc.z_c * (T::of_usize(j as usize) - cy) / fy;
        if !(x > T::zero()) {
            continue;
        }
        let arg = cam.h_c.atan2(x);
        let phi = arg - cam.alpha - m.theta;
        if phi.abs() >= T::of(std::f64::consts::FRAC_PI_2 - 1e-6) {
            continue;
        }
        let r_psi = cam.f_m * phi.tan();
        let cos_phi = phi.cos();
        if cos_phi.abs() < T::of(1e-12) {
            continue;
        }
        let hyp = (cam.h_c * cam.h_c + x * x).sqrt();
        // c_psi = slope * y, with y linear in the BEV column index
        let slope = -cam.f_m / (hyp * cos_phi);
        let y0 = -vc.z_c * (T::zero() - cx) / fx;
        let dy = -vc.z_c / fx;

        // (c, r) = R(psi) (c_psi, r_psi); both linear in the column index
        let c0 = slope * y0 * cos_psi - r_psi * sin_psi;
        let dc = slope * dy * cos_psi;
        let r0 = slope * y0 * sin_psi + r_psi * cos_psi;
        let dr = slope * dy * sin_psi;

        let inv_pitch = T::one() / cam.pixel_pitch;
        let u0 = cam.principal_point.0 + c0 * inv_pitch;
        let du = dc * inv_pitch;
        let v0 = cam.principal_point.1 + r0 * inv_pitch;
        let dv = dr * inv_pitch;

        for i in 0..bw {
            let fi = T::of_usize(i as usize);
            let u = (u0 + du * fi).as_f64();
            let v = (v0 + dv * fi).as_f64();
            sample_nn(mask, u, v, i, j, out, valid);
        }
    }
}

fn sample_nn(
    mask: &BinaryMask,
    u: f64,
    v: f64,
    i: u32,
    j: u32,
    out: &mut BinaryMask,
    valid: &mut BinaryMask,
) {
    let su = u.round();
    let sv = v.round();
    if su < 0.0 || sv < 0.0 || su >= mask.width as f64 || sv >= mask.height as f64 {
        return;
    }
    valid.set(i, j, true);
    if mask.get(su as u32, sv as u32) {
        out.set(i, j, true);
    }
}
