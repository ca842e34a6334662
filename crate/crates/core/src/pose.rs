//! Timestamped 6-DoF robot poses.
//!
//! Frames are FLU (x forward, y left, z up). Orientation is intrinsic
//! `Rz(yaw) * Ry(pitch) * Rroll`, where the roll rotation is taken about
//! the forward/optical axis after the pitch is applied. With that
//! parameterization positive pitch tips the camera toward the ground,
//! which is exactly the pitch-change angle consumed by the projection
//! compensation, and roll is the in-image-plane rotation it undoes.

use crate::geom::Se2;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose6<T> {
    /// Timestamp, seconds.
    pub stamp: f64,
    pub x: T,
    pub y: T,
    pub z: T,
    pub roll: T,
    pub pitch: T,
    pub yaw: T,
}

impl<T: Real> Pose6<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(stamp: f64, x: T, y: T, z: T, roll: T, pitch: T, yaw: T) -> Self {
        Self { stamp, x, y, z, roll, pitch, yaw }
    }

    pub fn origin(stamp: f64) -> Self {
        let z = T::zero();
        Self::new(stamp, z, z, z, z, z, z)
    }

    /// The planar part used by the pose graph.
    pub fn se2(&self) -> Se2<T> {
        Se2::new(self.x, self.y, self.yaw)
    }

    /// Replace the planar part, keeping z/roll/pitch metadata.
    pub fn with_se2(&self, p: Se2<T>) -> Self {
        Self { x: p.t.x, y: p.t.y, yaw: p.yaw, ..*self }
    }

    /// Unit quaternion `(qx, qy, qz, qw)` of `Rz(yaw)*Ry(pitch)*Rx(roll)`,
    /// used for trajectory-file output.
    pub fn quaternion(&self) -> [T; 4] {
        let half = T::of(0.5);
        let (sr, cr) = (self.roll * half).sin_cos();
        let (sp, cp) = (self.pitch * half).sin_cos();
        let (sy, cy) = (self.yaw * half).sin_cos();
        let qw = cr * cp * cy + sr * sp * sy;
        let qx = sr * cp * cy - cr * sp * sy;
        let qy = cr * sp * cy + sr * cp * sy;
        let qz = cr * cp * sy - sr * sp * cy;
        [qx, qy, qz, qw]
    }
}
