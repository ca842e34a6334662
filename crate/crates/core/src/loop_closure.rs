//! Turning intra-group SGF re-observations into relative-pose constraints.
//!
//! The query instance's centroid-relative points are ICP-aligned onto an
//! earlier member of the same group (seeded by the best descriptor column
//! shift, which handles reverse loops), and the alignment is composed
//! with both instances' anchor-frame feature offsets to yield a relative
//! pose between the two anchor robot poses.

use crate::descriptor::best_shift;
use crate::geom::{Mat3, Se2};
use crate::group::{GroupSet, SgfInstance};
use crate::icp::IcpResult;
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LoopError {
    #[error("instances belong to different groups")]
    GroupMismatch,
}

pub const DEFAULT_TEMPORAL_GAP: usize = 30;
/// Floor on the translation sigma entering the information matrix.
pub const MIN_TRANSLATION_SIGMA: f64 = 0.02;

/// A relative SE(2) constraint between two anchor poses.
#[derive(Debug, Clone)]
pub struct LoopConstraint<T> {
    pub pose_i: usize,
    pub pose_j: usize,
    /// Pose j expressed in pose i's frame.
    pub z_ij: Se2<T>,
    pub information: Mat3<T>,
    pub residual_rms: T,
}

/// Find the loop-closure partner for a freshly assigned instance: the
/// descriptor-nearest earlier member of its group, at least `t_min`
/// frames back. Returns `(group id, member instance id, column shift)`.
pub fn find_loop_candidate<T: Real>(
    query: &SgfInstance<T>,
    instances: &[SgfInstance<T>],
    groups: &GroupSet<T>,
    t_min: usize,
) -> Option<(usize, usize, usize)> {
    let gid = query.group?;
    let group = groups.group(gid);
    let mut best: Option<(usize, usize, T)> = None;
    for member in &group.members {
        if member.instance == query.id {
            continue;
        }
        let inst = &instances[member.instance];
        if inst.frame + t_min > query.frame {
            continue;
        }
        let (shift, dist) =
            best_shift(&query.descriptor, &inst.descriptor).expect("uniform params");
        let closer = match best {
            None => true,
            Some((_, _, d)) => dist < d,
        };
        if closer {
            best = Some((member.instance, shift, dist));
        }
    }
    best.map(|(member_id, shift, _)| (gid, member_id, shift))
}

/// Compose an ICP alignment into a relative pose between anchor poses.
///
/// The ICP is expected to have mapped `b`'s centroid-relative points onto
/// `a`'s (`a` the earlier member, `b` the query), so with centroids
/// `c_a`, `c_b` in their anchor frames:
/// `z_ij = [R_icp | c_a + t_icp - R_icp * c_b]`, from pose `a.anchor` to
/// pose `b.anchor`. `None` when the ICP did not converge or the group is
/// flagged symmetric.
pub fn make_loop_constraint<T: Real>(
    a: &SgfInstance<T>,
    b: &SgfInstance<T>,
    icp: &IcpResult<T>,
    groups: &GroupSet<T>,
) -> Result<Option<LoopConstraint<T>>, LoopError> {
    let (ga, gb) = (a.group, b.group);
    if ga.is_none() || ga != gb {
        return Err(LoopError::GroupMismatch);
    }
    let gid = ga.expect("checked");
    if groups.group(gid).symmetric || !icp.converged {
        return Ok(None);
    }
    let c_a = a.points.centroid;
    let c_b = b.points.centroid;
    let t = c_a + icp.transform.t - icp.transform.rotation().apply(c_b);
    let z_ij = Se2 { t, yaw: icp.transform.yaw };

    let sigma_t = icp.rms.max(T::of(MIN_TRANSLATION_SIGMA));
    let sigma_yaw = sigma_t / T::of(crate::descriptor::DEFAULT_L_MAX);
    let information = Mat3::diag(
        T::one() / (sigma_t * sigma_t),
        T::one() / (sigma_t * sigma_t),
        T::one() / (sigma_yaw * sigma_yaw),
    );
    Ok(Some(LoopConstraint {
        pose_i: a.points.anchor_pose,
        pose_j: b.points.anchor_pose,
        z_ij,
        information,
        residual_rms: icp.rms,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{build_descriptor, DescriptorParams, SgfPoints};
    use crate::geom::Point2;
    use crate::icp::{icp_2d, icp_init_from_shift, IcpConfig};
    use crate::moments::HuVector;

    fn l_raw() -> Vec<Point2<f64>> {
        let mut pts = Vec::new();
        let mut y = 0.0;
        while y < 1.2 {
            let mut x = 0.0;
            while x < 0.3 {
                pts.push(Point2::new(x, y));
                x += 0.05;
            }
            y += 0.05;
        }
        let mut x = 0.3;
        while x < 1.0 {
            let mut y = 0.0;
            while y < 0.3 {
                pts.push(Point2::new(x, y));
                y += 0.05;
            }
            x += 0.05;
        }
        pts
    }

    /// Observe world points from a robot pose: p_local = pose^-1 * p_world.
    fn observe(world: &[Point2<f64>], pose: &Se2<f64>, id: usize, frame: usize) -> SgfInstance<f64> {
        let inv = pose.inverse();
        let points: Vec<Point2<f64>> = world.iter().map(|&p| inv.apply(p)).collect();
        let n = points.len() as f64;
        let c = points.iter().fold(Point2::zero(), |a, &p| a + p);
        let centroid = Point2::new(c.x / n, c.y / n);
        let pts = SgfPoints { points, centroid, anchor_pose: frame };
        let descriptor = build_descriptor(&pts, DescriptorParams::default());
        SgfInstance { id, frame, points: pts, descriptor, hu: HuVector { h: [0.0; 7] }, group: None }
    }

    fn close_loop(
        pose_a: Se2<f64>,
        pose_b: Se2<f64>,
    ) -> (SgfInstance<f64>, SgfInstance<f64>, GroupSet<f64>, Option<LoopConstraint<f64>>) {
        // marking placed 3 m ahead of pose_a in the world
        let world: Vec<Point2<f64>> = l_raw()
            .iter()
            .map(|&p| pose_a.apply(p + Point2::new(3.0, -0.5)))
            .collect();
        let mut groups = GroupSet::default();
        let mut a = observe(&world, &pose_a, 0, 10);
        let mut b = observe(&world, &pose_b, 1, 200);
        groups.assign(&mut a);
        groups.assign(&mut b);
        assert_eq!(a.group, b.group, "revisit must land in the same group");
        let mut instances = vec![a.clone(), b.clone()];
        let (_, member, shift) =
            find_loop_candidate(&b, &instances, &groups, DEFAULT_TEMPORAL_GAP).unwrap();
        assert_eq!(member, 0);
        let init = icp_init_from_shift(shift, b.descriptor.params.n_sectors);
        let member_inst = instances.remove(0);
        let icp = icp_2d(
            &b.points.centered(),
            &member_inst.points.centered(),
            init,
            &IcpConfig::default(),
        )
        .unwrap();
        let c = make_loop_constraint(&member_inst, &b, &icp, &groups).unwrap();
        (member_inst, b, groups, c)
    }

    #[test]
    fn forward_loop_recovers_relative_pose() {
        let pose_a = Se2::new(5.0, 2.0, 0.3);
        let pose_b = Se2::new(5.2, 1.9, 0.35);
        let (_, _, _, c) = close_loop(pose_a, pose_b);
        let c = c.expect("constraint emitted");
        let truth = pose_a.between(&pose_b);
        assert!((c.z_ij.t.x - truth.t.x).abs() < 0.02);
        assert!((c.z_ij.t.y - truth.t.y).abs() < 0.02);
        assert!(
            crate::scalar::wrap_angle(c.z_ij.yaw - truth.yaw).abs() < 0.5f64.to_radians(),
            "yaw {} vs {}",
            c.z_ij.yaw,
            truth.yaw
        );
        assert!(c.information.is_spd());
        assert_ne!(c.pose_i, c.pose_j);
    }

    #[test]
    fn reverse_loop_recovers_half_turn_heading() {
        let pose_a = Se2::new(5.0, 2.0, 0.2);
        let pose_b = Se2::new(11.0, 1.0, 0.2 + std::f64::consts::PI);
        let (_, _, _, c) = close_loop(pose_a, pose_b);
        let c = c.expect("constraint emitted");
        let truth = pose_a.between(&pose_b);
        assert!(
            crate::scalar::wrap_angle(c.z_ij.yaw - truth.yaw).abs() < 1.0f64.to_radians(),
            "yaw {} vs {}",
            c.z_ij.yaw,
            truth.yaw
        );
        assert!((c.z_ij.t.x - truth.t.x).abs() < 0.02);
        assert!((c.z_ij.t.y - truth.t.y).abs() < 0.02);
    }

    #[test]
    fn symmetric_group_emits_nothing() {
        let mut disk = Vec::new();
        for i in 0..240 {
            let ang = i as f64 / 240.0 * std::f64::consts::TAU;
            for k in 1..=8 {
                let r = 0.45 * k as f64 / 8.0;
                disk.push(Point2::new(r * ang.cos(), r * ang.sin()));
            }
        }
        let pose_a = Se2::new(1.0, 0.0, 0.0);
        let pose_b = Se2::new(1.1, 0.0, 3.0);
        let world: Vec<Point2<f64>> = disk.iter().map(|&p| pose_a.apply(p + Point2::new(3.0, 0.0))).collect();
        let mut groups = GroupSet::default();
        let mut a = observe(&world, &pose_a, 0, 0);
        let mut b = observe(&world, &pose_b, 1, 100);
        groups.assign(&mut a);
        groups.assign(&mut b);
        assert!(groups.group(a.group.unwrap()).symmetric);
        let icp = icp_2d(
            &b.points.centered(),
            &a.points.centered(),
            Se2::identity(),
            &IcpConfig::default(),
        )
        .unwrap();
        let c = make_loop_constraint(&a, &b, &icp, &groups).unwrap();
        assert!(c.is_none());
    }

    #[test]
    fn group_mismatch_is_an_error() {
        let pose = Se2::identity();
        let world: Vec<Point2<f64>> = l_raw().iter().map(|&p| p + Point2::new(3.0, 0.0)).collect();
        let mut groups = GroupSet::default();
        let mut a = observe(&world, &pose, 0, 0);
        groups.assign(&mut a);
        let b = observe(&world, &pose, 1, 100); // never assigned
        let icp = icp_2d(
            &b.points.centered(),
            &a.points.centered(),
            Se2::identity(),
            &IcpConfig::default(),
        )
        .unwrap();
        assert_eq!(make_loop_constraint(&a, &b, &icp, &groups).unwrap_err(), LoopError::GroupMismatch);
    }

    #[test]
    fn first_member_has_no_candidate() {
        let pose = Se2::identity();
        let world: Vec<Point2<f64>> = l_raw().iter().map(|&p| p + Point2::new(3.0, 0.0)).collect();
        let mut groups = GroupSet::default();
        let mut a = observe(&world, &pose, 0, 0);
        groups.assign(&mut a);
        let instances = vec![a.clone()];
        assert!(find_loop_candidate(&a, &instances, &groups, 30).is_none());
    }

    #[test]
    fn nearest_of_two_members_wins() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let pose = Se2::identity();
        let world: Vec<Point2<f64>> = l_raw().iter().map(|&p| p + Point2::new(3.0, 0.0)).collect();
        let mut groups = GroupSet::default();
        let mut a = observe(&world, &pose, 0, 0);
        // second member: same marking seen with a bit of noise
        let noisy: Vec<Point2<f64>> = world
            .iter()
            .map(|&p| Point2::new(p.x + rng.gen_range(-0.04..0.04), p.y + rng.gen_range(-0.04..0.04)))
            .collect();
        let mut m2 = observe(&noisy, &pose, 1, 50);
        let mut q = observe(&world, &pose, 2, 120);
        groups.assign(&mut a);
        groups.assign(&mut m2);
        groups.assign(&mut q);
        let instances = vec![a.clone(), m2.clone(), q.clone()];
        let (_, member, _) = find_loop_candidate(&q, &instances, &groups, 30).unwrap();

        // exhaustive oracle over earlier members
        let d0 = best_shift(&q.descriptor, &a.descriptor).unwrap().1;
        let d1 = best_shift(&q.descriptor, &m2.descriptor).unwrap().1;
        let want = if d0 <= d1 { 0 } else { 1 };
        assert_eq!(member, want);
    }

    #[test]
    fn temporal_gap_excludes_recent_members() {
        let pose = Se2::identity();
        let world: Vec<Point2<f64>> = l_raw().iter().map(|&p| p + Point2::new(3.0, 0.0)).collect();
        let mut groups = GroupSet::default();
        let mut a = observe(&world, &pose, 0, 100);
        let mut q = observe(&world, &pose, 1, 110);
        groups.assign(&mut a);
        groups.assign(&mut q);
        let instances = vec![a.clone(), q.clone()];
        assert!(find_loop_candidate(&q, &instances, &groups, 30).is_none());
    }
}
