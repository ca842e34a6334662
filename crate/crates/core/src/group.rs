//! Online clustering of SGF descriptors into feature groups.
//!
//! Each group keeps a mean descriptor in the orientation of its seed
//! member; joining members are column-shifted into that frame before the
//! mean is updated. A group whose mean descriptor nearly matches itself
//! under a nontrivial rotation is flagged symmetric and never used for
//! loop closure.

use crate::descriptor::{
    best_shift, symmetry_test, Descriptor, SgfPoints, DEFAULT_SYMMETRY_TOL,
};
use crate::moments::HuVector;
use crate::scalar::Real;

pub const DEFAULT_GROUP_THRESHOLD: f64 = 0.7;

/// A described feature instance ready for clustering and loop closure.
#[derive(Debug, Clone)]
pub struct SgfInstance<T> {
    pub id: usize,
    /// Frame the instance was selected at (also its anchor pose index).
    pub frame: usize,
    pub points: SgfPoints<T>,
    pub descriptor: Descriptor<T>,
    pub hu: HuVector<T>,
    pub group: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct GroupMember {
    pub instance: usize,
    /// Column shift aligning the member's descriptor into the seed frame.
    pub shift: usize,
}

#[derive(Debug, Clone)]
pub struct SgfGroup<T> {
    pub id: usize,
    pub mean_descriptor: Descriptor<T>,
    pub members: Vec<GroupMember>,
    pub symmetric: bool,
    aligned: Vec<Descriptor<T>>,
}

impl<T: Real> SgfGroup<T> {
    fn recompute_mean(&mut self, symmetry_tol: T) {
        let params = self.mean_descriptor.params;
        let mut mean = Descriptor::zeros(params);
        let k = T::of_usize(self.aligned.len());
        for d in &self.aligned {
            for ring in 0..params.n_rings {
                for s in 0..params.n_sectors {
                    let v = mean.get(ring, s) + d.get(ring, s) / k;
                    mean.set(ring, s, v);
                }
            }
        }
        self.mean_descriptor = mean;
        self.symmetric = symmetry_test(&self.mean_descriptor, symmetry_tol);
    }
}

/// The evolving set of SGF groups, single-writer.
#[derive(Debug, Clone)]
pub struct GroupSet<T> {
    groups: Vec<SgfGroup<T>>,
    pub new_group_threshold: T,
    pub symmetry_tol: T,
}

impl<T: Real> GroupSet<T> {
    pub fn new(new_group_threshold: T, symmetry_tol: T) -> Self {
        Self { groups: Vec::new(), new_group_threshold, symmetry_tol }
    }

    pub fn groups(&self) -> &[SgfGroup<T>] {
        &self.groups
    }

    pub fn group(&self, id: usize) -> &SgfGroup<T> {
        &self.groups[id]
    }

    /// Assign an instance to the nearest group (by best-shift distance to
    /// the group mean), or seed a new group when every distance is at or
    /// above the threshold. Updates the instance's group id and returns it.
    pub fn assign(&mut self, inst: &mut SgfInstance<T>) -> usize {
        let mut best: Option<(usize, usize, T)> = None; // (group, shift, dist)
        for g in &self.groups {
            let (shift, dist) =
                best_shift(&inst.descriptor, &g.mean_descriptor).expect("uniform params");
            let closer = match best {
                None => true,
                Some((_, _, d)) => dist < d,
            };
            if closer {
                best = Some((g.id, shift, dist));
            }
        }
        let gid = match best {
            Some((gid, shift, dist)) if dist < self.new_group_threshold => {
                let group = &mut self.groups[gid];
                group.members.push(GroupMember { instance: inst.id, shift });
                group.aligned.push(inst.descriptor.shifted(shift));
                let tol = self.symmetry_tol;
                group.recompute_mean(tol);
                gid
            }
            _ => {
                let gid = self.groups.len();
                let symmetric = symmetry_test(&inst.descriptor, self.symmetry_tol);
                self.groups.push(SgfGroup {
                    id: gid,
                    mean_descriptor: inst.descriptor.clone(),
                    members: vec![GroupMember { instance: inst.id, shift: 0 }],
                    symmetric,
                    aligned: vec![inst.descriptor.clone()],
                });
                gid
            }
        };
        inst.group = Some(gid);
        gid
    }
}

impl<T: Real> Default for GroupSet<T> {
    fn default() -> Self {
        Self::new(T::of(DEFAULT_GROUP_THRESHOLD), T::of(DEFAULT_SYMMETRY_TOL))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{build_descriptor, DescriptorParams};
    use crate::geom::{Mat2, Point2};

    fn instance_from(raw: &[(f64, f64)], id: usize, frame: usize) -> SgfInstance<f64> {
        let points: Vec<Point2<f64>> = raw.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let n = points.len() as f64;
        let centroid = points
            .iter()
            .fold(Point2::zero(), |acc, &p| acc + p);
        let centroid = Point2::new(centroid.x / n, centroid.y / n);
        let points_struct = SgfPoints { points, centroid, anchor_pose: frame };
        let descriptor = build_descriptor(&points_struct, DescriptorParams::default());
        SgfInstance {
            id,
            frame,
            points: points_struct,
            descriptor,
            hu: HuVector { h: [0.0; 7] },
            group: None,
        }
    }

    fn arrow_raw(step: f64) -> Vec<(f64, f64)> {
        // compact solid wedge
        let mut raw = Vec::new();
        let mut x = 0.0;
        while x < 0.9 {
            let half = 0.05 + 0.35 * (x / 0.9);
            let mut y = -half;
            while y <= half {
                raw.push((x, y));
                y += step;
            }
            x += step;
        }
        raw
    }

    fn frame_raw(step: f64) -> Vec<(f64, f64)> {
        // hollow C-frame: mass far from the centroid
        let mut raw = Vec::new();
        let mut t = -1.2;
        while t <= 1.2 {
            raw.push((t, -0.8));
            raw.push((t, 0.8));
            t += step;
        }
        let mut y = -0.8;
        while y <= 0.8 {
            raw.push((-1.2, y));
            y += step;
        }
        raw
    }

    #[test]
    fn first_instance_seeds_group_zero() {
        let mut groups = GroupSet::default();
        let mut a = instance_from(&arrow_raw(0.05), 0, 0);
        assert_eq!(groups.assign(&mut a), 0);
        assert_eq!(a.group, Some(0));
        assert_eq!(groups.groups().len(), 1);
    }

    #[test]
    fn rotated_noisy_revisit_joins_same_group() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let raw = arrow_raw(0.05);
        let mut groups = GroupSet::default();
        let mut a = instance_from(&raw, 0, 0);
        groups.assign(&mut a);

        let rot = Mat2::rotation(std::f64::consts::PI);
        let revisit: Vec<(f64, f64)> = raw
            .iter()
            .map(|&(x, y)| {
                let p = rot.apply(Point2::new(x, y));
                (p.x + rng.gen_range(-0.02..0.02), p.y + rng.gen_range(-0.02..0.02))
            })
            .collect();
        let mut b = instance_from(&revisit, 1, 100);
        assert_eq!(groups.assign(&mut b), 0);
        assert_eq!(groups.group(0).members.len(), 2);
    }

    #[test]
    fn dissimilar_shapes_get_distinct_groups() {
        let mut groups = GroupSet::default();
        let mut a = instance_from(&arrow_raw(0.05), 0, 0);
        let mut b = instance_from(&frame_raw(0.05), 1, 50);
        groups.assign(&mut a);
        assert_eq!(groups.assign(&mut b), 1);
        // verify the distance really exceeded the threshold
        let (_, d) = best_shift(&b.descriptor, &groups.group(0).aligned[0]).unwrap();
        assert!(d > 0.7, "cross-template distance {d}");
    }

    #[test]
    fn mean_update_is_idempotent_for_identical_members() {
        let mut groups = GroupSet::default();
        let raw = arrow_raw(0.05);
        let mut a = instance_from(&raw, 0, 0);
        groups.assign(&mut a);
        let before = groups.group(0).mean_descriptor.clone();
        let mut b = instance_from(&raw, 1, 40);
        groups.assign(&mut b);
        let after = &groups.group(0).mean_descriptor;
        for (x, y) in before.bins().iter().zip(after.bins().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_group_is_flagged_symmetric() {
        let mut raw = Vec::new();
        for i in 0..240 {
            let a = i as f64 / 240.0 * std::f64::consts::TAU;
            for k in 1..=8 {
                let r = 0.45 * k as f64 / 8.0;
                raw.push((r * a.cos(), r * a.sin()));
            }
        }
        let mut groups = GroupSet::default();
        let mut d = instance_from(&raw, 0, 0);
        groups.assign(&mut d);
        assert!(groups.group(0).symmetric);
        let mut a = instance_from(&frame_raw(0.05), 1, 10);
        let gid = groups.assign(&mut a);
        assert_ne!(gid, 0);
        assert!(!groups.group(gid).symmetric);
    }
}
