//! Trajectory accuracy metrics and sequence-level counters.

use crate::geom::{Mat2, Point2, Se2};
use crate::pose::Pose6;
use crate::scalar::{wrap_angle, Real};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("trajectories share no associable timestamps")]
    NoOverlap,
}

/// Absolute trajectory error statistics after rigid alignment.
#[derive(Debug, Clone, Serialize)]
pub struct AteReport {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// Estimated alignment applied to the estimate: `(x, y, yaw)`.
    pub alignment: [f64; 3],
    pub scale: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AteOptions {
    /// Estimate and apply a rigid alignment before computing errors.
    pub align: bool,
    /// Additionally estimate a similarity scale (for monocular parity).
    pub with_scale: bool,
}

impl Default for AteOptions {
    fn default() -> Self {
        Self { align: true, with_scale: false }
    }
}

/// Associate poses by nearest timestamp (within half the median frame
/// period), rigidly align (least-squares rotation + translation, Umeyama
/// style, optional scale) and report translational error statistics.
pub fn ate<T: Real>(
    est: &[Pose6<T>],
    gt: &[Pose6<T>],
    opts: &AteOptions,
) -> Result<AteReport, EvalError> {
    if est.is_empty() || gt.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    // association tolerance from the ground-truth frame period
    let mut dts: Vec<f64> = gt.windows(2).map(|w| (w[1].stamp - w[0].stamp).abs()).collect();
    dts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let tol = if dts.is_empty() { f64::INFINITY } else { 0.5 * dts[dts.len() / 2] };

    let mut pairs: Vec<(Point2<f64>, Point2<f64>)> = Vec::new();
    let mut gi = 0usize;
    for e in est {
        while gi + 1 < gt.len()
            && (gt[gi + 1].stamp - e.stamp).abs() <= (gt[gi].stamp - e.stamp).abs()
        {
            gi += 1;
        }
        if (gt[gi].stamp - e.stamp).abs() <= tol {
            pairs.push((
                Point2::new(e.x.as_f64(), e.y.as_f64()),
                Point2::new(gt[gi].x.as_f64(), gt[gi].y.as_f64()),
            ));
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::NoOverlap);
    }

    let (transform, scale) = if opts.align {
        rigid_align(&pairs, opts.with_scale)
    } else {
        (Se2::identity(), 1.0)
    };

    let rot = transform.rotation();
    let mut errs: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| (rot.apply(a * scale) + transform.t - b).norm())
        .collect();
    errs.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let median = errs[errs.len() / 2];
    let max = *errs.last().expect("nonempty");
    Ok(AteReport {
        rmse,
        mean,
        median,
        max,
        alignment: [transform.t.x, transform.t.y, transform.yaw],
        scale,
        pairs: errs.len(),
    })
}

/// Closed-form 2D least-squares alignment `b ~ s R a + t`.
fn rigid_align(pairs: &[(Point2<f64>, Point2<f64>)], with_scale: bool) -> (Se2<f64>, f64) {
    let n = pairs.len() as f64;
    let mut ca = Point2::zero();
    let mut cb = Point2::zero();
    for &(a, b) in pairs {
        ca = ca + a;
        cb = cb + b;
    }
    ca = ca * (1.0 / n);
    cb = cb * (1.0 / n);

    let mut dot = 0.0;
    let mut cross = 0.0;
    let mut var_a = 0.0;
    for &(a, b) in pairs {
        let da = a - ca;
        let db = b - cb;
        dot += da.dot(db);
        cross += da.cross(db);
        var_a += da.dot(da);
    }
    let yaw = cross.atan2(dot);
    let scale = if with_scale && var_a > 0.0 {
        (yaw.cos() * dot + yaw.sin() * cross) / var_a
    } else {
        1.0
    };
    let rot = Mat2::rotation(yaw);
    let t = cb - rot.apply(ca * scale);
    (Se2 { t, yaw }, scale)
}

/// One selected feature instance, as logged by the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionRecord {
    pub instance: usize,
    /// Anchor frame of the instance.
    pub frame: usize,
    /// Feature centroid in the anchor robot frame, meters.
    pub offset: [f64; 2],
    pub group: usize,
}

/// One loop-closure attempt, as logged by the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateRecord {
    pub query_instance: usize,
    pub query_frame: usize,
    pub member_instance: usize,
    pub member_frame: usize,
    pub group: usize,
    pub shift: usize,
    pub icp_rms: f64,
    pub icp_converged: bool,
    /// True when a constraint was emitted (converged and non-symmetric).
    pub closed: bool,
}

/// One scripted visit of a marking, from the scenario generator.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct VisitAnnotation {
    pub first_frame: usize,
    pub last_frame: usize,
    /// Mean robot heading while the marking was fully visible, radians.
    pub heading: f64,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct MarkingAnnotation {
    pub id: usize,
    pub name: String,
    /// Marking center in world coordinates, meters.
    pub center: [f64; 2],
    pub symmetric: bool,
    pub visits: Vec<VisitAnnotation>,
}

#[derive(Debug, Clone, Default, Serialize, serde::Deserialize)]
pub struct ScenarioAnnotations {
    pub markings: Vec<MarkingAnnotation>,
}

/// Sequence-level counters: detections against expectations, loop pairs
/// found/closed with their reverse-loop subsets.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SequenceCounters {
    pub sgf_detected: usize,
    pub sgf_expected: usize,
    pub loop_pairs_found: usize,
    pub loop_pairs_total: usize,
    pub loop_pairs_found_rev: usize,
    pub loop_pairs_total_rev: usize,
    pub loops_closed: usize,
    pub loops_closed_rev: usize,
}

/// Radius for matching a detection's world position to a marking.
const MARKING_MATCH_RADIUS_M: f64 = 1.5;
/// Frames of slack when matching a detection to a visit window.
const VISIT_FRAME_SLACK: usize = 10;

/// Tally detections and loop pairs against generator annotations,
/// using the ground-truth trajectory to place detections in the world.
pub fn count_sequence_metrics(
    detections: &[DetectionRecord],
    candidates: &[CandidateRecord],
    annotations: &ScenarioAnnotations,
    gt: &[Pose6<f64>],
) -> SequenceCounters {
    // world position of each detection via the ground-truth pose
    let located: Vec<(usize, Point2<f64>, usize)> = detections
        .iter()
        .filter(|d| d.frame < gt.len())
        .map(|d| {
            let pose = gt[d.frame].se2();
            let world = pose.apply(Point2::new(d.offset[0], d.offset[1]));
            (d.instance, world, d.frame)
        })
        .collect();

    // match detections to (marking, visit) episodes
    let mut detected_by_visit: Vec<Vec<Vec<usize>>> = annotations
        .markings
        .iter()
        .map(|m| vec![Vec::new(); m.visits.len()])
        .collect();
    for &(inst, world, frame) in &located {
        for (mi, m) in annotations.markings.iter().enumerate() {
            let center = Point2::new(m.center[0], m.center[1]);
            if world.dist(center) > MARKING_MATCH_RADIUS_M {
                continue;
            }
            for (vi, v) in m.visits.iter().enumerate() {
                if frame + VISIT_FRAME_SLACK >= v.first_frame
                    && frame <= v.last_frame + VISIT_FRAME_SLACK
                {
                    detected_by_visit[mi][vi].push(inst);
                }
            }
        }
    }

    let mut c = SequenceCounters::default();
    for (mi, m) in annotations.markings.iter().enumerate() {
        c.sgf_expected += m.visits.len();
        c.sgf_detected += detected_by_visit[mi].iter().filter(|v| !v.is_empty()).count();

        for vi in 1..m.visits.len() {
            if m.symmetric {
                continue;
            }
            let reverse = wrap_angle(m.visits[vi].heading - m.visits[vi - 1].heading).abs()
                > std::f64::consts::FRAC_PI_2;
            c.loop_pairs_total += 1;
            if reverse {
                c.loop_pairs_total_rev += 1;
            }
            // found: a candidate links an instance of this visit back to
            // an instance of any earlier visit of the same marking
            let earlier: Vec<usize> = (0..vi)
                .flat_map(|k| detected_by_visit[mi][k].iter().copied())
                .collect();
            let this = &detected_by_visit[mi][vi];
            let matching: Vec<&CandidateRecord> = candidates
                .iter()
                .filter(|r| {
                    this.contains(&r.query_instance) && earlier.contains(&r.member_instance)
                })
                .collect();
            if !matching.is_empty() {
                c.loop_pairs_found += 1;
                if reverse {
                    c.loop_pairs_found_rev += 1;
                }
                if matching.iter().any(|r| r.closed) {
                    c.loops_closed += 1;
                    if reverse {
                        c.loops_closed_rev += 1;
                    }
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[(f64, f64, f64)]) -> Vec<Pose6<f64>> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y, yaw))| Pose6::new(i as f64 * 0.1, x, y, 0.0, 0.0, 0.0, yaw))
            .collect()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let t = traj(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (2.0, 1.0, 0.5)]);
        let r = ate(&t, &t, &AteOptions::default()).unwrap();
        assert!(r.rmse < 1e-12 && r.mean < 1e-12 && r.max < 1e-12);
    }

    #[test]
    fn pure_translation_vanishes_under_alignment() {
        let gt = traj(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (2.0, 1.0, 0.0), (3.0, 2.0, 0.0)]);
        let est: Vec<Pose6<f64>> = gt
            .iter()
            .map(|p| Pose6::new(p.stamp, p.x + 3.0, p.y + 4.0, 0.0, 0.0, 0.0, p.yaw))
            .collect();
        let aligned = ate(&est, &gt, &AteOptions::default()).unwrap();
        assert!(aligned.rmse < 1e-12);
        let raw = ate(&est, &gt, &AteOptions { align: false, with_scale: false }).unwrap();
        assert!((raw.rmse - 5.0).abs() < 1e-12);
        assert!((raw.mean - 5.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_statistics_match_direct_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let gt: Vec<Pose6<f64>> = (0..200)
            .map(|i| Pose6::new(i as f64 * 0.1, i as f64 * 0.5, (i as f64 * 0.1).sin(), 0.0, 0.0, 0.0, 0.0))
            .collect();
        let est: Vec<Pose6<f64>> = gt
            .iter()
            .map(|p| {
                Pose6::new(
                    p.stamp,
                    p.x + rng.gen_range(-0.1..0.1),
                    p.y + rng.gen_range(-0.1..0.1),
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                )
            })
            .collect();
        let r = ate(&est, &gt, &AteOptions { align: false, with_scale: false }).unwrap();

        // direct per-pose oracle
        let errs: Vec<f64> = est
            .iter()
            .zip(gt.iter())
            .map(|(a, b)| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
            .collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        assert!((r.mean - mean).abs() < 1e-12);
        assert!((r.rmse - rmse).abs() < 1e-12);
        let max = errs.iter().cloned().fold(0.0f64, f64::max);
        assert!((r.max - max).abs() < 1e-12);
    }

    #[test]
    fn ate_is_invariant_under_rigid_motion_of_the_estimate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let gt: Vec<Pose6<f64>> = (0..100)
            .map(|i| Pose6::new(i as f64 * 0.1, i as f64 * 0.3, (i as f64 * 0.2).cos(), 0.0, 0.0, 0.0, 0.0))
            .collect();
        let est: Vec<Pose6<f64>> = gt
            .iter()
            .map(|p| Pose6::new(p.stamp, p.x + rng.gen_range(-0.05..0.05), p.y + rng.gen_range(-0.05..0.05), 0.0, 0.0, 0.0, 0.0))
            .collect();
        let base = ate(&est, &gt, &AteOptions::default()).unwrap();
        let g = Se2::new(-7.0, 2.5, 1.9);
        let moved: Vec<Pose6<f64>> = est
            .iter()
            .map(|p| {
                let q = g.apply(Point2::new(p.x, p.y));
                Pose6::new(p.stamp, q.x, q.y, 0.0, 0.0, 0.0, p.yaw)
            })
            .collect();
        let shifted = ate(&moved, &gt, &AteOptions::default()).unwrap();
        assert!((base.rmse - shifted.rmse).abs() < 1e-9);
        assert!((base.max - shifted.max).abs() < 1e-9);
    }

    #[test]
    fn scale_recovery_when_enabled() {
        let gt = traj(&[(0.0, 0.0, 0.0), (2.0, 0.0, 0.0), (4.0, 2.0, 0.0), (6.0, 4.0, 0.0)]);
        let est: Vec<Pose6<f64>> = gt
            .iter()
            .map(|p| Pose6::new(p.stamp, p.x * 0.5, p.y * 0.5, 0.0, 0.0, 0.0, 0.0))
            .collect();
        let r = ate(&est, &gt, &AteOptions { align: true, with_scale: true }).unwrap();
        assert!((r.scale - 2.0).abs() < 1e-9);
        assert!(r.rmse < 1e-9);
    }

    #[test]
    fn disjoint_timestamps_are_an_error() {
        let gt = traj(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        let mut est = traj(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
        for p in &mut est {
            p.stamp += 100.0;
        }
        assert_eq!(ate(&est, &gt, &AteOptions::default()).unwrap_err(), EvalError::NoOverlap);
    }

    fn one_marking_two_visits(symmetric: bool, heading2: f64) -> ScenarioAnnotations {
        ScenarioAnnotations {
            markings: vec![MarkingAnnotation {
                id: 0,
                name: "arrow".into(),
                center: [5.0, 0.0],
                symmetric,
                visits: vec![
                    VisitAnnotation { first_frame: 10, last_frame: 30, heading: 0.0 },
                    VisitAnnotation { first_frame: 100, last_frame: 120, heading: heading2 },
                ],
            }],
        }
    }

    fn straight_gt(n: usize) -> Vec<Pose6<f64>> {
        (0..n)
            .map(|i| Pose6::new(i as f64 * 0.1, i as f64 * 0.1, 0.0, 0.0, 0.0, 0.0, 0.0))
            .collect()
    }

    #[test]
    fn perfect_pipeline_counts_everything() {
        let ann = one_marking_two_visits(false, std::f64::consts::PI);
        let gt = straight_gt(150);
        // detections at frames 20 and 110, offsets placing them at the
        // marking center (robot at x = 2.0 / 11.0)
        let detections = vec![
            DetectionRecord { instance: 0, frame: 20, offset: [3.0, 0.0], group: 0 },
            DetectionRecord { instance: 1, frame: 110, offset: [-6.0, 0.0], group: 0 },
        ];
        let candidates = vec![CandidateRecord {
            query_instance: 1,
            query_frame: 110,
            member_instance: 0,
            member_frame: 20,
            group: 0,
            shift: 45,
            icp_rms: 0.01,
            icp_converged: true,
            closed: true,
        }];
        let c = count_sequence_metrics(&detections, &candidates, &ann, &gt);
        assert_eq!(c.sgf_detected, 2);
        assert_eq!(c.sgf_expected, 2);
        assert_eq!(c.loop_pairs_found, 1);
        assert_eq!(c.loop_pairs_total, 1);
        assert_eq!(c.loop_pairs_found_rev, 1);
        assert_eq!(c.loop_pairs_total_rev, 1);
        assert_eq!(c.loops_closed, 1);
        assert_eq!(c.loops_closed_rev, 1);
    }

    #[test]
    fn symmetric_markings_are_excluded_from_pair_totals() {
        let ann = one_marking_two_visits(true, std::f64::consts::PI);
        let gt = straight_gt(150);
        let c = count_sequence_metrics(&[], &[], &ann, &gt);
        assert_eq!(c.loop_pairs_total, 0);
        assert_eq!(c.sgf_expected, 2);
    }

    #[test]
    fn unclosed_candidate_counts_as_found_not_closed() {
        let ann = one_marking_two_visits(false, 0.1);
        let gt = straight_gt(150);
        let detections = vec![
            DetectionRecord { instance: 0, frame: 20, offset: [3.0, 0.0], group: 0 },
            DetectionRecord { instance: 1, frame: 110, offset: [-6.0, 0.0], group: 0 },
        ];
        let candidates = vec![CandidateRecord {
            query_instance: 1,
            query_frame: 110,
            member_instance: 0,
            member_frame: 20,
            group: 0,
            shift: 0,
            icp_rms: 0.2,
            icp_converged: false,
            closed: false,
        }];
        let c = count_sequence_metrics(&detections, &candidates, &ann, &gt);
        assert_eq!(c.loop_pairs_found, 1);
        assert_eq!(c.loop_pairs_found_rev, 0); // heading diff below pi/2
        assert_eq!(c.loops_closed, 0);
    }

    #[test]
    fn undetected_visit_is_not_found() {
        let ann = one_marking_two_visits(false, std::f64::consts::PI);
        let gt = straight_gt(150);
        let detections =
            vec![DetectionRecord { instance: 0, frame: 20, offset: [3.0, 0.0], group: 0 }];
        let c = count_sequence_metrics(&detections, &[], &ann, &gt);
        assert_eq!(c.sgf_detected, 1);
        assert_eq!(c.sgf_expected, 2);
        assert_eq!(c.loop_pairs_found, 0);
        assert_eq!(c.loop_pairs_total, 1);
    }
}
