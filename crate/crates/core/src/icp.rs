//! Planar point-to-point ICP with a closed-form SE(2) fit per iteration.

use crate::geom::{Point2, Se2};
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IcpError {
    #[error("point set too small: {0} points (need at least {1})")]
    TooFewPoints(usize, usize),
}

pub const MIN_ICP_POINTS: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct IcpConfig<T> {
    pub max_iter: usize,
    /// Stop once the transform update is below this, meters/radians.
    pub tol: T,
    /// Converged iff the final inlier rms is below this, meters.
    pub converge_rms: T,
    /// Correspondences beyond this multiple of the median distance are
    /// dropped from the fit (partial-overlap robustness).
    pub reject_factor: T,
}

impl<T: Real> Default for IcpConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: T::of(1e-4),
            converge_rms: T::of(0.05),
            reject_factor: T::of(3.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult<T> {
    /// Transform mapping source points into the target frame.
    pub transform: Se2<T>,
    pub iterations: usize,
    /// Final rms of the inlier correspondences, meters.
    pub rms: T,
    pub converged: bool,
    /// Mean-squared correspondence distance after each accepted step;
    /// nonincreasing by construction.
    pub objective_history: Vec<T>,
}

struct Evaluation<T> {
    /// (source index, target index, distance) for every source point.
    pairs: Vec<(usize, usize, T)>,
    /// Mean squared distance over all correspondences.
    mse: T,
    /// Rms over the inlier subset.
    inlier_rms: T,
    inlier_threshold: T,
}

fn evaluate<T: Real>(
    source: &[Point2<T>],
    target: &[Point2<T>],
    transform: &Se2<T>,
    reject_factor: T,
) -> Evaluation<T> {
    let mut pairs = Vec::with_capacity(source.len());
    let mut sum_sq = T::zero();
    for (si, &p) in source.iter().enumerate() {
        let tp = transform.apply(p);
        let mut best = (0usize, T::infinity());
        for (ti, &q) in target.iter().enumerate() {
            let d2 = (tp - q).dot(tp - q);
            if d2 < best.1 {
                best = (ti, d2);
            }
        }
        sum_sq = sum_sq + best.1;
        pairs.push((si, best.0, best.1.sqrt()));
    }
    let n = T::of_usize(pairs.len());
    let mse = sum_sq / n;

    let mut dists: Vec<T> = pairs.iter().map(|p| p.2).collect();
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = dists[dists.len() / 2];
    let threshold = if median > T::zero() {
        median * reject_factor
    } else {
        T::infinity()
    };
    let mut inlier_sq = T::zero();
    let mut inliers = 0usize;
    for p in &pairs {
        if p.2 <= threshold {
            inlier_sq = inlier_sq + p.2 * p.2;
            inliers += 1;
        }
    }
    let inlier_rms = if inliers > 0 {
        (inlier_sq / T::of_usize(inliers)).sqrt()
    } else {
        T::infinity()
    };
    Evaluation { pairs, mse, inlier_rms, inlier_threshold: threshold }
}

/// Closed-form least-squares SE(2) fit for fixed correspondences
/// (centroids plus an atan2 over the cross/dot sums).
fn fit_transform<T: Real>(
    source: &[Point2<T>],
    target: &[Point2<T>],
    pairs: &[(usize, usize, T)],
    inlier_threshold: T,
) -> Se2<T> {
    let mut cs = Point2::zero();
    let mut ct = Point2::zero();
    let mut n = 0usize;
    for &(si, ti, d) in pairs {
        if d > inlier_threshold {
            continue;
        }
        cs = cs + source[si];
        ct = ct + target[ti];
        n += 1;
    }
    let k = T::of_usize(n.max(1));
    cs = Point2::new(cs.x / k, cs.y / k);
    ct = Point2::new(ct.x / k, ct.y / k);

    let mut dot = T::zero();
    let mut cross = T::zero();
    for &(si, ti, d) in pairs {
        if d > inlier_threshold {
            continue;
        }
        let a = source[si] - cs;
        let b = target[ti] - ct;
        dot = dot + a.dot(b);
        cross = cross + a.cross(b);
    }
    let yaw = cross.atan2(dot);
    let rot = crate::geom::Mat2::rotation(yaw);
    let t = ct - rot.apply(cs);
    Se2 { t, yaw }
}

/// Point-to-point ICP from `source` onto `target`, seeded with `init`.
pub fn icp_2d<T: Real>(
    source: &[Point2<T>],
    target: &[Point2<T>],
    init: Se2<T>,
    cfg: &IcpConfig<T>,
) -> Result<IcpResult<T>, IcpError> {
    if source.len() < MIN_ICP_POINTS {
        return Err(IcpError::TooFewPoints(source.len(), MIN_ICP_POINTS));
    }
    if target.len() < MIN_ICP_POINTS {
        return Err(IcpError::TooFewPoints(target.len(), MIN_ICP_POINTS));
    }

    let mut current = init;
    let mut eval = evaluate(source, target, &current, cfg.reject_factor);
    // a centroid-aligned variant of the init is usually much closer for
    // gridded clouds; start from whichever scores better
    let mean = |pts: &[Point2<T>]| {
        let n = T::of_usize(pts.len());
        let s = pts.iter().fold(Point2::zero(), |a, &p| a + p);
        Point2::new(s.x / n, s.y / n)
    };
    let aligned = Se2 {
        t: mean(target) - init.rotation().apply(mean(source)),
        yaw: init.yaw,
    };
    let aligned_eval = evaluate(source, target, &aligned, cfg.reject_factor);
    if aligned_eval.mse < eval.mse {
        current = aligned;
        eval = aligned_eval;
    }
    let mut history = vec![eval.mse];
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let candidate = fit_transform(source, target, &eval.pairs, eval.inlier_threshold);
        iterations += 1;
        let cand_eval = evaluate(source, target, &candidate, cfg.reject_factor);
        if cand_eval.mse > eval.mse {
            // re-associating made things worse: settled in a local basin
            break;
        }
        let delta = current.between(&candidate);
        current = candidate;
        eval = cand_eval;
        debug_assert!(
            eval.mse <= *history.last().expect("nonempty") + T::of(1e-12),
            "objective increased on an accepted step"
        );
        history.push(eval.mse);
        if delta.t.norm() < cfg.tol && delta.yaw.abs() < cfg.tol {
            break;
        }
    }

    let rms = eval.inlier_rms;
    Ok(IcpResult {
        transform: current,
        iterations,
        rms,
        converged: rms < cfg.converge_rms,
        objective_history: history,
    })
}

/// ICP initial guess from a descriptor column shift: the shift times the
/// sector angle as pure rotation (descriptors are centroid-relative, so
/// the translation seed is zero).
pub fn icp_init_from_shift<T: Real>(shift: usize, n_sectors: usize) -> Se2<T> {
    debug_assert!(shift < n_sectors);
    let yaw = T::of_usize(shift) * T::two_pi() / T::of_usize(n_sectors);
    Se2::new(T::zero(), T::zero(), yaw)
}
