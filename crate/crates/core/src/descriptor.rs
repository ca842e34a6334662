//! Rotation-robust polar descriptors for back-projected ground features.
//!
//! A feature's BEV pixels are lifted back to metric ground points,
//! downsampled on a fixed voxel grid and binned into rings and azimuth
//! sectors around their centroid. Rotating the feature rotates the
//! descriptor's sector columns, so matching under arbitrary heading
//! difference reduces to a circular column shift.

use crate::camera::{bev_to_ground, GroundPoint, VirtualCamera};
use crate::detect::SgfCandidate;
use crate::geom::Point2;
use crate::scalar::Real;
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_L_MAX: f64 = 2.0;
pub const DEFAULT_N_SECTORS: usize = 90;
pub const DEFAULT_N_RINGS: usize = 10;
pub const DEFAULT_DOWNSAMPLE_M: f64 = 0.05;
pub const MIN_POINTS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptorError {
    /// Too few points survive downsampling to describe a shape.
    #[error("degenerate shape: {0} points after downsampling")]
    DegenerateShape(usize),
    #[error("descriptor parameters differ")]
    ParamMismatch,
}

/// Metric point set of one selected feature, in the anchoring robot frame.
#[derive(Debug, Clone)]
pub struct SgfPoints<T> {
    pub points: Vec<Point2<T>>,
    pub centroid: Point2<T>,
    /// Index of the robot pose the points are expressed in.
    pub anchor_pose: usize,
}

impl<T: Real> SgfPoints<T> {
    /// Points re-expressed relative to the centroid (the frame descriptors
    /// and ICP operate in).
    pub fn centered(&self) -> Vec<Point2<T>> {
        self.points.iter().map(|&p| p - self.centroid).collect()
    }
}

/// Back-project a selected BEV shape into metric ground points:
/// inverse of the BEV chain per pixel, then voxel downsampling on a grid
/// of `grid_pitch` meters and a radius filter at `max_radius` around the
/// centroid.
pub fn back_project<T: Real>(
    candidate: &SgfCandidate,
    vc: &VirtualCamera<T>,
    anchor_pose: usize,
    grid_pitch: T,
    max_radius: T,
) -> Result<SgfPoints<T>, DescriptorError> {
    let mut cells: BTreeMap<(i64, i64), (T, T, usize)> = BTreeMap::new();
    for &(u, v) in &candidate.shape.pixels {
        let g: GroundPoint<T> = bev_to_ground(T::of_usize(u as usize), T::of_usize(v as usize), vc);
        let kx = (g.x / grid_pitch).floor().as_f64() as i64;
        let ky = (g.y / grid_pitch).floor().as_f64() as i64;
        let e = cells.entry((kx, ky)).or_insert((T::zero(), T::zero(), 0));
        e.0 = e.0 + g.x;
        e.1 = e.1 + g.y;
        e.2 += 1;
    }
    let mut points: Vec<Point2<T>> = cells
        .values()
        .map(|&(sx, sy, n)| {
            let k = T::of_usize(n);
            Point2::new(sx / k, sy / k)
        })
        .collect();
    if points.len() < MIN_POINTS {
        return Err(DescriptorError::DegenerateShape(points.len()));
    }
    let centroid = mean_point(&points);
    points.retain(|p| p.dist(centroid) < max_radius);
    if points.len() < MIN_POINTS {
        return Err(DescriptorError::DegenerateShape(points.len()));
    }
    let centroid = mean_point(&points);
    Ok(SgfPoints { points, centroid, anchor_pose })
}

fn mean_point<T: Real>(points: &[Point2<T>]) -> Point2<T> {
    let n = T::of_usize(points.len());
    let mut s = Point2::zero();
    for &p in points {
        s = s + p;
    }
    Point2::new(s.x / n, s.y / n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorParams<T> {
    /// Radial extent around the centroid, meters.
    pub l_max: T,
    pub n_sectors: usize,
    pub n_rings: usize,
}

impl<T: Real> Default for DescriptorParams<T> {
    fn default() -> Self {
        Self {
            l_max: T::of(DEFAULT_L_MAX),
            n_sectors: DEFAULT_N_SECTORS,
            n_rings: DEFAULT_N_RINGS,
        }
    }
}

impl<T: Real> DescriptorParams<T> {
    pub fn ring_gap(&self) -> T {
        self.l_max / T::of_usize(self.n_rings)
    }

    pub fn sector_angle(&self) -> T {
        T::two_pi() / T::of_usize(self.n_sectors)
    }
}

/// Polar occupancy matrix: `n_rings x n_sectors` point counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor<T> {
    bins: Vec<T>,
    pub params: DescriptorParams<T>,
}

impl<T: Real> Descriptor<T> {
    pub fn zeros(params: DescriptorParams<T>) -> Self {
        Self { bins: vec![T::zero(); params.n_rings * params.n_sectors], params }
    }

    #[inline]
    pub fn get(&self, ring: usize, sector: usize) -> T {
        self.bins[ring * self.params.n_sectors + sector]
    }

    #[inline]
    pub fn set(&mut self, ring: usize, sector: usize, v: T) {
        self.bins[ring * self.params.n_sectors + sector] = v;
    }

    pub fn bins(&self) -> &[T] {
        &self.bins
    }

    /// Circularly rotate the sector columns by `k`: the returned
    /// descriptor has column `(j + k) mod n_sectors` equal to column `j`.
    pub fn shifted(&self, k: usize) -> Self {
        let ns = self.params.n_sectors;
        let mut out = Self::zeros(self.params);
        for ring in 0..self.params.n_rings {
            for j in 0..ns {
                out.set(ring, (j + k) % ns, self.get(ring, j));
            }
        }
        out
    }

    fn column_dot_norms(&self, o: &Self, j: usize, oj: usize) -> (T, T, T) {
        let mut dot = T::zero();
        let mut na = T::zero();
        let mut nb = T::zero();
        for ring in 0..self.params.n_rings {
            let a = self.get(ring, j);
            let b = o.get(ring, oj);
            dot = dot + a * b;
            na = na + a * a;
            nb = nb + b * b;
        }
        (dot, na, nb)
    }
}

/// Bin a point set around its centroid. Points at or beyond `l_max` are
/// discarded; a point exactly on the centroid lands in ring 0, sector 0.
pub fn build_descriptor<T: Real>(p: &SgfPoints<T>, params: DescriptorParams<T>) -> Descriptor<T> {
    let mut d = Descriptor::zeros(params);
    let ring_gap = params.ring_gap();
    let sector_angle = params.sector_angle();
    for &pt in &p.points {
        let rel = pt - p.centroid;
        let rho = rel.norm();
        if rho >= params.l_max {
            continue;
        }
        let (ring, sector) = if rho == T::zero() {
            (0, 0)
        } else {
            let ring = (rho / ring_gap).floor().as_f64() as usize;
            let mut phi = rel.y.atan2(rel.x);
            if phi < T::zero() {
                phi = phi + T::two_pi();
            }
            let sector = ((phi / sector_angle).floor().as_f64() as usize).min(params.n_sectors - 1);
            (ring.min(params.n_rings - 1), sector)
        };
        let v = d.get(ring, sector);
        d.set(ring, sector, v + T::one());
    }
    d
}

/// Column-shifted cosine distance, averaged over all sector columns.
/// Query column `j` is compared against group column `(j + shift) mod
/// n_sectors`. An empty column against a nonempty one counts as a full
/// mismatch (distance 1); two empty columns match exactly.
pub fn descriptor_distance<T: Real>(
    q: &Descriptor<T>,
    g: &Descriptor<T>,
    shift: usize,
) -> Result<T, DescriptorError> {
    if q.params != g.params {
        return Err(DescriptorError::ParamMismatch);
    }
    let ns = q.params.n_sectors;
    let mut total = T::zero();
    for j in 0..ns {
        let (dot, na, nb) = q.column_dot_norms(g, j, (j + shift) % ns);
        let a_zero = na == T::zero();
        let b_zero = nb == T::zero();
        let contrib = if a_zero && b_zero {
            T::zero()
        } else if a_zero || b_zero {
            T::one()
        } else {
            T::one() - dot / (na.sqrt() * nb.sqrt())
        };
        total = total + contrib;
    }
    Ok(total / T::of_usize(ns))
}

/// Exhaustive search over all column shifts; ties break toward the
/// smallest shift index.
pub fn best_shift<T: Real>(
    q: &Descriptor<T>,
    g: &Descriptor<T>,
) -> Result<(usize, T), DescriptorError> {
    if q.params != g.params {
        return Err(DescriptorError::ParamMismatch);
    }
    let mut best = (0usize, T::infinity());
    for k in 0..q.params.n_sectors {
        let d = descriptor_distance(q, g, k)?;
        if d < best.1 {
            best = (k, d);
        }
    }
    Ok(best)
}

pub const DEFAULT_SYMMETRY_TOL: f64 = 0.1;

/// A descriptor is rotationally symmetric when it nearly matches itself
/// under a nontrivial column shift. Shifts near zero (and near a full
/// turn) are excluded so elongated shapes do not self-match trivially.
pub fn symmetry_test<T: Real>(d: &Descriptor<T>, tol: T) -> bool {
    let ns = d.params.n_sectors;
    let lo = ns / 6;
    let hi = ns - ns / 6;
    for k in lo..=hi {
        let dist = descriptor_distance(d, d, k).expect("same params");
        if dist < tol {
            return true;
        }
    }
    false
}
