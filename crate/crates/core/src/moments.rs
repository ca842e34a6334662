//! Central, normalized and Hu moments of binary shapes.
//!
//! Moments are computed over the pixel set with unit intensity, so the
//! zero-order central moment equals the pixel count. The seven Hu
//! combinations are used raw (no log mapping), which keeps shape-match
//! distances on the scale the stability threshold was chosen for.

use crate::mask::BinaryShape;
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MomentError {
    #[error("shape has no pixels")]
    EmptyShape,
}

/// The seven Hu invariants of a shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuVector<T> {
    pub h: [T; 7],
}

/// Central moment `mu_pq` about the shape centroid; `p + q <= 3`.
pub fn central_moments<T: Real>(s: &BinaryShape, p: u32, q: u32) -> Result<T, MomentError> {
    debug_assert!(p + q <= 3);
    if s.pixels.is_empty() {
        return Err(MomentError::EmptyShape);
    }
    let (cu, cv) = s.centroid();
    let (cu, cv) = (T::of(cu), T::of(cv));
    let mut acc = T::zero();
    for &(u, v) in &s.pixels {
        let du = T::of_usize(u as usize) - cu;
        let dv = T::of_usize(v as usize) - cv;
        acc = acc + du.powi(p as i32) * dv.powi(q as i32);
    }
    Ok(acc)
}

/// Scale-normalized central moments `eta_pq = mu_pq / mu_00^(1+(p+q)/2)`
/// for all orders with `p + q` in `{2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedMoments<T> {
    pub eta20: T,
    pub eta11: T,
    pub eta02: T,
    pub eta30: T,
    pub eta21: T,
    pub eta12: T,
    pub eta03: T,
}

pub fn normalized_moments<T: Real>(s: &BinaryShape) -> Result<NormalizedMoments<T>, MomentError> {
    if s.pixels.is_empty() {
        return Err(MomentError::EmptyShape);
    }
    let mu00 = T::of_usize(s.pixels.len());
    let norm2 = mu00.powi(2);
    let norm3 = mu00.powf(T::of(2.5));
    Ok(NormalizedMoments {
        eta20: central_moments::<T>(s, 2, 0)? / norm2,
        eta11: central_moments::<T>(s, 1, 1)? / norm2,
        eta02: central_moments::<T>(s, 0, 2)? / norm2,
        eta30: central_moments::<T>(s, 3, 0)? / norm3,
        eta21: central_moments::<T>(s, 2, 1)? / norm3,
        eta12: central_moments::<T>(s, 1, 2)? / norm3,
        eta03: central_moments::<T>(s, 0, 3)? / norm3,
    })
}

/// The seven standard Hu combinations of the normalized moments.
pub fn hu_vector<T: Real>(s: &BinaryShape) -> Result<HuVector<T>, MomentError> {
    let n = normalized_moments::<T>(s)?;
    let three = T::of(3.0);
    let four = T::of(4.0);

    let a = n.eta30 + n.eta12;
    let b = n.eta21 + n.eta03;
    let c = n.eta30 - three * n.eta12;
    let d = three * n.eta21 - n.eta03;

    let h1 = n.eta20 + n.eta02;
    let h2 = (n.eta20 - n.eta02).powi(2) + four * n.eta11.powi(2);
    let h3 = c.powi(2) + d.powi(2);
    let h4 = a.powi(2) + b.powi(2);
    let h5 = c * a * (a.powi(2) - three * b.powi(2)) + d * b * (three * a.powi(2) - b.powi(2));
    let h6 = (n.eta20 - n.eta02) * (a.powi(2) - b.powi(2)) + four * n.eta11 * a * b;
    let h7 = d * a * (a.powi(2) - three * b.powi(2)) - c * b * (three * a.powi(2) - b.powi(2));
    Ok(HuVector { h: [h1, h2, h3, h4, h5, h6, h7] })
}

/// Shape-match distance: the sum of absolute component differences.
pub fn hu_distance<T: Real>(a: &HuVector<T>, b: &HuVector<T>) -> T {
    a.h.iter().zip(b.h.iter()).map(|(&x, &y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BinaryShape;

    fn square2x2() -> BinaryShape {
        BinaryShape::from_pixels(vec![(10, 20), (11, 20), (10, 21), (11, 21)]).unwrap()
    }

    fn shape_from_rows(rows: &[&str], off_u: u32, off_v: u32) -> BinaryShape {
        let mut px = Vec::new();
        for (v, row) in rows.iter().enumerate() {
            for (u, ch) in row.chars().enumerate() {
                if ch == '#' {
                    px.push((u as u32 + off_u, v as u32 + off_v));
                }
            }
        }
        BinaryShape::from_pixels(px).unwrap()
    }

    fn l_shape(scale: u32) -> BinaryShape {
        // L with 64x64 extent at scale 1
        let mut px = Vec::new();
        for v in 0..64 * scale {
            for u in 0..20 * scale {
                px.push((u, v));
            }
        }
        for v in 44 * scale..64 * scale {
            for u in 20 * scale..64 * scale {
                px.push((u, v));
            }
        }
        BinaryShape::from_pixels(px).unwrap()
    }

    fn rotate90(s: &BinaryShape) -> BinaryShape {
        let max_v = s.bounds.max_v;
        let px = s.pixels.iter().map(|&(u, v)| (max_v - v, u)).collect();
        BinaryShape::from_pixels(px).unwrap()
    }

    #[test]
    fn first_order_central_moments_vanish() {
        let s = l_shape(1);
        assert!(central_moments::<f64>(&s, 1, 0).unwrap().abs() < 1e-9);
        assert!(central_moments::<f64>(&s, 0, 1).unwrap().abs() < 1e-9);
    }

    #[test]
    fn square_moments_by_hand() {
        let s = square2x2();
        assert_eq!(central_moments::<f64>(&s, 0, 0).unwrap(), 4.0);
        assert_eq!(central_moments::<f64>(&s, 2, 0).unwrap(), 1.0);
        assert_eq!(central_moments::<f64>(&s, 0, 2).unwrap(), 1.0);
        let n = normalized_moments::<f64>(&s).unwrap();
        assert!((n.eta20 - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn central_moments_are_translation_invariant() {
        let a = shape_from_rows(&["###.", "#...", "#.##"], 5, 9);
        let b = shape_from_rows(&["###.", "#...", "#.##"], 12, 6);
        for (p, q) in [(0, 0), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)] {
            let ma = central_moments::<f64>(&a, p, q).unwrap();
            let mb = central_moments::<f64>(&b, p, q).unwrap();
            assert!((ma - mb).abs() < 1e-9, "mu_{p}{q}: {ma} vs {mb}");
        }
    }

    #[test]
    fn normalized_moments_survive_upsampling() {
        let a = l_shape(1);
        let b = l_shape(2);
        let na = normalized_moments::<f64>(&a).unwrap();
        let nb = normalized_moments::<f64>(&b).unwrap();
        assert!((na.eta20 - nb.eta20).abs() < 2e-2);
        assert!((na.eta02 - nb.eta02).abs() < 2e-2);
        assert!((na.eta11 - nb.eta11).abs() < 2e-2);
    }

    #[test]
    fn mirror_symmetric_shape_has_zero_eta11() {
        let s = shape_from_rows(&[".##.", "####", ".##."], 0, 0);
        let n = normalized_moments::<f64>(&s).unwrap();
        assert!(n.eta11.abs() < 1e-12);
    }

    #[test]
    fn disk_second_invariant_vanishes() {
        let mut px = Vec::new();
        let r = 20.0f64;
        for v in 0..50 {
            for u in 0..50 {
                if ((u as f64 - 25.0).powi(2) + (v as f64 - 25.0).powi(2)).sqrt() <= r {
                    px.push((u, v));
                }
            }
        }
        let s = BinaryShape::from_pixels(px).unwrap();
        let hu = hu_vector::<f64>(&s).unwrap();
        assert!(hu.h[1].abs() < 1e-6, "h2 = {}", hu.h[1]);
    }

    #[test]
    fn quarter_rotation_preserves_hu() {
        let s = l_shape(1);
        let r = rotate90(&s);
        let hs = hu_vector::<f64>(&s).unwrap();
        let hr = hu_vector::<f64>(&r).unwrap();
        for j in 0..7 {
            let denom = hs.h[j].abs().max(1e-12);
            assert!(
                ((hs.h[j] - hr.h[j]) / denom).abs() <= 1e-3,
                "h{} {} vs {}",
                j + 1,
                hs.h[j],
                hr.h[j]
            );
        }
    }

    #[test]
    fn scaled_translated_copy_is_close() {
        let s = l_shape(1);
        let mut px: Vec<(u32, u32)> = l_shape(2).pixels.clone();
        for p in &mut px {
            p.0 += 37;
            p.1 += 11;
        }
        let t = BinaryShape::from_pixels(px).unwrap();
        let d = hu_distance(&hu_vector::<f64>(&s).unwrap(), &hu_vector::<f64>(&t).unwrap());
        assert!(d <= 1e-3, "d = {d}");
    }

    #[test]
    fn hu_distance_axioms_and_hand_sum() {
        let a = HuVector::<f64> { h: [0.1, -0.2, 0.3, 0.0, 1.0, -1.0, 0.5] };
        let b = HuVector { h: [0.0, 0.2, 0.3, -0.1, 0.5, -1.5, 0.5] };
        assert_eq!(hu_distance(&a, &a), 0.0);
        assert_eq!(hu_distance(&a, &b), hu_distance(&b, &a));
        // 0.1 + 0.4 + 0 + 0.1 + 0.5 + 0.5 + 0
        assert!((hu_distance(&a, &b) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn empty_shape_is_rejected() {
        let s = BinaryShape { pixels: vec![], bounds: crate::mask::PixelBounds { min_u: 0, min_v: 0, max_u: 0, max_v: 0 } };
        assert_eq!(central_moments::<f64>(&s, 0, 0), Err(MomentError::EmptyShape));
        assert!(hu_vector::<f64>(&s).is_err());
    }
}
