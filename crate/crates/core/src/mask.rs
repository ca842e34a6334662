//! Binary image masks and connected-component extraction.

/// A packed binary image. `get`/`set` address pixels as `(u, v)` with
/// `u` the column and `v` the row; continuous pixel coordinates treat
/// integer positions as pixel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; (width as usize) * (height as usize)] }
    }

    #[inline]
    fn idx(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> bool {
        self.data[self.idx(u, v)] != 0
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, value: bool) {
        let i = self.idx(u, v);
        self.data[i] = value as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b != 0).count()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Row-major iterator over set pixel coordinates.
    pub fn set_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }
}

/// Axis-aligned pixel bounding box, inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBounds {
    pub min_u: u32,
    pub min_v: u32,
    pub max_u: u32,
    pub max_v: u32,
}

/// One 8-connected component of a binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryShape {
    /// Component pixels in row-major order.
    pub pixels: Vec<(u32, u32)>,
    pub bounds: PixelBounds,
}

impl BinaryShape {
    pub fn from_pixels(mut pixels: Vec<(u32, u32)>) -> Option<Self> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_by_key(|&(u, v)| (v, u));
        pixels.dedup();
        let bounds = PixelBounds {
            min_u: pixels.iter().map(|p| p.0).min().unwrap(),
            min_v: pixels.iter().map(|p| p.1).min().unwrap(),
            max_u: pixels.iter().map(|p| p.0).max().unwrap(),
            max_v: pixels.iter().map(|p| p.1).max().unwrap(),
        };
        Some(Self { pixels, bounds })
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (su, sv) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(a, b), &(u, v)| (a + u as f64, b + v as f64));
        (su / n, sv / n)
    }

    /// True when the shape touches the image edge or sits next to a pixel
    /// that is unset in `valid` (i.e. outside the projection footprint).
    /// Such shapes are only partially observed.
    pub fn touches_boundary(&self, valid: &BinaryMask) -> bool {
        let (w, h) = (valid.width as i64, valid.height as i64);
        for &(u, v) in &self.pixels {
            let (u, v) = (u as i64, v as i64);
            if u == 0 || v == 0 || u == w - 1 || v == h - 1 {
                return true;
            }
            for dv in -1..=1 {
                for du in -1..=1 {
                    if !valid.get((u + du) as u32, (v + dv) as u32) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Extract 8-connected components in deterministic (row-major seed) order.
/// Components smaller than `min_area` pixels are dropped as noise.
pub fn connected_components(mask: &BinaryMask, min_area: usize) -> Vec<BinaryShape> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut visited = vec![false; (w * h) as usize];
    let mut shapes = Vec::new();
    let mut stack = Vec::new();

    for v in 0..h {
        for u in 0..w {
            let start = (v * w + u) as usize;
            if visited[start] || !mask.get(u as u32, v as u32) {
                continue;
            }
            let mut pixels = Vec::new();
            visited[start] = true;
            stack.push((u, v));
            while let Some((cu, cv)) = stack.pop() {
                pixels.push((cu as u32, cv as u32));
                for dv in -1..=1i64 {
                    for du in -1..=1i64 {
                        if du == 0 && dv == 0 {
                            continue;
                        }
                        let (nu, nv) = (cu + du, cv + dv);
                        if nu < 0 || nv < 0 || nu >= w || nv >= h {
                            continue;
                        }
                        let ni = (nv * w + nu) as usize;
                        if !visited[ni] && mask.get(nu as u32, nv as u32) {
                            visited[ni] = true;
                            stack.push((nu, nv));
                        }
                    }
                }
            }
            if pixels.len() >= min_area {
                shapes.push(BinaryShape::from_pixels(pixels).expect("nonempty component"));
            }
        }
    }
    shapes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_rows(rows: &[&str]) -> BinaryMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let mut m = BinaryMask::new(w, h);
        for (v, row) in rows.iter().enumerate() {
            for (u, ch) in row.chars().enumerate() {
                if ch == '#' {
                    m.set(u as u32, v as u32, true);
                }
            }
        }
        m
    }

    #[test]
    fn finds_two_separate_components() {
        let m = mask_from_rows(&[
            "##....",
            "##....",
            "....##",
            "....##",
        ]);
        let shapes = connected_components(&m, 1);
        assert_eq!(shapes.len(), 2);
        assert_eq!(shapes[0].area(), 4);
        assert_eq!(shapes[0].bounds.min_u, 0);
        assert_eq!(shapes[1].bounds.min_u, 4);
    }

    #[test]
    fn diagonal_pixels_are_eight_connected() {
        let m = mask_from_rows(&["#.", ".#"]);
        let shapes = connected_components(&m, 1);
        assert_eq!(shapes.len(), 1);
        assert_eq!(shapes[0].area(), 2);
    }

    #[test]
    fn small_components_are_dropped() {
        let m = mask_from_rows(&["#..", "...", ".##"]);
        let shapes = connected_components(&m, 2);
        assert_eq!(shapes.len(), 1);
        assert_eq!(shapes[0].area(), 2);
    }

    #[test]
    fn boundary_detection_against_valid_region() {
        let mut valid = BinaryMask::new(8, 8);
        for v in 0..8 {
            for u in 0..8 {
                valid.set(u, v, true);
            }
        }
        // interior shape
        let s = BinaryShape::from_pixels(vec![(3, 3), (4, 3)]).unwrap();
        assert!(!s.touches_boundary(&valid));
        // shape at image edge
        let e = BinaryShape::from_pixels(vec![(0, 3)]).unwrap();
        assert!(e.touches_boundary(&valid));
        // shape next to an invalid pixel
        valid.set(5, 5, false);
        let n = BinaryShape::from_pixels(vec![(4, 4)]).unwrap();
        assert!(n.touches_boundary(&valid));
    }

    #[test]
    fn centroid_of_square() {
        let s = BinaryShape::from_pixels(vec![(2, 2), (3, 2), (2, 3), (3, 3)]).unwrap();
        assert_eq!(s.centroid(), (2.5, 2.5));
    }
}
