//! Salient-ground-feature detection over a stream of BEV masks.
//!
//! Connected components are associated frame-to-frame into tracks by
//! ground-plane centroid proximity. When a track closes (its feature left
//! the view) a single optimal instance is picked from the stable part of
//! the track: the largest shape whose Hu vector barely moved between
//! consecutive observations and which lies fully inside the observable
//! BEV footprint.

use crate::camera::{bev_to_ground, BevMask, GroundPoint, VirtualCamera};
use crate::mask::{connected_components, BinaryShape};
use crate::moments::{hu_distance, hu_vector, HuVector};

pub const DEFAULT_HU_STABILITY: f64 = 0.005;
pub const DEFAULT_MIN_COMPONENT_PX: usize = 50;
pub const DEFAULT_TRACK_GATE_M: f64 = 0.5;
pub const DEFAULT_GAP_TOLERANCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Appearing,
    Tracking,
    Closed,
}

/// One observation of a tracked feature.
#[derive(Debug, Clone)]
pub struct TrackedFrame {
    pub frame: usize,
    pub shape: BinaryShape,
    pub hu: HuVector<f64>,
    /// Shape centroid on the ground plane, camera-relative.
    pub centroid_ground: GroundPoint<f64>,
    /// False when the shape touched the image border or the valid-region
    /// edge at this frame (partially observed).
    pub interior: bool,
}

/// The appearance episode of one ground feature.
#[derive(Debug, Clone)]
pub struct FeatureTrack {
    pub id: u64,
    pub frames: Vec<TrackedFrame>,
    pub state: TrackState,
}

/// One selected optimal instance of a track.
#[derive(Debug, Clone)]
pub struct SgfCandidate {
    pub frame: usize,
    pub shape: BinaryShape,
    pub hu: HuVector<f64>,
    /// BEV pixel count; the saliency proxy used for "most salient".
    pub saliency_score: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TrackerConfig {
    pub min_component_px: usize,
    /// Max ground-plane centroid motion between consecutive frames, meters.
    pub gate_m: f64,
    /// Frames a track may go unmatched before it closes.
    pub gap_tolerance: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            min_component_px: DEFAULT_MIN_COMPONENT_PX,
            gate_m: DEFAULT_TRACK_GATE_M,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
        }
    }
}

struct ActiveTrack {
    track: FeatureTrack,
    misses: usize,
}

/// Frame-by-frame feature tracker. Feed BEV masks in temporal order;
/// closed tracks are handed back as they finish.
pub struct Tracker {
    cfg: TrackerConfig,
    vc: VirtualCamera<f64>,
    active: Vec<ActiveTrack>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, vc: VirtualCamera<f64>) -> Self {
        Self { cfg, vc, active: Vec::new(), next_id: 0 }
    }

    /// Ingest one frame; returns the tracks that closed on this frame.
    pub fn ingest(&mut self, frame: usize, bev: &BevMask) -> Vec<FeatureTrack> {
        let shapes = connected_components(&bev.mask, self.cfg.min_component_px);
        let observations: Vec<TrackedFrame> = shapes
            .into_iter()
            .filter_map(|shape| {
                let (cu, cv) = shape.centroid();
                let centroid_ground = bev_to_ground(cu, cv, &self.vc);
                let interior = !shape.touches_boundary(&bev.valid);
                let hu = hu_vector(&shape).ok()?;
                Some(TrackedFrame { frame, shape, hu, centroid_ground, interior })
            })
            .collect();

        // greedy nearest-centroid association, unique on both sides
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, at) in self.active.iter().enumerate() {
            let last = at.track.frames.last().expect("active track has frames");
            for (oi, obs) in observations.iter().enumerate() {
                let d = ((last.centroid_ground.x - obs.centroid_ground.x).powi(2)
                    + (last.centroid_ground.y - obs.centroid_ground.y).powi(2))
                .sqrt();
                if d <= self.cfg.gate_m {
                    pairs.push((d, ti, oi));
                }
            }
        }
        pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let mut track_taken = vec![false; self.active.len()];
        let mut obs_taken = vec![false; observations.len()];
        let mut assignment: Vec<Option<usize>> = vec![None; observations.len()];
        for (_, ti, oi) in pairs {
            if !track_taken[ti] && !obs_taken[oi] {
                track_taken[ti] = true;
                obs_taken[oi] = true;
                assignment[oi] = Some(ti);
            }
        }

        for (oi, obs) in observations.into_iter().enumerate() {
            match assignment[oi] {
                Some(ti) => {
                    let at = &mut self.active[ti];
                    at.misses = 0;
                    at.track.state = TrackState::Tracking;
                    at.track.frames.push(obs);
                }
                None => {
                    let track = FeatureTrack {
                        id: self.next_id,
                        frames: vec![obs],
                        state: TrackState::Appearing,
                    };
                    self.next_id += 1;
                    self.active.push(ActiveTrack { track, misses: 0 });
                    track_taken.push(true);
                }
            }
        }

        // age unmatched tracks; close them once the gap tolerance is spent
        // or the feature was last seen leaving the observable region
        let gap = self.cfg.gap_tolerance;
        let mut closed = Vec::new();
        let mut idx = 0;
        self.active.retain_mut(|at| {
            let was_matched = track_taken.get(idx).copied().unwrap_or(false);
            idx += 1;
            if was_matched {
                return true;
            }
            at.misses += 1;
            let exited = !at.track.frames.last().expect("frames").interior;
            if at.misses >= gap || exited {
                let mut t = std::mem::replace(
                    &mut at.track,
                    FeatureTrack { id: 0, frames: Vec::new(), state: TrackState::Closed },
                );
                t.state = TrackState::Closed;
                closed.push(t);
                false
            } else {
                true
            }
        });
        closed.sort_by_key(|t| t.id);
        closed
    }

    /// Close and return all remaining tracks (end of stream).
    pub fn flush(&mut self) -> Vec<FeatureTrack> {
        let mut out: Vec<FeatureTrack> = self
            .active
            .drain(..)
            .map(|mut at| {
                at.track.state = TrackState::Closed;
                at.track
            })
            .collect();
        out.sort_by_key(|t| t.id);
        out
    }
}

/// Pick the optimal instance of a closed track: among frames belonging to
/// a consecutive pair with `hu_distance < d_max`, the interior frame with
/// the highest saliency score. `None` when no frame qualifies (single
/// observation, unstable shape, or always clipped).
pub fn select_optimal_sgf(t: &FeatureTrack, d_max: f64) -> Option<SgfCandidate> {
    let n = t.frames.len();
    if n < 2 {
        return None;
    }
    let mut stable = vec![false; n];
    for i in 1..n {
        if hu_distance(&t.frames[i - 1].hu, &t.frames[i].hu) < d_max {
            stable[i - 1] = true;
            stable[i] = true;
        }
    }
    let mut best: Option<&TrackedFrame> = None;
    for (i, f) in t.frames.iter().enumerate() {
        if !stable[i] || !f.interior {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => f.shape.area() > b.shape.area(),
        };
        if better {
            best = Some(f);
        }
    }
    best.map(|f| SgfCandidate {
        frame: f.frame,
        shape: f.shape.clone(),
        hu: f.hu,
        saliency_score: f.shape.area(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::VirtualCamera;
    use crate::mask::BinaryMask;

    fn vc() -> VirtualCamera<f64> {
        VirtualCamera::nadir((200, 200), 10.0, 10.0).unwrap()
    }

    fn bev_with_blob(cu: u32, cv: u32, half: u32) -> BevMask {
        let mut mask = BinaryMask::new(200, 200);
        let mut valid = BinaryMask::new(200, 200);
        for v in 0..200 {
            for u in 0..200 {
                valid.set(u, v, true);
            }
        }
        for v in cv - half..=cv + half {
            for u in cu - half..=cu + half {
                mask.set(u, v, true);
            }
        }
        BevMask { mask, valid }
    }

    fn empty_bev() -> BevMask {
        let mut valid = BinaryMask::new(200, 200);
        for v in 0..200 {
            for u in 0..200 {
                valid.set(u, v, true);
            }
        }
        BevMask { mask: BinaryMask::new(200, 200), valid }
    }

    #[test]
    fn single_feature_yields_one_track_with_full_range() {
        let mut tracker = Tracker::new(TrackerConfig::default(), vc());
        let mut closed = Vec::new();
        for frame in 0..30 {
            let bev = if (10..=20).contains(&frame) {
                bev_with_blob(100, 100, 6)
            } else {
                empty_bev()
            };
            closed.extend(tracker.ingest(frame, &bev));
        }
        closed.extend(tracker.flush());
        assert_eq!(closed.len(), 1);
        let t = &closed[0];
        assert_eq!(t.state, TrackState::Closed);
        assert_eq!(t.frames.first().unwrap().frame, 10);
        assert_eq!(t.frames.last().unwrap().frame, 20);
    }

    #[test]
    fn two_distant_features_yield_two_tracks() {
        let mut tracker = Tracker::new(TrackerConfig::default(), vc());
        for frame in 0..5 {
            let mut bev = bev_with_blob(40, 100, 6);
            for v in 94..=106 {
                for u in 154..=166 {
                    bev.mask.set(u, v, true);
                }
            }
            // 120 px apart = 6 m on the ground, far beyond the gate
            tracker.ingest(frame, &bev);
        }
        let closed = tracker.flush();
        assert_eq!(closed.len(), 2);
        assert!(closed.iter().all(|t| t.frames.len() == 5));
    }

    #[test]
    fn one_frame_flicker_does_not_split_the_track() {
        let mut tracker = Tracker::new(TrackerConfig::default(), vc());
        let mut closed = Vec::new();
        for frame in 0..12 {
            let bev = if frame == 5 || frame > 8 {
                empty_bev()
            } else {
                bev_with_blob(100, 100, 6)
            };
            closed.extend(tracker.ingest(frame, &bev));
        }
        closed.extend(tracker.flush());
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].frames.len(), 8);
    }

    fn synth_track(specs: &[(f64, usize, bool)]) -> FeatureTrack {
        // (hu1, area, interior): remaining hu components zero so the pair
        // distance is |hu1[i-1] - hu1[i]|
        let frames = specs
            .iter()
            .enumerate()
            .map(|(i, &(hu1, area, interior))| {
                let px: Vec<(u32, u32)> = (0..area as u32).map(|k| (k % 64, k / 64)).collect();
                TrackedFrame {
                    frame: i,
                    shape: BinaryShape::from_pixels(px).unwrap(),
                    hu: HuVector { h: [hu1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] },
                    centroid_ground: GroundPoint::new(1.0, 0.0),
                    interior,
                }
            })
            .collect();
        FeatureTrack { id: 0, frames, state: TrackState::Closed }
    }

    #[test]
    fn selects_largest_stable_interior_frame() {
        // enters clipped, stable in the middle, leaves clipped
        let t = synth_track(&[
            (0.30, 500, false),
            (0.200, 900, true),
            (0.2001, 1200, true),
            (0.2002, 1100, true),
            (0.2003, 1000, true),
            (0.35, 600, false),
        ]);
        let c = select_optimal_sgf(&t, 0.005).unwrap();
        assert_eq!(c.frame, 2);
        assert_eq!(c.saliency_score, 1200);
    }

    #[test]
    fn all_border_frames_select_nothing() {
        let t = synth_track(&[(0.2, 100, false), (0.2, 120, false), (0.2, 90, false)]);
        assert!(select_optimal_sgf(&t, 0.005).is_none());
    }

    #[test]
    fn single_frame_track_selects_nothing() {
        let t = synth_track(&[(0.2, 100, true)]);
        assert!(select_optimal_sgf(&t, 0.005).is_none());
    }

    #[test]
    fn matches_brute_force_on_random_tracks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let len = rng.gen_range(1..12);
            let specs: Vec<(f64, usize, bool)> = (0..len)
                .map(|_| {
                    (
                        rng.gen_range(0..5) as f64 * 0.002,
                        rng.gen_range(60..2000),
                        rng.gen_bool(0.7),
                    )
                })
                .collect();
            let t = synth_track(&specs);
            let got = select_optimal_sgf(&t, 0.005);

            // independent brute force over all frames
            let mut want: Option<(usize, usize)> = None;
            for i in 0..t.frames.len() {
                let stable_prev = i > 0
                    && hu_distance(&t.frames[i - 1].hu, &t.frames[i].hu) < 0.005;
                let stable_next = i + 1 < t.frames.len()
                    && hu_distance(&t.frames[i].hu, &t.frames[i + 1].hu) < 0.005;
                if (stable_prev || stable_next) && t.frames[i].interior {
                    let area = t.frames[i].shape.area();
                    if want.map_or(true, |(_, a)| area > a) {
                        want = Some((i, area));
                    }
                }
            }
            match (got, want) {
                (None, None) => {}
                (Some(c), Some((frame, area))) => {
                    assert_eq!(c.frame, frame);
                    assert_eq!(c.saliency_score, area);
                }
                (g, w) => panic!("mismatch: got {g:?}, want {w:?}"),
            }
        }
    }

    #[test]
    fn selection_is_deterministic() {
        let t = synth_track(&[(0.1, 100, true), (0.1001, 100, true), (0.1002, 100, true)]);
        let a = select_optimal_sgf(&t, 0.005).unwrap();
        let b = select_optimal_sgf(&t, 0.005).unwrap();
        assert_eq!(a.frame, b.frame);
        assert_eq!(a.frame, 0); // ties go to the earliest frame
    }
}
