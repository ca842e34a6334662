//! Synthetic ground-marking world: scripted trajectories over a plane of
//! man-made markings, rendered into front-camera masks with the true
//! roll/pitch disturbances, plus seeded noisy odometry. Everything a
//! pipeline stage needs an oracle for comes from here.

use crate::camera::{ground_to_bev, ground_to_pixel, CameraModel, GroundPoint, MotionState, VirtualCamera};
use crate::eval::{MarkingAnnotation, ScenarioAnnotations, VisitAnnotation};
use crate::geom::{Point2, Se2};
use crate::mask::BinaryMask;
use crate::pose::Pose6;
use crate::scalar::wrap_angle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Pose6F64 = Pose6<f64>;

/// Sampled standard normal via Box-Muller (keeps the generator's output
/// a pure function of the seeded stream).
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Arrow,
    /// Hollow C-frame standing in for a block of painted text.
    Glyph,
    Diamond,
    Disk,
    Stripe,
    /// L-shaped corner marking.
    Corner,
}

impl TemplateKind {
    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Arrow => "arrow",
            TemplateKind::Glyph => "glyph",
            TemplateKind::Diamond => "diamond",
            TemplateKind::Disk => "disk",
            TemplateKind::Stripe => "stripe",
            TemplateKind::Corner => "corner",
        }
    }

    pub fn all() -> [TemplateKind; 6] {
        [
            TemplateKind::Arrow,
            TemplateKind::Glyph,
            TemplateKind::Diamond,
            TemplateKind::Disk,
            TemplateKind::Stripe,
            TemplateKind::Corner,
        ]
    }
}

/// A marking shape: simple polygons in local meters around the shape
/// center, plus a rotational-symmetry flag for test expectations.
#[derive(Debug, Clone)]
pub struct MarkingTemplate {
    pub kind: TemplateKind,
    pub polygons: Vec<Vec<Point2<f64>>>,
    pub symmetric: bool,
}

impl MarkingTemplate {
    pub fn new(kind: TemplateKind, scale: f64) -> Self {
        let s = scale;
        let poly = |pts: &[(f64, f64)]| -> Vec<Point2<f64>> {
            pts.iter().map(|&(x, y)| Point2::new(x * s, y * s)).collect()
        };
        let (polygons, symmetric) = match kind {
            TemplateKind::Arrow => (
                vec![poly(&[
                    (-0.55, -0.13),
                    (0.05, -0.13),
                    (0.05, -0.33),
                    (0.55, 0.0),
                    (0.05, 0.33),
                    (0.05, 0.13),
                    (-0.55, 0.13),
                ])],
                false,
            ),
            TemplateKind::Glyph => (
                vec![poly(&[
                    (-0.8, -0.5),
                    (0.8, -0.5),
                    (0.8, -0.24),
                    (-0.54, -0.24),
                    (-0.54, 0.24),
                    (0.8, 0.24),
                    (0.8, 0.5),
                    (-0.8, 0.5),
                ])],
                false,
            ),
            TemplateKind::Diamond => (
                vec![poly(&[(0.55, 0.0), (0.0, 0.32), (-0.55, 0.0), (0.0, -0.32)])],
                // two-fold rotational symmetry
                true,
            ),
            TemplateKind::Disk => {
                let n = 48;
                let r = 0.7;
                let pts: Vec<Point2<f64>> = (0..n)
                    .map(|i| {
                        let a = i as f64 / n as f64 * std::f64::consts::TAU;
                        Point2::new(r * s * a.cos(), r * s * a.sin())
                    })
                    .collect();
                (vec![pts], true)
            }
            TemplateKind::Stripe => (
                vec![poly(&[(-1.1, -0.18), (1.1, -0.18), (1.1, 0.18), (-1.1, 0.18)])],
                true,
            ),
            TemplateKind::Corner => (
                vec![poly(&[
                    (-0.5, -0.5),
                    (0.6, -0.5),
                    (0.6, -0.2),
                    (-0.2, -0.2),
                    (-0.2, 0.6),
                    (-0.5, 0.6),
                ])],
                false,
            ),
        };
        Self { kind, polygons, symmetric }
    }
}

/// A template instanced onto the world ground plane.
#[derive(Debug, Clone)]
pub struct PlacedMarking {
    pub id: usize,
    pub template: MarkingTemplate,
    /// Pose of the template frame on the ground plane.
    pub pose: Se2<f64>,
}

impl PlacedMarking {
    pub fn world_polygons(&self) -> Vec<Vec<Point2<f64>>> {
        self.polygons_with(|p| self.pose.apply(p))
    }

    fn polygons_with(&self, f: impl Fn(Point2<f64>) -> Point2<f64>) -> Vec<Vec<Point2<f64>>> {
        self.template
            .polygons
            .iter()
            .map(|poly| poly.iter().map(|&p| f(p)).collect())
            .collect()
    }
}

/// Per-step odometry noise sigmas (applied to each relative pose).
#[derive(Debug, Clone, Copy)]
pub struct OdomNoise {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_yaw: f64,
}

impl OdomNoise {
    pub fn none() -> Self {
        Self { sigma_x: 0.0, sigma_y: 0.0, sigma_yaw: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub frame_period: f64,
    pub trajectory: Vec<Pose6F64>,
    pub markings: Vec<PlacedMarking>,
    pub noise: OdomNoise,
    pub camera: CameraModel<f64>,
    pub virtual_camera: VirtualCamera<f64>,
    pub annotations: ScenarioAnnotations,
}

impl Scenario {
    pub fn frame_count(&self) -> usize {
        self.trajectory.len()
    }
}

/// Desk-scale default sensor rig: VGA front camera 0.8 m above ground
/// pitched down 20 degrees, 10 m x 10 m BEV at 40 px/m.
pub fn default_camera() -> CameraModel<f64> {
    CameraModel::new(0.0028, 0.8, 0.349, (640, 480), 5.6e-6, (320.0, 240.0))
        .expect("valid default calibration")
}

pub fn default_virtual_camera() -> VirtualCamera<f64> {
    VirtualCamera::nadir((400, 400), 10.0, 10.0).expect("valid default BEV")
}

/// Render the binary saliency mask seen by the front camera at `frame`,
/// projecting every marking polygon with the true roll/pitch attitude.
/// This is the exact inverse of the projection the pipeline undoes.
pub fn render_mask(s: &Scenario, frame: usize) -> BinaryMask {
    let pose = &s.trajectory[frame];
    let robot = pose.se2();
    let motion = MotionState::new(pose.roll, pose.pitch);
    let (w, h) = s.camera.image_size;
    let mut mask = BinaryMask::new(w, h);
    let inv = robot.inverse();
    for marking in &s.markings {
        // cheap distance prefilter
        let d = robot.t.dist(marking.pose.t);
        if d > 16.0 {
            continue;
        }
        for poly in marking.world_polygons() {
            let local: Vec<Point2<f64>> = poly.iter().map(|&p| inv.apply(p)).collect();
            let clipped = clip_forward(&local, 0.05);
            if clipped.len() < 3 {
                continue;
            }
            let projected: Vec<(f64, f64)> = clipped
                .iter()
                .filter_map(|&p| ground_to_pixel(GroundPoint::new(p.x, p.y), &s.camera, &motion))
                .collect();
            if projected.len() == clipped.len() {
                fill_polygon(&mut mask, &projected);
            }
        }
    }
    mask
}

/// Sutherland-Hodgman clip of a polygon against the half-plane `x >= x_min`.
fn clip_forward(poly: &[Point2<f64>], x_min: f64) -> Vec<Point2<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let a_in = a.x >= x_min;
        let b_in = b.x >= x_min;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (x_min - a.x) / (b.x - a.x);
            out.push(Point2::new(x_min, a.y + t * (b.y - a.y)));
        }
    }
    out
}

/// Even-odd scanline fill with pixel-center sampling (integer coordinates
/// are pixel centers).
fn fill_polygon(mask: &mut BinaryMask, vertices: &[(f64, f64)]) {
    let n = vertices.len();
    if n < 3 {
        return;
    }
    let (w, h) = (mask.width as i64, mask.height as i64);
    let min_v = vertices.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_v = vertices.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let row_lo = (min_v.ceil().max(0.0)) as i64;
    let row_hi = (max_v.floor().min((h - 1) as f64)) as i64;
    let mut crossings: Vec<f64> = Vec::with_capacity(8);
    for row in row_lo..=row_hi {
        let y = row as f64;
        crossings.clear();
        for i in 0..n {
            let (x0, y0) = vertices[i];
            let (x1, y1) = vertices[(i + 1) % n];
            // half-open rule avoids double-counting shared vertices
            if (y0 <= y && y1 > y) || (y1 <= y && y0 > y) {
                let t = (y - y0) / (y1 - y0);
                crossings.push(x0 + t * (x1 - x0));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        for pair in crossings.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            let lo = pair[0].ceil().max(0.0) as i64;
            let hi = pair[1].floor().min((w - 1) as f64) as i64;
            for u in lo..=hi {
                mask.set(u as u32, row as u32, true);
            }
        }
    }
}

/// Integrated noisy odometry: ground-truth relative planar steps with
/// zero-mean Gaussian perturbations, deterministic per seed. Roll and
/// pitch are passed through unperturbed (attitude comes from an IMU in
/// the rig this models).
pub fn noisy_odometry(s: &Scenario, seed: u64) -> Vec<Pose6F64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(s.trajectory.len());
    let first = s.trajectory[0];
    let mut cur = first.se2();
    out.push(first);
    for w in s.trajectory.windows(2) {
        let z = w[0].se2().between(&w[1].se2());
        let noisy = Se2::new(
            z.t.x + s.noise.sigma_x * gauss(&mut rng),
            z.t.y + s.noise.sigma_y * gauss(&mut rng),
            z.yaw + s.noise.sigma_yaw * gauss(&mut rng),
        );
        cur = cur.compose(&noisy);
        let mut p = w[1].with_se2(cur);
        p.z = w[1].z;
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Straight(f64),
    /// Arc with signed turn angle (radians, positive left) and radius.
    Turn(f64, f64),
}

/// Bumps and slope windows along the path arclength.
#[derive(Debug, Clone, Default)]
struct AttitudeScript {
    /// (center arclength, amplitude rad, half-width m)
    pitch_bumps: Vec<(f64, f64, f64)>,
    roll_bumps: Vec<(f64, f64, f64)>,
    /// (start, end, pitch rad) sustained windows with cosine ramps
    slopes: Vec<(f64, f64, f64)>,
    /// Rolling-terrain ripple: (amplitude rad, wavelength m)
    ripple: Option<(f64, f64)>,
}

impl AttitudeScript {
    fn pitch_at(&self, s: f64) -> f64 {
        let mut p = 0.0;
        for &(c, a, w) in &self.pitch_bumps {
            if (s - c).abs() < w {
                let t = (s - c) / w * std::f64::consts::FRAC_PI_2;
                p += a * t.cos().powi(2);
            }
        }
        for &(lo, hi, a) in &self.slopes {
            let ramp = 2.0;
            if s >= lo && s <= hi {
                let up = ((s - lo) / ramp).min(1.0);
                let down = ((hi - s) / ramp).min(1.0);
                p += a * up.min(down);
            }
        }
        if let Some((a, wavelength)) = self.ripple {
            p += a * (std::f64::consts::TAU * s / wavelength).sin();
        }
        p
    }

    fn roll_at(&self, s: f64) -> f64 {
        let mut r = 0.0;
        for &(c, a, w) in &self.roll_bumps {
            if (s - c).abs() < w {
                let t = (s - c) / w * std::f64::consts::FRAC_PI_2;
                r += a * t.cos().powi(2);
            }
        }
        if let Some((a, wavelength)) = self.ripple {
            r += 0.4 * a * (std::f64::consts::TAU * s / (wavelength * 1.7)).sin();
        }
        r
    }
}

struct PathBuilder {
    step: f64,
    frame_period: f64,
    heading: f64,
    position: Point2<f64>,
    arclength: f64,
    samples: Vec<(Point2<f64>, f64, f64)>, // position, heading, arclength
}

impl PathBuilder {
    fn new(step: f64, frame_period: f64) -> Self {
        Self {
            step,
            frame_period,
            heading: 0.0,
            position: Point2::zero(),
            arclength: 0.0,
            samples: vec![(Point2::zero(), 0.0, 0.0)],
        }
    }

    fn advance(&mut self, seg: Segment) {
        match seg {
            Segment::Straight(len) => {
                let steps = (len / self.step).round() as usize;
                for _ in 0..steps {
                    let dir = Point2::new(self.heading.cos(), self.heading.sin());
                    self.position = self.position + dir * self.step;
                    self.arclength += self.step;
                    self.samples.push((self.position, self.heading, self.arclength));
                }
            }
            Segment::Turn(angle, radius) => {
                let arc = angle.abs() * radius;
                let steps = (arc / self.step).round().max(1.0) as usize;
                let dyaw = angle / steps as f64;
                for _ in 0..steps {
                    self.heading = wrap_angle(self.heading + dyaw);
                    let dir = Point2::new(self.heading.cos(), self.heading.sin());
                    self.position = self.position + dir * self.step;
                    self.arclength += self.step;
                    self.samples.push((self.position, self.heading, self.arclength));
                }
            }
        }
    }

    fn finish(self, script: &AttitudeScript) -> Vec<Pose6F64> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &(p, heading, s))| {
                Pose6::new(
                    i as f64 * self.frame_period,
                    p.x,
                    p.y,
                    0.0,
                    script.roll_at(s),
                    script.pitch_at(s),
                    heading,
                )
            })
            .collect()
    }

    fn mark_here_in(&self, ahead: f64, lateral: f64) -> Se2<f64> {
        let dir = Point2::new(self.heading.cos(), self.heading.sin());
        let left = Point2::new(-self.heading.sin(), self.heading.cos());
        let pos = self.position + dir * ahead + left * lateral;
        Se2 { t: pos, yaw: self.heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Delivery,
    ReverseSlope,
    LargeLoop,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Delivery => "delivery",
            ScenarioKind::ReverseSlope => "reverse_slope",
            ScenarioKind::LargeLoop => "large_loop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "delivery" => Some(Self::Delivery),
            "reverse_slope" => Some(Self::ReverseSlope),
            "large_loop" => Some(Self::LargeLoop),
            _ => None,
        }
    }
}

/// Deterministic scenario generator. The seed perturbs marking choice
/// and placement, never the route topology.
pub fn make_scenario(kind: ScenarioKind, seed: u64) -> Scenario {
    match kind {
        ScenarioKind::Delivery => delivery_scenario(seed),
        ScenarioKind::ReverseSlope => reverse_slope_scenario(seed),
        ScenarioKind::LargeLoop => large_loop_scenario(seed),
    }
}

const STEP_M: f64 = 0.1;
const FRAME_PERIOD_S: f64 = 0.1;

fn non_symmetric_kinds() -> [TemplateKind; 3] {
    [TemplateKind::Arrow, TemplateKind::Glyph, TemplateKind::Corner]
}

fn place_markings_along(
    builder: &PathBuilder,
    rng: &mut ChaCha8Rng,
    next_id: &mut usize,
    kinds: &[TemplateKind],
    marks: &mut Vec<PlacedMarking>,
) {
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let scale = rng.gen_range(0.9..1.5);
    let lateral = rng.gen_range(-0.4..0.4);
    let spin: f64 = rng.gen_range(-0.6..0.6);
    let mut pose = builder.mark_here_in(5.5, lateral);
    pose.yaw = wrap_angle(pose.yaw + spin);
    marks.push(PlacedMarking { id: *next_id, template: MarkingTemplate::new(kind, scale), pose });
    *next_id += 1;
}

fn delivery_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD311);
    let mut b = PathBuilder::new(STEP_M, FRAME_PERIOD_S);
    let mut marks = Vec::new();
    let mut next_id = 0;
    let mut script = AttitudeScript::default();

    // outbound leg with markings dropped ahead every ~7 m
    for leg in 0..6 {
        place_markings_along(&b, &mut rng, &mut next_id, &TemplateKind::all(), &mut marks);
        if leg == 2 {
            script.pitch_bumps.push((b.arclength + 2.0, 0.08, 0.4));
            script.roll_bumps.push((b.arclength + 2.3, 0.03, 0.4));
        }
        b.advance(Segment::Straight(7.0));
    }
    // turn around and drive home
    b.advance(Segment::Turn(std::f64::consts::PI, 1.6));
    b.advance(Segment::Straight(46.0));

    build_scenario("delivery", b, script, marks, OdomNoise { sigma_x: 0.008, sigma_y: 0.004, sigma_yaw: 0.0025 })
}

fn reverse_slope_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5107E);
    let mut b = PathBuilder::new(STEP_M, FRAME_PERIOD_S);
    let mut marks = Vec::new();
    let mut next_id = 0;
    let mut script = AttitudeScript {
        // rolling terrain everywhere: uncompensated projection smears
        ripple: Some((0.035, 6.3)),
        ..AttitudeScript::default()
    };

    for leg in 0..8 {
        place_markings_along(&b, &mut rng, &mut next_id, &non_symmetric_kinds(), &mut marks);
        // a bump inside most observation windows
        if leg % 2 == 0 {
            script.pitch_bumps.push((b.arclength + 2.5, 0.09, 0.5));
        }
        b.advance(Segment::Straight(8.0));
    }
    // sustained slope stretch without markings
    script.slopes.push((b.arclength + 2.0, b.arclength + 14.0, 0.06));
    b.advance(Segment::Straight(16.0));
    // turn around: every loop is a reverse loop
    b.advance(Segment::Turn(std::f64::consts::PI, 1.6));
    b.advance(Segment::Straight(84.0));

    build_scenario(
        "reverse_slope",
        b,
        script,
        marks,
        OdomNoise { sigma_x: 0.01, sigma_y: 0.005, sigma_yaw: 0.003 },
    )
}

fn large_loop_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1A26E);
    let mut b = PathBuilder::new(STEP_M, FRAME_PERIOD_S);
    let mut marks = Vec::new();
    let mut next_id = 0;
    let mut script = AttitudeScript::default();

    // rounded 60 x 40 rectangle, two forward laps
    let corner_radius = 3.0;
    let quarter = std::f64::consts::FRAC_PI_2;
    for lap in 0..2 {
        for side in 0..4 {
            let len: f64 = if side % 2 == 0 { 60.0 } else { 40.0 };
            let across = (len / 9.0).floor() as usize;
            for k in 0..across {
                if lap == 0 {
                    place_markings_along(&b, &mut rng, &mut next_id, &TemplateKind::all(), &mut marks);
                    if k % 3 == 1 {
                        script.pitch_bumps.push((b.arclength + 2.5, 0.07, 0.5));
                    }
                }
                b.advance(Segment::Straight(9.0));
            }
            b.advance(Segment::Straight(len - 9.0 * across as f64));
            b.advance(Segment::Turn(quarter, corner_radius));
        }
    }
    // reverse tail along the first side
    b.advance(Segment::Turn(std::f64::consts::PI, 1.6));
    b.advance(Segment::Straight(58.0));

    build_scenario(
        "large_loop",
        b,
        script,
        marks,
        OdomNoise { sigma_x: 0.01, sigma_y: 0.005, sigma_yaw: 0.002 },
    )
}

fn build_scenario(
    name: &str,
    builder: PathBuilder,
    script: AttitudeScript,
    markings: Vec<PlacedMarking>,
    noise: OdomNoise,
) -> Scenario {
    let trajectory = builder.finish(&script);
    let camera = default_camera();
    let virtual_camera = default_virtual_camera();
    let mut scenario = Scenario {
        name: name.to_string(),
        frame_period: FRAME_PERIOD_S,
        trajectory,
        markings,
        noise,
        camera,
        virtual_camera,
        annotations: ScenarioAnnotations::default(),
    };
    scenario.annotations = annotate(&scenario);
    scenario
}

/// Minimum frames of full visibility to count a visit.
const MIN_VISIT_FRAMES: usize = 6;
/// Visibility runs closer than this many frames merge into one visit.
const VISIT_MERGE_GAP: usize = 40;
/// Boundary sample spacing along polygon edges, meters.
const SAMPLE_SPACING_M: f64 = 0.08;

/// Compute, for every marking, the frame windows in which it is fully
/// visible (all boundary samples project inside both the front image and
/// the BEV with margin). These windows are the detection expectations.
fn annotate(s: &Scenario) -> ScenarioAnnotations {
    let (iw, ih) = s.camera.image_size;
    let (bw, bh) = s.virtual_camera.bev_size;
    let mut markings = Vec::new();
    for m in &s.markings {
        let samples: Vec<Point2<f64>> = m
            .world_polygons()
            .iter()
            .flat_map(|poly| sample_boundary(poly, SAMPLE_SPACING_M))
            .collect();
        let mut visible = vec![false; s.trajectory.len()];
        for (f, pose) in s.trajectory.iter().enumerate() {
            if pose.se2().t.dist(m.pose.t) > 13.0 {
                continue;
            }
            let inv = pose.se2().inverse();
            let motion = MotionState::new(pose.roll, pose.pitch);
            visible[f] = samples.iter().all(|&w| {
                let p = inv.apply(w);
                if p.x < 0.3 {
                    return false;
                }
                let Some((u, v)) = ground_to_pixel(GroundPoint::new(p.x, p.y), &s.camera, &motion)
                else {
                    return false;
                };
                if u < 2.0 || v < 2.0 || u > (iw - 3) as f64 || v > (ih - 3) as f64 {
                    return false;
                }
                let (bu, bv) = ground_to_bev(GroundPoint::new(p.x, p.y), &s.virtual_camera);
                bu >= 3.0 && bv >= 3.0 && bu <= (bw - 4) as f64 && bv <= (bh - 4) as f64
            });
        }
        // raw visibility runs, then merge runs split by short occlusions
        // (a bump can clip the footprint for a few frames mid-approach)
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut start: Option<usize> = None;
        for f in 0..=visible.len() {
            let on = f < visible.len() && visible[f];
            match (on, start) {
                (true, None) => start = Some(f),
                (false, Some(s0)) => {
                    runs.push((s0, f - 1));
                    start = None;
                }
                _ => {}
            }
        }
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for run in runs {
            match merged.last_mut() {
                Some(last) if run.0 <= last.1 + VISIT_MERGE_GAP => last.1 = run.1,
                _ => merged.push(run),
            }
        }
        let visits: Vec<VisitAnnotation> = merged
            .into_iter()
            .filter(|&(a, b)| b + 1 - a >= MIN_VISIT_FRAMES)
            .map(|(a, b)| VisitAnnotation {
                first_frame: a,
                last_frame: b,
                heading: mean_heading(&s.trajectory[a..=b]),
            })
            .collect();
        markings.push(MarkingAnnotation {
            id: m.id,
            name: m.template.kind.name().to_string(),
            center: [m.pose.t.x, m.pose.t.y],
            symmetric: m.template.symmetric,
            visits,
        });
    }
    ScenarioAnnotations { markings }
}

fn sample_boundary(poly: &[Point2<f64>], spacing: f64) -> Vec<Point2<f64>> {
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let len = a.dist(b);
        let n = (len / spacing).ceil().max(1.0) as usize;
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push(Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    out
}

fn mean_heading(poses: &[Pose6F64]) -> f64 {
    let (s, c) = poses
        .iter()
        .fold((0.0, 0.0), |(s, c), p| (s + p.yaw.sin(), c + p.yaw.cos()));
    s.atan2(c)
}
