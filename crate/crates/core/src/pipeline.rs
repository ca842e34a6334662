//! End-to-end orchestration: dataset in, corrected trajectory and metrics
//! out. Also hosts the simulator entry point that writes datasets in the
//! exact layout the runner ingests.

use crate::camera::{
    compensation_from_queue, warp_mask_to_bev, CameraError, CameraModel, MotionState, PoseQueue,
    VirtualCamera,
};
use crate::descriptor::{back_project, build_descriptor, DescriptorParams};
use crate::detect::{select_optimal_sgf, Tracker, TrackerConfig};
use crate::eval::{
    ate, count_sequence_metrics, AteOptions, AteReport, CandidateRecord, DetectionRecord,
    ScenarioAnnotations, SequenceCounters,
};
use crate::geom::Mat3;
use crate::graph::{optimize, GraphSolution, OptimizeOptions, PoseEdge, PoseNode};
use crate::group::{GroupSet, SgfInstance};
use crate::icp::{icp_2d, icp_init_from_shift, IcpConfig};
use crate::io;
use crate::loop_closure::{find_loop_candidate, make_loop_constraint, LoopConstraint};
use crate::mask::BinaryMask;
use crate::pose::Pose6;
use crate::sim::{make_scenario, noisy_odometry, render_mask, Scenario, ScenarioKind};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad dataset, calibration or configuration (CLI exit code 2).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A stage failed while processing valid-looking input (exit code 3).
    #[error("pipeline failure: {0}")]
    Stage(String),
}

impl From<io::IoError> for PipelineError {
    fn from(e: io::IoError) -> Self {
        PipelineError::InvalidInput(e.to_string())
    }
}

fn de_true() -> bool {
    true
}

macro_rules! default_fns {
    ($($name:ident: $ty:ty = $val:expr;)*) => {
        $(fn $name() -> $ty { $val })*
    };
}

default_fns! {
    d_queue: usize = crate::camera::DEFAULT_QUEUE_LEN;
    d_gate: f64 = crate::camera::DEFAULT_PITCH_GATE;
    d_hu: f64 = crate::detect::DEFAULT_HU_STABILITY;
    d_min_px: usize = crate::detect::DEFAULT_MIN_COMPONENT_PX;
    d_track_gate: f64 = crate::detect::DEFAULT_TRACK_GATE_M;
    d_track_gap: usize = crate::detect::DEFAULT_GAP_TOLERANCE;
    d_l_max: f64 = crate::descriptor::DEFAULT_L_MAX;
    d_sectors: usize = crate::descriptor::DEFAULT_N_SECTORS;
    d_rings: usize = crate::descriptor::DEFAULT_N_RINGS;
    d_downsample: f64 = crate::descriptor::DEFAULT_DOWNSAMPLE_M;
    d_group: f64 = crate::group::DEFAULT_GROUP_THRESHOLD;
    d_sym: f64 = crate::descriptor::DEFAULT_SYMMETRY_TOL;
    d_icp_iter: usize = 50;
    d_icp_tol: f64 = 1e-4;
    d_icp_rms: f64 = 0.05;
    d_loop_gap: usize = crate::loop_closure::DEFAULT_TEMPORAL_GAP;
    d_huber: f64 = 1.0;
    d_opt_iter: usize = 100;
    d_sx: f64 = 0.01;
    d_sy: f64 = 0.005;
    d_syaw: f64 = 0.002;
}

/// Every pipeline tunable, loadable from a key-value text file. Unknown
/// keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Pose-queue capacity for the motion-compensation reference.
    pub pose_queue_len: usize,
    /// Pitch gate for the queue mean, radians.
    pub pitch_gate: f64,
    /// Enable roll/pitch compensation (disable for the plain-projection
    /// ablation).
    pub compensation: bool,
    /// Hu-distance threshold for a stable consecutive pair.
    pub hu_stability: f64,
    /// Components smaller than this many BEV pixels are noise.
    pub min_component_px: usize,
    /// Track association gate on the ground, meters.
    pub track_gate_m: f64,
    /// Frames a track survives unmatched.
    pub track_gap_frames: usize,
    /// Descriptor radial extent, meters.
    pub l_max: f64,
    pub n_sectors: usize,
    pub n_rings: usize,
    /// Voxel pitch for back-projected points, meters.
    pub downsample_m: f64,
    /// New-group threshold on the column-shifted cosine distance.
    pub group_threshold: f64,
    /// Self-similarity tolerance for the symmetry flag.
    pub symmetry_tol: f64,
    pub icp_max_iter: usize,
    pub icp_tol: f64,
    /// ICP convergence gate on the inlier rms, meters.
    pub icp_converge_rms: f64,
    /// Minimum frames between loop-pair members.
    pub loop_gap_frames: usize,
    /// Huber kernel scale on loop residuals.
    pub huber_delta: f64,
    /// Apply the robust kernel to loop edges.
    pub robust_kernel: bool,
    pub max_opt_iterations: usize,
    /// Odometry noise priors, per step (information matrix weights).
    pub odom_sigma_x: f64,
    pub odom_sigma_y: f64,
    pub odom_sigma_yaw: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pose_queue_len: d_queue(),
            pitch_gate: d_gate(),
            compensation: de_true(),
            hu_stability: d_hu(),
            min_component_px: d_min_px(),
            track_gate_m: d_track_gate(),
            track_gap_frames: d_track_gap(),
            l_max: d_l_max(),
            n_sectors: d_sectors(),
            n_rings: d_rings(),
            downsample_m: d_downsample(),
            group_threshold: d_group(),
            symmetry_tol: d_sym(),
            icp_max_iter: d_icp_iter(),
            icp_tol: d_icp_tol(),
            icp_converge_rms: d_icp_rms(),
            loop_gap_frames: d_loop_gap(),
            huber_delta: d_huber(),
            robust_kernel: true,
            max_opt_iterations: d_opt_iter(),
            odom_sigma_x: d_sx(),
            odom_sigma_y: d_sy(),
            odom_sigma_yaw: d_syaw(),
        }
    }
}

impl PipelineConfig {
    /// Load a config file, apply `key=value` overrides, validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, PipelineError> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    PipelineError::InvalidInput(format!("{}: {e}", p.display()))
                })?;
                text.parse()
                    .map_err(|e| PipelineError::InvalidInput(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for ov in overrides {
            let parsed: toml::Table = ov
                .parse()
                .map_err(|e| PipelineError::InvalidInput(format!("override {ov:?}: {e}")))?;
            for (k, v) in parsed {
                table.insert(k, v);
            }
        }
        let config: PipelineConfig = table
            .try_into()
            .map_err(|e| PipelineError::InvalidInput(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_string());
            }
        };
        check(self.pose_queue_len >= 1, "pose_queue_len must be >= 1");
        check(self.pitch_gate > 0.0 && self.pitch_gate < 0.5, "pitch_gate must be in (0, 0.5) rad");
        check(self.hu_stability > 0.0 && self.hu_stability < 1.0, "hu_stability must be in (0, 1)");
        check(self.min_component_px >= 1, "min_component_px must be >= 1");
        check(self.track_gate_m > 0.0 && self.track_gate_m < 10.0, "track_gate_m must be in (0, 10) m");
        check(self.l_max > 0.0 && self.l_max <= 20.0, "l_max must be in (0, 20] m");
        check(self.n_sectors >= 6, "n_sectors must be >= 6");
        check(self.n_rings >= 1, "n_rings must be >= 1");
        check(
            self.downsample_m > 0.0 && self.downsample_m < self.l_max / self.n_rings as f64,
            "downsample_m must be positive and below the ring gap",
        );
        check(
            self.group_threshold > 0.0 && self.group_threshold <= 2.0,
            "group_threshold must be in (0, 2]",
        );
        check(self.symmetry_tol > 0.0 && self.symmetry_tol <= 2.0, "symmetry_tol must be in (0, 2]");
        check(self.icp_max_iter >= 1, "icp_max_iter must be >= 1");
        check(self.icp_tol > 0.0, "icp_tol must be positive");
        check(self.icp_converge_rms > 0.0, "icp_converge_rms must be positive");
        check(self.huber_delta > 0.0, "huber_delta must be positive");
        check(self.max_opt_iterations >= 1, "max_opt_iterations must be >= 1");
        check(
            self.odom_sigma_x > 0.0 && self.odom_sigma_y > 0.0 && self.odom_sigma_yaw > 0.0,
            "odometry sigmas must be positive",
        );
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::InvalidInput(problems.join("; ")))
        }
    }

    fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            min_component_px: self.min_component_px,
            gate_m: self.track_gate_m,
            gap_tolerance: self.track_gap_frames,
        }
    }

    fn descriptor_params(&self) -> DescriptorParams<f64> {
        DescriptorParams { l_max: self.l_max, n_sectors: self.n_sectors, n_rings: self.n_rings }
    }

    fn icp_config(&self) -> IcpConfig<f64> {
        IcpConfig {
            max_iter: self.icp_max_iter,
            tol: self.icp_tol,
            converge_rms: self.icp_converge_rms,
            reject_factor: 3.0,
        }
    }

    fn odom_information(&self) -> Mat3<f64> {
        Mat3::diag(
            1.0 / (self.odom_sigma_x * self.odom_sigma_x),
            1.0 / (self.odom_sigma_y * self.odom_sigma_y),
            1.0 / (self.odom_sigma_yaw * self.odom_sigma_yaw),
        )
    }
}

/// A dataset directory, checked for completeness.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub calib: PathBuf,
    pub odometry: PathBuf,
    pub mask_dir: PathBuf,
    pub frame_count: usize,
    pub groundtruth: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn discover(root: &Path) -> Result<Self, PipelineError> {
        let calib = root.join("calib.txt");
        let odometry = root.join("odometry.csv");
        let mask_dir = root.join("masks");
        for (p, what) in [(&calib, "calibration"), (&odometry, "odometry")] {
            if !p.is_file() {
                return Err(PipelineError::InvalidInput(format!(
                    "missing {what} file {}",
                    p.display()
                )));
            }
        }
        if !mask_dir.is_dir() {
            return Err(PipelineError::InvalidInput(format!(
                "missing mask directory {}",
                mask_dir.display()
            )));
        }
        let rows = io::read_odometry(&odometry)?.len();
        if rows == 0 {
            return Err(PipelineError::InvalidInput("odometry file has no rows".into()));
        }
        for frame in 0..rows {
            let p = io::mask_path(&mask_dir, frame);
            if !p.is_file() {
                return Err(PipelineError::InvalidInput(format!(
                    "mask for frame {frame} missing: {}",
                    p.display()
                )));
            }
        }
        let optional = |name: &str| {
            let p = root.join(name);
            p.is_file().then_some(p)
        };
        Ok(Self {
            root: root.to_path_buf(),
            calib,
            odometry,
            mask_dir,
            frame_count: rows,
            groundtruth: optional("groundtruth.tum"),
            annotations: optional("annotations.json"),
        })
    }
}

/// Everything a pipeline run produces, in memory.
pub struct RunOutput {
    pub odometry: Vec<Pose6<f64>>,
    pub optimized: Vec<Pose6<f64>>,
    pub instances: Vec<SgfInstance<f64>>,
    pub detections: Vec<DetectionRecord>,
    pub candidates: Vec<CandidateRecord>,
    pub constraints: Vec<LoopConstraint<f64>>,
    pub groups: usize,
    pub graph: GraphSolution<f64>,
    pub warnings: Vec<String>,
    pub track_log: Vec<String>,
}

/// Run the full pipeline over frames supplied by `mask_source`
/// (deterministic given inputs and config).
pub fn run_frames(
    cam: &CameraModel<f64>,
    vc: &VirtualCamera<f64>,
    odometry: &[Pose6<f64>],
    mut mask_source: impl FnMut(usize) -> Result<BinaryMask, PipelineError>,
    config: &PipelineConfig,
) -> Result<RunOutput, PipelineError> {
    if odometry.is_empty() {
        return Err(PipelineError::InvalidInput("no odometry poses".into()));
    }
    let params = config.descriptor_params();
    let mut queue: PoseQueue<f64> = PoseQueue::new(config.pose_queue_len, config.pitch_gate);
    let mut tracker = Tracker::new(config.tracker_config(), *vc);
    let mut groups: GroupSet<f64> = GroupSet::new(config.group_threshold, config.symmetry_tol);
    let mut instances: Vec<SgfInstance<f64>> = Vec::new();
    let mut detections = Vec::new();
    let mut candidates = Vec::new();
    let mut constraints = Vec::new();
    let mut warnings = Vec::new();
    let mut track_log = Vec::new();

    let process_track = |track: &crate::detect::FeatureTrack,
                             instances: &mut Vec<SgfInstance<f64>>,
                             groups: &mut GroupSet<f64>,
                             detections: &mut Vec<DetectionRecord>,
                             candidates: &mut Vec<CandidateRecord>,
                             constraints: &mut Vec<LoopConstraint<f64>>,
                             warnings: &mut Vec<String>,
                             track_log: &mut Vec<String>| {
        log_track(track, track_log);
        let Some(candidate) = select_optimal_sgf(track, config.hu_stability) else {
            return;
        };
        let anchor = candidate.frame;
        let points = match back_project(&candidate, vc, anchor, config.downsample_m, config.l_max)
        {
            Ok(p) => p,
            Err(e) => {
                warnings.push(format!("frame {anchor}: track {} skipped: {e}", track.id));
                return;
            }
        };
        let descriptor = build_descriptor(&points, params);
        let mut inst = SgfInstance {
            id: instances.len(),
            frame: anchor,
            points,
            descriptor,
            hu: candidate.hu,
            group: None,
        };
        let gid = groups.assign(&mut inst);
        detections.push(DetectionRecord {
            instance: inst.id,
            frame: anchor,
            offset: [inst.points.centroid.x, inst.points.centroid.y],
            group: gid,
        });

        if let Some((_, member_id, shift)) =
            find_loop_candidate(&inst, instances, groups, config.loop_gap_frames)
        {
            let member = &instances[member_id];
            let init = icp_init_from_shift(shift, params.n_sectors);
            match icp_2d(
                &inst.points.centered(),
                &member.points.centered(),
                init,
                &config.icp_config(),
            ) {
                Ok(icp) => {
                    let constraint = match make_loop_constraint(member, &inst, &icp, groups) {
                        Ok(c) => c,
                        Err(e) => {
                            warnings.push(format!("frame {anchor}: loop dropped: {e}"));
                            None
                        }
                    };
                    candidates.push(CandidateRecord {
                        query_instance: inst.id,
                        query_frame: inst.frame,
                        member_instance: member_id,
                        member_frame: member.frame,
                        group: gid,
                        shift,
                        icp_rms: icp.rms,
                        icp_converged: icp.converged,
                        closed: constraint.is_some(),
                    });
                    if let Some(c) = constraint {
                        constraints.push(c);
                    }
                }
                Err(e) => {
                    warnings.push(format!("frame {anchor}: icp skipped: {e}"));
                }
            }
        }
        instances.push(inst);
    };

    for (frame, pose) in odometry.iter().enumerate() {
        let mask = mask_source(frame)?;
        let motion = if config.compensation && !queue.is_empty() {
            compensation_from_queue(&queue, pose)
                .map_err(|e| PipelineError::Stage(format!("frame {frame}: {e}")))?
        } else {
            MotionState::zero()
        };
        queue.push(*pose);
        let bev = warp_mask_to_bev(&mask, cam, vc, &motion).map_err(|e| match e {
            CameraError::DimensionMismatch { .. } => {
                PipelineError::InvalidInput(format!("frame {frame}: {e}"))
            }
            other => PipelineError::Stage(format!("frame {frame}: {other}")),
        })?;
        for track in tracker.ingest(frame, &bev) {
            process_track(
                &track,
                &mut instances,
                &mut groups,
                &mut detections,
                &mut candidates,
                &mut constraints,
                &mut warnings,
                &mut track_log,
            );
        }
    }
    for track in tracker.flush() {
        process_track(
            &track,
            &mut instances,
            &mut groups,
            &mut detections,
            &mut candidates,
            &mut constraints,
            &mut warnings,
            &mut track_log,
        );
    }

    // pose graph over every frame
    let nodes: Vec<PoseNode<f64>> = odometry
        .iter()
        .enumerate()
        .map(|(i, p)| PoseNode { index: i, estimate: p.se2(), stamp: p.stamp })
        .collect();
    let odom_info = config.odom_information();
    let odom_edges: Vec<PoseEdge<f64>> = odometry
        .windows(2)
        .enumerate()
        .map(|(t, w)| PoseEdge::odometry(t, w[0].se2().between(&w[1].se2()), odom_info))
        .collect();
    let loop_edges: Vec<PoseEdge<f64>> = constraints
        .iter()
        .map(|c| PoseEdge { from: c.pose_i, to: c.pose_j, z: c.z_ij, information: c.information })
        .collect();
    let opts = OptimizeOptions {
        max_iterations: config.max_opt_iterations,
        huber_delta: config.robust_kernel.then_some(config.huber_delta),
        ..OptimizeOptions::default()
    };
    let graph = optimize(&nodes, &odom_edges, &loop_edges, &opts)
        .map_err(|e| PipelineError::Stage(format!("graph: {e}")))?;

    let optimized: Vec<Pose6<f64>> = odometry
        .iter()
        .zip(graph.poses.iter())
        .map(|(o, p)| o.with_se2(*p))
        .collect();

    Ok(RunOutput {
        odometry: odometry.to_vec(),
        optimized,
        instances,
        detections,
        candidates,
        constraints,
        groups: groups.groups().len(),
        graph,
        warnings,
        track_log,
    })
}

fn log_track(track: &crate::detect::FeatureTrack, log: &mut Vec<String>) {
    let mut prev = None;
    for f in &track.frames {
        let dprev = prev
            .map(|p| crate::moments::hu_distance(&p, &f.hu))
            .unwrap_or(0.0);
        prev = Some(f.hu);
        let (cu, cv) = f.shape.centroid();
        let hu: Vec<String> = f.hu.h.iter().map(|h| format!("{h:.9e}")).collect();
        log.push(format!(
            "{} {} {:.3} {:.3} {} {:.9e}",
            f.frame,
            track.id,
            cu,
            cv,
            hu.join(" "),
            dprev
        ));
    }
}

/// Convenience runner for in-memory scenarios (renders masks on the fly).
pub fn run_scenario(
    scenario: &Scenario,
    odometry: &[Pose6<f64>],
    config: &PipelineConfig,
) -> Result<RunOutput, PipelineError> {
    run_frames(
        &scenario.camera,
        &scenario.virtual_camera,
        odometry,
        |frame| Ok(render_mask(scenario, frame)),
        config,
    )
}

/// Metrics document written next to the trajectory.
#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub frames: usize,
    pub sgf_instances: usize,
    pub sgf_groups: usize,
    pub loop_candidates: usize,
    pub loop_constraints: usize,
    pub graph_cost: f64,
    pub graph_iterations: usize,
    pub graph_converged: bool,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ate_odometry: Option<AteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ate_optimized: Option<AteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counters: Option<SequenceCounters>,
}

pub struct RunArtifacts {
    pub output: RunOutput,
    pub metrics: MetricsReport,
    pub trajectory_path: PathBuf,
    pub metrics_path: PathBuf,
}

/// Execute a dataset end to end and write all artifacts into `out_dir`:
/// `trajectory.tum`, `metrics.json`, `constraints.log`, `tracks.log`,
/// `descriptors.log` and `overlay.svg`.
pub fn run_pipeline(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<RunArtifacts, PipelineError> {
    config.validate()?;
    let (cam, vc) = io::read_calib(&manifest.calib)?;
    let odometry = io::read_odometry(&manifest.odometry)?;
    if odometry.len() != manifest.frame_count {
        return Err(PipelineError::InvalidInput("odometry length changed on disk".into()));
    }
    let mask_dir = manifest.mask_dir.clone();
    let expected = (cam.image_size.0, cam.image_size.1);
    let output = run_frames(
        &cam,
        &vc,
        &odometry,
        move |frame| {
            let path = io::mask_path(&mask_dir, frame);
            let mask = io::read_mask_png(&path)?;
            if (mask.width, mask.height) != expected {
                return Err(PipelineError::InvalidInput(format!(
                    "{}: mask is {}x{}, calibration expects {}x{}",
                    path.display(),
                    mask.width,
                    mask.height,
                    expected.0,
                    expected.1
                )));
            }
            Ok(mask)
        },
        config,
    )?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::InvalidInput(format!("{}: {e}", out_dir.display())))?;

    let groundtruth = match &manifest.groundtruth {
        Some(p) => Some(io::read_tum(p)?),
        None => None,
    };
    let ate_opts = AteOptions::default();
    let (ate_odo, ate_opt) = match &groundtruth {
        Some(gt) => (
            ate(&output.odometry, gt, &ate_opts).ok(),
            ate(&output.optimized, gt, &ate_opts).ok(),
        ),
        None => (None, None),
    };
    let counters = match (&manifest.annotations, &groundtruth) {
        (Some(p), Some(gt)) => {
            let ann: ScenarioAnnotations = io::read_annotations(p)?;
            Some(count_sequence_metrics(&output.detections, &output.candidates, &ann, gt))
        }
        _ => None,
    };

    let metrics = MetricsReport {
        schema_version: 1,
        frames: manifest.frame_count,
        sgf_instances: output.instances.len(),
        sgf_groups: output.groups,
        loop_candidates: output.candidates.len(),
        loop_constraints: output.constraints.len(),
        graph_cost: output.graph.final_cost,
        graph_iterations: output.graph.iterations,
        graph_converged: output.graph.converged,
        warnings: output.warnings.clone(),
        ate_odometry: ate_odo,
        ate_optimized: ate_opt,
        counters,
    };

    let trajectory_path = out_dir.join("trajectory.tum");
    io::write_tum(&trajectory_path, &output.optimized)?;

    let metrics_path = out_dir.join("metrics.json");
    std::fs::write(
        &metrics_path,
        serde_json::to_string_pretty(&metrics).expect("metrics serialize"),
    )
    .map_err(|e| PipelineError::Stage(format!("writing metrics: {e}")))?;

    let constraint_rows: Vec<(usize, usize, f64, f64, f64, f64, usize, usize)> = output
        .constraints
        .iter()
        .map(|c| {
            let record = output
                .candidates
                .iter()
                .find(|r| r.closed && r.member_frame == c.pose_i && r.query_frame == c.pose_j);
            let (group, shift) = record.map(|r| (r.group, r.shift)).unwrap_or((0, 0));
            (c.pose_i, c.pose_j, c.z_ij.t.x, c.z_ij.t.y, c.z_ij.yaw, c.residual_rms, group, shift)
        })
        .collect();
    io::write_constraint_log(&out_dir.join("constraints.log"), &constraint_rows)?;

    std::fs::write(&out_dir.join("tracks.log"), output.track_log.join("\n") + "\n")
        .map_err(|e| PipelineError::Stage(format!("writing tracks.log: {e}")))?;

    write_descriptor_dump(&out_dir.join("descriptors.log"), &output.instances)?;

    let mut series: Vec<(&str, &str, &[Pose6<f64>])> = Vec::new();
    if let Some(gt) = &groundtruth {
        series.push(("groundtruth", "#888888", gt));
    }
    series.push(("odometry", "#d62728", &output.odometry));
    series.push(("optimized", "#1f77b4", &output.optimized));
    io::write_overlay_svg(&out_dir.join("overlay.svg"), &series)?;

    Ok(RunArtifacts { output, metrics, trajectory_path, metrics_path })
}

/// Per-instance descriptor dump: params, centroid, anchor and the
/// row-major bin matrix, one record per line.
fn write_descriptor_dump(
    path: &Path,
    instances: &[SgfInstance<f64>],
) -> Result<(), PipelineError> {
    use std::fmt::Write as _;
    let mut text = String::from("# id anchor l_max n_sectors n_rings cx cy bins(row-major)\n");
    for inst in instances {
        let p = inst.descriptor.params;
        let _ = write!(
            text,
            "{} {} {} {} {} {:.6} {:.6}",
            inst.id, inst.points.anchor_pose, p.l_max, p.n_sectors, p.n_rings,
            inst.points.centroid.x, inst.points.centroid.y
        );
        for b in inst.descriptor.bins() {
            let _ = write!(text, " {b}");
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| PipelineError::Stage(format!("descriptor dump: {e}")))
}

/// Generate a dataset directory for a scenario kind: masks, odometry,
/// calibration, ground truth and annotations. Byte-deterministic per
/// seed.
pub fn run_simulate(kind: ScenarioKind, seed: u64, out_dir: &Path) -> Result<Scenario, PipelineError> {
    let scenario = make_scenario(kind, seed);
    let odometry = noisy_odometry(&scenario, seed);
    std::fs::create_dir_all(out_dir.join("masks"))
        .map_err(|e| PipelineError::InvalidInput(format!("{}: {e}", out_dir.display())))?;
    io::write_calib(&out_dir.join("calib.txt"), &scenario.camera, &scenario.virtual_camera)?;
    io::write_odometry(&out_dir.join("odometry.csv"), &odometry)?;
    io::write_tum(&out_dir.join("groundtruth.tum"), &scenario.trajectory)?;
    io::write_annotations(&out_dir.join("annotations.json"), &scenario.annotations)?;
    let mask_dir = out_dir.join("masks");
    for frame in 0..scenario.frame_count() {
        let mask = render_mask(&scenario, frame);
        io::write_mask_png(&io::mask_path(&mask_dir, frame), &mask)?;
    }
    Ok(scenario)
}
