//! Drift-corrected robot localization from salient ground markings.
//!
//! The pipeline turns per-frame binary ground-saliency masks plus noisy
//! odometry into a corrected trajectory:
//!
//! 1. [`camera`]: motion-compensated inverse perspective mapping lifts
//!    each mask into a bird's-eye view, using roll/pitch changes
//!    estimated from a sliding pose queue.
//! 2. [`detect`]: connected components are tracked across frames and one
//!    optimal, fully-visible, shape-stable instance is selected per
//!    appearance episode via Hu-moment matching.
//! 3. [`descriptor`] / [`group`]: instances are back-projected to metric
//!    ground points, described by a polar occupancy descriptor and
//!    clustered online by column-shifted cosine distance.
//! 4. [`loop_closure`] / [`icp`]: re-observations inside a group become
//!    relative-pose constraints via 2D ICP, seeded by the descriptor
//!    shift so reverse loops converge.
//! 5. [`graph`]: a damped Gauss-Newton pose graph fuses odometry and loop
//!    factors into the corrected trajectory.
//!
//! [`sim`] provides a synthetic marking world with scripted pitch/roll
//! disturbances so every stage can be validated against ground truth, and
//! [`pipeline`] wires everything to datasets on disk.
//!
//! Core math is generic over the floating-point scalar via
//! [`scalar::Real`]; the aliases below fix the `f64` instantiations used
//! by the pipeline.

pub mod camera;
pub mod descriptor;
pub mod detect;
pub mod geom;
pub mod graph;
pub mod group;
pub mod icp;
pub mod io;
pub mod loop_closure;
pub mod mask;
pub mod moments;
pub mod pipeline;
pub mod pose;
pub mod eval;
pub mod scalar;
pub mod sim;

pub use scalar::Real;

/// Concrete `f64` instantiations of the core math types.
pub type Point2F64 = geom::Point2<f64>;
pub type Se2F64 = geom::Se2<f64>;
pub type Mat3F64 = geom::Mat3<f64>;
pub type Pose6F64 = pose::Pose6<f64>;
pub type CameraModelF64 = camera::CameraModel<f64>;
pub type VirtualCameraF64 = camera::VirtualCamera<f64>;
pub type MotionStateF64 = camera::MotionState<f64>;
pub type PoseQueueF64 = camera::PoseQueue<f64>;
pub type GroundPointF64 = camera::GroundPoint<f64>;
pub type HuVectorF64 = moments::HuVector<f64>;
pub type DescriptorF64 = descriptor::Descriptor<f64>;
pub type DescriptorParamsF64 = descriptor::DescriptorParams<f64>;
pub type SgfPointsF64 = descriptor::SgfPoints<f64>;
pub type SgfInstanceF64 = group::SgfInstance<f64>;
pub type GroupSetF64 = group::GroupSet<f64>;
pub type IcpConfigF64 = icp::IcpConfig<f64>;
pub type IcpResultF64 = icp::IcpResult<f64>;
pub type LoopConstraintF64 = loop_closure::LoopConstraint<f64>;
pub type PoseNodeF64 = graph::PoseNode<f64>;
pub type PoseEdgeF64 = graph::PoseEdge<f64>;
