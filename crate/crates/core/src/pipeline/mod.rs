//! End-to-end deployment and benchmarking: grasp-condition generation,
//! pre-grasp selection, phase-structured episodes, the open-loop baseline,
//! scene suites, and metric reports.

pub mod bench;
pub mod episode;
pub mod scenes;
pub mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Pose2;

pub use bench::{run_benchmark, BenchReport, BenchSpec, TrendCheck};
pub use episode::{
    perturb_mid_episode, run_episode, select_pregrasp, EpisodeContext, Method, SelectedGrasp,
};
pub use scenes::{make_eval_scene, EvalScene};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("perturbed target pose intersects an obstacle")]
    InvalidPerturbation,
    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(String),
    #[error("report io: {0}")]
    Io(#[from] std::io::Error),
    #[error("network: {0}")]
    Net(#[from] crate::valuenet::NetError),
    #[error("controller: {0}")]
    Mpc(#[from] crate::mpc::MpcError),
    #[error("scene generation failed for {kind} scene {id}")]
    SceneGeneration { kind: &'static str, id: u64 },
}

/// How grasp targets are supplied to an episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GraspCondition {
    /// Verified annotation poses, unmodified.
    GroundTruth,
    /// Annotation poses under uniform noise (the eval protocol's
    /// +-2 cm / +-18 deg by default).
    Noisy { trans: f64, rot: f64 },
    /// Prediction-model emulation: a per-episode systematic bias plus
    /// small jitter.
    PredictedEmulation,
}

impl GraspCondition {
    pub fn label(&self) -> &'static str {
        match self {
            GraspCondition::GroundTruth => "ground_truth",
            GraspCondition::Noisy { .. } => "noisy",
            GraspCondition::PredictedEmulation => "predicted",
        }
    }
}

/// Which phase an episode reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReached {
    PregraspFail,
    GraspFail,
    Success,
}

impl PhaseReached {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseReached::PregraspFail => "pregrasp_fail",
            PhaseReached::GraspFail => "grasp_fail",
            PhaseReached::Success => "success",
        }
    }
}

/// Per-trial record emitted by the benchmark harness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scene_kind: String,
    pub scene_id: u64,
    pub seed: u64,
    pub condition: String,
    pub method: String,
    pub phase_reached: PhaseReached,
    pub success: bool,
    pub collisions: usize,
    pub mpc_steps: usize,
    /// Wall time; reported in aggregates only (never in the CSV, which must
    /// be bitwise reproducible).
    pub wall_ms: f64,
    /// Stale commanded grasp vs actual object delta, for diagnostics.
    pub perturbed: bool,
}

impl EpisodeResult {
    pub fn consistent(&self) -> bool {
        !(self.success && self.phase_reached != PhaseReached::Success)
    }
}

/// Target shift applied once after the pre-grasp is reached.
pub fn apply_delta(pose: &Pose2, delta: &Pose2) -> Pose2 {
    Pose2::new(pose.x + delta.x, pose.y + delta.y, pose.theta + delta.theta)
}
