//! MPPI over joint accelerations: Halton + B-spline action sampling,
//! rollouts through the sim dynamics, value/collision/bounds costs, and the
//! exponential-weighted distribution update.

pub mod controller;
pub mod cost;
pub mod halton;
pub mod norm;
pub mod sampler;
pub mod spline;

use thiserror::Error;

/// Controller hyperparameters (the reference controller's table, verbatim,
/// plus this artifact's cost weights). Lives in the run config.
pub use crate::config::MpcCfg as MppiConfig;
pub use controller::{mpc_step, mppi_update, rollout, MpcController, Rollout, StepDiagnostics};
pub use cost::{
    cost_bounds, cost_collision, cost_grasp, cost_self_collision, discounted_value_sum,
    lse_pessimism, CostBreakdown, GraspValueCost, QuadraticGoalCost, TaskCost,
};
pub use halton::halton_sequence;
pub use sampler::{sample_action_sequences, PolicyState};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("halton sequence supports at most {max} dims, got {dims}")]
    TooManyDims { dims: usize, max: usize },
    #[error("non-finite {term} cost at particle {particle}")]
    NonFiniteCost { term: &'static str, particle: usize },
    #[error("value network: {0}")]
    Net(#[from] crate::valuenet::NetError),
}
