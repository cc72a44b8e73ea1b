//! The MPPI loop: rollouts, cost aggregation, exponential-weighted
//! distribution updates, and the per-step best-action interface.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geom::Pose2;
use crate::rng::RngStream;
use crate::sim::arm::{step_dynamics, ArmModel, JointState};
use crate::sim::SdfGrid;

use super::cost::{cost_bounds, cost_collision, cost_self_collision, CostBreakdown, TaskCost};
use super::sampler::{sample_action_sequences, PolicyState};
use super::{MpcError, MppiConfig};

/// Predicted states and EE poses for one particle (horizon + 1 entries,
/// including the start state).
#[derive(Clone, Debug)]
pub struct Rollout {
    pub states: Vec<JointState>,
    pub ee: Vec<Pose2>,
}

/// Integrate one normalized action sequence through the dynamics.
pub fn rollout(
    start: &JointState,
    particle: &[f64],
    arm: &ArmModel,
    dt: f64,
    horizon: usize,
) -> Rollout {
    let n = arm.dof();
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(start.clone());
    let mut cur = start.clone();
    let mut qdd = vec![0.0; n];
    for h in 0..horizon {
        for j in 0..n {
            qdd[j] = particle[h * n + j] * arm.limits[j].acc;
        }
        cur = step_dynamics(&cur, &qdd, arm, dt);
        states.push(cur.clone());
    }
    let ee = states
        .iter()
        .map(|s| arm.fk(&s.q).expect("rollout states are well-formed"))
        .collect();
    Rollout { states, ee }
}

/// Outcome of one distribution update.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct UpdateDiag {
    pub best_index: usize,
    pub min_cost: f64,
    pub weight_fallback: bool,
}

/// Exponential-weighted MPPI update of the sampling mean and covariance.
///
/// Weights are `exp(-(cost - min cost) / beta)`, normalized to sum to one
/// exactly; the mean and per-joint covariance blend with their step sizes
/// and the covariance is floored at `kappa`. If the weight sum is not
/// finite the update falls back to the best particle (flagged).
pub fn mppi_update(
    policy: &mut PolicyState,
    costs: &[f64],
    particles: &[Vec<f64>],
    cfg: &MppiConfig,
) -> UpdateDiag {
    let p = costs.len();
    let (mut best_index, mut min_cost) = (0usize, f64::INFINITY);
    for (i, c) in costs.iter().enumerate() {
        if *c < min_cost {
            min_cost = *c;
            best_index = i;
        }
    }
    // alpha = 1.0: full baseline subtraction of the minimum cost.
    let mut weights: Vec<f64> = costs
        .iter()
        .map(|c| (-(c - min_cost) / cfg.beta).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    let mut weight_fallback = false;
    if !sum.is_finite() || sum <= 0.0 {
        weight_fallback = true;
        weights.iter_mut().for_each(|w| *w = 0.0);
        weights[best_index] = 1.0;
    } else {
        weights.iter_mut().for_each(|w| *w /= sum);
        // Pin the normalized sum to exactly one by absorbing the rounding
        // residual into the largest weight.
        let s: f64 = weights.iter().sum();
        weights[best_index] += 1.0 - s;
    }

    let n = policy.n_joints;
    let horizon = policy.horizon;
    let eta_m = cfg.step_size_mean;
    let mut new_mean = vec![0.0; horizon * n];
    for (w, particle) in weights.iter().zip(particles) {
        if *w == 0.0 {
            continue;
        }
        for (m, a) in new_mean.iter_mut().zip(particle) {
            *m += w * a;
        }
    }
    for (m, old) in policy.mean.iter_mut().zip(&new_mean) {
        *m = (1.0 - eta_m) * *m + eta_m * old;
    }

    if cfg.update_cov {
        let eta_c = cfg.step_size_cov;
        for j in 0..n {
            let mut var = 0.0;
            for (w, particle) in weights.iter().zip(particles) {
                if *w == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for h in 0..horizon {
                    let d = particle[h * n + j] - policy.mean[h * n + j];
                    acc += d * d;
                }
                var += w * acc / horizon as f64;
            }
            policy.cov[j] = ((1.0 - eta_c) * policy.cov[j] + eta_c * var).max(cfg.kappa);
        }
    }
    UpdateDiag {
        best_index,
        min_cost,
        weight_fallback,
    }
}

/// Per-step diagnostics, one NDJSON record per control step.
#[derive(Clone, Debug, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub iters: usize,
    pub best_particle: usize,
    pub grasp: f64,
    pub collision: f64,
    pub self_collision: f64,
    pub bounds: f64,
    pub total: f64,
    pub cov_trace: f64,
    pub weight_fallback: bool,
    pub wall_ms: f64,
}

/// One closed-loop control step: `n_iters` (or `cold_start_n_iters`)
/// sample/rollout/cost/update cycles, returning the first action of the
/// lowest-total-cost sampled trajectory and shifting the policy mean.
#[allow(clippy::too_many_arguments)]
pub fn mpc_step<R: rand::Rng>(
    state: &JointState,
    policy: &mut PolicyState,
    cfg: &MppiConfig,
    task: &dyn TaskCost,
    sdf: &SdfGrid,
    arm: &ArmModel,
    dt: f64,
    step_index: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, StepDiagnostics), MpcError> {
    let t0 = std::time::Instant::now();
    let iters = if policy.cold {
        cfg.cold_start_n_iters
    } else {
        cfg.n_iters
    };
    policy.cold = false;
    let n = arm.dof();
    let mut best: Option<(f64, Vec<f64>, CostBreakdown, usize)> = None;
    let mut fallback_seen = false;

    for _ in 0..iters {
        let particles = sample_action_sequences(policy, cfg, rng)?;
        let rollouts: Vec<Rollout> = particles
            .par_iter()
            .map(|p| rollout(state, p, arm, dt, cfg.horizon))
            .collect();
        let grasp = task.eval(&rollouts);
        let breakdowns: Vec<CostBreakdown> = rollouts
            .par_iter()
            .zip(&grasp)
            .map(|(r, g)| {
                let coll = cost_collision(&r.states, sdf, arm, cfg.activation_margin);
                let selfc = cost_self_collision(&r.states, arm, cfg.self_margin);
                let bounds = cost_bounds(&r.states, arm, dt, cfg.weight_limits, cfg.weight_jerk);
                CostBreakdown::compose(
                    *g,
                    cfg.weight_collision * coll,
                    cfg.weight_self * selfc,
                    bounds,
                    cfg.omega,
                )
            })
            .collect();
        for (i, b) in breakdowns.iter().enumerate() {
            if !b.total.is_finite() {
                let term = if !b.grasp.is_finite() {
                    "grasp"
                } else if !b.collision.is_finite() {
                    "collision"
                } else if !b.self_collision.is_finite() {
                    "self_collision"
                } else {
                    "bounds"
                };
                return Err(MpcError::NonFiniteCost { term, particle: i });
            }
        }
        let totals: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
        for (i, b) in breakdowns.iter().enumerate() {
            if best.as_ref().map_or(true, |(t, ..)| b.total < *t) {
                best = Some((b.total, particles[i][..n].to_vec(), *b, i));
            }
        }
        let diag = mppi_update(policy, &totals, &particles, cfg);
        fallback_seen |= diag.weight_fallback;
    }

    let (_, first_action, breakdown, best_idx) = best.expect("at least one particle");
    policy.shift();
    let action: Vec<f64> = first_action
        .iter()
        .enumerate()
        .map(|(j, u)| u * arm.limits[j].acc)
        .collect();
    let diag = StepDiagnostics {
        step: step_index,
        iters,
        best_particle: best_idx,
        grasp: breakdown.grasp,
        collision: breakdown.collision,
        self_collision: breakdown.self_collision,
        bounds: breakdown.bounds,
        total: breakdown.total,
        cov_trace: policy.cov_trace(),
        weight_fallback: fallback_seen,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    };
    Ok((action, diag))
}

/// Sequential controller wrapper owning the policy state, RNG stream, and
/// the diagnostics log.
pub struct MpcController {
    pub cfg: MppiConfig,
    pub policy: PolicyState,
    rng: ChaCha8Rng,
    pub diagnostics: Vec<StepDiagnostics>,
    steps_taken: usize,
}

impl MpcController {
    pub fn new(cfg: MppiConfig, n_joints: usize, stream: RngStream) -> MpcController {
        let policy = PolicyState::new(cfg.horizon, n_joints, cfg.init_cov);
        MpcController {
            cfg,
            policy,
            rng: stream.rng(),
            diagnostics: Vec::new(),
            steps_taken: 0,
        }
    }

    pub fn step(
        &mut self,
        state: &JointState,
        task: &dyn TaskCost,
        sdf: &SdfGrid,
        arm: &ArmModel,
        dt: f64,
    ) -> Result<Vec<f64>, MpcError> {
        let (action, diag) = mpc_step(
            state,
            &mut self.policy,
            &self.cfg,
            task,
            sdf,
            arm,
            dt,
            self.steps_taken,
            &mut self.rng,
        )?;
        self.steps_taken += 1;
        self.diagnostics.push(diag);
        Ok(action)
    }

    /// Diagnostics as NDJSON lines.
    pub fn diagnostics_ndjson(&self) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            out.push_str(&serde_json::to_string(d).expect("diag serializes"));
            out.push('\n');
        }
        out
    }
}
