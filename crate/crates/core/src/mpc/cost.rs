//! Cost terms: the value-based grasp cost (single net or ensemble
//! log-sum-exp), world/self collision hinges, and bounds/smoothness.

use crate::geom::{PointCloud2, Pose2};
use crate::sim::arm::{ArmModel, JointState};
use crate::sim::SdfGrid;
use crate::valuenet::net::{encode_ee, CloudCache, ValueNet};
use crate::valuenet::{InferNet, NetError};

use super::controller::Rollout;

/// Per-particle cost record. `total` is the weighted composition
/// `collision + self_collision + bounds + omega * grasp` (the three
/// non-grasp fields already carry their weights).
#[derive(Clone, Copy, Debug, Default)]
pub struct CostBreakdown {
    pub grasp: f64,
    pub collision: f64,
    pub self_collision: f64,
    pub bounds: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn compose(
        grasp: f64,
        collision: f64,
        self_collision: f64,
        bounds: f64,
        omega: f64,
    ) -> CostBreakdown {
        CostBreakdown {
            grasp,
            collision,
            self_collision,
            bounds,
            total: collision + self_collision + bounds + omega * grasp,
        }
    }
}

/// Horizon-discounted sum of per-state values: sum_h gamma^h v_h.
pub fn discounted_value_sum(values: &[f64], gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut g = 1.0;
    for v in values {
        acc += g * v;
        g *= gamma;
    }
    acc
}

/// Temperature-consistent log-sum-exp over ensemble member sums:
/// `lambda * ln sum_i exp(g_i / lambda)`. Softly upper-bounds the max.
pub fn lse_pessimism(member_sums: &[f64], lambda: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    let m = member_sums.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let s: f64 = member_sums.iter().map(|g| ((g - m) / lambda).exp()).sum();
    lambda * (m / lambda + s.ln())
}

/// World-collision hinge: sum over states and arm sample points of
/// `max(0, margin - sdf(p))^2` (unweighted).
pub fn cost_collision(states: &[JointState], sdf: &SdfGrid, arm: &ArmModel, margin: f64) -> f64 {
    let mut acc = 0.0;
    for s in states {
        for p in arm.body_points(&s.q, 0.03) {
            let d = sdf.query(p);
            let h = (margin - d).max(0.0);
            acc += h * h;
        }
    }
    acc
}

/// Self-collision hinge on the minimum distance between non-adjacent links.
pub fn cost_self_collision(states: &[JointState], arm: &ArmModel, margin: f64) -> f64 {
    let mut acc = 0.0;
    for s in states {
        let d = arm.self_collision_distance(&s.q);
        let h = (margin - d).max(0.0);
        acc += h * h;
    }
    acc
}

/// Joint-limit hinges (position/velocity/acceleration) plus squared-jerk
/// smoothness (finite-difference jerk between consecutive states).
pub fn cost_bounds(
    states: &[JointState],
    arm: &ArmModel,
    dt: f64,
    w_limits: f64,
    w_jerk: f64,
) -> f64 {
    let mut limits = 0.0;
    for s in states {
        for (j, l) in arm.limits.iter().enumerate() {
            let q = s.q[j];
            if q > l.pos_upper {
                limits += (q - l.pos_upper).powi(2);
            } else if q < l.pos_lower {
                limits += (l.pos_lower - q).powi(2);
            }
            let over_v = s.qd[j].abs() - l.vel;
            if over_v > 0.0 {
                limits += over_v * over_v;
            }
            let over_a = s.qdd[j].abs() - l.acc;
            if over_a > 0.0 {
                limits += over_a * over_a;
            }
        }
    }
    let mut jerk = 0.0;
    for w in states.windows(2) {
        for j in 0..w[0].qdd.len() {
            let jk = (w[1].qdd[j] - w[0].qdd[j]) / dt;
            jerk += jk * jk;
        }
    }
    w_limits * limits + w_jerk * jerk
}

/// The value-based grasp cost over a rollout's observations: per member the
/// discounted value sum; ensembles aggregate with log-sum-exp pessimism.
pub fn cost_grasp(
    per_member_values: &[Vec<f64>],
    gamma_mpc: f64,
    lambda: f64,
) -> f64 {
    debug_assert!(!per_member_values.is_empty());
    if per_member_values.len() == 1 {
        discounted_value_sum(&per_member_values[0], gamma_mpc)
    } else {
        let sums: Vec<f64> = per_member_values
            .iter()
            .map(|vals| discounted_value_sum(vals, gamma_mpc))
            .collect();
        lse_pessimism(&sums, lambda)
    }
}

/// Task-cost interface for the controller: one scalar per rollout.
pub trait TaskCost: Sync {
    fn eval(&self, rollouts: &[Rollout]) -> Vec<f64>;
    fn name(&self) -> &'static str;
}

/// The learned grasp cost: observation is a (re-centered) cloud set per
/// control step; rollout EE poses are evaluated against it.
pub struct GraspValueCost {
    members: Vec<ValueNet>,
    infer: Vec<InferNet>,
    use_f32: bool,
    gamma_mpc: f64,
    lambda: f64,
    centroid: [f64; 2],
    clouds: Vec<CloudCache>,
    pre32: Vec<Vec<f32>>,
}

impl GraspValueCost {
    pub fn new(members: Vec<ValueNet>, gamma_mpc: f64, lambda: f64, use_f32: bool) -> Self {
        let infer = members.iter().map(InferNet::from_net).collect();
        GraspValueCost {
            members,
            infer,
            use_f32,
            gamma_mpc,
            lambda,
            centroid: [0.0, 0.0],
            clouds: Vec::new(),
            pre32: Vec::new(),
        }
    }

    pub fn members(&self) -> &[ValueNet] {
        &self.members
    }

    /// Install this control step's observation.
    pub fn set_observation(&mut self, cloud: &PointCloud2) -> Result<(), NetError> {
        let (centered, centroid) = cloud.centered();
        self.centroid = centroid;
        self.clouds.clear();
        self.pre32.clear();
        if self.use_f32 {
            for inf in &self.infer {
                let feat = inf.encode_cloud(centered.points())?;
                self.pre32.push(inf.head_precompute(&feat));
            }
        } else {
            for m in &self.members {
                self.clouds
                    .push(m.encode_cloud::<rand_chacha::ChaCha8Rng>(centered.points(), None)?);
            }
        }
        Ok(())
    }

    fn states64(&self, rollout: &Rollout) -> Vec<[f64; 4]> {
        rollout
            .ee
            .iter()
            .map(|p| {
                encode_ee(&Pose2 {
                    x: p.x - self.centroid[0],
                    y: p.y - self.centroid[1],
                    theta: p.theta,
                })
            })
            .collect()
    }
}

impl TaskCost for GraspValueCost {
    fn eval(&self, rollouts: &[Rollout]) -> Vec<f64> {
        assert!(
            !(self.clouds.is_empty() && self.pre32.is_empty()),
            "set_observation must run before eval"
        );
        if self.use_f32 {
            let states32: Vec<[f32; 4]> = rollouts
                .iter()
                .flat_map(|r| self.states64(r))
                .map(|s| [s[0] as f32, s[1] as f32, s[2] as f32, s[3] as f32])
                .collect();
            let per_member: Vec<Vec<f64>> = self
                .infer
                .iter()
                .zip(&self.pre32)
                .map(|(inf, pre)| inf.values(pre, &states32).iter().map(|v| *v as f64).collect())
                .collect();
            let h = rollouts.first().map_or(0, |r| r.ee.len());
            rollouts
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    let member_values: Vec<Vec<f64>> = per_member
                        .iter()
                        .map(|vals| vals[i * h..(i + 1) * h].to_vec())
                        .collect();
                    cost_grasp(&member_values, self.gamma_mpc, self.lambda)
                })
                .collect()
        } else {
            let states: Vec<[f64; 4]> = rollouts.iter().flat_map(|r| self.states64(r)).collect();
            let per_member: Vec<Vec<f64>> = self
                .members
                .iter()
                .zip(&self.clouds)
                .map(|(m, c)| m.values_batch(c, &states))
                .collect();
            let h = rollouts.first().map_or(0, |r| r.ee.len());
            rollouts
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    let member_values: Vec<Vec<f64>> = per_member
                        .iter()
                        .map(|vals| vals[i * h..(i + 1) * h].to_vec())
                        .collect();
                    cost_grasp(&member_values, self.gamma_mpc, self.lambda)
                })
                .collect()
        }
    }

    fn name(&self) -> &'static str {
        "grasp_value"
    }
}

/// Joint-space quadratic goal cost for optimizer sanity checks:
/// sum over states of |q - q_goal|^2.
pub struct QuadraticGoalCost {
    pub q_goal: Vec<f64>,
}

impl TaskCost for QuadraticGoalCost {
    fn eval(&self, rollouts: &[Rollout]) -> Vec<f64> {
        rollouts
            .iter()
            .map(|r| {
                r.states
                    .iter()
                    .map(|s| {
                        s.q.iter()
                            .zip(&self.q_goal)
                            .map(|(q, g)| (q - g) * (q - g))
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect()
    }

    fn name(&self) -> &'static str {
        "quadratic_goal"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimCfg;
    use crate::rng::RngStream;
    use crate::sim::sdf::build_sdf;
    use crate::sim::{Polygon, Scene, Target};
    use rand::Rng;

    #[test]
    fn discounted_sum_matches_geometric_series() {
        let v = 3.7;
        let gamma = 0.98;
        let h = 30;
        let values = vec![v; h + 1];
        let got = discounted_value_sum(&values, gamma);
        let expected = v * (1.0 - gamma.powi(h as i32 + 1)) / (1.0 - gamma);
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn lse_identical_members_reduce_to_sum_plus_logk() {
        let g = 12.5;
        let k = 5;
        let lambda = 10.0;
        let sums = vec![g; k];
        let got = lse_pessimism(&sums, lambda);
        assert!((got - (g + lambda * (k as f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn lse_sandwich_bounds() {
        let mut rng = RngStream::new(1, 0).rng();
        for lambda in [0.1, 1.0, 10.0] {
            for _ in 0..10_000 {
                let sums: Vec<f64> = (0..5).map(|_| rng.random_range(-50.0..50.0)).collect();
                let m = sums.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
                let lse = lse_pessimism(&sums, lambda);
                assert!(lse >= m - 1e-9);
                assert!(lse <= m + lambda * 5f64.ln() + 1e-9);
            }
        }
    }

    #[test]
    fn collision_hinge_arithmetic() {
        let arm = ArmModel::from_config(&SimCfg::default());
        // Empty scene: obstacle-free SDF is positive everywhere inside.
        let scene = Scene {
            obstacles: vec![],
            target: Target {
                polygon: Polygon::regular(0.0, 0.0, 0.03, 8),
                pose: crate::geom::Pose2::new(0.5, 0.0, 0.0),
            },
            support_kind: crate::sim::SupportKind::Table,
        };
        let sdf = build_sdf(&scene, [-1.5, -1.5, 1.5, 1.5], 0.01).unwrap();
        let state = JointState::at_rest(vec![0.3, 0.4, -0.2]);
        let free = cost_collision(&[state.clone()], &sdf, &arm, 0.01);
        assert_eq!(free, 0.0);
    }

    #[test]
    fn bounds_cost_cases() {
        let arm = ArmModel::from_config(&SimCfg::default());
        let dt = 0.02;
        // Constant acceleration within limits: zero cost.
        let mut s1 = JointState::at_rest(vec![0.0; 3]);
        s1.qdd = vec![2.0, 2.0, 2.0];
        let mut s2 = s1.clone();
        s2.t = dt;
        assert_eq!(cost_bounds(&[s1, s2], &arm, dt, 1.0, 1.0), 0.0);

        // Velocity 10% over the limit in one state.
        let limit = arm.limits[0].vel;
        let mut s = JointState::at_rest(vec![0.0; 3]);
        s.qd[0] = 1.1 * limit;
        let got = cost_bounds(&[s], &arm, dt, 1.0, 0.0);
        assert!((got - (0.1 * limit).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn bounds_cost_monotone_in_violation() {
        let arm = ArmModel::from_config(&SimCfg::default());
        let mut prev = 0.0;
        for scale in [1.05, 1.2, 1.5, 2.0] {
            let mut s = JointState::at_rest(vec![0.0; 3]);
            s.qd[1] = scale * arm.limits[1].vel;
            let c = cost_bounds(&[s], &arm, 0.02, 1.0, 0.0);
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn breakdown_composition_identity() {
        let b = CostBreakdown::compose(2.0, 3.0, 4.0, 5.0, 1000.0);
        assert_eq!(b.total, 3.0 + 4.0 + 5.0 + 1000.0 * 2.0);
    }
}
