//! Damped-least-squares IK: a one-shot solver and a straight-line EE-space
//! servo planner that emits timestamped joint trajectories.

use crate::config::DatagenCfg;
use crate::geom::{angle_diff, Pose2};
use crate::sim::arm::{ArmModel, JointState};
use crate::sim::Scene;

/// Why a reach plan failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanFailure {
    IkDivergence,
    Collision,
    JointLimit,
}

impl std::fmt::Display for PlanFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanFailure::IkDivergence => write!(f, "ik_divergence"),
            PlanFailure::Collision => write!(f, "collision"),
            PlanFailure::JointLimit => write!(f, "joint_limit"),
        }
    }
}

/// Solve `(J J^T + lambda^2 I) z = e` for 3x1 `z`, then return `J^T z`.
pub(crate) fn dls_step(jac: &[f64], n: usize, e: [f64; 3], lambda: f64) -> Vec<f64> {
    // A = J J^T + lambda^2 I (3x3, symmetric).
    let mut a = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut s = 0.0;
            for k in 0..n {
                s += jac[r * n + k] * jac[c * n + k];
            }
            a[r][c] = s;
        }
        a[r][r] += lambda * lambda;
    }
    // Gaussian elimination with partial pivoting on the 3x3 system.
    let mut m = [[0.0f64; 4]; 3];
    for r in 0..3 {
        m[r][..3].copy_from_slice(&a[r]);
        m[r][3] = e[r];
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for r in (col + 1)..3 {
            let f = m[r][col] / d;
            for c in col..4 {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut z = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut s = m[r][3];
        for c in (r + 1)..3 {
            s -= m[r][c] * z[c];
        }
        z[r] = s / m[r][r];
    }
    (0..n)
        .map(|j| jac[j] * z[0] + jac[n + j] * z[1] + jac[2 * n + j] * z[2])
        .collect()
}

fn ee_error(arm: &ArmModel, q: &[f64], goal: &Pose2) -> (f64, f64, [f64; 3]) {
    let cur = arm.fk(q).expect("dimension checked");
    let e = [
        goal.x - cur.x,
        goal.y - cur.y,
        angle_diff(goal.theta, cur.theta),
    ];
    ((e[0] * e[0] + e[1] * e[1]).sqrt(), e[2].abs(), e)
}

/// One-shot damped-least-squares IK from `q_init`. Returns a configuration
/// whose EE pose is within (0.5 mm, 5 mrad) of the target, or None.
pub fn ik_solve(arm: &ArmModel, target: &Pose2, q_init: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let n = arm.dof();
    let mut q = q_init.to_vec();
    for _ in 0..300 {
        let (pos_err, rot_err, e) = ee_error(arm, &q, target);
        if pos_err < 5e-4 && rot_err < 5e-3 {
            return Some(q);
        }
        let jac = arm.jacobian(&q);
        let mut dq = dls_step(&jac, n, e, lambda);
        // Step clamp keeps the linearization honest.
        let max_step = dq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_step > 0.2 {
            let s = 0.2 / max_step;
            for v in &mut dq {
                *v *= s;
            }
        }
        for j in 0..n {
            q[j] = (q[j] + dq[j]).clamp(arm.limits[j].pos_lower, arm.limits[j].pos_upper);
        }
    }
    let (pos_err, rot_err, _) = ee_error(arm, &q, target);
    if pos_err < 5e-4 && rot_err < 5e-3 {
        Some(q)
    } else {
        None
    }
}

/// Straight-line EE-space servo from `start` to `goal_ee`:
/// per-step damped-least-squares IK toward a moving waypoint on the line,
/// joint clamping, and obstacle-margin checks along the way.
///
/// Steps are spaced `cfg` dt apart (from the sim config dt passed in) and
/// carry finite-difference joint velocities/accelerations.
pub fn plan_reach(
    arm: &ArmModel,
    start: &JointState,
    goal_ee: &Pose2,
    scene: &Scene,
    cfg: &DatagenCfg,
    dt: f64,
) -> Result<Vec<JointState>, PlanFailure> {
    let n = arm.dof();
    let mut state = JointState {
        q: start.q.clone(),
        qd: vec![0.0; n],
        qdd: vec![0.0; n],
        t: 0.0,
    };
    let mut steps = vec![state.clone()];
    let check_collision = !scene.obstacles.is_empty();
    let mut best_err = f64::INFINITY;
    let mut since_progress = 0usize;

    for _ in 0..cfg.max_plan_steps {
        let (pos_err, rot_err, e) = ee_error(arm, &state.q, goal_ee);
        if pos_err <= cfg.ee_tol_pos && rot_err <= cfg.ee_tol_rot {
            return Ok(steps);
        }
        // Waypoint: advance along the straight line by at most one servo
        // step; rotate proportionally so both finish together.
        let step_len = (cfg.servo_speed * dt).min(pos_err);
        let frac = if pos_err > 1e-9 { step_len / pos_err } else { 1.0 };
        let rot_step = (e[2] * frac).clamp(-0.1, 0.1);
        let target = [e[0] * frac, e[1] * frac, rot_step];
        let jac = arm.jacobian(&state.q);
        let mut dq = dls_step(&jac, n, target, cfg.lambda_dls);
        let mut pinned = false;
        for j in 0..n {
            let vmax = arm.limits[j].vel * dt;
            dq[j] = dq[j].clamp(-vmax, vmax);
            let unclamped = state.q[j] + dq[j];
            let clamped = unclamped.clamp(arm.limits[j].pos_lower, arm.limits[j].pos_upper);
            if (clamped - unclamped).abs() > 1e-12 {
                pinned = true;
            }
            dq[j] = clamped - state.q[j];
        }
        let qd: Vec<f64> = dq.iter().map(|d| d / dt).collect();
        let qdd: Vec<f64> = qd
            .iter()
            .zip(&state.qd)
            .map(|(v, v0)| (v - v0) / dt)
            .collect();
        state = JointState {
            q: state.q.iter().zip(&dq).map(|(q, d)| q + d).collect(),
            qd,
            qdd,
            t: state.t + dt,
        };
        if check_collision {
            let clear = arm
                .body_points(&state.q, 0.02)
                .iter()
                .map(|p| scene.obstacle_signed_distance(*p))
                .fold(f64::INFINITY, f64::min);
            if clear < cfg.collision_margin {
                return Err(PlanFailure::Collision);
            }
        }
        steps.push(state.clone());

        let err_now = pos_err + rot_err;
        if err_now < best_err - 1e-7 {
            best_err = err_now;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress > 60 {
                return Err(if pinned {
                    PlanFailure::JointLimit
                } else {
                    PlanFailure::IkDivergence
                });
            }
        }
    }
    let (pos_err, rot_err, _) = ee_error(arm, &state.q, goal_ee);
    if pos_err <= cfg.ee_tol_pos && rot_err <= cfg.ee_tol_rot {
        Ok(steps)
    } else {
        Err(PlanFailure::IkDivergence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimCfg;
    use crate::sim::Polygon;

    fn setup() -> (ArmModel, DatagenCfg, f64) {
        (
            ArmModel::from_config(&SimCfg::default()),
            DatagenCfg::default(),
            SimCfg::default().dt,
        )
    }

    fn dummy_scene() -> Scene {
        Scene::empty(Polygon::regular(0.0, 0.0, 0.03, 8), Pose2::new(5.0, 5.0, 0.0))
    }

    #[test]
    fn goal_at_current_pose_is_one_step() {
        let (arm, cfg, dt) = setup();
        let q = vec![0.4, 0.6, -0.2];
        let goal = arm.fk(&q).unwrap();
        let steps =
            plan_reach(&arm, &JointState::at_rest(q), &goal, &dummy_scene(), &cfg, dt).unwrap();
        assert_eq!(steps.len(), 1);
    }

    #[test]
    fn reaches_free_space_goal_within_tolerance() {
        let (arm, cfg, dt) = setup();
        let start = JointState::at_rest(vec![0.6, 0.9, -0.9]);
        let goal = Pose2::new(0.55, 0.25, 0.5);
        let steps = plan_reach(&arm, &start, &goal, &dummy_scene(), &cfg, dt).unwrap();
        let last = steps.last().unwrap();
        let reached = arm.fk(&last.q).unwrap();
        assert!(reached.trans_dist(&goal) < cfg.ee_tol_pos);
        assert!(angle_diff(reached.theta, goal.theta).abs() < cfg.ee_tol_rot);
        assert!(steps.len() >= 5);
    }

    #[test]
    fn unreachable_goal_diverges() {
        let (arm, cfg, dt) = setup();
        let start = JointState::at_rest(vec![0.0, 0.2, 0.2]);
        let goal = Pose2::new(arm.reach() + 0.5, 0.0, 0.0);
        let err = plan_reach(&arm, &start, &goal, &dummy_scene(), &cfg, dt).unwrap_err();
        assert!(matches!(
            err,
            PlanFailure::IkDivergence | PlanFailure::JointLimit
        ));
    }

    #[test]
    fn obstacle_on_the_line_fails_with_collision() {
        let (arm, cfg, dt) = setup();
        let start = JointState::at_rest(vec![0.6, 0.9, -0.9]);
        let goal = Pose2::new(0.8, 0.0, 0.0);
        let mut scene = dummy_scene();
        // Wall between start EE and goal.
        scene.obstacles.push(Polygon::rectangle(0.55, 0.1, 0.03, 0.5));
        let err = plan_reach(&arm, &start, &goal, &scene, &cfg, dt).unwrap_err();
        assert_eq!(err, PlanFailure::Collision);
    }

    #[test]
    fn ik_solve_reaches_random_targets() {
        let (arm, _, _) = setup();
        let q0 = vec![0.6, 0.9, -0.9];
        for (x, y, th) in [(0.5, 0.3, 0.3), (0.7, -0.1, -0.8), (0.35, 0.45, 1.2)] {
            let target = Pose2::new(x, y, th);
            let q = ik_solve(&arm, &target, &q0, 0.05).expect("reachable");
            let got = arm.fk(&q).unwrap();
            assert!(got.trans_dist(&target) < 5e-4);
        }
    }

    #[test]
    fn ik_solve_none_for_unreachable() {
        let (arm, _, _) = setup();
        assert!(ik_solve(&arm, &Pose2::new(2.0, 0.0, 0.0), &[0.1, 0.1, 0.1], 0.05).is_none());
    }
}
