//! Serial-chain planar arm: forward kinematics, Jacobian, semi-implicit
//! Euler dynamics on commanded joint accelerations, and self-collision.

use serde::{Deserialize, Serialize};

use crate::config::SimCfg;
use crate::geom::{normalize_angle, Pose2};

use super::poly::{segment_segment_distance, sub};
use super::SimError;

/// Per-joint limits; position is a [lower, upper] interval, the rest are
/// symmetric magnitudes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JointLimits {
    pub pos_lower: f64,
    pub pos_upper: f64,
    pub vel: f64,
    pub acc: f64,
    pub jerk: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Gripper {
    /// Full jaw stroke, meters.
    pub jaw_span: f64,
    pub finger_len: f64,
}

/// N-link revolute planar arm (N >= 2).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmModel {
    pub link_lengths: Vec<f64>,
    pub base: Pose2,
    pub limits: Vec<JointLimits>,
    pub gripper: Gripper,
}

impl ArmModel {
    pub fn new(
        link_lengths: Vec<f64>,
        base: Pose2,
        limits: Vec<JointLimits>,
        gripper: Gripper,
    ) -> Result<Self, SimError> {
        if link_lengths.len() < 2 {
            return Err(SimError::DegeneratePolygon(
                "arm needs at least 2 links".into(),
            ));
        }
        if limits.len() != link_lengths.len() {
            return Err(SimError::DimensionMismatch {
                expected: link_lengths.len(),
                got: limits.len(),
            });
        }
        for l in &limits {
            assert!(
                l.pos_lower < l.pos_upper && l.vel > 0.0 && l.acc > 0.0 && l.jerk > 0.0,
                "joint limits must be strictly positive with lower < upper"
            );
        }
        Ok(Self {
            link_lengths,
            base,
            limits,
            gripper,
        })
    }

    pub fn from_config(cfg: &SimCfg) -> Self {
        let n = cfg.link_lengths.len();
        let limits = vec![
            JointLimits {
                pos_lower: -cfg.joint_pos_limit,
                pos_upper: cfg.joint_pos_limit,
                vel: cfg.joint_vel_limit,
                acc: cfg.joint_acc_limit,
                jerk: cfg.joint_jerk_limit,
            };
            n
        ];
        Self::new(
            cfg.link_lengths.clone(),
            Pose2::identity(),
            limits,
            Gripper {
                jaw_span: cfg.jaw_span,
                finger_len: cfg.finger_len,
            },
        )
        .expect("config arm is valid")
    }

    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// End-effector pose: base composed with each revolute joint + link.
    pub fn fk(&self, q: &[f64]) -> Result<Pose2, SimError> {
        if q.len() != self.dof() {
            return Err(SimError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        let mut pose = self.base;
        for (qi, li) in q.iter().zip(&self.link_lengths) {
            pose = pose.compose(&Pose2::new(0.0, 0.0, *qi));
            pose = pose.compose(&Pose2::new(*li, 0.0, 0.0));
        }
        Ok(pose)
    }

    /// Positions of every joint pivot plus the EE tip: N+1 points.
    pub fn fk_points(&self, q: &[f64]) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(self.dof() + 1);
        let mut pose = self.base;
        pts.push([pose.x, pose.y]);
        for (qi, li) in q.iter().zip(&self.link_lengths) {
            pose = pose.compose(&Pose2::new(0.0, 0.0, *qi));
            pose = pose.compose(&Pose2::new(*li, 0.0, 0.0));
            pts.push([pose.x, pose.y]);
        }
        pts
    }

    /// Analytic Jacobian of (x, y, theta) w.r.t. q — 3 rows by N columns,
    /// row-major.
    pub fn jacobian(&self, q: &[f64]) -> Vec<f64> {
        let n = self.dof();
        let pts = self.fk_points(q);
        let ee = pts[n];
        let mut jac = vec![0.0; 3 * n];
        for j in 0..n {
            let pivot = pts[j];
            let r = sub(ee, pivot);
            jac[j] = -r[1]; // dx/dqj
            jac[n + j] = r[0]; // dy/dqj
            jac[2 * n + j] = 1.0; // dtheta/dqj
        }
        jac
    }

    /// Sample points along every link (spacing <= `step`), for collision
    /// costs. Includes joint pivots and the EE tip.
    pub fn body_points(&self, q: &[f64], step: f64) -> Vec<[f64; 2]> {
        let pts = self.fk_points(q);
        let mut out = Vec::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = super::poly::norm(sub(b, a));
            let n = (len / step).ceil().max(1.0) as usize;
            for k in 0..n {
                let t = k as f64 / n as f64;
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        out.push(pts[self.dof()]);
        out
    }

    /// Minimum distance between non-adjacent link segments; 0 on contact.
    pub fn self_collision_distance(&self, q: &[f64]) -> f64 {
        let pts = self.fk_points(q);
        let n = self.dof();
        let mut d = f64::INFINITY;
        for i in 0..n {
            for j in (i + 2)..n {
                d = d.min(segment_segment_distance(
                    pts[i],
                    pts[i + 1],
                    pts[j],
                    pts[j + 1],
                ));
            }
        }
        d
    }
}

/// Joint-space state at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub qdd: Vec<f64>,
    pub t: f64,
}

impl JointState {
    pub fn at_rest(q: Vec<f64>) -> JointState {
        let n = q.len();
        JointState {
            q,
            qd: vec![0.0; n],
            qdd: vec![0.0; n],
            t: 0.0,
        }
    }

    /// Per-joint limit report: true where (pos, vel) are inside limits.
    pub fn within_limits(&self, arm: &ArmModel) -> Vec<bool> {
        self.q
            .iter()
            .zip(&self.qd)
            .zip(&arm.limits)
            .map(|((q, qd), l)| *q >= l.pos_lower && *q <= l.pos_upper && qd.abs() <= l.vel)
            .collect()
    }
}

/// Semi-implicit Euler step on clamped acceleration commands:
/// `qd' = qd + qdd dt`, `q' = q + qd' dt`. Commands beyond the acceleration
/// limit are clamped, not rejected.
pub fn step_dynamics(state: &JointState, qdd_cmd: &[f64], arm: &ArmModel, dt: f64) -> JointState {
    debug_assert!(dt > 0.0);
    let n = state.q.len();
    let mut q = Vec::with_capacity(n);
    let mut qd = Vec::with_capacity(n);
    let mut qdd = Vec::with_capacity(n);
    for i in 0..n {
        let a = qdd_cmd[i].clamp(-arm.limits[i].acc, arm.limits[i].acc);
        let v = state.qd[i] + a * dt;
        q.push(state.q[i] + v * dt);
        qd.push(v);
        qdd.push(a);
    }
    JointState {
        q,
        qd,
        qdd,
        t: state.t + dt,
    }
}

/// Wrap joint angles into (-pi, pi] (used when comparing configurations).
pub fn normalize_q(q: &[f64]) -> Vec<f64> {
    q.iter().map(|a| normalize_angle(*a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_arm() -> ArmModel {
        let limits = vec![
            JointLimits {
                pos_lower: -3.0,
                pos_upper: 3.0,
                vel: 2.5,
                acc: 10.0,
                jerk: 400.0,
            };
            3
        ];
        ArmModel::new(
            vec![1.0, 1.0, 1.0],
            Pose2::identity(),
            limits,
            Gripper {
                jaw_span: 0.14,
                finger_len: 0.05,
            },
        )
        .unwrap()
    }

    #[test]
    fn fk_straight_arm() {
        let arm = test_arm();
        let p = arm.fk(&[0.0, 0.0, 0.0]).unwrap();
        assert!((p.x - 3.0).abs() < 1e-12 && p.y.abs() < 1e-12 && p.theta.abs() < 1e-12);
    }

    #[test]
    fn fk_rotated_base_joint() {
        let arm = test_arm();
        let p = arm.fk(&[std::f64::consts::FRAC_PI_2, 0.0, 0.0]).unwrap();
        assert!(p.x.abs() < 1e-12);
        assert!((p.y - 3.0).abs() < 1e-12);
        assert!((p.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn fk_dimension_mismatch() {
        let arm = test_arm();
        assert!(arm.fk(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let arm = test_arm();
        let q = [0.3, -0.7, 1.1];
        let jac = arm.jacobian(&q);
        let eps = 1e-6;
        let mut max_rel = 0.0_f64;
        for j in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[j] += eps;
            qm[j] -= eps;
            let fp = arm.fk(&qp).unwrap();
            let fm = arm.fk(&qm).unwrap();
            let fd = [
                (fp.x - fm.x) / (2.0 * eps),
                (fp.y - fm.y) / (2.0 * eps),
                crate::geom::angle_diff(fp.theta, fm.theta) / (2.0 * eps),
            ];
            for r in 0..3 {
                let a = jac[r * 3 + j];
                let den = fd[r].abs().max(a.abs()).max(1e-9);
                max_rel = max_rel.max((a - fd[r]).abs() / den);
            }
        }
        assert!(max_rel < 1e-6, "max rel err {max_rel}");
    }

    #[test]
    fn step_dynamics_rest_is_fixed_point() {
        let arm = test_arm();
        let s = JointState::at_rest(vec![0.1, 0.2, 0.3]);
        let s2 = step_dynamics(&s, &[0.0, 0.0, 0.0], &arm, 0.02);
        assert_eq!(s2.q, s.q);
        assert_eq!(s2.qd, s.qd);
        assert!((s2.t - 0.02).abs() < 1e-12);
    }

    #[test]
    fn step_dynamics_hand_integration() {
        let arm = test_arm();
        let s = JointState::at_rest(vec![0.0, 0.0, 0.0]);
        let s2 = step_dynamics(&s, &[1.0, 0.0, 0.0], &arm, 0.1);
        assert!((s2.qd[0] - 0.1).abs() < 1e-12);
        assert!((s2.q[0] - 0.01).abs() < 1e-12);
        assert_eq!(s2.qdd[0], 1.0);
    }

    #[test]
    fn step_dynamics_clamps_acceleration() {
        let arm = test_arm();
        let s = JointState::at_rest(vec![0.0, 0.0, 0.0]);
        let s2 = step_dynamics(&s, &[20.0, -20.0, 0.0], &arm, 0.02);
        assert_eq!(s2.qdd[0], 10.0);
        assert_eq!(s2.qdd[1], -10.0);
    }

    #[test]
    fn velocity_preserved_without_command() {
        let arm = test_arm();
        let mut s = JointState::at_rest(vec![0.0; 3]);
        s.qd = vec![0.5, -0.25, 0.1];
        let s2 = step_dynamics(&s, &[0.0; 3], &arm, 0.02);
        assert_eq!(s2.qd, s.qd);
    }

    #[test]
    fn self_collision_distance_folded_arm() {
        let arm = test_arm();
        // Nearly straight: links far apart.
        let open = arm.self_collision_distance(&[0.0, 0.1, 0.1]);
        assert!(open > 0.5);
        // Fold link 3 back onto link 1.
        let folded = arm.self_collision_distance(&[0.0, 3.0, 3.0]);
        assert!(folded < 0.2, "folded distance {folded}");
    }

    #[test]
    fn within_limits_reports_per_joint() {
        let arm = test_arm();
        let mut s = JointState::at_rest(vec![0.0, 4.0, 0.0]);
        s.qd[2] = 5.0;
        assert_eq!(s.within_limits(&arm), vec![true, false, false]);
    }
}
