//! Episode execution: pre-grasp selection under a grasp condition, phase-1
//! planning, phase-2 closed-loop MPC or the open-loop linear servo, and the
//! lift-test verdict.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::datagen::plan::{dls_step, plan_reach};
use crate::datagen::{ik_solve, perturb_pose, pregrasp_from_grasp};
use crate::geom::{angle_diff, Pose2};
use crate::mpc::cost::GraspValueCost;
use crate::mpc::MpcController;
use crate::rng::RngStream;
use crate::sim::arm::{step_dynamics, ArmModel, JointState};
use crate::sim::cloud::sample_cloud;
use crate::sim::grasp::{gripper_body, lift_test};
use crate::sim::sdf::build_sdf;
use crate::sim::{Scene, SdfGrid, SupportKind};
use crate::valuenet::ValueNet;

use super::scenes::EvalScene;
use super::{apply_delta, EpisodeResult, GraspCondition, PhaseReached, PipelineError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    GraspMpc,
    LinearServo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::GraspMpc => "grasp_mpc",
            Method::LinearServo => "linear_servo",
        }
    }
}

/// Outcome of pre-grasp selection.
#[derive(Clone, Debug)]
pub struct SelectedGrasp {
    pub annotation_index: usize,
    pub grasp_true: Pose2,
    pub grasp_cmd: Pose2,
    pub pregrasp_cmd: Pose2,
    pub q_pregrasp: Vec<f64>,
}

fn arm_clear_of_obstacles(arm: &ArmModel, q: &[f64], scene: &Scene, margin: f64) -> bool {
    if scene.obstacles.is_empty() {
        return true;
    }
    arm.body_points(q, 0.02)
        .iter()
        .all(|p| scene.obstacle_signed_distance(*p) >= margin)
}

/// Pick the grasp annotation to execute.
///
/// Candidates are filtered and ranked on ground-truth poses (IK reachability
/// of the pre-grasp, arm clearance, gripper-body clearance at grasp and
/// pre-grasp), and the winner is the one closest in joint space to the home
/// configuration. Condition noise is applied only to the selected grasp, so
/// paired runs across conditions share the selected annotation index. The
/// commanded pre-grasp derives from the noisy grasp.
pub fn select_pregrasp<R: Rng>(
    eval: &EvalScene,
    condition: &GraspCondition,
    arm: &ArmModel,
    cfg: &RunConfig,
    rng: &mut R,
) -> Option<SelectedGrasp> {
    let scene = &eval.scene;
    let offset = if scene.support_kind == SupportKind::ShelfSlot {
        cfg.pipeline.pregrasp_offset_shelf
    } else {
        cfg.pipeline.pregrasp_offset_deploy
    };
    let q_home = &cfg.sim.q_home;
    let margin = cfg.pipeline.clearance_margin;

    let mut best: Option<(usize, Pose2, Vec<f64>, f64)> = None;
    for (idx, ann) in eval.annotations.iter().enumerate() {
        let grasp_true = scene.target.pose.compose(&ann.pose_obj);
        let pregrasp_true = pregrasp_from_grasp(&grasp_true, offset);
        if !scene.obstacles.is_empty() {
            let body_g = gripper_body(&grasp_true, arm);
            let body_p = gripper_body(&pregrasp_true, arm);
            if scene
                .obstacles
                .iter()
                .any(|o| body_g.intersects(o) || body_p.intersects(o))
            {
                continue;
            }
        }
        let Some(q_pre) = ik_solve(arm, &pregrasp_true, q_home, cfg.datagen.lambda_dls) else {
            continue;
        };
        if !arm_clear_of_obstacles(arm, &q_pre, scene, margin) {
            continue;
        }
        let dist: f64 = q_pre
            .iter()
            .zip(q_home)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if best.as_ref().map_or(true, |(.., d)| dist < *d) {
            best = Some((idx, grasp_true, q_pre, dist));
        }
    }
    let (annotation_index, grasp_true, q_pre_true, _) = best?;

    let grasp_cmd = match condition {
        GraspCondition::GroundTruth => grasp_true,
        GraspCondition::Noisy { trans, rot } => perturb_pose(&grasp_true, *trans, *rot, rng),
        GraspCondition::PredictedEmulation => {
            let biased = perturb_pose(
                &grasp_true,
                cfg.pipeline.pred_bias_trans,
                cfg.pipeline.pred_bias_rot,
                rng,
            );
            perturb_pose(
                &biased,
                cfg.pipeline.pred_jitter_trans,
                cfg.pipeline.pred_jitter_rot,
                rng,
            )
        }
    };
    let pregrasp_cmd = pregrasp_from_grasp(&grasp_cmd, offset);
    let q_pregrasp = ik_solve(arm, &pregrasp_cmd, &q_pre_true, cfg.datagen.lambda_dls)?;
    if !arm_clear_of_obstacles(arm, &q_pregrasp, scene, margin) {
        return None;
    }
    Some(SelectedGrasp {
        annotation_index,
        grasp_true,
        grasp_cmd,
        pregrasp_cmd,
        q_pregrasp,
    })
}

/// Re-pose the target once (the moving-object perturbation). Fails if the
/// moved target intersects an obstacle.
pub fn perturb_mid_episode(scene: &Scene, delta: &Pose2) -> Result<Scene, PipelineError> {
    let new_pose = apply_delta(&scene.target.pose, delta);
    let moved = scene.target.polygon.transformed(&new_pose);
    if scene.obstacles.iter().any(|o| moved.intersects(o)) {
        return Err(PipelineError::InvalidPerturbation);
    }
    Ok(scene.with_target_pose(new_pose))
}

/// Everything one episode needs.
pub struct EpisodeContext<'a> {
    pub cfg: &'a RunConfig,
    pub arm: &'a ArmModel,
    pub members: &'a [ValueNet],
    pub eval: &'a EvalScene,
    pub method: Method,
    pub condition: GraspCondition,
    pub perturb: Option<Pose2>,
    /// Episode stream; substream 0 drives condition noise, 1 observations,
    /// 2 the controller. Methods share 0 and 1 for paired comparisons.
    pub stream: RngStream,
    pub seed_label: u64,
}

fn count_collisions(arm: &ArmModel, q: &[f64], sdf: &SdfGrid) -> bool {
    arm.body_points(q, 0.03).iter().any(|p| sdf.query(*p) < 0.0)
}

/// Phase 1: plan home -> pre-grasp. Falls back to a staging waypoint
/// farther back along the approach axis when the direct line collides.
fn reach_pregrasp(
    arm: &ArmModel,
    cfg: &RunConfig,
    scene: &Scene,
    sel: &SelectedGrasp,
) -> Option<Vec<JointState>> {
    let home = JointState::at_rest(cfg.sim.q_home.clone());
    let direct = plan_reach(
        arm,
        &home,
        &sel.pregrasp_cmd,
        scene,
        &cfg.datagen,
        cfg.sim.dt,
    );
    match direct {
        Ok(steps) => Some(steps),
        Err(crate::datagen::PlanFailure::Collision) => {
            let staging = sel
                .pregrasp_cmd
                .compose(&Pose2::new(-0.12, 0.0, 0.0));
            let leg1 = plan_reach(arm, &home, &staging, scene, &cfg.datagen, cfg.sim.dt).ok()?;
            let start2 = leg1.last().unwrap().clone();
            let leg2 = plan_reach(
                arm,
                &start2,
                &sel.pregrasp_cmd,
                scene,
                &cfg.datagen,
                cfg.sim.dt,
            )
            .ok()?;
            let mut steps = leg1;
            steps.extend(leg2.into_iter().skip(1));
            Some(steps)
        }
        Err(_) => None,
    }
}

/// Execute one full episode. All failures are result states; hard errors
/// are reserved for broken inputs (missing nets, invalid perturbations).
pub fn run_episode(ctx: &EpisodeContext) -> Result<EpisodeResult, PipelineError> {
    let t0 = std::time::Instant::now();
    let cfg = ctx.cfg;
    let arm = ctx.arm;
    let scene = &ctx.eval.scene;
    let cone = cfg.sim.friction_cone_half_angle;
    let mut noise_rng = ctx.stream.substream(0).rng();
    let mut obs_rng = ctx.stream.substream(1).rng();

    let fail = |phase: PhaseReached, collisions: usize, steps: usize, t0: std::time::Instant| {
        EpisodeResult {
            scene_kind: scene.support_kind.as_str().to_string(),
            scene_id: ctx.eval.id,
            seed: ctx.seed_label,
            condition: ctx.condition.label().to_string(),
            method: ctx.method.as_str().to_string(),
            phase_reached: phase,
            success: false,
            collisions,
            mpc_steps: steps,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            perturbed: ctx.perturb.is_some(),
        }
    };

    let Some(sel) = select_pregrasp(ctx.eval, &ctx.condition, arm, cfg, &mut noise_rng) else {
        return Ok(fail(PhaseReached::PregraspFail, 0, 0, t0));
    };
    let Some(phase1) = reach_pregrasp(arm, cfg, scene, &sel) else {
        return Ok(fail(PhaseReached::PregraspFail, 0, 0, t0));
    };

    // The world the gripper actually faces after the optional perturbation.
    let scene_current = match &ctx.perturb {
        Some(delta) => perturb_mid_episode(scene, delta)?,
        None => scene.clone(),
    };
    let bounds = [
        cfg.sim.bounds[0],
        cfg.sim.bounds[1],
        cfg.sim.bounds[2],
        cfg.sim.bounds[3],
    ];
    let sdf = build_sdf(&scene_current, bounds, cfg.sim.sdf_resolution)
        .expect("workspace bounds contain eval scenes");

    let mut collisions = 0usize;
    for s in &phase1 {
        if count_collisions(arm, &s.q, &sdf) {
            collisions += 1;
        }
    }

    let mut state = phase1.last().unwrap().clone();
    state.qd.iter_mut().for_each(|v| *v = 0.0);
    state.qdd.iter_mut().for_each(|v| *v = 0.0);

    let budget = cfg.pipeline.mpc_steps;
    let dt = cfg.sim.dt;
    let mut steps_used = 0usize;

    match ctx.method {
        Method::GraspMpc => {
            assert!(!ctx.members.is_empty(), "grasp_mpc needs a loaded net");
            let use_f32 = cfg.mpc.value_dtype == "f32";
            let mut task = GraspValueCost::new(
                ctx.members.to_vec(),
                cfg.mpc.gamma_mpc,
                cfg.mpc.lambda,
                use_f32,
            );
            let mut controller =
                MpcController::new(cfg.mpc.clone(), arm.dof(), ctx.stream.substream(2));
            for _ in 0..budget {
                let partial = if cfg.pipeline.observe_partial { 0.5 } else { 1.0 };
                let cloud = sample_cloud(
                    &scene_current,
                    cfg.pipeline.observe_points,
                    partial,
                    cfg.pipeline.observe_noise_sigma,
                    &mut obs_rng,
                );
                task.set_observation(&cloud)?;
                let action = controller.step(&state, &task, &sdf, arm, dt)?;
                state = step_dynamics(&state, &action, arm, dt);
                steps_used += 1;
                if count_collisions(arm, &state.q, &sdf) {
                    collisions += 1;
                }
            }
        }
        Method::LinearServo => {
            // Open loop: drive the EE straight toward the commanded grasp
            // pose; never re-observes.
            for _ in 0..budget {
                let cur = arm.fk(&state.q).expect("state is well-formed");
                let pos_err = cur.trans_dist(&sel.grasp_cmd);
                let rot_err = angle_diff(sel.grasp_cmd.theta, cur.theta);
                if pos_err < cfg.datagen.ee_tol_pos && rot_err.abs() < cfg.datagen.ee_tol_rot {
                    break;
                }
                let step_len = (cfg.datagen.servo_speed * dt).min(pos_err);
                let frac = if pos_err > 1e-9 { step_len / pos_err } else { 1.0 };
                let target = [
                    (sel.grasp_cmd.x - cur.x) * frac,
                    (sel.grasp_cmd.y - cur.y) * frac,
                    (rot_err * frac).clamp(-0.1, 0.1),
                ];
                let jac = arm.jacobian(&state.q);
                let mut dq = dls_step(&jac, arm.dof(), target, cfg.datagen.lambda_dls);
                for (j, d) in dq.iter_mut().enumerate() {
                    let vmax = arm.limits[j].vel * dt;
                    *d = d.clamp(-vmax, vmax);
                }
                let qd: Vec<f64> = dq.iter().map(|d| d / dt).collect();
                state = JointState {
                    q: state
                        .q
                        .iter()
                        .zip(&dq)
                        .zip(&arm.limits)
                        .map(|((q, d), l)| (q + d).clamp(l.pos_lower, l.pos_upper))
                        .collect(),
                    qdd: qd
                        .iter()
                        .zip(&state.qd)
                        .map(|(v, v0)| (v - v0) / dt)
                        .collect(),
                    qd,
                    t: state.t + dt,
                };
                steps_used += 1;
                if count_collisions(arm, &state.q, &sdf) {
                    collisions += 1;
                }
            }
        }
    }

    // Close the gripper where the EE ended up and try to lift.
    let ee_final = arm.fk(&state.q).expect("state is well-formed");
    let success = lift_test(&scene_current, &ee_final, arm, cone);
    let mut result = fail(
        if success {
            PhaseReached::Success
        } else {
            PhaseReached::GraspFail
        },
        collisions,
        steps_used,
        t0,
    );
    result.success = success;
    Ok(result)
}
