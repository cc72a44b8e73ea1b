//! Parallel-jaw grasp feasibility: antipodal contact geometry, gripper
//! body clearance, and the lift test.
//!
//! Gripper frame convention: +x is the approach axis, the jaws close along
//! the +-y line through the origin. In 2-D the closed-gripper footprint is
//! the finger carriage rectangle behind the closing line; the palm plane is
//! out-of-plane and is not modeled.

use serde::{Deserialize, Serialize};

use crate::geom::Pose2;

use super::arm::ArmModel;
use super::poly::{dot, Polygon};
use super::Scene;

/// A grasp pose in the target's object frame plus its verified feasibility.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GraspAnnotation {
    pub pose_obj: Pose2,
    pub feasible: bool,
}

/// Closed-gripper footprint at a world grasp pose.
pub fn gripper_body(grasp_world: &Pose2, arm: &ArmModel) -> Polygon {
    let half = arm.gripper.jaw_span / 2.0;
    let local = [
        [-arm.gripper.finger_len, -half],
        [0.0, -half],
        [0.0, half],
        [-arm.gripper.finger_len, half],
    ];
    Polygon::new(local.iter().map(|p| grasp_world.transform_point(*p)).collect())
        .expect("rectangle is a valid polygon")
}

/// Both jaw contacts, if they exist: the extreme crossings of the closing
/// segment with the target boundary, as (signed offset along +y, edge index).
fn jaw_contacts(target_world: &Polygon, grasp_world: &Pose2, jaw_span: f64) -> Option<((f64, usize), (f64, usize))> {
    let y_axis = grasp_world.y_axis();
    let half = jaw_span / 2.0;
    let origin = [grasp_world.x, grasp_world.y];
    // Hits of the ray origin + t*y_axis for t in [-half, half]: cast from
    // just below the sweep so every crossing inside the span is found.
    let start = [origin[0] - (half + 1e-6) * y_axis[0], origin[1] - (half + 1e-6) * y_axis[1]];
    let mut hits: Vec<(f64, usize)> = Vec::new();
    let mut from = 0.0;
    loop {
        let o = [start[0] + from * y_axis[0], start[1] + from * y_axis[1]];
        match target_world.raycast(o, y_axis) {
            Some((t, edge)) => {
                let offset = from + t - (half + 1e-6);
                if offset > half {
                    break;
                }
                hits.push((offset, edge));
                from += t + 1e-9;
            }
            None => break,
        }
        if hits.len() > 64 {
            break;
        }
    }
    if hits.len() < 2 {
        return None;
    }
    let lo = hits[0];
    let hi = hits[hits.len() - 1];
    if hi.0 - lo.0 < 1e-9 {
        return None;
    }
    Some((hi, lo))
}

/// Antipodal parallel-jaw feasibility:
/// (a) both jaws reach the target inside the stroke,
/// (b) contact normals oppose the closing directions within the friction
///     cone half-angle,
/// (c) the gripper body does not intersect any obstacle.
pub fn check_grasp_feasible(
    scene: &Scene,
    grasp_world: &Pose2,
    arm: &ArmModel,
    cone_half_angle: f64,
) -> bool {
    let target = scene.target.world_polygon();
    let y_axis = grasp_world.y_axis();
    let Some(((_, top_edge), (_, bottom_edge))) =
        jaw_contacts(&target, grasp_world, arm.gripper.jaw_span)
    else {
        return false;
    };
    let cos_cone = cone_half_angle.cos();
    let n_top = target.edge_normal(top_edge);
    let n_bottom = target.edge_normal(bottom_edge);
    // Upper jaw presses along -y onto a surface facing +y, and vice versa.
    if dot(n_top, y_axis) < cos_cone {
        return false;
    }
    if -dot(n_bottom, y_axis) < cos_cone {
        return false;
    }
    let body = gripper_body(grasp_world, arm);
    for obs in &scene.obstacles {
        if body.intersects(obs) {
            return false;
        }
    }
    true
}

/// Grasp-success proxy: the grasp is feasible and the grasped object can
/// translate up by `lift` (1 cm) without hitting an obstacle.
pub fn lift_test(scene: &Scene, grasp_world: &Pose2, arm: &ArmModel, cone_half_angle: f64) -> bool {
    if !check_grasp_feasible(scene, grasp_world, arm, cone_half_angle) {
        return false;
    }
    let lifted = scene
        .target
        .polygon
        .transformed(&scene.target.pose.translated(0.0, 0.01));
    !scene.obstacles.iter().any(|o| lifted.intersects(o))
}
