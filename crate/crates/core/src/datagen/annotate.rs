//! Antipodal grasp annotation sampling on isolated objects.

use rand::Rng;

use crate::geom::Pose2;
use crate::sim::grasp::check_grasp_feasible;
use crate::sim::poly::{norm, sub, Polygon};
use crate::sim::{ArmModel, GraspAnnotation, Scene};

use super::DatagenError;

/// One antipodal candidate in the object frame: pick a boundary point, shoot
/// its inward normal to the opposite boundary, and close the jaws along the
/// bisector of the two contact normals (splitting any misalignment evenly
/// between the friction cones). Returns None when the chord is too wide for
/// the jaws.
pub fn antipodal_candidate<R: Rng>(poly: &Polygon, jaw_span: f64, rng: &mut R) -> Option<Pose2> {
    let s = rng.random_range(0.0..poly.perimeter());
    let flip: bool = rng.random();
    let (p1, edge) = poly.boundary_point(s);
    let n1 = poly.edge_normal(edge);
    let inward = [-n1[0], -n1[1]];
    let start = [p1[0] + 1e-9 * inward[0], p1[1] + 1e-9 * inward[1]];
    let (t, opposite_edge) = poly.raycast(start, inward)?;
    let p2 = [start[0] + t * inward[0], start[1] + t * inward[1]];
    let width = norm(sub(p2, p1));
    if width > 0.9 * jaw_span || width < 1e-4 {
        return None;
    }
    let n2 = poly.edge_normal(opposite_edge);
    let center = [(p1[0] + p2[0]) / 2.0, (p1[1] + p2[1]) / 2.0];
    // Closing line along the bisector of n1 and -n2; `flip` picks which side
    // the gripper approaches from.
    let bis = [n1[0] - n2[0], n1[1] - n2[1]];
    let bis_len = norm(bis);
    if bis_len < 1e-9 {
        return None;
    }
    let y_axis = [bis[0] / bis_len, bis[1] / bis_len];
    let theta = if flip {
        f64::atan2(-y_axis[0], y_axis[1]) + std::f64::consts::PI
    } else {
        f64::atan2(-y_axis[0], y_axis[1])
    };
    Some(Pose2::new(center[0], center[1], theta))
}

/// Mix of feasible and infeasible grasp annotations for an isolated object.
///
/// Each slot is drawn feasible with probability `feasible_ratio`; feasible
/// slots rejection-sample antipodal candidates until one verifies, infeasible
/// slots perturb candidates until verification fails. Errors if the feasible
/// rejection budget (10 * n_max) is exhausted.
pub fn sample_grasp_annotations<R: Rng>(
    object_id: u64,
    polygon: &Polygon,
    n_max: usize,
    feasible_ratio: f64,
    arm: &ArmModel,
    cone_half_angle: f64,
    rng: &mut R,
) -> Result<Vec<GraspAnnotation>, DatagenError> {
    let isolated = Scene::empty(polygon.clone(), Pose2::identity());
    let budget = 10 * n_max;
    let mut feasible_attempts = 0usize;
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let want_feasible = rng.random_bool(feasible_ratio);
        if want_feasible {
            let mut found = None;
            while found.is_none() {
                feasible_attempts += 1;
                if feasible_attempts > budget {
                    return Err(DatagenError::NoFeasibleGrasp(object_id, budget));
                }
                if let Some(cand) = antipodal_candidate(polygon, arm.gripper.jaw_span, rng) {
                    if check_grasp_feasible(&isolated, &cand, arm, cone_half_angle) {
                        found = Some(cand);
                    }
                }
            }
            out.push(GraspAnnotation {
                pose_obj: found.unwrap(),
                feasible: true,
            });
        } else {
            // Failed antipodal candidates: big perturbations of a candidate
            // (or a random nearby pose) that no longer verify.
            let mut pose = None;
            while pose.is_none() {
                let base = antipodal_candidate(polygon, arm.gripper.jaw_span, rng)
                    .unwrap_or_else(|| {
                        let r = polygon.circumradius();
                        Pose2::new(
                            rng.random_range(-r..r),
                            rng.random_range(-r..r),
                            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                        )
                    });
                let shift = rng.random_range(0.03..0.10);
                let dir = rng.random_range(0.0..std::f64::consts::TAU);
                let rot = rng.random_range(-1.2..1.2);
                let cand = Pose2::new(
                    base.x + shift * dir.cos(),
                    base.y + shift * dir.sin(),
                    base.theta + rot,
                );
                if !check_grasp_feasible(&isolated, &cand, arm, cone_half_angle) {
                    pose = Some(cand);
                }
            }
            out.push(GraspAnnotation {
                pose_obj: pose.unwrap(),
                feasible: false,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimCfg;
    use crate::rng::RngStream;

    const CONE: f64 = 0.2617993877991494;

    fn arm() -> ArmModel {
        ArmModel::from_config(&SimCfg::default())
    }

    #[test]
    fn feasible_count_tracks_ratio() {
        let poly = Polygon::regular(0.0, 0.0, 0.04, 24);
        let mut rng = RngStream::new(17, 0).rng();
        let anns =
            sample_grasp_annotations(0, &poly, 100, 0.7, &arm(), CONE, &mut rng).unwrap();
        assert_eq!(anns.len(), 100);
        let feasible = anns.iter().filter(|a| a.feasible).count();
        assert!(
            (feasible as i64 - 70).abs() <= 5,
            "got {feasible} feasible annotations"
        );
    }

    #[test]
    fn ratio_one_all_verify() {
        let poly = Polygon::regular(0.0, 0.0, 0.035, 16);
        let isolated = Scene::empty(poly.clone(), Pose2::identity());
        let mut rng = RngStream::new(5, 1).rng();
        let anns = sample_grasp_annotations(3, &poly, 32, 1.0, &arm(), CONE, &mut rng).unwrap();
        for a in &anns {
            assert!(a.feasible);
            assert!(check_grasp_feasible(&isolated, &a.pose_obj, &arm(), CONE));
        }
    }

    #[test]
    fn infeasible_slots_fail_verification() {
        let poly = Polygon::regular(0.0, 0.0, 0.04, 16);
        let isolated = Scene::empty(poly.clone(), Pose2::identity());
        let mut rng = RngStream::new(6, 2).rng();
        let anns = sample_grasp_annotations(4, &poly, 32, 0.0, &arm(), CONE, &mut rng).unwrap();
        for a in &anns {
            assert!(!a.feasible);
            assert!(!check_grasp_feasible(&isolated, &a.pose_obj, &arm(), CONE));
        }
    }

    #[test]
    fn square_grasps_cluster_on_opposing_edges() {
        // Independent contact oracle: recompute both jaw contact chords and
        // check the contact edges are axis-opposed pairs of the rectangle.
        let poly = Polygon::rectangle(0.0, 0.0, 0.035, 0.02);
        let isolated = Scene::empty(poly.clone(), Pose2::identity());
        let mut rng = RngStream::new(8, 3).rng();
        let anns = sample_grasp_annotations(5, &poly, 64, 1.0, &arm(), CONE, &mut rng).unwrap();
        for a in &anns {
            assert!(check_grasp_feasible(&isolated, &a.pose_obj, &arm(), CONE));
            // The jaw line through the grasp center must cross the boundary
            // on two opposite edges: verify the chord endpoints' outward
            // normals are anti-parallel within the doubled cone.
            let y = a.pose_obj.y_axis();
            let o = [a.pose_obj.x, a.pose_obj.y];
            let up = poly.raycast(o, y);
            let dn = poly.raycast(o, [-y[0], -y[1]]);
            let (u, d) = (up.unwrap(), dn.unwrap());
            let nu = poly.edge_normal(u.1);
            let nd = poly.edge_normal(d.1);
            let anti = -(nu[0] * nd[0] + nu[1] * nd[1]);
            assert!(anti >= (2.0 * CONE).cos(), "normals not opposing: {anti}");
        }
    }

    #[test]
    fn impossible_object_errors_with_id() {
        // A huge disk: every chord is wider than the jaws, so no feasible
        // grasp exists anywhere.
        let poly = Polygon::regular(0.0, 0.0, 0.5, 24);
        let mut rng = RngStream::new(9, 4).rng();
        let err = sample_grasp_annotations(42, &poly, 4, 1.0, &arm(), CONE, &mut rng)
            .unwrap_err();
        assert!(err.to_string().contains("42"));
    }
}
