//! Offline grasp-trajectory dataset generation: antipodal annotations,
//! noisy pre-grasps, IK-servo reach motions, sparse cost labels, and
//! serialization.

pub mod annotate;
pub mod dataset;
pub mod objects;
pub mod plan;

use rand::Rng;
use thiserror::Error;

use crate::geom::Pose2;

pub use annotate::sample_grasp_annotations;
pub use dataset::{
    generate_dataset, label_costs, load_dataset, Dataset, DatasetManifest, LoadedObject,
    TrajStep, Trajectory,
};
pub use objects::generate_object;
pub use plan::{ik_solve, plan_reach, PlanFailure};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("object {0}: no feasible grasp found after {1} rejection samples")]
    NoFeasibleGrasp(u64, usize),
    #[error("dataset generation produced no trajectories (all objects failed)")]
    EmptyDataset,
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("corrupt dataset: {0}")]
    Corrupt(String),
}

/// Pre-grasp pose: the grasp translated backward along its approach axis
/// (gripper +x) by `offset`.
pub fn pregrasp_from_grasp(grasp: &Pose2, offset: f64) -> Pose2 {
    debug_assert!(offset >= 0.0);
    grasp.compose(&Pose2::new(-offset, 0.0, 0.0))
}

/// Uniform pose noise: each translation axis gets U(-trans, trans), the
/// heading gets U(-rot, rot).
pub fn perturb_pose<R: Rng>(p: &Pose2, trans_range: f64, rot_range: f64, rng: &mut R) -> Pose2 {
    debug_assert!(trans_range >= 0.0 && rot_range >= 0.0);
    let dx = if trans_range > 0.0 {
        rng.random_range(-trans_range..=trans_range)
    } else {
        0.0
    };
    let dy = if trans_range > 0.0 {
        rng.random_range(-trans_range..=trans_range)
    } else {
        0.0
    };
    let dt = if rot_range > 0.0 {
        rng.random_range(-rot_range..=rot_range)
    } else {
        0.0
    };
    Pose2::new(p.x + dx, p.y + dy, p.theta + dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn pregrasp_offsets() {
        let g = Pose2::new(0.0, 0.0, 0.0);
        assert_eq!(pregrasp_from_grasp(&g, 0.0), g);
        let p = pregrasp_from_grasp(&g, 0.15);
        assert!((p.x - (-0.15)).abs() < 1e-12 && p.y.abs() < 1e-12);

        let g = Pose2::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let p = pregrasp_from_grasp(&g, 0.10);
        assert!(p.x.abs() < 1e-12);
        assert!((p.y - (-0.10)).abs() < 1e-12);
        assert!((p.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn perturb_zero_ranges_is_identity() {
        let p = Pose2::new(0.2, -0.3, 1.0);
        let mut rng = RngStream::new(1, 0).rng();
        assert_eq!(perturb_pose(&p, 0.0, 0.0, &mut rng), p);
    }

    #[test]
    fn perturb_mean_absolute_deviation() {
        // |dx| of U(-r, r) has mean r/2.
        let r = 0.04;
        let mut rng = RngStream::new(2, 0).rng();
        let p = Pose2::identity();
        let n = 10_000;
        let mean_abs: f64 = (0..n)
            .map(|_| perturb_pose(&p, r, 0.0, &mut rng).x.abs())
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean_abs - 0.02).abs() <= 0.002,
            "mean |dx| = {mean_abs}, expected about 0.02"
        );
    }

    #[test]
    fn eval_noise_ranges_cover_box() {
        let trans = 0.02;
        let rot = 18.0_f64.to_radians();
        let mut rng = RngStream::new(3, 0).rng();
        let p = Pose2::identity();
        let mut max_dx = 0.0_f64;
        let mut max_dt = 0.0_f64;
        for _ in 0..20_000 {
            let q = perturb_pose(&p, trans, rot, &mut rng);
            assert!(q.x.abs() <= trans && q.y.abs() <= trans);
            assert!(q.theta.abs() <= rot + 1e-12);
            max_dx = max_dx.max(q.x.abs());
            max_dt = max_dt.max(q.theta.abs());
        }
        // Corners are reachable.
        assert!(max_dx > 0.95 * trans);
        assert!(max_dt > 0.95 * rot);
    }
}
