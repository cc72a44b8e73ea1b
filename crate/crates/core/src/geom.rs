//! Planar rigid poses and point clouds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("point cloud must be non-empty")]
    EmptyCloud,
    #[error("cloud expected in {expected:?} frame, got {got:?}")]
    WrongFrame { expected: Frame, got: Frame },
}

/// Normalize an angle to the half-open interval (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = theta % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a <= -std::f64::consts::PI {
        a += two_pi;
    }
    a
}

/// Shortest signed angular difference `a - b`, normalized to (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// SE(2) rigid pose: translation in meters, heading in radians.
///
/// `theta` is kept normalized to (-pi, pi] by every constructor and
/// composition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    /// Rigid-body composition `self * other` (apply `other` in `self`'s frame).
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2 {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            theta: normalize_angle(self.theta + other.theta),
        }
    }

    /// Group inverse: `p.compose(&p.inverse()) == identity`.
    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2 {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            theta: normalize_angle(-self.theta),
        }
    }

    /// Transform a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Unit vector along the local +x axis (the gripper approach axis).
    pub fn x_axis(&self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c, s]
    }

    /// Unit vector along the local +y axis (the jaw closing line).
    pub fn y_axis(&self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [-s, c]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Pose2 {
        Pose2 {
            x: self.x + dx,
            y: self.y + dy,
            theta: self.theta,
        }
    }

    /// Euclidean translation distance to another pose.
    pub fn trans_dist(&self, other: &Pose2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Frame tag for point clouds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Object,
    World,
}

/// Non-empty planar point cloud with a frame tag.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointCloud2 {
    points: Vec<[f64; 2]>,
    frame: Frame,
}

impl PointCloud2 {
    /// Rejects empty point sets (every downstream consumer relies on a
    /// well-defined centroid).
    pub fn new(points: Vec<[f64; 2]>, frame: Frame) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::EmptyCloud);
        }
        Ok(Self { points, frame })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Arithmetic mean of the points.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(ax, ay), p| (ax + p[0], ay + p[1]));
        [sx / n, sy / n]
    }

    /// Subtract the centroid, returning the centered cloud (tagged Object)
    /// and the centroid that was removed.
    pub fn centered(&self) -> (PointCloud2, [f64; 2]) {
        let c = self.centroid();
        let pts = self
            .points
            .iter()
            .map(|p| [p[0] - c[0], p[1] - c[1]])
            .collect();
        (
            PointCloud2 {
                points: pts,
                frame: Frame::Object,
            },
            c,
        )
    }
}

/// End-effector pose expressed in a frame translated to the cloud centroid.
///
/// Only the position is re-expressed; the centroid carries no orientation.
pub fn relative_pose(ee_world: &Pose2, cloud: &PointCloud2) -> Result<Pose2, GeomError> {
    if cloud.frame() != Frame::World {
        return Err(GeomError::WrongFrame {
            expected: Frame::World,
            got: cloud.frame(),
        });
    }
    let c = cloud.centroid();
    Ok(Pose2 {
        x: ee_world.x - c[0],
        y: ee_world.y - c[1],
        theta: ee_world.theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn pose_close(a: &Pose2, b: &Pose2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol
            && (a.y - b.y).abs() <= tol
            && angle_diff(a.theta, b.theta).abs() <= tol
    }

    #[test]
    fn identity_compose_is_noop() {
        let p = Pose2::new(0.3, -1.2, 0.7);
        assert!(pose_close(&Pose2::identity().compose(&p), &p, TOL));
        assert!(pose_close(&p.compose(&Pose2::identity()), &p, TOL));
    }

    #[test]
    fn inverse_cancels() {
        let p = Pose2::new(1.5, -0.4, 2.1);
        let e = p.compose(&p.inverse());
        assert!(pose_close(&e, &Pose2::identity(), TOL));
        let e2 = p.inverse().compose(&p);
        assert!(pose_close(&e2, &Pose2::identity(), TOL));
    }

    #[test]
    fn compose_matches_hand_rotation() {
        // (1,0,pi/2) * (1,0,0) = (1,1,pi/2), by rotation-matrix multiply.
        let a = Pose2::new(1.0, 0.0, std::f64::consts::FRAC_PI_2);
        let b = Pose2::new(1.0, 0.0, 0.0);
        let c = a.compose(&b);
        assert!(pose_close(
            &c,
            &Pose2::new(1.0, 1.0, std::f64::consts::FRAC_PI_2),
            TOL
        ));
    }

    #[test]
    fn angle_normalization_half_open() {
        assert_eq!(normalize_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(
            normalize_angle(-std::f64::consts::PI),
            std::f64::consts::PI
        );
        assert!((normalize_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < TOL);
    }

    #[test]
    fn empty_cloud_rejected() {
        assert_eq!(
            PointCloud2::new(vec![], Frame::World).unwrap_err(),
            GeomError::EmptyCloud
        );
    }

    #[test]
    fn centroid_and_centering() {
        let c = PointCloud2::new(vec![[1.0, 2.0], [3.0, 4.0]], Frame::World).unwrap();
        assert_eq!(c.centroid(), [2.0, 3.0]);
        let (centered, mean) = c.centered();
        assert_eq!(mean, [2.0, 3.0]);
        let cc = centered.centroid();
        assert!(cc[0].abs() < 1e-9 && cc[1].abs() < 1e-9);
    }

    #[test]
    fn relative_pose_cases() {
        let cloud = PointCloud2::new(vec![[2.0, 3.0], [2.0, 3.0]], Frame::World).unwrap();
        let r = relative_pose(&Pose2::new(2.0, 3.0, 0.0), &cloud).unwrap();
        assert!(pose_close(&r, &Pose2::identity(), TOL));

        let origin = PointCloud2::new(vec![[1.0, 0.0], [-1.0, 0.0]], Frame::World).unwrap();
        let r = relative_pose(&Pose2::new(1.0, 0.0, 0.4), &origin).unwrap();
        assert!(pose_close(&r, &Pose2::new(1.0, 0.0, 0.4), TOL));

        // ee=(2,1,0.3), centroid=(0.5,1) -> (1.5,0,0.3)
        let c3 = PointCloud2::new(vec![[0.0, 1.0], [1.0, 1.0]], Frame::World).unwrap();
        let r = relative_pose(&Pose2::new(2.0, 1.0, 0.3), &c3).unwrap();
        assert!(pose_close(&r, &Pose2::new(1.5, 0.0, 0.3), TOL));
    }

    #[test]
    fn relative_pose_requires_world_frame() {
        let cloud = PointCloud2::new(vec![[0.0, 0.0]], Frame::Object).unwrap();
        assert!(relative_pose(&Pose2::identity(), &cloud).is_err());
    }

    proptest! {
        #[test]
        fn compose_associative(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64, at in -3.0..3.0f64,
            bx in -2.0..2.0f64, by in -2.0..2.0f64, bt in -3.0..3.0f64,
            cx in -2.0..2.0f64, cy in -2.0..2.0f64, ct in -3.0..3.0f64,
        ) {
            let a = Pose2::new(ax, ay, at);
            let b = Pose2::new(bx, by, bt);
            let c = Pose2::new(cx, cy, ct);
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(pose_close(&left, &right, 1e-9));
        }

        #[test]
        fn inverse_roundtrip(x in -2.0..2.0f64, y in -2.0..2.0f64, t in -6.0..6.0f64) {
            let p = Pose2::new(x, y, t);
            let e = p.compose(&p.inverse());
            prop_assert!(e.x.abs() < 1e-9 && e.y.abs() < 1e-9 && e.theta.abs() < 1e-9);
        }
    }
}
