//! Planar kinematic world: N-link arm, polygonal scenes, SDF collision
//! queries, observation clouds, and grasp-feasibility geometry.

pub mod arm;
pub mod cloud;
pub mod grasp;
pub mod poly;
pub mod sdf;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Pose2;
pub use arm::{ArmModel, JointLimits, JointState};
pub use grasp::{check_grasp_feasible, lift_test, GraspAnnotation};
pub use poly::Polygon;
pub use sdf::SdfGrid;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("joint dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("SDF bounds do not contain the scene (vertex at {x}, {y})")]
    BoundsTooSmall { x: f64, y: f64 },
    #[error("scene io: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene parse: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Scene category; drives pre-grasp offsets and suite generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    Table,
    Clutter,
    ShelfSlot,
}

impl SupportKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SupportKind::Table => "table",
            SupportKind::Clutter => "clutter",
            SupportKind::ShelfSlot => "shelf_slot",
        }
    }
}

/// The grasp target: a polygon in its own object frame plus a world pose.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Target {
    pub polygon: Polygon,
    pub pose: Pose2,
}

impl Target {
    /// Target polygon expressed in the world frame.
    pub fn world_polygon(&self) -> Polygon {
        self.polygon.transformed(&self.pose)
    }
}

/// World model: obstacles in the world frame plus one grasp target.
///
/// Obstacles may overlap each other; vertex lists are in meters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scene {
    pub obstacles: Vec<Polygon>,
    pub target: Target,
    pub support_kind: SupportKind,
}

impl Scene {
    pub fn empty(polygon: Polygon, pose: Pose2) -> Scene {
        Scene {
            obstacles: Vec::new(),
            target: Target { polygon, pose },
            support_kind: SupportKind::Table,
        }
    }

    pub fn load(path: &Path) -> Result<Scene, SimError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Distance from a point to the nearest obstacle boundary (infinite in
    /// obstacle-free scenes); negative inside an obstacle.
    pub fn obstacle_signed_distance(&self, p: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Re-pose the target, keeping everything else.
    pub fn with_target_pose(&self, pose: Pose2) -> Scene {
        let mut s = self.clone();
        s.target.pose = pose;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        let scene = Scene {
            obstacles: vec![Polygon::rectangle(0.5, 0.5, 0.1, 0.2)],
            target: Target {
                polygon: Polygon::regular(0.0, 0.0, 0.04, 12),
                pose: Pose2::new(0.6, 0.1, 0.3),
            },
            support_kind: SupportKind::Clutter,
        };
        scene.save(&path).unwrap();
        let loaded = Scene::load(&path).unwrap();
        assert_eq!(loaded.obstacles.len(), 1);
        assert_eq!(loaded.support_kind, SupportKind::Clutter);
        assert!((loaded.target.pose.x - 0.6).abs() < 1e-12);
    }

    #[test]
    fn obstacle_distance_empty_scene() {
        let scene = Scene::empty(Polygon::regular(0.0, 0.0, 0.04, 8), Pose2::identity());
        assert_eq!(scene.obstacle_signed_distance([0.0, 0.0]), f64::INFINITY);
    }
}
