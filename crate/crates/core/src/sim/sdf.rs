//! Signed distance grid over the workspace: obstacles plus the workspace
//! boundary, excluding the grasp target (the gripper must approach it).

use std::io::{Read, Write};
use std::path::Path;

use crate::geom::Pose2;

use super::{Scene, SimError};

const MAGIC: &[u8; 4] = b"SDF2";

/// Regular grid of signed distances (meters, negative inside obstacles),
/// bilinearly interpolated on query. Row-major, `values[row * w + col]`,
/// row = y index.
#[derive(Clone, Debug)]
pub struct SdfGrid {
    pub origin: Pose2,
    pub resolution: f64,
    pub h: usize,
    pub w: usize,
    values: Vec<f64>,
}

/// Signed distance to the complement of the bounds box: positive inside the
/// box (distance to its edge), negative outside.
fn bounds_distance(p: [f64; 2], bounds: &[f64; 4]) -> f64 {
    let [x0, y0, x1, y1] = *bounds;
    let inside = p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
    if inside {
        (p[0] - x0).min(x1 - p[0]).min(p[1] - y0).min(y1 - p[1])
    } else {
        let dx = (x0 - p[0]).max(0.0).max(p[0] - x1);
        let dy = (y0 - p[1]).max(0.0).max(p[1] - y1);
        -(dx * dx + dy * dy).sqrt()
    }
}

/// Exact signed distance used to fill grid nodes (and as the test oracle):
/// min over obstacle SDFs and the bounds-complement SDF.
pub fn brute_force_distance(scene: &Scene, bounds: &[f64; 4], p: [f64; 2]) -> f64 {
    let mut d = bounds_distance(p, bounds);
    for obs in &scene.obstacles {
        d = d.min(obs.signed_distance(p));
    }
    d
}

/// Build the grid from obstacle polygons (the target is excluded by
/// construction). `bounds` is [x_min, y_min, x_max, y_max] and must contain
/// every obstacle vertex.
pub fn build_sdf(scene: &Scene, bounds: [f64; 4], resolution: f64) -> Result<SdfGrid, SimError> {
    assert!(resolution > 0.0, "resolution must be positive");
    for obs in &scene.obstacles {
        for v in obs.vertices() {
            if v[0] < bounds[0] || v[0] > bounds[2] || v[1] < bounds[1] || v[1] > bounds[3] {
                return Err(SimError::BoundsTooSmall { x: v[0], y: v[1] });
            }
        }
    }
    let w = ((bounds[2] - bounds[0]) / resolution).round() as usize + 1;
    let h = ((bounds[3] - bounds[1]) / resolution).round() as usize + 1;
    let mut values = vec![0.0; h * w];
    for row in 0..h {
        let y = bounds[1] + row as f64 * resolution;
        for col in 0..w {
            let x = bounds[0] + col as f64 * resolution;
            values[row * w + col] = brute_force_distance(scene, &bounds, [x, y]);
        }
    }
    Ok(SdfGrid {
        origin: Pose2::new(bounds[0], bounds[1], 0.0),
        resolution,
        h,
        w,
        values,
    })
}

impl SdfGrid {
    /// Bilinear-interpolated signed distance at a world point. Queries
    /// outside the grid extrapolate from the clamped edge value minus the
    /// overshoot, so leaving the grid always looks like deepening collision.
    pub fn query(&self, p: [f64; 2]) -> f64 {
        let local = self.origin.inverse().compose(&Pose2::new(p[0], p[1], 0.0));
        let gx = local.x / self.resolution;
        let gy = local.y / self.resolution;
        let cgx = gx.clamp(0.0, (self.w - 1) as f64);
        let cgy = gy.clamp(0.0, (self.h - 1) as f64);
        let overshoot =
            ((gx - cgx).powi(2) + (gy - cgy).powi(2)).sqrt() * self.resolution;
        let x0 = (cgx.floor() as usize).min(self.w - 2);
        let y0 = (cgy.floor() as usize).min(self.h - 2);
        let fx = cgx - x0 as f64;
        let fy = cgy - y0 as f64;
        let v00 = self.values[y0 * self.w + x0];
        let v10 = self.values[y0 * self.w + x0 + 1];
        let v01 = self.values[(y0 + 1) * self.w + x0];
        let v11 = self.values[(y0 + 1) * self.w + x0 + 1];
        let v0 = v00 + fx * (v10 - v00);
        let v1 = v01 + fx * (v11 - v01);
        v0 + fy * (v1 - v0) - overshoot
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flat binary export: 32-byte header (magic, version, H, W, resolution,
    /// origin x/y/theta) then H*W little-endian f32 values, row-major.
    pub fn export(&self, path: &Path) -> Result<(), SimError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(MAGIC)?;
        f.write_all(&1u32.to_le_bytes())?;
        f.write_all(&(self.h as u32).to_le_bytes())?;
        f.write_all(&(self.w as u32).to_le_bytes())?;
        f.write_all(&(self.resolution as f32).to_le_bytes())?;
        f.write_all(&(self.origin.x as f32).to_le_bytes())?;
        f.write_all(&(self.origin.y as f32).to_le_bytes())?;
        f.write_all(&(self.origin.theta as f32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<SdfGrid, SimError> {
        let mut f = std::fs::File::open(path)?;
        let mut header = [0u8; 32];
        f.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(SimError::DegeneratePolygon(
                "not an SDF file (bad magic)".into(),
            ));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let h = u32_at(8) as usize;
        let w = u32_at(12) as usize;
        let resolution = f32_at(16) as f64;
        let origin = Pose2::new(f32_at(20) as f64, f32_at(24) as f64, f32_at(28) as f64);
        let mut raw = vec![0u8; h * w * 4];
        f.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(SdfGrid {
            origin,
            resolution,
            h,
            w,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Polygon, Target};
    use rand::Rng;

    fn scene_with(obstacles: Vec<Polygon>) -> Scene {
        Scene {
            obstacles,
            target: Target {
                polygon: Polygon::regular(0.0, 0.0, 0.03, 8),
                pose: Pose2::identity(),
            },
            support_kind: crate::sim::SupportKind::Table,
        }
    }

    #[test]
    fn empty_scene_positive_inside_bounds() {
        let scene = scene_with(vec![]);
        let bounds = [0.0, 0.0, 1.0, 1.0];
        let grid = build_sdf(&scene, bounds, 0.01).unwrap();
        assert!((grid.query([0.5, 0.5]) - 0.5).abs() <= 0.01);
        assert!(grid.query([0.1, 0.5]) >= 0.0);
        assert!(grid.query([0.98, 0.98]) >= 0.0);
    }

    #[test]
    fn unit_square_center_depth() {
        let scene = scene_with(vec![Polygon::rectangle(0.5, 0.5, 0.5, 0.5)]);
        let bounds = [-1.0, -1.0, 2.0, 2.0];
        let grid = build_sdf(&scene, bounds, 0.01).unwrap();
        assert!((grid.query([0.5, 0.5]) - (-0.5)).abs() <= 0.01);
        // Surface zero-crossing.
        assert!(grid.query([1.0, 0.5]).abs() <= 0.01);
    }

    #[test]
    fn excludes_target() {
        let scene = scene_with(vec![]);
        let bounds = [-1.0, -1.0, 1.0, 1.0];
        let grid = build_sdf(&scene, bounds, 0.02).unwrap();
        // The target sits at the origin; the SDF must not see it.
        assert!(grid.query([0.0, 0.0]) > 0.5);
    }

    #[test]
    fn bounds_must_contain_obstacles() {
        let scene = scene_with(vec![Polygon::rectangle(2.0, 0.0, 0.2, 0.2)]);
        assert!(build_sdf(&scene, [0.0, -1.0, 1.0, 1.0], 0.05).is_err());
    }

    #[test]
    fn grid_tracks_brute_force_within_resolution() {
        let scene = scene_with(vec![
            Polygon::rectangle(0.3, 0.2, 0.15, 0.1),
            Polygon::regular(-0.25, -0.3, 0.12, 7),
        ]);
        let bounds = [-0.8, -0.8, 0.8, 0.8];
        let res = 0.01;
        let grid = build_sdf(&scene, bounds, res).unwrap();
        let mut rng = crate::rng::RngStream::new(11, 0).rng();
        let mut checked = 0;
        while checked < 1000 {
            let p = [
                rng.random_range(bounds[0]..bounds[2]),
                rng.random_range(bounds[1]..bounds[3]),
            ];
            let exact = brute_force_distance(&scene, &bounds, p);
            // The bound is stated for points at least one cell off a surface.
            if exact.abs() < res {
                continue;
            }
            let approx = grid.query(p);
            assert!(
                (approx - exact).abs() <= res,
                "at {p:?}: grid {approx} vs exact {exact}"
            );
            checked += 1;
        }
    }

    #[test]
    fn export_import_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.sdf");
        let scene = scene_with(vec![Polygon::rectangle(0.2, 0.0, 0.1, 0.1)]);
        let grid = build_sdf(&scene, [-0.5, -0.5, 0.5, 0.5], 0.05).unwrap();
        grid.export(&path).unwrap();
        let back = SdfGrid::import(&path).unwrap();
        assert_eq!(back.h, grid.h);
        assert_eq!(back.w, grid.w);
        for (a, b) in grid.values().iter().zip(back.values()) {
            assert!((*a as f32 - *b as f32).abs() == 0.0);
        }
    }
}
