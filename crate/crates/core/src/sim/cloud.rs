//! Observation clouds sampled from the target boundary, with optional
//! partial views (single random viewpoint, 2-D ray visibility) and
//! Gaussian sensor noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{Frame, PointCloud2};

use super::poly::{norm, sub, Polygon};
use super::Scene;

/// True when `p` (a boundary point of `poly`) is visible from `viewpoint`:
/// the sight segment hits no part of the boundary strictly before `p`.
pub fn point_visible(poly: &Polygon, viewpoint: [f64; 2], p: [f64; 2]) -> bool {
    let d = sub(p, viewpoint);
    let dist = norm(d);
    if dist < 1e-12 {
        return true;
    }
    let dir = [d[0] / dist, d[1] / dist];
    match poly.raycast(viewpoint, dir) {
        Some((t, _)) => t >= dist - 1e-9,
        None => true,
    }
}

/// Sample `n` points on the target boundary in the world frame.
///
/// `partial < 1` renders a partial view: a viewpoint is drawn at a random
/// bearing around the object and only boundary points visible from it are
/// kept. Gaussian noise with `noise_sigma` is then added per coordinate.
pub fn sample_cloud<R: Rng>(
    scene: &Scene,
    n: usize,
    partial: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> PointCloud2 {
    assert!(n >= 8, "need at least 8 cloud points");
    let poly = scene.target.world_polygon();
    let per = poly.perimeter();
    let mut pts = Vec::with_capacity(n);
    if partial >= 1.0 {
        for _ in 0..n {
            let s = rng.random_range(0.0..per);
            pts.push(poly.boundary_point(s).0);
        }
    } else {
        let c = poly.vertex_mean();
        let r = poly.circumradius();
        let bearing = rng.random_range(0.0..std::f64::consts::TAU);
        let dist = r * rng.random_range(2.0..4.0) + 0.05;
        let viewpoint = [c[0] + dist * bearing.cos(), c[1] + dist * bearing.sin()];
        let mut attempts = 0usize;
        while pts.len() < n {
            let s = rng.random_range(0.0..per);
            let (p, _) = poly.boundary_point(s);
            if point_visible(&poly, viewpoint, p) {
                pts.push(p);
            }
            attempts += 1;
            // The nearest boundary point is always visible, so this only
            // guards against pathological numeric cases.
            if attempts > 1000 * n {
                pts.push(p);
            }
        }
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");
        for p in &mut pts {
            p[0] += normal.sample(rng);
            p[1] += normal.sample(rng);
        }
    }
    PointCloud2::new(pts, Frame::World).expect("n >= 8")
}
