//! Procedurally generated graspable polygons: convex hulls, L-shapes, and
//! stars, all from a seeded recipe keyed by object id.

use rand::Rng;

use crate::rng::RngStream;
use crate::sim::Polygon;

/// Deterministic polygon for an object id. Shape family cycles with the id;
/// sizes are drawn within [min_radius, max_radius].
pub fn generate_object(id: u64, stream: &RngStream, min_radius: f64, max_radius: f64) -> Polygon {
    let mut rng = stream.substream(id).rng();
    let r = rng.random_range(min_radius..max_radius);
    match id % 3 {
        0 => convex_hull_blob(&mut rng, r),
        1 => l_shape(&mut rng, r),
        _ => star(&mut rng, r),
    }
}

fn convex_hull_blob<R: Rng>(rng: &mut R, r: f64) -> Polygon {
    // Dense draws keep the hull rounded enough that opposing edge pairs
    // stay inside typical friction cones.
    let k = rng.random_range(16..24usize);
    let mut pts: Vec<[f64; 2]> = (0..k)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let rad = r * rng.random_range(0.7..1.0);
            [rad * a.cos(), rad * a.sin()]
        })
        .collect();
    let hull = convex_hull(&mut pts);
    Polygon::new_any_winding(hull).expect("hull of >=3 spread points is simple")
}

fn l_shape<R: Rng>(rng: &mut R, r: f64) -> Polygon {
    // Two overlapping bars forming an L, emitted as one 6-vertex loop.
    let w = r * rng.random_range(0.8..1.2);
    let h = r * rng.random_range(0.8..1.2);
    let tx = w * rng.random_range(0.35..0.55);
    let ty = h * rng.random_range(0.35..0.55);
    let verts = vec![
        [0.0, 0.0],
        [w, 0.0],
        [w, ty],
        [tx, ty],
        [tx, h],
        [0.0, h],
    ];
    // Center on the vertex mean and apply a random rotation.
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / 6.0;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / 6.0;
    let rot = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = rot.sin_cos();
    let verts = verts
        .iter()
        .map(|v| {
            let x = v[0] - cx;
            let y = v[1] - cy;
            [c * x - s * y, s * x + c * y]
        })
        .collect();
    Polygon::new_any_winding(verts).expect("L-shape is simple")
}

fn star<R: Rng>(rng: &mut R, r: f64) -> Polygon {
    let spikes = rng.random_range(5..8usize);
    let inner = r * rng.random_range(0.55..0.75);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let verts = (0..2 * spikes)
        .map(|i| {
            let a = phase + std::f64::consts::PI * i as f64 / spikes as f64;
            let rad = if i % 2 == 0 { r } else { inner };
            [rad * a.cos(), rad * a.sin()]
        })
        .collect();
    Polygon::new_any_winding(verts).expect("star is simple")
}

/// Andrew's monotone chain; returns the hull counter-clockwise.
fn convex_hull(pts: &mut Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    let n = pts.len();
    if n < 3 {
        // Degenerate draw; make a tiny triangle around the points.
        let p = pts.first().copied().unwrap_or([0.0, 0.0]);
        return vec![p, [p[0] + 0.02, p[1]], [p[0], p[1] + 0.02]];
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], *p) <= 1e-14 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev() {
        while hull.len() >= lower_len
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], *p) <= 1e-14
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objects_are_valid_and_deterministic() {
        let stream = RngStream::new(1, 0);
        for id in 0..48 {
            let a = generate_object(id, &stream, 0.025, 0.055);
            let b = generate_object(id, &stream, 0.025, 0.055);
            assert_eq!(a.vertices(), b.vertices(), "object {id} not deterministic");
            assert!(a.signed_area() > 0.0);
            // Desk scale: everything fits comfortably inside the jaw stroke.
            assert!(a.circumradius() <= 1.5 * 0.055, "object {id} too large");
        }
    }

    #[test]
    fn shape_families_cycle() {
        let stream = RngStream::new(1, 0);
        // L-shapes have exactly 6 vertices.
        let l = generate_object(1, &stream, 0.03, 0.05);
        assert_eq!(l.len(), 6);
        // Stars have an even vertex count >= 10.
        let s = generate_object(2, &stream, 0.03, 0.05);
        assert!(s.len() >= 10 && s.len() % 2 == 0);
    }
}
