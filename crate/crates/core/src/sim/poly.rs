//! Simple-polygon geometry: containment, distances, ray casts,
//! intersection tests, and boundary sampling.

use serde::{Deserialize, Serialize};

use crate::geom::Pose2;

use super::SimError;

const EPS: f64 = 1e-12;

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn norm(a: [f64; 2]) -> f64 {
    dot(a, a).sqrt()
}

/// Distance from point `p` to segment `ab`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 < EPS {
        return norm(sub(p, a));
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

/// Closed-segment intersection test, counting touching endpoints.
pub fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| -> bool {
        d.abs() <= EPS
            && c[0] >= a[0].min(b[0]) - EPS
            && c[0] <= a[0].max(b[0]) + EPS
            && c[1] >= a[1].min(b[1]) - EPS
            && c[1] <= a[1].max(b[1]) + EPS
    };
    on(p1, p2, q1, d1) || on(p1, p2, q2, d2) || on(q1, q2, p1, d3) || on(q1, q2, p2, d4)
}

/// Minimum distance between two segments (0 when they intersect).
pub fn segment_segment_distance(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

/// A simple polygon stored as a counter-clockwise vertex loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

impl Polygon {
    /// Validates: at least 3 vertices, non-degenerate area, simple
    /// (no self-intersection), counter-clockwise orientation.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self, SimError> {
        if vertices.len() < 3 {
            return Err(SimError::DegeneratePolygon(format!(
                "{} vertices",
                vertices.len()
            )));
        }
        let p = Polygon { vertices };
        if p.signed_area().abs() < 1e-10 {
            return Err(SimError::DegeneratePolygon("zero area".into()));
        }
        if !p.is_simple() {
            return Err(SimError::DegeneratePolygon("self-intersecting".into()));
        }
        if p.signed_area() < 0.0 {
            return Err(SimError::DegeneratePolygon(
                "clockwise winding (expect counter-clockwise)".into(),
            ));
        }
        Ok(p)
    }

    /// Like [`Polygon::new`] but fixes clockwise input by reversing it.
    pub fn new_any_winding(mut vertices: Vec<[f64; 2]>) -> Result<Self, SimError> {
        let area: f64 = {
            let n = vertices.len();
            if n < 3 {
                0.0
            } else {
                (0..n)
                    .map(|i| cross(vertices[i], vertices[(i + 1) % n]))
                    .sum::<f64>()
                    / 2.0
            }
        };
        if area < 0.0 {
            vertices.reverse();
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        (0..self.vertices.len()).map(move |i| self.edge(i))
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a1, a2) = self.edge(i);
            for j in (i + 1)..n {
                // Adjacent edges share one endpoint by construction.
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (b1, b2) = self.edge(j);
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    /// Vertex average (not the area centroid; used only for sizing).
    pub fn vertex_mean(&self) -> [f64; 2] {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(ax, ay), v| (ax + v[0], ay + v[1]));
        [sx / n, sy / n]
    }

    /// Max vertex distance from the vertex mean.
    pub fn circumradius(&self) -> f64 {
        let c = self.vertex_mean();
        self.vertices
            .iter()
            .map(|v| norm(sub(*v, c)))
            .fold(0.0, f64::max)
    }

    /// Even-odd containment test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if ((vi[1] > p[1]) != (vj[1] > p[1]))
                && p[0] < (vj[0] - vi[0]) * (p[1] - vi[1]) / (vj[1] - vi[1]) + vi[0]
            {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    /// Distance from `p` to the polygon boundary (always >= 0).
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed distance: negative inside, positive outside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        let d = self.boundary_distance(p);
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// First hit of the ray `origin + t * dir` (t > EPS) against the
    /// boundary: returns (t, edge index).
    pub fn raycast(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, (a, b)) in self.edges().enumerate() {
            let e = sub(b, a);
            let denom = cross(dir, e);
            if denom.abs() < EPS {
                continue;
            }
            let ao = sub(a, origin);
            let t = cross(ao, e) / denom;
            let u = cross(ao, dir) / denom;
            if t > 1e-9 && (-EPS..=1.0 + EPS).contains(&u)
                && best.map_or(true, |(bt, _)| t < bt)
            {
                best = Some((t, i));
            }
        }
        best
    }

    /// Outward unit normal of edge `i` (interior lies left of CCW edges).
    pub fn edge_normal(&self, i: usize) -> [f64; 2] {
        let (a, b) = self.edge(i);
        let e = sub(b, a);
        let len = norm(e);
        [e[1] / len, -e[0] / len]
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| norm(sub(b, a))).sum()
    }

    /// Point on the boundary at arclength `s` from vertex 0, with the index
    /// of the edge it lies on. `s` is taken modulo the perimeter.
    pub fn boundary_point(&self, s: f64) -> ([f64; 2], usize) {
        let per = self.perimeter();
        let mut s = s.rem_euclid(per);
        for (i, (a, b)) in self.edges().enumerate() {
            let len = norm(sub(b, a));
            if s <= len {
                let t = if len > 0.0 { s / len } else { 0.0 };
                return ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], i);
            }
            s -= len;
        }
        (self.vertices[0], 0)
    }

    /// Rigid transform of every vertex into the parent frame of `pose`.
    pub fn transformed(&self, pose: &Pose2) -> Polygon {
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| pose.transform_point(*v))
                .collect(),
        }
    }

    /// True when any edges cross or one polygon contains the other.
    pub fn intersects(&self, other: &Polygon) -> bool {
        for (a1, a2) in self.edges() {
            for (b1, b2) in other.edges() {
                if segments_intersect(a1, a2, b1, b2) {
                    return true;
                }
            }
        }
        self.contains(other.vertices[0]) || other.contains(self.vertices[0])
    }

    /// Minimum distance from a segment to this polygon (0 when the segment
    /// touches or enters it).
    pub fn segment_distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        if self.contains(a) || self.contains(b) {
            return 0.0;
        }
        let mut d = f64::INFINITY;
        for (e1, e2) in self.edges() {
            if segments_intersect(a, b, e1, e2) {
                return 0.0;
            }
            d = d.min(segment_segment_distance(a, b, e1, e2));
        }
        d
    }

    /// Axis-aligned bounding box [x_min, y_min, x_max, y_max].
    pub fn aabb(&self) -> [f64; 4] {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for v in &self.vertices {
            bb[0] = bb[0].min(v[0]);
            bb[1] = bb[1].min(v[1]);
            bb[2] = bb[2].max(v[0]);
            bb[3] = bb[3].max(v[1]);
        }
        bb
    }

    pub fn rectangle(cx: f64, cy: f64, half_w: f64, half_h: f64) -> Polygon {
        Polygon {
            vertices: vec![
                [cx - half_w, cy - half_h],
                [cx + half_w, cy - half_h],
                [cx + half_w, cy + half_h],
                [cx - half_w, cy + half_h],
            ],
        }
    }

    /// Regular n-gon approximation of a disk.
    pub fn regular(cx: f64, cy: f64, radius: f64, n: usize) -> Polygon {
        let vertices = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [cx + radius * a.cos(), cy + radius * a.sin()]
            })
            .collect();
        Polygon { vertices }
    }
}
