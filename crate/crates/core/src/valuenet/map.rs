//! Value maps: V over an (x, y) grid at a fixed grasp orientation, for
//! inspection and the map-minimum quality metric.

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::geom::{PointCloud2, Pose2};

use super::net::ValueNet;
use super::NetError;

/// Scalar field of values over a world-frame (x, y) window.
#[derive(Clone, Debug)]
pub struct ValueMap {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major `values[yi * xs.len() + xi]`.
    pub values: Vec<f64>,
    pub theta: f64,
}

impl ValueMap {
    pub fn min_position(&self) -> ([f64; 2], f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, v) in self.values.iter().enumerate() {
            if *v < best.1 {
                best = (i, *v);
            }
        }
        let xi = best.0 % self.xs.len();
        let yi = best.0 / self.xs.len();
        ([self.xs[xi], self.ys[yi]], best.1)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("x,y,value\n");
        for (yi, y) in self.ys.iter().enumerate() {
            for (xi, x) in self.xs.iter().enumerate() {
                out.push_str(&format!("{x},{y},{}\n", self.values[yi * self.xs.len() + xi]));
            }
        }
        std::fs::write(path, out)
    }
}

/// Evaluate V on a grid around `grasp`, holding the grasp orientation fixed
/// and varying (x, y). The cloud is observed once in the world frame.
pub fn evaluate_value_map(
    net: &ValueNet,
    cloud: &PointCloud2,
    grasp: &Pose2,
    half_extent: f64,
    resolution: f64,
) -> Result<ValueMap, NetError> {
    let centroid = cloud.centroid();
    let (centered, _) = cloud.centered();
    let cc = net.encode_cloud::<ChaCha8Rng>(centered.points(), None)?;
    let n = (2.0 * half_extent / resolution).round() as usize + 1;
    let xs: Vec<f64> = (0..n).map(|i| grasp.x - half_extent + i as f64 * resolution).collect();
    let ys: Vec<f64> = (0..n).map(|i| grasp.y - half_extent + i as f64 * resolution).collect();
    let (ct, st) = (grasp.theta.cos(), grasp.theta.sin());
    let mut states = Vec::with_capacity(n * n);
    for y in &ys {
        for x in &xs {
            states.push([x - centroid[0], y - centroid[1], ct, st]);
        }
    }
    let values = net.values_batch(&cc, &states);
    Ok(ValueMap {
        xs,
        ys,
        values,
        theta: grasp.theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Frame;
    use crate::rng::RngStream;

    #[test]
    fn untrained_map_is_positive_and_deterministic() {
        let mut rng = RngStream::new(31, 0).rng();
        let net = ValueNet::init(false, 0.0, &mut rng);
        let pts: Vec<[f64; 2]> = (0..24)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / 24.0;
                [0.5 + 0.04 * a.cos(), 0.2 + 0.04 * a.sin()]
            })
            .collect();
        let cloud = PointCloud2::new(pts, Frame::World).unwrap();
        let grasp = Pose2::new(0.5, 0.2, 0.3);
        let m1 = evaluate_value_map(&net, &cloud, &grasp, 0.06, 0.01).unwrap();
        let m2 = evaluate_value_map(&net, &cloud, &grasp, 0.06, 0.01).unwrap();
        assert_eq!(m1.values.len(), 13 * 13);
        assert!(m1.values.iter().all(|v| *v > 0.0));
        for (a, b) in m1.values.iter().zip(&m2.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let map = ValueMap {
            xs: vec![0.0, 0.01],
            ys: vec![0.0, 0.01],
            values: vec![1.0, 2.0, 3.0, 4.0],
            theta: 0.0,
        };
        let path = dir.path().join("map.csv");
        map.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,value\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
