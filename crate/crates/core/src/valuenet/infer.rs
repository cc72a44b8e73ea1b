//! Batched value evaluation for the controller: an f64 path that is
//! bitwise-identical to per-state evaluation, and an f32 mirror for
//! throughput. Both reuse the cloud feature across all states of a control
//! step and fold the head's cloud contribution into a per-step precompute.

use super::net::{
    CloudCache, ValueNet, FEAT, HEAD_H1, HEAD_H2, POINT_FEAT, POINT_H, POINT_IN, STATE_EMB,
    STATE_H, STATE_IN,
};
use super::NetError;

impl ValueNet {
    /// Head-layer-1 contribution of the cloud feature:
    /// `t[o] = b[o] + sum_i w[o][i] * feature[i]` over the first 128 inputs,
    /// in exactly the order `value_with_cloud` uses.
    pub fn head_precompute(&self, cloud: &CloudCache) -> Vec<f64> {
        let lin = &self.layers[5];
        let mut t = vec![0.0; HEAD_H1];
        for o in 0..HEAD_H1 {
            let row = &lin.w[o * FEAT..o * FEAT + POINT_FEAT];
            let mut acc = lin.b[o];
            for (w, f) in row.iter().zip(&cloud.feature) {
                acc += w * f;
            }
            t[o] = acc;
        }
        t
    }

    /// Batched values over many states sharing one cloud. In 64-bit mode
    /// this equals per-state `value_with_cloud` bitwise.
    pub fn values_batch(&self, cloud: &CloudCache, states: &[[f64; 4]]) -> Vec<f64> {
        let pre = self.head_precompute(cloud);
        states
            .iter()
            .map(|ee| self.value_from_precomputed(&pre, *ee))
            .collect()
    }

    fn value_from_precomputed(&self, pre: &[f64], ee: [f64; 4]) -> f64 {
        fn elu(x: f64) -> f64 {
            if x > 0.0 {
                x
            } else {
                x.exp() - 1.0
            }
        }
        fn hidden_plain(lin: &super::net::Linear, x: &[f64], layer_norm: bool) -> Vec<f64> {
            let mut z = vec![0.0; lin.out_dim];
            for o in 0..lin.out_dim {
                let row = &lin.w[o * lin.in_dim..(o + 1) * lin.in_dim];
                let mut acc = lin.b[o];
                for (w, xi) in row.iter().zip(x) {
                    acc += w * xi;
                }
                z[o] = acc;
            }
            if layer_norm {
                let n = z.len() as f64;
                let mean = z.iter().sum::<f64>() / n;
                let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let inv = 1.0 / (var + 1e-5).sqrt();
                for v in &mut z {
                    *v = (*v - mean) * inv;
                }
            }
            for v in &mut z {
                *v = elu(*v);
            }
            z
        }
        let s1 = hidden_plain(&self.layers[3], &ee, self.layer_norm);
        let s2 = hidden_plain(&self.layers[4], &s1, self.layer_norm);
        // Head layer 1: precomputed cloud part, then the state part in the
        // same accumulation order as the concatenated forward.
        let lin5 = &self.layers[5];
        let mut z1 = vec![0.0; HEAD_H1];
        for o in 0..HEAD_H1 {
            let row = &lin5.w[o * FEAT + POINT_FEAT..(o + 1) * FEAT];
            let mut acc = pre[o];
            for (w, s) in row.iter().zip(&s2) {
                acc += w * s;
            }
            z1[o] = acc;
        }
        if self.layer_norm {
            let n = z1.len() as f64;
            let mean = z1.iter().sum::<f64>() / n;
            let var = z1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + 1e-5).sqrt();
            for v in &mut z1 {
                *v = (*v - mean) * inv;
            }
        }
        for v in &mut z1 {
            *v = elu(*v);
        }
        let h2 = hidden_plain(&self.layers[6], &z1, self.layer_norm);
        let lin7 = &self.layers[7];
        let mut z3 = lin7.b[0];
        for (w, h) in lin7.w.iter().zip(&h2) {
            z3 += w * h;
        }
        super::net::softplus(z3)
    }
}

/// f32 mirror of a [`ValueNet`] for fast controller-side inference.
#[derive(Clone, Debug)]
pub struct InferNet {
    w: Vec<Vec<f32>>,
    b: Vec<Vec<f32>>,
    layer_norm: bool,
}

fn elu32(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn softplus32(x: f32) -> f32 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl InferNet {
    pub fn from_net(net: &ValueNet) -> InferNet {
        InferNet {
            w: net
                .layers
                .iter()
                .map(|l| l.w.iter().map(|v| *v as f32).collect())
                .collect(),
            b: net
                .layers
                .iter()
                .map(|l| l.b.iter().map(|v| *v as f32).collect())
                .collect(),
            layer_norm: net.layer_norm,
        }
    }

    fn dense(&self, layer: usize, in_dim: usize, out_dim: usize, x: &[f32], out: &mut [f32]) {
        let w = &self.w[layer];
        let b = &self.b[layer];
        for o in 0..out_dim {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let mut acc = b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out[o] = acc;
        }
    }

    fn maybe_layer_norm(&self, z: &mut [f32]) {
        if !self.layer_norm {
            return;
        }
        let n = z.len() as f32;
        let mean = z.iter().sum::<f32>() / n;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let inv = 1.0 / (var + 1e-5).sqrt();
        for v in z.iter_mut() {
            *v = (*v - mean) * inv;
        }
    }

    /// Cloud feature (128) from centered points.
    pub fn encode_cloud(&self, points: &[[f64; 2]]) -> Result<Vec<f32>, NetError> {
        let n = points.len() as f64;
        let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
        if cx.abs() > 1e-6 || cy.abs() > 1e-6 {
            return Err(NetError::UncenteredCloud { cx, cy });
        }
        let mut pooled = vec![f32::NEG_INFINITY; POINT_FEAT];
        let mut h = vec![0.0f32; POINT_H];
        let mut f = vec![0.0f32; POINT_FEAT];
        for p in points {
            let x = [p[0] as f32, p[1] as f32];
            self.dense(0, POINT_IN, POINT_H, &x, &mut h);
            for v in &mut h {
                *v = elu32(*v);
            }
            self.dense(1, POINT_H, POINT_FEAT, &h, &mut f);
            for (pool, v) in pooled.iter_mut().zip(&f) {
                let a = elu32(*v);
                if a > *pool {
                    *pool = a;
                }
            }
        }
        let mut feat = vec![0.0f32; POINT_FEAT];
        self.dense(2, POINT_FEAT, POINT_FEAT, &pooled, &mut feat);
        self.maybe_layer_norm(&mut feat);
        for v in &mut feat {
            *v = elu32(*v);
        }
        Ok(feat)
    }

    /// Per-step precompute of the head's cloud contribution.
    pub fn head_precompute(&self, feature: &[f32]) -> Vec<f32> {
        let w = &self.w[5];
        let b = &self.b[5];
        let mut t = vec![0.0f32; HEAD_H1];
        for o in 0..HEAD_H1 {
            let row = &w[o * FEAT..o * FEAT + POINT_FEAT];
            let mut acc = b[o];
            for (wi, fi) in row.iter().zip(feature) {
                acc += wi * fi;
            }
            t[o] = acc;
        }
        t
    }

    /// Values for a batch of state encodings against one precomputed cloud.
    pub fn values(&self, pre: &[f32], states: &[[f32; 4]]) -> Vec<f32> {
        let mut out = Vec::with_capacity(states.len());
        let mut s1 = vec![0.0f32; STATE_H];
        let mut s2 = vec![0.0f32; STATE_EMB];
        let mut h1 = vec![0.0f32; HEAD_H1];
        let mut h2 = vec![0.0f32; HEAD_H2];
        for ee in states {
            self.dense(3, STATE_IN, STATE_H, ee, &mut s1);
            self.maybe_layer_norm(&mut s1);
            for v in &mut s1 {
                *v = elu32(*v);
            }
            self.dense(4, STATE_H, STATE_EMB, &s1, &mut s2);
            self.maybe_layer_norm(&mut s2);
            for v in &mut s2 {
                *v = elu32(*v);
            }
            let w5 = &self.w[5];
            for o in 0..HEAD_H1 {
                let row = &w5[o * FEAT + POINT_FEAT..(o + 1) * FEAT];
                let mut acc = pre[o];
                for (wi, si) in row.iter().zip(&s2) {
                    acc += wi * si;
                }
                h1[o] = acc;
            }
            self.maybe_layer_norm(&mut h1);
            for v in &mut h1 {
                *v = elu32(*v);
            }
            self.dense(6, HEAD_H1, HEAD_H2, &h1, &mut h2);
            self.maybe_layer_norm(&mut h2);
            for v in &mut h2 {
                *v = elu32(*v);
            }
            let w7 = &self.w[7];
            let mut z3 = self.b[7][0];
            for (wi, hi) in w7.iter().zip(&h2) {
                z3 += wi * hi;
            }
            out.push(softplus32(z3));
        }
        out
    }
}
