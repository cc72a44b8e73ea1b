//! The value network: shared per-point MLP with feature-wise max pooling
//! for the cloud, a small state encoder for the relative EE pose, and a
//! softplus head. Forward and backward are hand-rolled in f64.

use rand::Rng;

use crate::geom::Pose2;

use super::NetError;

/// Layer widths: cloud 2 -> 64 -> 128 -> (max pool) -> 128, state
/// 4 -> 64 -> 32, head 160 -> 128 -> 64 -> 1.
pub const POINT_IN: usize = 2;
pub const POINT_H: usize = 64;
pub const POINT_FEAT: usize = 128;
pub const STATE_IN: usize = 4;
pub const STATE_H: usize = 64;
pub const STATE_EMB: usize = 32;
pub const FEAT: usize = POINT_FEAT + STATE_EMB; // 160
pub const HEAD_H1: usize = 128;
pub const HEAD_H2: usize = 64;

/// Layer shapes in flat-parameter order.
pub const LAYER_SHAPES: [(usize, usize); 8] = [
    (POINT_H, POINT_IN),
    (POINT_FEAT, POINT_H),
    (POINT_FEAT, POINT_FEAT),
    (STATE_H, STATE_IN),
    (STATE_EMB, STATE_H),
    (HEAD_H1, FEAT),
    (HEAD_H2, HEAD_H1),
    (1, HEAD_H2),
];

const LN_EPS: f64 = 1e-5;

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dense layer, weights row-major `w[out * in_dim + in]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    fn zeros(out_dim: usize, in_dim: usize) -> Linear {
        Linear {
            w: vec![0.0; out_dim * in_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn init<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Linear {
        // Fan-in scaled uniform.
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let b = (0..out_dim).map(|_| rng.random_range(-bound..bound)).collect();
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out[o] = acc;
        }
    }

    /// Accumulate parameter grads and the input grad for one sample.
    fn backward(&self, x: &[f64], dz: &[f64], grad: &mut Linear, dx: Option<&mut [f64]>) {
        for o in 0..self.out_dim {
            let g = dz[o];
            if g == 0.0 {
                continue;
            }
            grad.b[o] += g;
            let row = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (wi, xi) in row.iter_mut().zip(x) {
                *wi += g * xi;
            }
        }
        if let Some(dx) = dx {
            for (i, d) in dx.iter_mut().enumerate() {
                let mut acc = 0.0;
                for o in 0..self.out_dim {
                    acc += self.w[o * self.in_dim + i] * dz[o];
                }
                *d = acc;
            }
        }
    }
}

fn layer_norm(z: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    (z.iter().map(|v| (v - mean) * inv).collect(), mean, inv)
}

fn layer_norm_backward(y: &[f64], inv: f64, dy: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mean_dy = dy.iter().sum::<f64>() / n;
    let mean_dyy = dy.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
    y.iter()
        .zip(dy)
        .map(|(yi, di)| inv * (di - mean_dy - yi * mean_dyy))
        .collect()
}

/// One hidden-layer activation record: pre-activation, optional layer-norm
/// output, dropout mask, and the post-activation that feeds the next layer.
#[derive(Clone, Debug, Default)]
struct HiddenCache {
    z: Vec<f64>,
    ln_y: Vec<f64>,
    ln_inv: f64,
    mask: Vec<f64>,
    out: Vec<f64>,
}

/// EE pose encoding fed to the state encoder: (x, y, cos theta, sin theta).
pub fn encode_ee(ee_rel: &Pose2) -> [f64; 4] {
    [ee_rel.x, ee_rel.y, ee_rel.theta.cos(), ee_rel.theta.sin()]
}

/// Cloud-encoder activations cached for backprop plus the pooled feature.
#[derive(Clone, Debug)]
pub struct CloudCache {
    points: Vec<[f64; 2]>,
    z1: Vec<Vec<f64>>,
    a1: Vec<Vec<f64>>,
    z2: Vec<Vec<f64>>,
    a2: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
    post: HiddenCache,
    /// Final 128-D cloud feature.
    pub feature: Vec<f64>,
}

/// State-path activations for one (cloud, ee) evaluation.
#[derive(Clone, Debug)]
pub struct StateCache {
    ee: [f64; 4],
    s1: HiddenCache,
    s2: HiddenCache,
    h1: HiddenCache,
    h2: HiddenCache,
    z3: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ValueNet {
    pub layers: Vec<Linear>,
    pub layer_norm: bool,
    pub dropout: f64,
}

/// Gradient buffer with the same layer layout as the network.
#[derive(Clone, Debug)]
pub struct Grads {
    pub layers: Vec<Linear>,
}

impl Grads {
    pub fn zeros() -> Grads {
        Grads {
            layers: LAYER_SHAPES
                .iter()
                .map(|(o, i)| Linear::zeros(*o, *i))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += y;
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

pub fn flatten(layers: &[Linear]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.w);
        out.extend_from_slice(&l.b);
    }
    out
}

impl ValueNet {
    pub fn init<R: Rng>(layer_norm: bool, dropout: f64, rng: &mut R) -> ValueNet {
        ValueNet {
            layers: LAYER_SHAPES
                .iter()
                .map(|(o, i)| Linear::init(*o, *i, rng))
                .collect(),
            layer_norm,
            dropout,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let wn = l.w.len();
            l.w.copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = l.b.len();
            l.b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        assert_eq!(off, flat.len());
    }

    /// Hidden layer: linear -> [layer norm] -> ELU -> [dropout].
    fn hidden<R: Rng>(
        &self,
        layer: usize,
        x: &[f64],
        dropout_rng: &mut Option<&mut R>,
    ) -> HiddenCache {
        let lin = &self.layers[layer];
        let mut z = vec![0.0; lin.out_dim];
        lin.forward(x, &mut z);
        let (pre_act, ln_y, ln_inv) = if self.layer_norm {
            let (y, _, inv) = layer_norm(&z);
            (y.clone(), y, inv)
        } else {
            (z.clone(), Vec::new(), 0.0)
        };
        let mut out: Vec<f64> = pre_act.iter().map(|v| elu(*v)).collect();
        let mut mask = Vec::new();
        if let Some(rng) = dropout_rng.as_deref_mut() {
            if self.dropout > 0.0 {
                let keep = 1.0 - self.dropout;
                mask = (0..out.len())
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                for (o, m) in out.iter_mut().zip(&mask) {
                    *o *= m;
                }
            }
        }
        HiddenCache {
            z,
            ln_y,
            ln_inv,
            mask,
            out,
        }
    }

    /// Backward through one hidden layer; returns d(pre-linear z).
    fn hidden_backward(&self, cache: &HiddenCache, mut d_out: Vec<f64>) -> Vec<f64> {
        if !cache.mask.is_empty() {
            for (d, m) in d_out.iter_mut().zip(&cache.mask) {
                *d *= m;
            }
        }
        let pre_act: &[f64] = if self.layer_norm { &cache.ln_y } else { &cache.z };
        let d_pre: Vec<f64> = d_out
            .iter()
            .zip(pre_act)
            .map(|(d, z)| d * elu_grad(*z))
            .collect();
        if self.layer_norm {
            layer_norm_backward(&cache.ln_y, cache.ln_inv, &d_pre)
        } else {
            d_pre
        }
    }

    /// Encode a centered cloud. Errors when the centroid exceeds 1e-6.
    pub fn encode_cloud<R: Rng>(
        &self,
        points: &[[f64; 2]],
        mut dropout_rng: Option<&mut R>,
    ) -> Result<CloudCache, NetError> {
        let n = points.len() as f64;
        let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
        if cx.abs() > 1e-6 || cy.abs() > 1e-6 {
            return Err(NetError::UncenteredCloud {
                cx,
                cy,
            });
        }
        let mut z1 = Vec::with_capacity(points.len());
        let mut a1 = Vec::with_capacity(points.len());
        let mut z2 = Vec::with_capacity(points.len());
        let mut a2 = Vec::with_capacity(points.len());
        for p in points {
            let mut zp1 = vec![0.0; POINT_H];
            self.layers[0].forward(&[p[0], p[1]], &mut zp1);
            let ap1: Vec<f64> = zp1.iter().map(|v| elu(*v)).collect();
            let mut zp2 = vec![0.0; POINT_FEAT];
            self.layers[1].forward(&ap1, &mut zp2);
            let ap2: Vec<f64> = zp2.iter().map(|v| elu(*v)).collect();
            z1.push(zp1);
            a1.push(ap1);
            z2.push(zp2);
            a2.push(ap2);
        }
        // Feature-wise max pool; ties resolve to the first point.
        let mut pooled = vec![f64::NEG_INFINITY; POINT_FEAT];
        let mut argmax = vec![0usize; POINT_FEAT];
        for (pi, feats) in a2.iter().enumerate() {
            for (f, v) in feats.iter().enumerate() {
                if *v > pooled[f] {
                    pooled[f] = *v;
                    argmax[f] = pi;
                }
            }
        }
        let post = self.hidden(2, &pooled, &mut dropout_rng);
        let feature = post.out.clone();
        Ok(CloudCache {
            points: points.to_vec(),
            z1,
            a1,
            z2,
            a2,
            argmax,
            pooled,
            post,
            feature,
        })
    }

    /// Value of one state against an encoded cloud. The head's first layer
    /// consumes the cloud part of the concatenation first, then the state
    /// part, so a cached cloud contribution stays bitwise identical.
    pub fn value_with_cloud<R: Rng>(
        &self,
        cloud: &CloudCache,
        ee: [f64; 4],
        mut dropout_rng: Option<&mut R>,
    ) -> StateCache {
        let s1 = self.hidden(3, &ee, &mut dropout_rng);
        let s2 = self.hidden(4, &s1.out, &mut dropout_rng);
        let mut concat = Vec::with_capacity(FEAT);
        concat.extend_from_slice(&cloud.feature);
        concat.extend_from_slice(&s2.out);
        let h1 = self.hidden(5, &concat, &mut dropout_rng);
        let h2 = self.hidden(6, &h1.out, &mut dropout_rng);
        let mut z3 = vec![0.0];
        self.layers[7].forward(&h2.out, &mut z3);
        StateCache {
            ee,
            s1,
            s2,
            h1,
            h2,
            z3: z3[0],
            value: softplus(z3[0]),
        }
    }

    /// Full forward pass from a centered cloud and a relative EE pose.
    pub fn forward(&self, points: &[[f64; 2]], ee_rel: &Pose2) -> Result<f64, NetError> {
        let cloud = self.encode_cloud::<rand_chacha::ChaCha8Rng>(points, None)?;
        Ok(self
            .value_with_cloud::<rand_chacha::ChaCha8Rng>(&cloud, encode_ee(ee_rel), None)
            .value)
    }

    /// Backward through the head + state path for one evaluation.
    /// Accumulates parameter grads and adds the cloud-feature gradient into
    /// `d_feature` (to be pushed through the cloud encoder once per cloud).
    pub fn backward_state(
        &self,
        cloud: &CloudCache,
        state: &StateCache,
        upstream: f64,
        grads: &mut Grads,
        d_feature: &mut [f64],
    ) {
        let dz3 = upstream * sigmoid(state.z3);
        let mut d_h2_out = vec![0.0; HEAD_H2];
        self.layers[7].backward(
            &state.h2.out,
            &[dz3],
            &mut grads.layers[7],
            Some(&mut d_h2_out),
        );
        let d_h2z = self.hidden_backward(&state.h2, d_h2_out);
        let mut d_h1_out = vec![0.0; HEAD_H1];
        self.layers[6].backward(
            &state.h1.out,
            &d_h2z,
            &mut grads.layers[6],
            Some(&mut d_h1_out),
        );
        let d_h1z = self.hidden_backward(&state.h1, d_h1_out);
        let mut concat = Vec::with_capacity(FEAT);
        concat.extend_from_slice(&cloud.feature);
        concat.extend_from_slice(&state.s2.out);
        let mut d_concat = vec![0.0; FEAT];
        self.layers[5].backward(&concat, &d_h1z, &mut grads.layers[5], Some(&mut d_concat));
        for (acc, d) in d_feature.iter_mut().zip(&d_concat[..POINT_FEAT]) {
            *acc += d;
        }
        let d_s2_out = d_concat[POINT_FEAT..].to_vec();
        let d_s2z = self.hidden_backward(&state.s2, d_s2_out);
        let mut d_s1_out = vec![0.0; STATE_H];
        self.layers[4].backward(
            &state.s1.out,
            &d_s2z,
            &mut grads.layers[4],
            Some(&mut d_s1_out),
        );
        let d_s1z = self.hidden_backward(&state.s1, d_s1_out);
        self.layers[3].backward(&state.ee, &d_s1z, &mut grads.layers[3], None);
    }

    /// Backward through the cloud encoder given the accumulated feature
    /// gradient.
    pub fn backward_cloud(&self, cloud: &CloudCache, d_feature: &[f64], grads: &mut Grads) {
        let d_postz = self.hidden_backward(&cloud.post, d_feature.to_vec());
        let mut d_pooled = vec![0.0; POINT_FEAT];
        self.layers[2].backward(
            &cloud.pooled,
            &d_postz,
            &mut grads.layers[2],
            Some(&mut d_pooled),
        );
        // Scatter through the max pool: only argmax points receive gradient.
        let mut d_a2: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cloud.points.len()];
        for (f, d) in d_pooled.iter().enumerate() {
            if *d != 0.0 {
                d_a2[cloud.argmax[f]].push((f, *d));
            }
        }
        for (pi, feats) in d_a2.iter().enumerate() {
            if feats.is_empty() {
                continue;
            }
            let mut dz2 = vec![0.0; POINT_FEAT];
            for (f, d) in feats {
                dz2[*f] = d * elu_grad(cloud.z2[pi][*f]);
            }
            let mut d_a1 = vec![0.0; POINT_H];
            self.layers[1].backward(&cloud.a1[pi], &dz2, &mut grads.layers[1], Some(&mut d_a1));
            let dz1: Vec<f64> = d_a1
                .iter()
                .zip(&cloud.z1[pi])
                .map(|(d, z)| d * elu_grad(*z))
                .collect();
            self.layers[0].backward(
                &[cloud.points[pi][0], cloud.points[pi][1]],
                &dz1,
                &mut grads.layers[0],
                None,
            );
        }
    }
}
