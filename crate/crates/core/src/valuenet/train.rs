//! Bellman-error training: Adam on the squared one-step TD error with an
//! exponential-moving-average target network, for K-member ensembles.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ValueNetCfg;
use crate::rng::RngStream;

use super::batch::{Batch, Bootstrap};
use super::net::{Grads, ValueNet, POINT_FEAT};
use super::NetError;

/// One-step TD target `y = c + gamma * v_next`.
pub fn td_target(cost: f64, v_next: f64, gamma: f64) -> f64 {
    cost + gamma * v_next
}

/// Adam moments and training hyperparameters for one network.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub gamma: f64,
    pub ema_rate: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl TrainState {
    pub fn new(param_count: usize, lr: f64, gamma: f64, ema_rate: f64) -> TrainState {
        TrainState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            gamma,
            ema_rate,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// One Adam update over the flat gradient.
    fn apply(&mut self, net: &mut ValueNet, grad: &[f64]) {
        self.step += 1;
        let mut params = net.flat_params();
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        net.set_flat_params(&params);
    }
}

/// Exact EMA: theta' <- (1 - rate) * theta' + rate * theta, elementwise.
pub fn ema_update(target: &mut ValueNet, online: &ValueNet, rate: f64) {
    let mut t = target.flat_params();
    let o = online.flat_params();
    for (ti, oi) in t.iter_mut().zip(&o) {
        *ti = (1.0 - rate) * *ti + rate * *oi;
    }
    target.set_flat_params(&t);
}

/// K value networks with independent initializations, their EMA targets,
/// and per-member optimizer state.
pub struct Ensemble {
    pub members: Vec<ValueNet>,
    pub targets: Vec<ValueNet>,
    pub states: Vec<TrainState>,
}

impl Ensemble {
    pub fn init(k: usize, cfg: &ValueNetCfg, stream: &RngStream) -> Ensemble {
        assert!(k >= 1);
        let mut members = Vec::with_capacity(k);
        for i in 0..k {
            let mut rng = stream.substream(i as u64).rng();
            members.push(ValueNet::init(cfg.layer_norm, cfg.dropout, &mut rng));
        }
        let targets = members.clone();
        let states = members
            .iter()
            .map(|m| {
                TrainState::new(
                    m.param_count(),
                    cfg.learning_rate,
                    cfg.gamma_value,
                    cfg.ema_rate,
                )
            })
            .collect();
        Ensemble {
            members,
            targets,
            states,
        }
    }

    pub fn from_members(members: Vec<ValueNet>, cfg: &ValueNetCfg) -> Ensemble {
        let targets = members.clone();
        let states = members
            .iter()
            .map(|m| {
                TrainState::new(
                    m.param_count(),
                    cfg.learning_rate,
                    cfg.gamma_value,
                    cfg.ema_rate,
                )
            })
            .collect();
        Ensemble {
            members,
            targets,
            states,
        }
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// One gradient step for every member on the shared batch: squared
    /// Bellman error against the member's EMA target, Adam update, then the
    /// exact EMA target update. Returns the mean loss across members.
    pub fn train_step(&mut self, batch: &Batch) -> Result<f64, NetError> {
        let mut total_loss = 0.0;
        for k in 0..self.members.len() {
            let loss = member_step(
                &mut self.members[k],
                &mut self.targets[k],
                &mut self.states[k],
                batch,
            )?;
            total_loss += loss;
        }
        Ok(total_loss / self.members.len() as f64)
    }
}

fn member_step(
    net: &mut ValueNet,
    target: &mut ValueNet,
    state: &mut TrainState,
    batch: &Batch,
) -> Result<f64, NetError> {
    let batch_len = batch.len();
    assert!(batch_len > 0, "empty batch");
    let gamma = state.gamma;

    // Per-cloud-group forward/backward in parallel; groups are reduced in
    // order so the result is independent of scheduling.
    let results: Vec<Result<(Grads, f64), NetError>> = batch
        .groups
        .par_iter()
        .map(|group| {
            let mut grads = Grads::zeros();
            let cloud = net.encode_cloud::<ChaCha8Rng>(&group.points, None)?;
            let cloud_target = target.encode_cloud::<ChaCha8Rng>(&group.points, None)?;
            let mut d_feature = vec![0.0; POINT_FEAT];
            let mut loss = 0.0;
            for tr in &group.transitions {
                let st = net.value_with_cloud::<ChaCha8Rng>(&cloud, tr.ee, None);
                let v_next = match tr.bootstrap {
                    Bootstrap::Zero => 0.0,
                    Bootstrap::Next => {
                        target
                            .value_with_cloud::<ChaCha8Rng>(&cloud_target, tr.ee_next, None)
                            .value
                    }
                    Bootstrap::SelfLoop => {
                        target
                            .value_with_cloud::<ChaCha8Rng>(&cloud_target, tr.ee, None)
                            .value
                    }
                };
                let y = td_target(tr.cost, v_next, gamma);
                let err = st.value - y;
                loss += err * err;
                let upstream = 2.0 * err / batch_len as f64;
                net.backward_state(&cloud, &st, upstream, &mut grads, &mut d_feature);
            }
            net.backward_cloud(&cloud, &d_feature, &mut grads);
            Ok((grads, loss))
        })
        .collect();

    let mut grads = Grads::zeros();
    let mut loss_sum = 0.0;
    for r in results {
        let (g, l) = r?;
        grads.add(&g);
        loss_sum += l;
    }
    let loss = loss_sum / batch_len as f64;
    if !loss.is_finite() {
        return Err(NetError::NonFiniteLoss {
            step: state.step,
            detail: format!("batch of {batch_len} transitions"),
        });
    }
    state.apply(net, &grads.flat());
    ema_update(target, net, state.ema_rate);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuenet::batch::{CloudGroup, Transition};

    fn dummy_cloud(n: usize) -> Vec<[f64; 2]> {
        // A centered ring.
        (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                [0.04 * a.cos(), 0.04 * a.sin()]
            })
            .collect()
    }

    fn single_transition_batch(boot: Bootstrap, cost: f64) -> Batch {
        Batch {
            groups: vec![CloudGroup {
                points: dummy_cloud(16),
                transitions: vec![Transition {
                    ee: [0.0, 0.0, 1.0, 0.0],
                    cost,
                    ee_next: [0.0, 0.0, 1.0, 0.0],
                    bootstrap: boot,
                }],
            }],
        }
    }

    #[test]
    fn td_target_cases() {
        assert_eq!(td_target(0.0, 0.0, 0.99), 0.0);
        assert_eq!(td_target(1.0, 0.0, 0.99), 1.0);
        assert!((td_target(1.0, 10.0, 0.99) - 10.9).abs() < 1e-12);
    }

    #[test]
    fn ema_is_exact_convex_combination() {
        let stream = RngStream::new(1, 0);
        let cfg = ValueNetCfg::default();
        let mut ens = Ensemble::init(1, &cfg, &stream);
        let before_target = ens.targets[0].flat_params();
        let before_online = ens.members[0].flat_params();
        let batch = single_transition_batch(Bootstrap::Zero, 0.0);
        ens.train_step(&batch).unwrap();
        let after_online = ens.members[0].flat_params();
        let after_target = ens.targets[0].flat_params();
        let rate = cfg.ema_rate;
        for i in 0..before_target.len() {
            let expected = (1.0 - rate) * before_target[i] + rate * after_online[i];
            assert!(
                (after_target[i] - expected).abs() <= 1e-12,
                "param {i}: {} vs {}",
                after_target[i],
                expected
            );
        }
        // And the online net actually moved.
        assert!(before_online
            .iter()
            .zip(&after_online)
            .any(|(a, b)| a != b));
    }

    #[test]
    fn absorbing_success_drives_value_to_zero() {
        let stream = RngStream::new(2, 0);
        let mut cfg = ValueNetCfg::default();
        cfg.learning_rate = 3e-3;
        let mut ens = Ensemble::init(1, &cfg, &stream);
        let batch = single_transition_batch(Bootstrap::Zero, 0.0);
        for _ in 0..4000 {
            ens.train_step(&batch).unwrap();
        }
        let cloud = ens.members[0]
            .encode_cloud::<rand_chacha::ChaCha8Rng>(&dummy_cloud(16), None)
            .unwrap();
        let v = ens.members[0]
            .value_with_cloud::<rand_chacha::ChaCha8Rng>(&cloud, [0.0, 0.0, 1.0, 0.0], None)
            .value;
        assert!(v < 1e-2, "value {v} did not converge to 0");
    }

    #[test]
    fn ensemble_members_are_independent() {
        let stream = RngStream::new(3, 0);
        let cfg = ValueNetCfg::default();
        let ens = Ensemble::init(3, &cfg, &stream);
        let a = ens.members[0].flat_params();
        let b = ens.members[1].flat_params();
        assert_ne!(a, b);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = ValueNetCfg::default();
        let run = || {
            let stream = RngStream::new(9, 0);
            let mut ens = Ensemble::init(1, &cfg, &stream);
            let batch = single_transition_batch(Bootstrap::SelfLoop, 1.0);
            let mut last = 0.0;
            for _ in 0..20 {
                last = ens.train_step(&batch).unwrap();
            }
            (last, ens.members[0].flat_params())
        };
        let (l1, p1) = run();
        let (l2, p2) = run();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(p1.len(), p2.len());
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
