//! Particle generation: Halton-Gaussian perturbations (direct and B-spline
//! knot-interpolated), optional uniform-random buckets, null-action
//! particles, and the unperturbed mean.
//!
//! Actions live in normalized units: one unit equals the per-joint
//! acceleration limit, so clamp squashing is a clamp to [-1, 1].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::halton::halton_sequence;
use super::norm::inv_norm_cdf;
use super::spline::quintic_interpolate;
use super::{MpcError, MppiConfig};

/// Sampling distribution state: mean action sequence (horizon x joints,
/// row-major), per-joint variance, cold-start flag, and the persistent
/// Halton cursor.
#[derive(Clone, Debug)]
pub struct PolicyState {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub cold: bool,
    pub halton_index: u64,
    pub horizon: usize,
    pub n_joints: usize,
}

impl PolicyState {
    pub fn new(horizon: usize, n_joints: usize, init_cov: f64) -> PolicyState {
        PolicyState {
            mean: vec![0.0; horizon * n_joints],
            cov: vec![init_cov; n_joints],
            cold: true,
            halton_index: 0,
            horizon,
            n_joints,
        }
    }

    /// Receding-horizon shift: drop the executed step, repeat the last.
    pub fn shift(&mut self) {
        let n = self.n_joints;
        for h in 0..self.horizon - 1 {
            for j in 0..n {
                self.mean[h * n + j] = self.mean[(h + 1) * n + j];
            }
        }
        // best_action = repeat: the trailing step keeps its value.
    }

    pub fn cov_trace(&self) -> f64 {
        self.cov.iter().sum()
    }
}

/// Bucket sizes derived from the sample ratios. The halton-knot bucket
/// absorbs the rounding remainder.
pub fn bucket_counts(cfg: &MppiConfig) -> (usize, usize, usize, usize) {
    let p = cfg.num_particles as f64;
    let n_h = (cfg.sample_ratio_halton * p).round() as usize;
    let n_r = (cfg.sample_ratio_random * p).round() as usize;
    let n_rk = (cfg.sample_ratio_random_knot * p).round() as usize;
    let used = n_h + n_r + n_rk;
    assert!(
        used <= cfg.num_particles,
        "sample ratios exceed the particle budget"
    );
    (n_h, cfg.num_particles - used, n_r, n_rk)
}

/// Draw the particle set. Layout: [mean, nulls..., halton direct...,
/// halton-knot..., random..., random-knot...] with the first
/// `1 + null_act_frac * num_particles` slots overwritten by the mean and
/// zero-acceleration sequences.
pub fn sample_action_sequences<R: Rng>(
    policy: &mut PolicyState,
    cfg: &MppiConfig,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, MpcError> {
    assert_eq!(cfg.knots, 6, "knot particles interpolate exactly 6 knots");
    let n = policy.n_joints;
    let horizon = policy.horizon;
    let p_total = cfg.num_particles;
    let (n_h, n_hk, n_r, n_rk) = bucket_counts(cfg);
    let std: Vec<f64> = policy.cov.iter().map(|v| v.max(0.0).sqrt()).collect();

    let halton_points = halton_sequence(n_h * horizon + n_hk * cfg.knots, n, policy.halton_index)?;
    policy.halton_index += (n_h * horizon + n_hk * cfg.knots) as u64;
    // Cranley-Patterson rotation: a fresh uniform shift per call and
    // dimension. Without it the base-2 parity comb gives every particle a
    // sign-alternating joint-0 perturbation with a phase frozen across
    // calls, which starves the optimizer of sustained accelerations.
    let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let gauss: Vec<Vec<f64>> = halton_points
        .iter()
        .map(|pt| {
            pt.iter()
                .zip(&shift)
                .map(|(u, s)| {
                    let r = (u + s).fract().clamp(1e-12, 1.0 - 1e-12);
                    inv_norm_cdf(r)
                })
                .collect()
        })
        .collect();

    let mut particles: Vec<Vec<f64>> = Vec::with_capacity(p_total);
    // Halton direct: independent perturbation per step; points are consumed
    // particle-major (index i + h * n_h) so intra-particle steps take
    // well-separated sequence positions.
    for i in 0..n_h {
        let mut a = policy.mean.clone();
        for h in 0..horizon {
            let z = &gauss[i + h * n_h];
            for j in 0..n {
                a[h * n + j] += std[j] * z[j];
            }
        }
        particles.push(a);
    }
    // Halton knots: perturb 6 knots per joint, interpolate with the clamped
    // quintic, add to the mean.
    let knot_base = n_h * horizon;
    for i in 0..n_hk {
        let mut a = policy.mean.clone();
        for j in 0..n {
            let mut knots = [0.0; 6];
            for (k, knot) in knots.iter_mut().enumerate() {
                *knot = std[j] * gauss[knot_base + i + k * n_hk][j];
            }
            let curve = quintic_interpolate(&knots, horizon);
            for h in 0..horizon {
                a[h * n + j] += curve[h];
            }
        }
        particles.push(a);
    }
    // Uniform-random buckets (ratios default to zero).
    for _ in 0..n_r {
        let mut a = policy.mean.clone();
        for h in 0..horizon {
            for j in 0..n {
                let z: f64 = StandardNormal.sample(rng);
                a[h * n + j] += std[j] * z;
            }
        }
        particles.push(a);
    }
    for _ in 0..n_rk {
        let mut a = policy.mean.clone();
        for j in 0..n {
            let mut knots = [0.0; 6];
            for knot in knots.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *knot = std[j] * z;
            }
            let curve = quintic_interpolate(&knots, horizon);
            for h in 0..horizon {
                a[h * n + j] += curve[h];
            }
        }
        particles.push(a);
    }
    debug_assert_eq!(particles.len(), p_total);

    // Reserved slots: the unperturbed mean and the null-action particles.
    let n_null = (cfg.null_act_frac * p_total as f64).round() as usize;
    particles[0] = policy.mean.clone();
    for slot in particles.iter_mut().skip(1).take(n_null) {
        slot.iter_mut().for_each(|v| *v = 0.0);
    }

    // Squash: clamp to the normalized acceleration limits.
    if cfg.squash_fn == "clamp" {
        for a in &mut particles {
            for v in a.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        }
    }
    Ok(particles)
}

/// Index set of the reserved particles (mean + nulls) for a config.
pub fn reserved_slots(cfg: &MppiConfig) -> usize {
    1 + (cfg.null_act_frac * cfg.num_particles as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn small_cfg() -> MppiConfig {
        let mut cfg = MppiConfig::default();
        cfg.num_particles = 40;
        cfg.horizon = 30;
        cfg
    }

    #[test]
    fn bucket_rounding_assigns_remainder_to_halton_knot() {
        let mut cfg = small_cfg();
        cfg.num_particles = 401; // odd total: 0.3*401 = 120.3 -> 120
        let (n_h, n_hk, n_r, n_rk) = bucket_counts(&cfg);
        assert_eq!(n_h, 120);
        assert_eq!(n_r, 0);
        assert_eq!(n_rk, 0);
        assert_eq!(n_h + n_hk, 401);
    }

    #[test]
    fn zero_covariance_collapses_to_mean() {
        let cfg = small_cfg();
        let mut policy = PolicyState::new(cfg.horizon, 3, 0.0);
        for v in policy.mean.iter_mut() {
            *v = 0.25;
        }
        let mut rng = RngStream::new(1, 0).rng();
        let particles = sample_action_sequences(&mut policy, &cfg, &mut rng).unwrap();
        let n_null = (cfg.null_act_frac * cfg.num_particles as f64).round() as usize;
        for (i, p) in particles.iter().enumerate() {
            if i >= 1 && i <= n_null {
                assert!(p.iter().all(|v| *v == 0.0), "slot {i} should be null");
            } else {
                assert_eq!(p, &policy.mean, "particle {i} differs from mean");
            }
        }
    }

    #[test]
    fn halton_cursor_advances() {
        let cfg = small_cfg();
        let mut policy = PolicyState::new(cfg.horizon, 3, 0.5);
        let mut rng = RngStream::new(2, 0).rng();
        let a = sample_action_sequences(&mut policy, &cfg, &mut rng).unwrap();
        let idx_after = policy.halton_index;
        assert!(idx_after > 0);
        let b = sample_action_sequences(&mut policy, &cfg, &mut rng).unwrap();
        assert_ne!(a[reserved_slots(&cfg)], b[reserved_slots(&cfg)]);
    }

    #[test]
    fn particles_respect_clamp() {
        let cfg = small_cfg();
        let mut policy = PolicyState::new(cfg.horizon, 3, 4.0);
        let mut rng = RngStream::new(3, 0).rng();
        let particles = sample_action_sequences(&mut policy, &cfg, &mut rng).unwrap();
        for p in &particles {
            for v in p {
                assert!(*v >= -1.0 && *v <= 1.0);
            }
        }
    }

    #[test]
    fn shift_repeats_last_action() {
        let mut policy = PolicyState::new(4, 2, 0.5);
        policy.mean = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        policy.shift();
        assert_eq!(policy.mean, vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 7.0, 8.0]);
    }
}
