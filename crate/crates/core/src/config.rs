//! Run configuration: every tunable of every module, keyed by `module.name`.
//!
//! The on-disk format is a flat UTF-8 JSON object with dotted keys
//! (e.g. `"mpc.num_particles": 400`). Unknown keys are rejected at load
//! time. All quantities are SI (meters, radians, seconds); the per-module
//! defaults below carry the reference constants.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
}

macro_rules! config_section {
    ($name:ident { $( $(#[$doc:meta])* $field:ident : $ty:ty = $default:expr ),+ $(,)? }) => {
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $( $(#[$doc])* pub $field: $ty, )+
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $( $field: $default, )+ }
            }
        }
    };
}

config_section!(SimCfg {
    /// Simulation/control step, seconds (50 Hz).
    dt: f64 = 0.02,
    /// SDF voxel edge, meters.
    sdf_resolution: f64 = 0.01,
    /// Antipodal friction-cone half-angle, radians (15 deg).
    friction_cone_half_angle: f64 = 15.0_f64.to_radians(),
    link_lengths: Vec<f64> = vec![0.40, 0.35, 0.30],
    /// Symmetric joint position limit, radians.
    joint_pos_limit: f64 = 3.0,
    joint_vel_limit: f64 = 2.5,
    joint_acc_limit: f64 = 10.0,
    joint_jerk_limit: f64 = 400.0,
    /// Parallel-jaw stroke, meters.
    jaw_span: f64 = 0.14,
    finger_len: f64 = 0.05,
    /// Start configuration for planning and episodes.
    q_home: Vec<f64> = vec![0.6, 0.9, -0.9],
    /// Workspace bounds [x_min, y_min, x_max, y_max], meters.
    bounds: Vec<f64> = vec![-0.30, -0.90, 1.30, 0.90],
});

config_section!(DatagenCfg {
    n_objects: usize = 64,
    /// Max trajectories per object.
    cap: usize = 64,
    /// Fraction of annotations that are feasible grasps.
    feasible_ratio: f64 = 0.7,
    /// Pre-grasp offset used during data generation, meters.
    pregrasp_offset_train: f64 = 0.15,
    /// Pre-grasp pose noise half-ranges (translation m, rotation rad).
    pregrasp_noise_trans: f64 = 0.04,
    pregrasp_noise_rot: f64 = 0.04 * std::f64::consts::PI,
    /// Consecutive planner failures before an object is abandoned.
    failure_threshold: usize = 10,
    /// Damped-least-squares damping for the IK servo.
    lambda_dls: f64 = 0.05,
    /// EE translation speed of the servo planner, m/s.
    servo_speed: f64 = 0.10,
    max_plan_steps: usize = 400,
    /// Obstacle clearance required of planned motions, meters.
    collision_margin: f64 = 0.005,
    /// Terminal EE tolerances for a successful plan.
    ee_tol_pos: f64 = 0.001,
    ee_tol_rot: f64 = 0.01,
    /// Procedural object size range (circumradius), meters.
    object_min_radius: f64 = 0.025,
    object_max_radius: f64 = 0.055,
});

config_section!(ValueNetCfg {
    /// Discount factor for value training.
    gamma_value: f64 = 0.99,
    /// EMA rate for the target network.
    ema_rate: f64 = 5e-3,
    learning_rate: f64 = 1e-4,
    /// Batch composition: distinct clouds x states per cloud.
    batch_clouds: usize = 8,
    batch_states: usize = 16,
    train_steps: usize = 200_000,
    k_ensemble: usize = 1,
    /// Points per sampled observation cloud.
    n_points: usize = 64,
    /// Probability a training cloud is a partial view.
    partial_prob: f64 = 0.5,
    /// Gaussian noise sigma added to cloud points, meters.
    noise_sigma: f64 = 0.002,
    layer_norm: bool = false,
    dropout: f64 = 0.0,
    /// Fraction of objects held out from training for metrics.
    holdout_fraction: f64 = 0.125,
});

config_section!(MpcCfg {
    horizon: usize = 30,
    control_space: String = "acceleration".to_string(),
    init_cov: f64 = 0.5,
    gamma_mpc: f64 = 0.98,
    n_iters: usize = 2,
    cold_start_n_iters: usize = 5,
    step_size_mean: f64 = 0.9,
    step_size_cov: f64 = 0.5,
    beta: f64 = 1.0,
    alpha: f64 = 1.0,
    num_particles: usize = 400,
    update_cov: bool = true,
    kappa: f64 = 0.01,
    null_act_frac: f64 = 0.05,
    sample_mode: String = "best".to_string(),
    best_action: String = "repeat".to_string(),
    squash_fn: String = "clamp".to_string(),
    /// Accepted for fidelity with the reference controller; no effect here.
    n_problems: usize = 1,
    /// Accepted for fidelity with the reference controller; no effect here.
    random_mean: bool = true,
    /// Accepted for fidelity with the reference controller; no effect here.
    use_coo_sparse: bool = true,
    sample_ratio_halton: f64 = 0.3,
    sample_ratio_halton_knot: f64 = 0.7,
    sample_ratio_random: f64 = 0.0,
    sample_ratio_random_knot: f64 = 0.0,
    /// Weight of the value task cost in the total objective.
    omega: f64 = 1000.0,
    /// Ensemble log-sum-exp temperature.
    lambda: f64 = 10.0,
    /// Knots per joint for B-spline particles.
    knots: usize = 6,
    /// World-collision hinge margin, meters.
    activation_margin: f64 = 0.01,
    /// Self-collision hinge margin, meters.
    self_margin: f64 = 0.02,
    weight_collision: f64 = 1.0e6,
    weight_self: f64 = 1.0e6,
    weight_limits: f64 = 1.0e3,
    weight_jerk: f64 = 1.0e-6,
    /// Value-network inference precision: "f32" or "f64".
    value_dtype: String = "f32".to_string(),
});

config_section!(PipelineCfg {
    /// Deployment pre-grasp offset, meters.
    pregrasp_offset_deploy: f64 = 0.10,
    /// Reduced offset for shelf-slot scenes, meters.
    pregrasp_offset_shelf: f64 = 0.06,
    /// Closed-loop control budget per episode.
    mpc_steps: usize = 120,
    /// Noisy-condition half-ranges (translation m, rotation rad = 18 deg).
    noisy_trans: f64 = 0.02,
    noisy_rot: f64 = 18.0_f64.to_radians(),
    /// Predicted-grasp emulation: per-episode systematic bias half-ranges.
    pred_bias_trans: f64 = 0.015,
    pred_bias_rot: f64 = 10.0_f64.to_radians(),
    /// Predicted-grasp emulation: per-annotation jitter half-ranges.
    pred_jitter_trans: f64 = 0.005,
    pred_jitter_rot: f64 = 3.0_f64.to_radians(),
    scenes_per_type: usize = 20,
    n_seeds: usize = 3,
    /// Obstacle clearance required when selecting pre-grasps, meters.
    clearance_margin: f64 = 0.01,
    /// Vertical free space left above shelf-slot targets, meters.
    shelf_clearance: f64 = 0.04,
    clutter_min_obstacles: usize = 3,
    clutter_max_obstacles: usize = 6,
    /// Observation cloud parameters during episodes.
    observe_points: usize = 64,
    observe_noise_sigma: f64 = 0.002,
    observe_partial: bool = false,
    /// Target shift applied by the moving-object suite, meters.
    perturb_delta: f64 = 0.03,
});

/// All tunables of every module. See the section types for field docs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimCfg,
    pub datagen: DatagenCfg,
    pub valuenet: ValueNetCfg,
    pub mpc: MpcCfg,
    pub pipeline: PipelineCfg,
}

impl RunConfig {
    /// Flatten to the on-disk `module.name -> value` map (sorted keys).
    pub fn to_flat(&self) -> BTreeMap<String, Value> {
        let nested = serde_json::to_value(self).expect("config serializes");
        let mut flat = BTreeMap::new();
        if let Value::Object(sections) = nested {
            for (section, body) in sections {
                if let Value::Object(fields) = body {
                    for (field, v) in fields {
                        flat.insert(format!("{section}.{field}"), v);
                    }
                }
            }
        }
        flat
    }

    /// Rebuild from a flat map, rejecting keys that are not in the schema.
    pub fn from_flat(flat: &BTreeMap<String, Value>) -> Result<Self, ConfigError> {
        let schema = RunConfig::default().to_flat();
        let mut sections: BTreeMap<String, serde_json::Map<String, Value>> = BTreeMap::new();
        for (key, value) in flat {
            if !schema.contains_key(key) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
            let (section, field) = key.split_once('.').expect("schema keys are dotted");
            sections
                .entry(section.to_string())
                .or_default()
                .insert(field.to_string(), value.clone());
        }
        let mut nested = serde_json::Map::new();
        for (section, fields) in sections {
            nested.insert(section, Value::Object(fields));
        }
        serde_json::from_value(Value::Object(nested)).map_err(|e| ConfigError::BadValue {
            key: "<config>".to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let flat: BTreeMap<String, Value> =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        Self::from_flat(&flat)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let flat = self.to_flat();
        let text = serde_json::to_string_pretty(&flat).expect("flat map serializes");
        std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Apply one `key=value` override. Values are parsed as JSON; bare words
    /// fall back to strings so `--set mpc.sample_mode=best` works unquoted.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let value: Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut flat = self.to_flat();
        if !flat.contains_key(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        flat.insert(key.to_string(), value);
        let updated = Self::from_flat(&flat).map_err(|e| match e {
            ConfigError::BadValue { message, .. } => ConfigError::BadValue {
                key: key.to_string(),
                message,
            },
            other => other,
        })?;
        *self = updated;
        Ok(())
    }

    /// SHA-256 over the canonical flat serialization; identifies a run setup.
    pub fn hash(&self) -> String {
        let flat = self.to_flat();
        let canon = serde_json::to_string(&flat).expect("flat map serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_reference_constants() {
        let flat = RunConfig::default().to_flat();
        assert_eq!(flat["valuenet.gamma_value"], Value::from(0.99));
        assert_eq!(flat["mpc.omega"], Value::from(1000.0));
        assert_eq!(flat["valuenet.ema_rate"], Value::from(5e-3));
        assert_eq!(flat["datagen.pregrasp_offset_train"], Value::from(0.15));
        assert_eq!(flat["pipeline.pregrasp_offset_deploy"], Value::from(0.10));
        assert_eq!(flat["sim.sdf_resolution"], Value::from(0.01));
        assert_eq!(flat["mpc.num_particles"], Value::from(400));
        assert_eq!(flat["mpc.gamma_mpc"], Value::from(0.98));
        assert_eq!(flat["valuenet.learning_rate"], Value::from(1e-4));
    }

    #[test]
    fn roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let mut cfg = RunConfig::default();
        cfg.set("mpc.num_particles", "128").unwrap();
        cfg.set("valuenet.noise_sigma", "0.0031").unwrap();
        cfg.set("mpc.sample_mode", "best").unwrap();
        cfg.save(&path).unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(cfg, loaded);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("mpc.nonexistent", "1").unwrap_err();
        assert!(err.to_string().contains("mpc.nonexistent"));

        let mut flat = RunConfig::default().to_flat();
        flat.insert("bogus.key".into(), Value::from(1));
        let err = RunConfig::from_flat(&flat).unwrap_err();
        assert!(err.to_string().contains("bogus.key"));
    }

    #[test]
    fn parse_error_carries_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\n  \"sim.dt\": oops\n}").unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        let full = format!("{msg}: {}", {
            use std::error::Error;
            err.source().map(|s| s.to_string()).unwrap_or_default()
        });
        assert!(full.contains("line 2"), "message was: {full}");
    }

    #[test]
    fn set_rejects_type_mismatch() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("mpc.num_particles", "\"many\"").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default().hash();
        let b = RunConfig::default().hash();
        assert_eq!(a, b);
        let mut cfg = RunConfig::default();
        cfg.set("sim.dt", "0.01").unwrap();
        assert_ne!(a, cfg.hash());
    }
}
