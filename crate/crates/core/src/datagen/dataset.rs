//! Trajectory records, sparse cost labels, dataset generation, and the
//! ndjson / flat-binary serialization formats.

use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::geom::Pose2;
use crate::rng::{streams, RngStream};
use crate::sim::arm::{ArmModel, JointState};
use crate::sim::{Polygon, Scene};

use super::objects::generate_object;
use super::plan::plan_reach;
use super::{perturb_pose, pregrasp_from_grasp, sample_grasp_annotations, DatagenError};

const TRAJ_MAGIC: &[u8; 4] = b"VTRJ";

/// Joint-position tolerance of the sparse terminal cost.
pub const COST_JOINT_TOL: f64 = 5e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajStep {
    pub state: JointState,
    pub ee_world: Pose2,
    pub cost: u8,
}

/// One reach motion from a noisy pre-grasp to an annotated grasp, with
/// per-step sparse cost labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub object_id: u64,
    pub feasible: bool,
    pub target_pose: Pose2,
    pub grasp_world: Pose2,
    pub pregrasp_world: Pose2,
    pub steps: Vec<TrajStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Sparse cost: 0 iff every joint is within 5e-3 rad of the goal
/// configuration AND the trajectory's grasp is feasible; 1 otherwise.
pub fn label_costs(mut traj: Trajectory, q_goal: &[f64], feasible: bool) -> Trajectory {
    for step in &mut traj.steps {
        let near = step
            .state
            .q
            .iter()
            .zip(q_goal)
            .all(|(q, g)| (q - g).abs() <= COST_JOINT_TOL);
        step.cost = u8::from(!(near && feasible));
    }
    traj.feasible = feasible;
    traj
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: u64,
    pub polygon: Polygon,
    pub n_traj: usize,
    pub n_success: usize,
}

/// Dataset index: object table, aggregate success fraction, and the
/// provenance (seed + config hash) of the generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub objects: Vec<ObjectEntry>,
    pub success_fraction: f64,
}

impl DatasetManifest {
    pub fn total_trajectories(&self) -> usize {
        self.objects.iter().map(|o| o.n_traj).sum()
    }
}

pub struct LoadedObject {
    pub id: u64,
    pub polygon: Polygon,
    pub trajectories: Vec<Trajectory>,
}

pub struct Dataset {
    pub manifest: DatasetManifest,
    pub objects: Vec<LoadedObject>,
}

struct ObjectResult {
    id: u64,
    polygon: Polygon,
    trajectories: Vec<Trajectory>,
}

fn generate_object_trajectories(
    id: u64,
    cfg: &RunConfig,
    arm: &ArmModel,
    stream: &RngStream,
) -> Result<ObjectResult, DatagenError> {
    let dg = &cfg.datagen;
    let polygon = generate_object(id, stream, dg.object_min_radius, dg.object_max_radius);
    let obj_stream = stream.substream(id);
    let mut ann_rng = obj_stream.substream(0).rng();
    let annotations = sample_grasp_annotations(
        id,
        &polygon,
        dg.cap,
        dg.feasible_ratio,
        arm,
        cfg.sim.friction_cone_half_angle,
        &mut ann_rng,
    )?;

    let reach = arm.reach();
    let mut trajectories = Vec::new();
    let mut consecutive_failures = 0usize;
    for (k, ann) in annotations.iter().enumerate() {
        if trajectories.len() >= dg.cap {
            break;
        }
        let mut rng = obj_stream.substream(1 + k as u64).rng();
        use rand::Rng;
        // Training scenes contain only the object, placed somewhere
        // reachable.
        let radius = rng.random_range(0.45 * reach..0.72 * reach);
        let bearing = rng.random_range(-0.55..0.55f64);
        let orient = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let target_pose = Pose2::new(radius * bearing.cos(), radius * bearing.sin(), orient);
        let scene = Scene::empty(polygon.clone(), target_pose);

        let grasp_world = target_pose.compose(&ann.pose_obj);
        let pregrasp = pregrasp_from_grasp(&grasp_world, dg.pregrasp_offset_train);
        let noisy_pregrasp = perturb_pose(
            &pregrasp,
            dg.pregrasp_noise_trans,
            dg.pregrasp_noise_rot,
            &mut rng,
        );

        let planned = super::ik_solve(arm, &noisy_pregrasp, &cfg.sim.q_home, dg.lambda_dls)
            .and_then(|q_pre| {
                plan_reach(
                    arm,
                    &JointState::at_rest(q_pre),
                    &grasp_world,
                    &scene,
                    dg,
                    cfg.sim.dt,
                )
                .ok()
            });

        match planned {
            Some(steps) if steps.len() >= 5 => {
                consecutive_failures = 0;
                let q_goal = steps.last().unwrap().q.clone();
                let traj_steps = steps
                    .into_iter()
                    .map(|state| {
                        let ee_world = arm.fk(&state.q).expect("planner states are valid");
                        TrajStep {
                            state,
                            ee_world,
                            cost: 1,
                        }
                    })
                    .collect();
                let traj = Trajectory {
                    object_id: id,
                    feasible: ann.feasible,
                    target_pose,
                    grasp_world,
                    pregrasp_world: noisy_pregrasp,
                    steps: traj_steps,
                };
                trajectories.push(label_costs(traj, &q_goal, ann.feasible));
            }
            _ => {
                consecutive_failures += 1;
                if consecutive_failures >= dg.failure_threshold {
                    break;
                }
            }
        }
    }
    Ok(ObjectResult {
        id,
        polygon,
        trajectories,
    })
}

/// Generate the full dataset under `root`: `manifest.json` plus one
/// `objects/<id>.ndjson` per object (and `.traj` flat binaries when
/// `binary` is set). Objects run in parallel on per-object streams; output
/// is written in id order so reruns are bitwise identical.
pub fn generate_dataset(
    cfg: &RunConfig,
    root: &Path,
    binary: bool,
    seed: u64,
) -> Result<DatasetManifest, DatagenError> {
    assert!(cfg.datagen.n_objects >= 1, "need at least one object");
    let arm = ArmModel::from_config(&cfg.sim);
    let stream = RngStream::new(seed, streams::DATAGEN);
    let results: Result<Vec<ObjectResult>, DatagenError> = (0..cfg.datagen.n_objects as u64)
        .into_par_iter()
        .map(|id| generate_object_trajectories(id, cfg, &arm, &stream))
        .collect();
    let results = results?;

    let total: usize = results.iter().map(|r| r.trajectories.len()).sum();
    if total == 0 {
        return Err(DatagenError::EmptyDataset);
    }

    let obj_dir = root.join("objects");
    std::fs::create_dir_all(&obj_dir)?;
    let mut objects = Vec::with_capacity(results.len());
    let mut successes = 0usize;
    for r in &results {
        let mut file = BufWriter::new(std::fs::File::create(
            obj_dir.join(format!("{}.ndjson", r.id)),
        )?);
        for traj in &r.trajectories {
            serde_json::to_writer(&mut file, traj)?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
        if binary {
            write_binary(&obj_dir.join(format!("{}.traj", r.id)), r.id, &r.trajectories)?;
        }
        let n_success = r.trajectories.iter().filter(|t| t.feasible).count();
        successes += n_success;
        objects.push(ObjectEntry {
            id: r.id,
            polygon: r.polygon.clone(),
            n_traj: r.trajectories.len(),
            n_success,
        });
    }
    let manifest = DatasetManifest {
        version: 1,
        seed,
        config_hash: cfg.hash(),
        objects,
        success_fraction: successes as f64 / total as f64,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(root.join("manifest.json"), text)?;
    Ok(manifest)
}

fn push_pose(buf: &mut Vec<u8>, p: &Pose2) {
    buf.extend_from_slice(&(p.x as f32).to_le_bytes());
    buf.extend_from_slice(&(p.y as f32).to_le_bytes());
    buf.extend_from_slice(&(p.theta as f32).to_le_bytes());
}

fn write_binary(path: &Path, object_id: u64, trajs: &[Trajectory]) -> Result<(), DatagenError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(TRAJ_MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&object_id.to_le_bytes());
    buf.extend_from_slice(&(trajs.len() as u32).to_le_bytes());
    let dof = trajs.first().map_or(0, |t| t.steps[0].state.q.len());
    buf.extend_from_slice(&(dof as u32).to_le_bytes());
    for t in trajs {
        buf.push(u8::from(t.feasible));
        buf.extend_from_slice(&(t.steps.len() as u32).to_le_bytes());
        push_pose(&mut buf, &t.target_pose);
        push_pose(&mut buf, &t.grasp_world);
        push_pose(&mut buf, &t.pregrasp_world);
        for s in &t.steps {
            buf.extend_from_slice(&(s.state.t as f32).to_le_bytes());
            for arr in [&s.state.q, &s.state.qd, &s.state.qdd] {
                for v in arr.iter() {
                    buf.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            push_pose(&mut buf, &s.ee_world);
            buf.push(s.cost);
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Read one `.traj` flat binary back (values come back as f32-precision).
pub fn read_binary(path: &Path) -> Result<Vec<Trajectory>, DatagenError> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8], DatagenError> {
        if *off + n > raw.len() {
            return Err(DatagenError::Corrupt(format!(
                "{}: truncated at byte {}",
                path.display(),
                off
            )));
        }
        let s = &raw[*off..*off + n];
        *off += n;
        Ok(s)
    };
    if take(&mut off, 4)? != TRAJ_MAGIC {
        return Err(DatagenError::Corrupt(format!(
            "{}: bad magic",
            path.display()
        )));
    }
    let rd_u32 =
        |o: &mut usize| -> Result<u32, DatagenError> { Ok(u32::from_le_bytes(take(o, 4)?.try_into().unwrap())) };
    let rd_f32 =
        |o: &mut usize| -> Result<f32, DatagenError> { Ok(f32::from_le_bytes(take(o, 4)?.try_into().unwrap())) };
    let _version = rd_u32(&mut off)?;
    let object_id = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
    let n_traj = rd_u32(&mut off)? as usize;
    let dof = rd_u32(&mut off)? as usize;
    let mut rd_pose = |o: &mut usize| -> Result<Pose2, DatagenError> {
        let x = rd_f32(o)? as f64;
        let y = rd_f32(o)? as f64;
        let t = rd_f32(o)? as f64;
        Ok(Pose2 { x, y, theta: t })
    };
    let mut out = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let feasible = take(&mut off, 1)?[0] != 0;
        let n_steps = rd_u32(&mut off)? as usize;
        let target_pose = rd_pose(&mut off)?;
        let grasp_world = rd_pose(&mut off)?;
        let pregrasp_world = rd_pose(&mut off)?;
        let mut steps = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let t = rd_f32(&mut off)? as f64;
            let mut arrs = [vec![0.0; dof], vec![0.0; dof], vec![0.0; dof]];
            for arr in &mut arrs {
                for v in arr.iter_mut() {
                    *v = rd_f32(&mut off)? as f64;
                }
            }
            let ee_world = rd_pose(&mut off)?;
            let cost = take(&mut off, 1)?[0];
            let [q, qd, qdd] = arrs;
            steps.push(TrajStep {
                state: JointState { q, qd, qdd, t },
                ee_world,
                cost,
            });
        }
        out.push(Trajectory {
            object_id,
            feasible,
            target_pose,
            grasp_world,
            pregrasp_world,
            steps,
        });
    }
    Ok(out)
}

pub fn load_manifest(root: &Path) -> Result<DatasetManifest, DatagenError> {
    let text = std::fs::read_to_string(root.join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Load the full dataset (ndjson trajectories keyed by the manifest).
pub fn load_dataset(root: &Path) -> Result<Dataset, DatagenError> {
    let manifest = load_manifest(root)?;
    let mut objects = Vec::with_capacity(manifest.objects.len());
    for entry in &manifest.objects {
        let path = root.join("objects").join(format!("{}.ndjson", entry.id));
        let file = std::fs::File::open(&path)?;
        let mut trajectories = Vec::with_capacity(entry.n_traj);
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            trajectories.push(serde_json::from_str(&line)?);
        }
        if trajectories.len() != entry.n_traj {
            return Err(DatagenError::Corrupt(format!(
                "object {}: manifest says {} trajectories, file has {}",
                entry.id,
                entry.n_traj,
                trajectories.len()
            )));
        }
        objects.push(LoadedObject {
            id: entry.id,
            polygon: entry.polygon.clone(),
            trajectories,
        });
    }
    Ok(Dataset { manifest, objects })
}
