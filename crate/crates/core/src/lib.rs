//! Value-guided sampling-based MPC for planar grasping.
//!
//! The crate is organized around the stages of the pipeline:
//!
//! - [`geom`], [`rng`], [`config`] — shared pose/cloud primitives, seeded
//!   RNG streams, and the flat-key run configuration.
//! - [`sim`] — planar kinematic world: N-link arm, polygonal scenes, signed
//!   distance fields, point-cloud observation, and grasp feasibility.
//! - [`datagen`] — offline grasp-trajectory dataset generation.
//! - [`valuenet`] — from-scratch point-cloud value function trained with a
//!   one-step Bellman objective against an EMA target network.
//! - [`mpc`] — MPPI over joint accelerations with Halton/B-spline sampling
//!   and value/collision/bounds cost terms.
//! - [`pipeline`] — episode execution, baselines, and benchmark suites.
//! - [`cli`] — the `valmpc` command-line entry point.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod geom;
pub mod mpc;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod valuenet;

pub use config::RunConfig;
pub use geom::{Frame, PointCloud2, Pose2};
pub use rng::RngStream;
