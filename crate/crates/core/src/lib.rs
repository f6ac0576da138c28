//! Collaborative attitude estimation on SO(3).
//!
//! Each agent runs a local extended Kalman filter driven by gyroscope input
//! and known-direction measurements. A neighbour that measures the agent's
//! relative attitude shares that measurement together with its own estimate;
//! the receiving agent transports the shared distribution into its own
//! coordinates and fuses it with a convex-combination-ellipsoid rule.
//!
//! Modules, bottom-up:
//!
//! - [`so3`]: exponential, logarithm, Jacobians, adjoints.
//! - [`gaussian`]: concentrated Gaussians and their coordinate changes.
//! - [`ekf`]: single-agent predict / directional update / reset.
//! - [`fusion`]: relative-measurement preprocessing and ellipsoidal fusion.
//! - [`sim`]: trajectories, sensors, scenario loop and Monte-Carlo driver.
//! - [`config`], [`report`], [`selftest`]: batch plumbing used by the CLI.

pub mod config;
pub mod ekf;
pub mod error;
pub mod fusion;
pub mod gaussian;
pub mod report;
pub mod selftest;
pub mod sim;
pub mod so3;

pub use error::{Error, Result};
pub use gaussian::{ConcentratedGaussian, SpdMatrix3};
pub use so3::{Matrix3, Rotation, Vec3};
