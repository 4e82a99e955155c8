//! Occupation-kernel principal component analysis (OKPCA) for trajectory
//! fault detection.
//!
//! Trajectories of a dynamical system are embedded into a reproducing-kernel
//! Hilbert space through their occupation kernels, i.e. the RKHS elements
//! representing the functional `g ↦ ∫ g(γ(t)) dt`. Principal components of a
//! set of training trajectories are extracted from the centered Gram matrix
//! of occupation-kernel inner products, and a reconstruction-error statistic
//! classifies fresh trajectories as normal or faulty.
//!
//! The crate also ships a pointwise kernel-PCA baseline, simulators for the
//! two reference experiments (a 2-state academic system and a PID-controlled
//! quadrotor), and an experiment harness with false-positive/false-negative
//! statistics. See the `okpca` binary for the CLI.

pub mod config;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod kpca;
pub mod model;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
pub use kernel::KernelSpec;
pub use model::OkpcaModel;
pub use trajectory::{QuadratureRule, Trajectory};
