//! Human motion prediction on joint trajectories.
//!
//! Each joint's recent history is lifted to phase space (position plus
//! per-frame displacement). A per-joint encoder runs deformable dilated
//! convolutions over the trajectories of anatomically related joints, a GRU
//! decodes future displacements, and a learned affinity over all predicted
//! (frame, joint) displacements refines them jointly.
//!
//! The crate is self-contained: [`numkernel`] provides the tensors and the
//! reverse-mode tape everything trains on.

#![allow(clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod numkernel;
pub mod phasespace;
pub mod predictor;
pub mod refiner;
pub mod skeleton;
pub mod training;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{MotionError, Result};
pub use numkernel::Tensor;
pub use phasespace::{PhaseTrajectory, PoseSequence, Vec3};
pub use predictor::{AblationSpec, Model, ModelConfig, Prediction};
pub use skeleton::{LimbTag, RelationSet, Skeleton};
