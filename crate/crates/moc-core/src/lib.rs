//! Consistency regularizers for multi-view generation, built from two
//! differentiable primitives: a log-Euclidean alignment term between extended
//! SPD feature descriptors and a margin-based ranking loss on view-order
//! semantic similarities. Both come with analytic gradients, a time-varying
//! weight schedule combines them, and a deterministic synthetic harness
//! optimizes a toy multi-view scene under the joint objective.

pub mod descriptor;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod io;
pub mod schedule;
pub mod spd;
pub mod svo;

pub use error::{Error, Result};

// re-exported so downstream crates use the same matrix types
pub use nalgebra;
