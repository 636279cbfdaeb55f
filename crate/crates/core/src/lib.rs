//! Intention-aware motion planning for a robot arm sharing a workspace with
//! a person.
//!
//! The crate learns which action a person is performing and how their arm
//! will move next from labeled demonstrations, turns the predicted arm into
//! Gaussian spheres, bounds the probability that the robot touches them and
//! plans smooth robot trajectories that keep that bound under a confidence
//! threshold while replanning as new observations arrive.

pub mod error;
pub mod geometry;
pub mod motion;
pub mod planner;
pub mod prediction;
pub mod rng;
pub mod sim;
pub mod task;

pub use error::{Error, Result};
