//! Quadruped locomotion laboratory built around a central pattern generator.
//!
//! The control stack is layered: a policy ([`learn`]) sets oscillator drives at 100 Hz,
//! the rhythm generator ([`cpg`]) integrates four phase oscillators at 1 kHz, the
//! pattern-formation layer ([`pattern`]) turns oscillator states into foot targets and
//! joint commands, and [`sim`] advances a rigid trunk with kinematic legs and
//! spring-damper ground contact over flat or gapped terrain. [`sensing`], [`reward`]
//! and [`metrics`] cover observations, reward terms and post-hoc gait analysis.

pub mod cpg;
pub mod env;
pub mod error;
pub mod learn;
pub mod metrics;
pub mod pattern;
pub mod reward;
pub mod scripted;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
