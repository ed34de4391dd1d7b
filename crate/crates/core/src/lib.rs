//! Hierarchical DDPG laboratory for 2D maze navigation.
//!
//! - [`nn`]: dense networks with exact gradients and Adam.
//! - [`maze`]: deterministic differential-drive maze simulator and rewards.
//! - [`replay`]: ring-buffer experience replay.
//! - [`agents`]: DDPG, D4PG and the two-level HDDPG learner.
//! - [`harness`]: run configuration, trials, metrics and result files.

pub mod agents;
pub mod harness;
pub mod maze;
pub mod nn;
pub mod replay;
