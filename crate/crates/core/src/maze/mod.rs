//! Deterministic 2D maze simulator: ASCII maps, ray-cast lidar,
//! unicycle kinematics, reward tables and observation assembly.

mod geometry;
mod map;
pub mod presets;
pub mod rewards;
mod sim;
mod trace;

pub use geometry::{wrap_angle, Point, Segment};
pub use map::{load_map, MazeMap, Pose};
pub use rewards::{flat_reward, high_event_reward, high_reward, low_reward};
pub use sim::{
    beam_offsets, goal_geometry, lidar_scan, observe, step, Action, MazeEnv, Observation,
    RobotState, Scaling, SimParams, StartSpread, StepOutcome, NUM_BEAMS, OBS_DIM,
};
pub use trace::{read_trace, write_trace, TraceEvent, TraceRow};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MazeError {
    #[error("map: {0}")]
    Parse(String),
    #[error("trace: {0}")]
    Trace(String),
}
