//! Fixed-capacity experience replay with uniform sampling.

use rand::Rng;
use thiserror::Error;

use crate::maze::{Pose, OBS_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("cannot sample {requested} records from a buffer holding {available}")]
    NotEnough { requested: usize, available: usize },
    #[error("capacity must be positive")]
    ZeroCapacity,
}

/// Records that can check their own invariants before being stored.
pub trait Validate {
    fn validate(&self) -> Result<(), ReplayError>;
}

/// One low-level step: `(s, subgoal, a, r, s', done)`.
///
/// `subgoal` is the displacement from the segment's start position to the
/// subgoal, divided by the subgoal radius. Actions are in network-head units
/// (`v / l_max`, `ω / a_max`).
#[derive(Debug, Clone, PartialEq)]
pub struct LowTransition {
    pub state: [f64; OBS_DIM],
    pub subgoal: [f64; 2],
    pub action: [f64; 2],
    pub reward: f64,
    pub next_state: [f64; OBS_DIM],
    pub done: bool,
}

impl Validate for LowTransition {
    fn validate(&self) -> Result<(), ReplayError> {
        let finite = self.state.iter().all(|v| v.is_finite())
            && self.next_state.iter().all(|v| v.is_finite())
            && self.subgoal.iter().all(|v| v.is_finite())
            && self.action.iter().all(|v| v.is_finite())
            && self.reward.is_finite();
        if finite {
            Ok(())
        } else {
            Err(ReplayError::Malformed(
                "non-finite value in low-level transition".into(),
            ))
        }
    }
}

/// A low-level state as stored in a high-level record: the normalized
/// features plus the robot pose they were observed from, which is what lets
/// the goal-dependent components be recomputed for another subgoal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowState {
    pub features: [f64; OBS_DIM],
    pub pose: Pose,
}

/// One closed subgoal segment of `c = actions.len()` low-level steps.
#[derive(Debug, Clone, PartialEq)]
pub struct HighTransition {
    /// Robot position when the subgoal was emitted (p_t).
    pub start: [f64; 2],
    pub final_goal: [f64; 2],
    /// Subgoal displacement from `start`, in metres.
    pub subgoal: [f64; 2],
    /// Segment reward R_t.
    pub reward: f64,
    /// Robot position when the segment closed (p_{t+c}).
    pub end: [f64; 2],
    pub states: Vec<LowState>,
    /// Executed low-level actions in head units.
    pub actions: Vec<[f64; 2]>,
    pub done: bool,
}

impl HighTransition {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl Validate for HighTransition {
    fn validate(&self) -> Result<(), ReplayError> {
        if self.actions.is_empty() {
            return Err(ReplayError::Malformed("segment with no steps".into()));
        }
        if self.states.len() != self.actions.len() {
            return Err(ReplayError::Malformed(format!(
                "{} states for {} actions",
                self.states.len(),
                self.actions.len()
            )));
        }
        let finite = self
            .start
            .iter()
            .chain(&self.final_goal)
            .chain(&self.subgoal)
            .chain(&self.end)
            .chain(self.actions.iter().flatten())
            .chain(self.states.iter().flat_map(|s| s.features.iter()))
            .all(|v| v.is_finite())
            && self.reward.is_finite();
        if finite {
            Ok(())
        } else {
            Err(ReplayError::Malformed(
                "non-finite value in high-level transition".into(),
            ))
        }
    }
}

/// Ring buffer that evicts the oldest record once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    /// Index of the oldest record once the buffer has wrapped.
    head: usize,
}

impl<T: Validate> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, record: T) -> Result<(), ReplayError> {
        record.validate()?;
        if self.items.len() < self.capacity {
            self.items.push(record);
        } else {
            self.items[self.head] = record;
            self.head = (self.head + 1) % self.capacity;
        }
        Ok(())
    }

    /// Oldest-to-newest scan of the contents.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    /// `k` records drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<&T>, ReplayError> {
        if k > self.items.len() {
            return Err(ReplayError::NotEnough {
                requested: k,
                available: self.items.len(),
            });
        }
        Ok((0..k)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}
