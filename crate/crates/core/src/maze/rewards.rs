//! Reward tables.
//!
//! All three functions are pure and branch in a fixed precedence order:
//! collision first, then goal/subgoal events, then progress.

pub const COLLISION_REWARD: f64 = -500.0;
pub const SUBGOAL_REWARD: f64 = 100.0;
pub const PROGRESS_GAIN: f64 = 20.0;
pub const NO_PROGRESS_REWARD: f64 = -8.0;
pub const FINAL_GOAL_REWARD: f64 = 1000.0;
pub const DEFAULT_KAPPA: f64 = 0.4;

/// Intrinsic low-level reward. `progress` is the previous distance to the
/// subgoal minus the current one (positive when approaching).
pub fn low_reward(collision: bool, subgoal_reached: bool, progress: f64) -> f64 {
    if collision {
        COLLISION_REWARD
    } else if subgoal_reached {
        SUBGOAL_REWARD
    } else if progress > 0.0 {
        PROGRESS_GAIN * progress
    } else {
        NO_PROGRESS_REWARD
    }
}

/// Outcome part of the high-level reward: −500 on collision, +1000 on
/// reaching the final goal, 0 otherwise.
pub fn high_event_reward(collision: bool, final_reached: bool) -> f64 {
    if collision {
        COLLISION_REWARD
    } else if final_reached {
        FINAL_GOAL_REWARD
    } else {
        0.0
    }
}

/// High-level reward for a closed subgoal segment: the event reward plus
/// `kappa` times the segment's summed low-level reward.
pub fn high_reward(collision: bool, final_reached: bool, low_reward_sum: f64, kappa: f64) -> f64 {
    high_event_reward(collision, final_reached) + kappa * low_reward_sum
}

/// Flat metric reward. `goal_progress` is measured against the final goal.
pub fn flat_reward(collision: bool, goal_progress: f64, subgoal_reached: bool) -> f64 {
    if collision {
        COLLISION_REWARD
    } else if subgoal_reached {
        SUBGOAL_REWARD
    } else if goal_progress > 0.0 {
        PROGRESS_GAIN * goal_progress
    } else {
        NO_PROGRESS_REWARD
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_reward_branches() {
        assert_eq!(low_reward(true, false, 0.3), -500.0);
        assert_eq!(low_reward(true, true, 0.3), -500.0);
        assert_eq!(low_reward(false, true, -0.1), 100.0);
        assert!((low_reward(false, false, 0.05) - 1.0).abs() < 1e-12);
        assert_eq!(low_reward(false, false, 0.0), -8.0);
        assert_eq!(low_reward(false, false, -0.02), -8.0);
    }

    #[test]
    fn high_reward_examples() {
        assert!((high_reward(false, true, 200.0, 0.4) - 1080.0).abs() < 1e-9);
        assert!((high_reward(true, false, -600.0, 0.4) - (-740.0)).abs() < 1e-9);
        assert_eq!(high_reward(false, false, 0.0, 0.4), 0.0);
        assert_eq!(high_reward(true, true, 0.0, 0.4), -500.0);
    }

    #[test]
    fn flat_reward_branches() {
        assert_eq!(flat_reward(true, 0.1, true), -500.0);
        assert!((flat_reward(false, 0.1, false) - 2.0).abs() < 1e-12);
        assert_eq!(flat_reward(false, 0.0, false), -8.0);
        assert_eq!(flat_reward(false, -0.3, true), 100.0);
    }
}
