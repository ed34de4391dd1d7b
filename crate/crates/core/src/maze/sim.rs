//! Differential-drive kinematics, lidar, observation assembly and the
//! stateful episode environment.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{wrap_angle, Point};
use super::map::{MazeMap, Pose};
use super::rewards::{flat_reward, low_reward};

pub const NUM_BEAMS: usize = 10;
pub const OBS_DIM: usize = 16;

/// Physical constants of the simulated robot and sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Control period in seconds.
    pub dt: f64,
    pub max_range: f64,
    /// Distance under which the robot counts as colliding (l_a).
    pub collision_distance: f64,
    /// Distance under which a goal or subgoal counts as reached (l_b).
    pub goal_distance: f64,
    pub max_linear: f64,
    pub max_angular: f64,
    /// Approach per step (m) at or below which a step counts as making no
    /// progress.
    pub progress_deadband: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.2,
            max_range: 3.5,
            collision_distance: 0.13,
            goal_distance: 0.2,
            max_linear: 0.22,
            max_angular: 1.0,
            progress_deadband: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Point,
    pub heading: f64,
    /// Linear command applied on the previous step (l_p).
    pub last_linear: f64,
    /// Angular command applied on the previous step (a_p).
    pub last_angular: f64,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self {
            position: pose.position,
            heading: pose.heading,
            last_linear: 0.0,
            last_angular: 0.0,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            heading: self.heading,
        }
    }
}

/// Velocity command: linear (m/s) and angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub linear: f64,
    pub angular: f64,
}

impl Action {
    pub const fn new(linear: f64, angular: f64) -> Self {
        Self { linear, angular }
    }
}

/// Raw (unnormalized) low-level observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub lidar: [f64; NUM_BEAMS],
    pub linear: f64,
    pub angular: f64,
    /// Bearing of the active goal relative to the heading, in (−π, π].
    pub goal_bearing: f64,
    /// Euclidean distance to the active goal.
    pub goal_distance: f64,
    pub final_goal: Point,
    pub pose: Pose,
}

impl Observation {
    /// The 16 raw values in layout order: lidar, l_p, a_p, φ₀, d_g, f_g.
    pub fn raw_vector(&self) -> [f64; OBS_DIM] {
        let mut v = [0.0; OBS_DIM];
        v[..NUM_BEAMS].copy_from_slice(&self.lidar);
        v[10] = self.linear;
        v[11] = self.angular;
        v[12] = self.goal_bearing;
        v[13] = self.goal_distance;
        v[14] = self.final_goal.x;
        v[15] = self.final_goal.y;
        v
    }
}

/// Linear scaling of each observation component to roughly unit range.
///
/// Lidar by the sensor range, velocities by their limits, bearing by π,
/// distance by the maze diagonal, goal coordinates by the half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    divisors: [f64; OBS_DIM],
}

impl Scaling {
    pub fn new(map: &MazeMap, params: &SimParams) -> Self {
        let mut divisors = [params.max_range; OBS_DIM];
        divisors[10] = params.max_linear;
        divisors[11] = params.max_angular;
        divisors[12] = PI;
        divisors[13] = map.diagonal();
        divisors[14] = map.half_width();
        divisors[15] = map.half_height();
        Self { divisors }
    }

    pub fn normalize(&self, obs: &Observation) -> [f64; OBS_DIM] {
        let mut v = obs.raw_vector();
        for (x, d) in v.iter_mut().zip(&self.divisors) {
            *x /= d;
        }
        v
    }

    pub fn denormalize(&self, features: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        let mut v = *features;
        for (x, d) in v.iter_mut().zip(&self.divisors) {
            *x *= d;
        }
        v
    }

    /// Replaces the goal-dependent components (bearing and distance) of a
    /// normalized feature vector with values measured from `pose` to `goal`.
    pub fn retarget(&self, features: &[f64; OBS_DIM], pose: Pose, goal: Point) -> [f64; OBS_DIM] {
        let (bearing, distance) = goal_geometry(pose, goal);
        let mut v = *features;
        v[12] = bearing / self.divisors[12];
        v[13] = distance / self.divisors[13];
        v
    }
}

/// Bearing (wrapped) and distance from `pose` to `goal`.
pub fn goal_geometry(pose: Pose, goal: Point) -> (f64, f64) {
    let delta = goal - pose.position;
    let distance = delta.norm();
    let bearing = if distance == 0.0 {
        0.0
    } else {
        wrap_angle(delta.y.atan2(delta.x) - pose.heading)
    };
    (bearing, distance)
}

/// Beam directions relative to the heading: equidistant over [−90°, +90°].
pub fn beam_offsets() -> [f64; NUM_BEAMS] {
    let mut out = [0.0; NUM_BEAMS];
    for (i, o) in out.iter_mut().enumerate() {
        *o = -PI / 2.0 + PI * i as f64 / (NUM_BEAMS - 1) as f64;
    }
    out
}

/// Ranges to the first wall along each beam, capped at `max_range`.
pub fn lidar_scan(map: &MazeMap, pose: Pose, max_range: f64) -> [f64; NUM_BEAMS] {
    let mut ranges = [max_range; NUM_BEAMS];
    for (r, offset) in ranges.iter_mut().zip(beam_offsets()) {
        let dir = Point::from_angle(pose.heading + offset);
        for wall in map.walls() {
            if let Some(t) = wall.ray_hit(pose.position, dir) {
                if t < *r {
                    *r = t;
                }
            }
        }
        *r = r.max(1e-9);
    }
    ranges
}

pub fn observe(
    map: &MazeMap,
    params: &SimParams,
    state: &RobotState,
    active_goal: Point,
    final_goal: Point,
) -> Observation {
    let lidar = lidar_scan(map, state.pose(), params.max_range);
    build_observation(lidar, state, active_goal, final_goal)
}

fn build_observation(
    lidar: [f64; NUM_BEAMS],
    state: &RobotState,
    active_goal: Point,
    final_goal: Point,
) -> Observation {
    let (goal_bearing, goal_distance) = goal_geometry(state.pose(), active_goal);
    Observation {
        lidar,
        linear: state.last_linear,
        angular: state.last_angular,
        goal_bearing,
        goal_distance,
        final_goal,
        pose: state.pose(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    /// Intrinsic reward toward the active subgoal.
    pub low_reward: f64,
    /// Metric reward measured against the final goal.
    pub flat_reward: f64,
    pub collision: bool,
    pub subgoal_reached: bool,
    pub goal_reached: bool,
    /// The commanded action was outside the limits and got clamped.
    pub action_clamped: bool,
    /// The action actually executed.
    pub applied: Action,
}

impl StepOutcome {
    pub fn terminal(&self) -> bool {
        self.collision || self.goal_reached
    }
}

/// Advances the robot by one control period.
pub fn step(
    map: &MazeMap,
    params: &SimParams,
    state: &RobotState,
    action: Action,
    subgoal: Point,
    final_goal: Point,
) -> (RobotState, StepOutcome) {
    let linear = if action.linear.is_nan() {
        0.0
    } else {
        action.linear.clamp(0.0, params.max_linear)
    };
    let angular = if action.angular.is_nan() {
        0.0
    } else {
        action
            .angular
            .clamp(-params.max_angular, params.max_angular)
    };
    let action_clamped = linear != action.linear || angular != action.angular;

    let heading = wrap_angle(state.heading + angular * params.dt);
    let moved = state.position + Point::from_angle(heading) * (linear * params.dt);
    let position = map.clamp_inside(moved, 0.0);
    let next = RobotState {
        position,
        heading,
        last_linear: linear,
        last_angular: angular,
    };

    let lidar = lidar_scan(map, next.pose(), params.max_range);
    let min_range = lidar.iter().copied().fold(f64::INFINITY, f64::min);
    let collision = min_range < params.collision_distance
        || map.swept_clearance(state.position, position) < params.collision_distance;

    let progress = |target: Point| {
        let p = state.position.distance(target) - position.distance(target);
        if p > params.progress_deadband {
            p
        } else {
            0.0
        }
    };
    let sub_progress = progress(subgoal);
    let goal_progress = progress(final_goal);
    let subgoal_reached = !collision && position.distance(subgoal) < params.goal_distance;
    let goal_reached = !collision && position.distance(final_goal) < params.goal_distance;

    let outcome = StepOutcome {
        observation: build_observation(lidar, &next, subgoal, final_goal),
        low_reward: low_reward(collision, subgoal_reached, sub_progress),
        flat_reward: flat_reward(collision, goal_progress, subgoal_reached || goal_reached),
        collision,
        subgoal_reached,
        goal_reached,
        action_clamped,
        applied: Action::new(linear, angular),
    };
    (next, outcome)
}

/// Randomization of the start pose at reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartSpread {
    /// Half-width of the uniform square around the start cell centre (m).
    pub position: f64,
    /// Draw the heading uniformly instead of using the map's start heading.
    pub random_heading: bool,
}

impl Default for StartSpread {
    fn default() -> Self {
        Self {
            position: 0.2,
            random_heading: true,
        }
    }
}

/// One maze, one robot, one final goal.
#[derive(Debug, Clone)]
pub struct MazeEnv {
    map: MazeMap,
    params: SimParams,
    scaling: Scaling,
    spread: StartSpread,
    final_goal: Point,
    state: RobotState,
}

impl MazeEnv {
    pub fn new(map: MazeMap, params: SimParams, spread: StartSpread, final_goal: Point) -> Self {
        let scaling = Scaling::new(&map, &params);
        let state = RobotState::at(map.start());
        Self {
            map,
            params,
            scaling,
            spread,
            final_goal,
            state,
        }
    }

    pub fn map(&self) -> &MazeMap {
        &self.map
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn final_goal(&self) -> Point {
        self.final_goal
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn set_state(&mut self, state: RobotState) {
        self.state = state;
    }

    /// Places the robot at the (possibly jittered) start pose.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Pose {
        let start = self.map.start();
        let mut pose = start;
        if self.spread.position > 0.0 {
            let s = self.spread.position;
            pose.position =
                start.position + Point::new(rng.random_range(-s..=s), rng.random_range(-s..=s));
        }
        if self.spread.random_heading {
            pose.heading = wrap_angle(rng.random_range(-PI..PI));
        }
        self.state = RobotState::at(pose);
        pose
    }

    pub fn observe(&self, active_goal: Point) -> Observation {
        observe(
            &self.map,
            &self.params,
            &self.state,
            active_goal,
            self.final_goal,
        )
    }

    pub fn step(&mut self, action: Action, subgoal: Point) -> StepOutcome {
        let (next, outcome) = step(
            &self.map,
            &self.params,
            &self.state,
            action,
            subgoal,
            self.final_goal,
        );
        self.state = next;
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::{load_map, presets};

    fn corridor() -> MazeMap {
        // 5 cells long, 1 cell wide
        load_map("###########\n#S. . . . #\n###########").unwrap()
    }

    #[test]
    fn corridor_side_beams_are_half_a_metre() {
        let map = corridor();
        let pose = map.start();
        let r = lidar_scan(&map, pose, 3.5);
        assert!((r[0] - 0.5).abs() < 1e-12);
        assert!((r[9] - 0.5).abs() < 1e-12);
        // straight-ahead beams are between 4 and 5: the two middle beams sit at ±10°
        assert!(r.iter().all(|&x| x > 0.0 && x <= 3.5));
    }

    #[test]
    fn open_room_scan_is_symmetric() {
        let text = {
            let mut lines = vec!["#".repeat(21)];
            for r in 0..10 {
                let mut cells = String::from("#");
                for c in 0..10 {
                    cells.push(if r == 4 && c == 4 { 'S' } else { '.' });
                    cells.push(if c == 9 { '#' } else { '.' });
                }
                lines.push(cells);
                lines.push(if r == 9 {
                    "#".repeat(21)
                } else {
                    format!("#{}#", ".".repeat(19))
                });
            }
            lines.join("\n")
        };
        let room = load_map(&text).unwrap();
        let pose = Pose {
            position: Point::new(0.0, 0.0),
            heading: 0.0,
        };
        let r = lidar_scan(&room, pose, 3.5);
        for i in 0..NUM_BEAMS {
            assert!(r[i] <= 3.5);
            assert!((r[i] - r[NUM_BEAMS - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_action_is_a_fixed_point() {
        let map = presets::desk_map();
        let params = SimParams::default();
        let s = RobotState::at(map.start());
        let (n, out) = step(
            &map,
            &params,
            &s,
            Action::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(2.0, 2.0),
        );
        assert_eq!(n.position, s.position);
        assert!(!out.collision);
        assert_eq!(out.low_reward, -8.0);
    }

    #[test]
    fn straight_line_motion() {
        let map = presets::paper_map();
        let params = SimParams::default();
        let mut s = RobotState::at(Pose {
            position: Point::new(0.0, -1.0),
            heading: 0.3,
        });
        let p0 = s.position;
        for _ in 0..5 {
            let (n, out) = step(
                &map,
                &params,
                &s,
                Action::new(0.2, 0.0),
                p0,
                Point::new(9.0, 9.0),
            );
            assert!(!out.collision);
            s = n;
        }
        let d = s.position - p0;
        assert!((d.norm() - 5.0 * 0.2 * 0.2).abs() < 1e-12);
        assert!((d.y.atan2(d.x) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn close_wall_is_a_collision() {
        let map = corridor();
        let params = SimParams::default();
        // facing the east wall at x = 2.5 from 0.10 m away
        let s = RobotState::at(Pose {
            position: Point::new(2.4, 0.0),
            heading: 0.0,
        });
        let (_, out) = step(
            &map,
            &params,
            &s,
            Action::new(0.0, 0.0),
            Point::new(2.4, 0.0),
            Point::new(-2.0, 0.0),
        );
        assert!(out.collision);
        assert!(!out.subgoal_reached && !out.goal_reached);
        assert_eq!(out.low_reward, -500.0);
        assert_eq!(out.flat_reward, -500.0);
    }

    #[test]
    fn near_subgoal_is_reached() {
        let map = presets::paper_map();
        let params = SimParams::default();
        let s = RobotState::at(Pose {
            position: Point::new(0.0, -1.0),
            heading: 0.0,
        });
        let sub = Point::new(0.15, -1.0);
        let (_, out) = step(
            &map,
            &params,
            &s,
            Action::new(0.0, 0.0),
            sub,
            Point::new(4.5, 4.5),
        );
        assert!(out.subgoal_reached);
        assert!(!out.goal_reached);
        assert_eq!(out.low_reward, 100.0);
    }

    #[test]
    fn out_of_range_action_is_clamped() {
        let map = presets::paper_map();
        let params = SimParams::default();
        let s = RobotState::at(Pose {
            position: Point::new(0.0, -1.0),
            heading: 0.0,
        });
        let (n, out) = step(
            &map,
            &params,
            &s,
            Action::new(1.0, -5.0),
            s.position,
            s.position,
        );
        assert!(out.action_clamped);
        assert_eq!(out.applied, Action::new(0.22, -1.0));
        assert_eq!(n.last_linear, 0.22);
        assert!((n.heading + 0.2).abs() < 1e-12);
    }

    #[test]
    fn observation_geometry() {
        let map = presets::paper_map();
        let params = SimParams::default();
        let s = RobotState::at(Pose {
            position: Point::new(0.0, -1.0),
            heading: PI / 2.0,
        });
        let ahead = observe(
            &map,
            &params,
            &s,
            Point::new(0.0, 0.5),
            Point::new(4.5, 4.5),
        );
        assert!(ahead.goal_bearing.abs() < 1e-12);
        let at = observe(&map, &params, &s, s.position, Point::new(4.5, 4.5));
        assert_eq!(at.goal_distance, 0.0);
        let behind = observe(
            &map,
            &params,
            &s,
            Point::new(0.0, -2.0),
            Point::new(4.5, 4.5),
        );
        assert!((behind.goal_bearing - PI).abs() < 1e-12);
    }

    #[test]
    fn scaling_round_trips() {
        let map = presets::paper_map();
        let params = SimParams::default();
        let scaling = Scaling::new(&map, &params);
        let s = RobotState {
            position: Point::new(1.3, -2.2),
            heading: 2.0,
            last_linear: 0.1,
            last_angular: -0.4,
        };
        let obs = observe(
            &map,
            &params,
            &s,
            Point::new(0.5, 0.5),
            Point::new(4.5, 4.5),
        );
        let f = scaling.normalize(&obs);
        assert!(f.iter().all(|x| x.abs() <= 1.0 + 1e-12));
        let back = scaling.denormalize(&f);
        for (a, b) in back.iter().zip(obs.raw_vector()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn retarget_matches_fresh_observation() {
        let map = presets::paper_map();
        let params = SimParams::default();
        let scaling = Scaling::new(&map, &params);
        let s = RobotState {
            position: Point::new(-1.2, 0.4),
            heading: -0.7,
            last_linear: 0.2,
            last_angular: 0.1,
        };
        let fg = Point::new(-2.5, 2.5);
        let a = scaling.normalize(&observe(&map, &params, &s, Point::new(0.0, 0.0), fg));
        let b = scaling.normalize(&observe(&map, &params, &s, Point::new(-1.5, 1.0), fg));
        assert_eq!(scaling.retarget(&a, s.pose(), Point::new(-1.5, 1.0)), b);
    }

    #[test]
    fn reset_is_seeded_and_near_start() {
        use rand::SeedableRng;
        let map = presets::desk_map();
        let start = map.start().position;
        let mut env = MazeEnv::new(
            map,
            SimParams::default(),
            StartSpread::default(),
            Point::new(2.0, 2.0),
        );
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = env.reset(&mut r1);
        let b = env.reset(&mut r2);
        assert_eq!(a, b);
        assert!((a.position.x - start.x).abs() <= 0.2 && (a.position.y - start.y).abs() <= 0.2);
    }

    #[test]
    fn crawling_counts_as_no_progress() {
        let map = presets::paper_map();
        let params = SimParams::default();
        let s = RobotState {
            position: Point::new(-1.5, -3.5),
            heading: 0.0,
            last_linear: 0.0,
            last_angular: 0.0,
        };
        let goal = Point::new(2.0, -3.5);
        // 4 mm per step straight at the goal: inside the 5 mm deadband
        let (_, slow) = step(&map, &params, &s, Action::new(0.02, 0.0), goal, goal);
        assert_eq!((slow.low_reward, slow.flat_reward), (-8.0, -8.0));
        let (_, fast) = step(&map, &params, &s, Action::new(0.2, 0.0), goal, goal);
        assert!((fast.low_reward - 20.0 * 0.04).abs() < 1e-9);
        let open = SimParams {
            progress_deadband: 0.0,
            ..params
        };
        let (_, slow) = step(&map, &open, &s, Action::new(0.02, 0.0), goal, goal);
        assert!((slow.low_reward - 20.0 * 0.004).abs() < 1e-9);
    }
}
