//! Subgoal geometry, action decoding and relabeling of stored subgoals.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::AgentError;
use crate::maze::{Action, MazeMap, Point, Scaling, SimParams, OBS_DIM};
use crate::nn::{Matrix, MlpNet};
use crate::replay::HighTransition;

/// Candidates per record: the stored subgoal, the achieved displacement, and
/// eight Gaussian samples around the latter.
pub const NUM_CANDIDATES: usize = 10;

/// Decodes the low actor's head for one normalized observation into a
/// velocity command. Returns the command and the raw head values.
pub fn select_low_action(
    actor: &MlpNet,
    features: &[f64; OBS_DIM],
    params: &SimParams,
) -> Result<(Action, [f64; 2]), AgentError> {
    let head = actor.forward(features)?;
    let head = [head[0], head[1]];
    Ok((
        Action::new(head[0] * params.max_linear, head[1] * params.max_angular),
        head,
    ))
}

/// Where subgoals may be placed relative to the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgoalGeometry {
    /// Largest displacement from the robot, in metres.
    pub radius: f64,
    /// Smallest displacement; keeps a fresh subgoal from counting as
    /// reached on the spot.
    pub min_distance: f64,
    /// Clearance kept from the outer boundary and, with `line_of_sight`,
    /// from the first wall in the subgoal's direction.
    pub margin: f64,
    /// Shorten displacements that would cross a wall.
    pub line_of_sight: bool,
}

impl SubgoalGeometry {
    /// Maps a 2-d head in `[−1, 1]²` onto the annulus between `min_distance`
    /// and `radius`. The head is first projected into the unit disc; its norm
    /// then sets the distance linearly and its direction the bearing. A zero
    /// head points along +x.
    pub fn displacement(&self, head: [f64; 2]) -> Point {
        let p = Point::new(head[0], head[1]);
        let n = p.norm();
        let dir = if n > 0.0 {
            p * (1.0 / n)
        } else {
            Point::new(1.0, 0.0)
        };
        dir * (self.min_distance + (self.radius - self.min_distance) * n.min(1.0))
    }

    /// Inverse of [`displacement`](Self::displacement) on the annulus.
    /// Shorter displacements map to norm 0, longer ones to norm 1.
    pub fn head(&self, displacement: Point) -> [f64; 2] {
        let n = displacement.norm();
        if n == 0.0 {
            return [0.0, 0.0];
        }
        let span = self.radius - self.min_distance;
        let t = if span > 0.0 {
            ((n - self.min_distance) / span).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let p = displacement * (t / n);
        [p.x, p.y]
    }

    /// Pulls a displacement into the annulus along its own direction.
    pub fn fit(&self, displacement: Point) -> Point {
        let n = displacement.norm();
        let dir = if n > 0.0 {
            displacement * (1.0 / n)
        } else {
            Point::new(1.0, 0.0)
        };
        dir * n.clamp(self.min_distance, self.radius)
    }

    /// Absolute subgoal for `displacement` from `position`.
    ///
    /// With `line_of_sight`, the displacement is cut back to stop `margin`
    /// short of the first wall on its way, though never below
    /// `min_distance`; a subgoal kept at the floor may then lie behind a
    /// wall and be unreachable. Otherwise it is clamped inside the outer
    /// boundary.
    pub fn place(&self, map: &MazeMap, position: Point, displacement: Point) -> Point {
        let n = displacement.norm();
        if !self.line_of_sight {
            return place_subgoal(map, position, displacement, self.margin);
        }
        if n == 0.0 {
            return position;
        }
        let dir = displacement * (1.0 / n);
        let free = map.ray_distance(position, dir) - self.margin;
        if free >= n {
            position + displacement
        } else {
            position + dir * free.max(self.min_distance.min(n))
        }
    }
}

/// Absolute subgoal for a displacement from `position`, clamped inside the
/// maze boundary shrunk by `margin`. The result never lies farther from
/// `position` than the displacement did.
pub fn place_subgoal(map: &MazeMap, position: Point, displacement: Point, margin: f64) -> Point {
    let target = map.clamp_inside(position + displacement, margin);
    let reach = displacement.norm();
    let moved = target - position;
    let n = moved.norm();
    if n > reach && n > 0.0 {
        // only possible when `position` itself sits outside the shrunk box
        position + moved * (reach / n)
    } else {
        target
    }
}

/// Runs the (perturbed) high actor and returns the absolute subgoal.
pub fn select_subgoal(
    actor: &MlpNet,
    state: &[f64; 4],
    position: Point,
    map: &MazeMap,
    geometry: &SubgoalGeometry,
) -> Result<Point, AgentError> {
    let head = actor.forward(state)?;
    Ok(geometry.place(map, position, geometry.displacement([head[0], head[1]])))
}

/// The candidate displacements for one record, in metres from its start.
pub fn relabel_candidates<R: Rng + ?Sized>(
    record: &HighTransition,
    map: &MazeMap,
    geometry: &SubgoalGeometry,
    std: f64,
    rng: &mut R,
) -> Result<[Point; NUM_CANDIDATES], AgentError> {
    let normal = Normal::new(0.0, std)
        .map_err(|e| AgentError::Config(format!("candidate std {std}: {e}")))?;
    let start = Point::new(record.start[0], record.start[1]);
    let achieved = Point::new(
        record.end[0] - record.start[0],
        record.end[1] - record.start[1],
    );
    let fit = |d: Point| geometry.place(map, start, geometry.fit(d)) - start;
    let mut out = [Point::default(); NUM_CANDIDATES];
    out[0] = Point::new(record.subgoal[0], record.subgoal[1]);
    out[1] = fit(achieved);
    for c in out.iter_mut().skip(2) {
        let noise = Point::new(normal.sample(rng), normal.sample(rng));
        *c = fit(achieved + noise);
    }
    Ok(out)
}

/// Log-likelihood scores `−½ Σ‖a_i − π(s_i; g)‖²` of each candidate for each
/// record, evaluated in one batched forward pass. `scores[r][k]` belongs to
/// record `r` and candidate `k`.
pub fn candidate_scores(
    actor: &MlpNet,
    scaling: &Scaling,
    records: &[&HighTransition],
    candidates: &[[Point; NUM_CANDIDATES]],
) -> Result<Vec<[f64; NUM_CANDIDATES]>, AgentError> {
    candidate_scores_limited(actor, scaling, records, candidates, 0)
}

/// Indices of at most `limit` evenly spaced steps out of `len`, always
/// including the first. A `limit` of 0 keeps every step.
pub fn scored_steps(len: usize, limit: usize) -> Vec<usize> {
    if limit == 0 || len <= limit {
        (0..len).collect()
    } else {
        (0..limit).map(|j| j * len / limit).collect()
    }
}

/// [`candidate_scores`] summing over at most `step_limit` evenly spaced steps
/// of each record (0 for all of them).
pub fn candidate_scores_limited(
    actor: &MlpNet,
    scaling: &Scaling,
    records: &[&HighTransition],
    candidates: &[[Point; NUM_CANDIDATES]],
    step_limit: usize,
) -> Result<Vec<[f64; NUM_CANDIDATES]>, AgentError> {
    if records.len() != candidates.len() {
        return Err(AgentError::Config(
            "one candidate set per record required".into(),
        ));
    }
    if records.iter().any(|r| r.is_empty()) {
        return Err(AgentError::Config("record without steps".into()));
    }
    let steps: Vec<Vec<usize>> = records
        .iter()
        .map(|r| scored_steps(r.len(), step_limit))
        .collect();
    let rows: usize = steps.iter().map(|s| s.len() * NUM_CANDIDATES).sum();
    let mut input = Matrix::zeros(rows, OBS_DIM);
    let mut row = 0;
    for ((record, cands), idx) in records.iter().zip(candidates).zip(&steps) {
        let start = Point::new(record.start[0], record.start[1]);
        for c in cands {
            let goal = start + *c;
            for &i in idx {
                let s = &record.states[i];
                input
                    .row_mut(row)
                    .copy_from_slice(&scaling.retarget(&s.features, s.pose, goal));
                row += 1;
            }
        }
    }
    let out = actor.forward_batch(&input)?;
    let mut scores = Vec::with_capacity(records.len());
    let mut row = 0;
    for (record, idx) in records.iter().zip(&steps) {
        let mut s = [0.0; NUM_CANDIDATES];
        for score in s.iter_mut() {
            let mut sq = 0.0;
            for &i in idx {
                let (a, o) = (record.actions[i], out.row(row));
                sq += (a[0] - o[0]).powi(2) + (a[1] - o[1]).powi(2);
                row += 1;
            }
            *score = -0.5 * sq;
        }
        scores.push(s);
    }
    Ok(scores)
}

/// Index of the highest score; the earliest wins ties.
pub fn best_candidate(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Relabels one record: the candidate displacement whose regenerated action
/// sequence best matches the stored one under the current low actor.
pub fn offpolicy_correct<R: Rng + ?Sized>(
    actor: &MlpNet,
    scaling: &Scaling,
    map: &MazeMap,
    record: &HighTransition,
    geometry: &SubgoalGeometry,
    std: f64,
    rng: &mut R,
) -> Result<Point, AgentError> {
    if record.is_empty() {
        return Err(AgentError::Config("record without steps".into()));
    }
    let cands = relabel_candidates(record, map, geometry, std, rng)?;
    let scores = candidate_scores(actor, scaling, &[record], &[cands])?;
    Ok(cands[best_candidate(&scores[0])])
}
