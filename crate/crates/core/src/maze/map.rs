//! ASCII maze maps.
//!
//! A map of `W × H` one-metre cells is written as `2H + 1` lines of `2W + 1`
//! characters. Odd/odd positions are cells, the characters between two cells
//! are the edge separating them, and even/even positions are corner posts
//! (ignored):
//!
//! ```text
//! #########
//! #S. . .1#
//! # ### # #
//! #. .#. .#
//! #########
//! ```
//!
//! Cell legend: `.` or space free, `S` start, `1`–`9` named targets, `#` a
//! solid cell. Edge legend: `#` wall, anything else open. The outer boundary
//! is always walled. The origin sits at the maze centre with `+y` pointing
//! to the top line, so cell `(row, col)` is centred at
//! `(col + 0.5 − W/2, H/2 − row − 0.5)`.

use std::collections::BTreeMap;
use std::str::FromStr;

use super::geometry::{Point, Segment};
use super::MazeError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeMap {
    width: usize,
    height: usize,
    walls: Vec<Segment>,
    solid: Vec<bool>,
    start: Pose,
    targets: BTreeMap<u8, Point>,
}

impl MazeMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn half_width(&self) -> f64 {
        self.width as f64 / 2.0
    }

    pub fn half_height(&self) -> f64 {
        self.height as f64 / 2.0
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn with_start_heading(mut self, heading: f64) -> Self {
        self.start.heading = heading;
        self
    }

    /// Named targets keyed by their digit (`1` for the first scenario target).
    pub fn targets(&self) -> &BTreeMap<u8, Point> {
        &self.targets
    }

    pub fn target(&self, name: u8) -> Option<Point> {
        self.targets.get(&name).copied()
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        Point::new(
            col as f64 + 0.5 - self.half_width(),
            self.half_height() - row as f64 - 0.5,
        )
    }

    /// Cell containing `p`, if `p` lies inside the map.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let col = (p.x + self.half_width()).floor();
        let row = (self.half_height() - p.y).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x.abs() <= self.half_width() && p.y.abs() <= self.half_height()
    }

    pub fn is_solid(&self, row: usize, col: usize) -> bool {
        self.solid[row * self.width + col]
    }

    /// Distance along the ray `origin + t·dir` (unit `dir`) to the nearest
    /// wall, or infinity.
    pub fn ray_distance(&self, origin: Point, dir: Point) -> f64 {
        self.walls
            .iter()
            .filter_map(|w| w.ray_hit(origin, dir))
            .fold(f64::INFINITY, f64::min)
    }

    /// Clamps `p` into the map shrunk by `margin` on every side.
    pub fn clamp_inside(&self, p: Point, margin: f64) -> Point {
        let hx = (self.half_width() - margin).max(0.0);
        let hy = (self.half_height() - margin).max(0.0);
        Point::new(p.x.clamp(-hx, hx), p.y.clamp(-hy, hy))
    }

    /// Shortest distance from `p` to any wall.
    pub fn clearance(&self, p: Point) -> f64 {
        self.walls
            .iter()
            .map(|w| w.distance_to_point(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Shortest distance from the swept path `from → to` to any wall.
    pub fn swept_clearance(&self, from: Point, to: Point) -> f64 {
        let path = Segment::new(from, to);
        self.walls
            .iter()
            .map(|w| w.distance_to_segment(&path))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Parses the ASCII format described in the module docs.
pub fn load_map(text: &str) -> Result<MazeMap, MazeError> {
    let lines: Vec<Vec<char>> = text
        .lines()
        .map(|l| l.trim_end_matches('\r').chars().collect::<Vec<_>>())
        .collect::<Vec<_>>();
    // tolerate trailing blank lines
    let end = lines
        .iter()
        .rposition(|l| !l.iter().all(|c| c.is_whitespace()))
        .map_or(0, |i| i + 1);
    let lines = &lines[..end];
    if lines.is_empty() {
        return Err(MazeError::Parse("empty map".into()));
    }
    let cols = lines[0].len();
    if let Some((i, l)) = lines.iter().enumerate().find(|(_, l)| l.len() != cols) {
        return Err(MazeError::Parse(format!(
            "line {} has {} characters, expected {cols}",
            i + 1,
            l.len()
        )));
    }
    let rows = lines.len();
    if rows < 3 || cols < 3 || rows % 2 == 0 || cols % 2 == 0 {
        return Err(MazeError::Parse(format!(
            "grid must be (2H+1) x (2W+1) characters, got {rows} x {cols}"
        )));
    }
    let (height, width) = ((rows - 1) / 2, (cols - 1) / 2);
    let half_w = width as f64 / 2.0;
    let half_h = height as f64 / 2.0;

    let mut solid = vec![false; width * height];
    let mut start = None;
    let mut targets = BTreeMap::new();
    for (r, line) in lines.iter().enumerate() {
        for (c, &ch) in line.iter().enumerate() {
            let is_cell = r % 2 == 1 && c % 2 == 1;
            match ch {
                'S' | '1'..='9' if !is_cell => {
                    return Err(MazeError::Parse(format!(
                        "'{ch}' at line {} column {} sits inside a wall",
                        r + 1,
                        c + 1
                    )));
                }
                '#' | '.' | ' ' | '+' | '-' | '|' => {}
                'S' | '1'..='9' => {}
                other => {
                    return Err(MazeError::Parse(format!(
                        "unknown character '{other}' at line {} column {}",
                        r + 1,
                        c + 1
                    )));
                }
            }
            if !is_cell {
                continue;
            }
            let (row, col) = ((r - 1) / 2, (c - 1) / 2);
            let center = Point::new(col as f64 + 0.5 - half_w, half_h - row as f64 - 0.5);
            match ch {
                '#' => solid[row * width + col] = true,
                'S' => {
                    if start.is_some() {
                        return Err(MazeError::Parse("more than one start cell".into()));
                    }
                    start = Some(Pose {
                        position: center,
                        heading: 0.0,
                    });
                }
                d @ '1'..='9' => {
                    let name = d as u8 - b'0';
                    if targets.insert(name, center).is_some() {
                        return Err(MazeError::Parse(format!("target {d} defined twice")));
                    }
                }
                _ => {}
            }
        }
    }
    let start = start.ok_or_else(|| MazeError::Parse("missing start cell 'S'".into()))?;

    // horizontal edges: line r = 2k lies at y = half_h - k
    let mut h_edge = vec![vec![false; width]; height + 1];
    // vertical edges: column c = 2k lies at x = k - half_w
    let mut v_edge = vec![vec![false; width + 1]; height];
    for k in 0..=height {
        for col in 0..width {
            let boundary = k == 0 || k == height;
            let marked = lines[2 * k][2 * col + 1] == '#';
            let solid_adj =
                (k > 0 && solid[(k - 1) * width + col]) || (k < height && solid[k * width + col]);
            h_edge[k][col] = boundary || marked || solid_adj;
        }
    }
    for row in 0..height {
        for k in 0..=width {
            let boundary = k == 0 || k == width;
            let marked = lines[2 * row + 1][2 * k] == '#';
            let solid_adj =
                (k > 0 && solid[row * width + k - 1]) || (k < width && solid[row * width + k]);
            v_edge[row][k] = boundary || marked || solid_adj;
        }
    }

    // merge collinear runs into single segments
    let mut walls = Vec::new();
    for (k, edges) in h_edge.iter().enumerate() {
        let y = half_h - k as f64;
        let mut col = 0;
        while col < width {
            if edges[col] {
                let begin = col;
                while col < width && edges[col] {
                    col += 1;
                }
                walls.push(Segment::new(
                    Point::new(begin as f64 - half_w, y),
                    Point::new(col as f64 - half_w, y),
                ));
            } else {
                col += 1;
            }
        }
    }
    for k in 0..=width {
        let x = k as f64 - half_w;
        let mut row = 0;
        while row < height {
            if v_edge[row][k] {
                let begin = row;
                while row < height && v_edge[row][k] {
                    row += 1;
                }
                walls.push(Segment::new(
                    Point::new(x, half_h - begin as f64),
                    Point::new(x, half_h - row as f64),
                ));
            } else {
                row += 1;
            }
        }
    }

    Ok(MazeMap {
        width,
        height,
        walls,
        solid,
        start,
        targets,
    })
}

impl FromStr for MazeMap {
    type Err = MazeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        load_map(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::presets;

    #[test]
    fn single_cell_has_four_walls() {
        let map = load_map("###\n#S#\n###\n").unwrap();
        assert_eq!((map.width(), map.height()), (1, 1));
        assert_eq!(map.walls().len(), 4);
        assert_eq!(map.start().position, Point::new(0.0, 0.0));
        let total: f64 = map.walls().iter().map(|w| w.length()).sum();
        assert_eq!(total, 4.0);
    }

    #[test]
    fn boundary_is_walled_even_when_text_is_open() {
        let map = load_map("...\n.S.\n...").unwrap();
        assert_eq!(map.walls().len(), 4);
    }

    #[test]
    fn missing_start_is_an_error() {
        assert!(matches!(
            load_map("###\n#.#\n###"),
            Err(MazeError::Parse(_))
        ));
    }

    #[test]
    fn ragged_and_even_grids_are_errors() {
        assert!(load_map("###\n#S\n###").is_err());
        assert!(load_map("####\n#S.#\n####").is_err());
        assert!(load_map("").is_err());
    }

    #[test]
    fn target_on_wall_position_is_an_error() {
        assert!(load_map("#####\n#S1.#\n#####").is_err());
        assert!(load_map("#####\n#S#1#\n#####").is_ok());
    }

    #[test]
    fn duplicate_start_is_an_error() {
        assert!(load_map("#####\n#S.S#\n#####").is_err());
    }

    #[test]
    fn paper_maze_targets() {
        let map = presets::paper_map();
        assert_eq!((map.width(), map.height()), (10, 10));
        assert_eq!(map.targets().len(), 3);
        assert_eq!(map.target(1), Some(Point::new(-2.5, 2.5)));
        assert_eq!(map.target(2), Some(Point::new(-2.5, 4.5)));
        assert_eq!(map.target(3), Some(Point::new(4.5, 4.5)));
        for (_, t) in map.targets() {
            let (r, c) = map.cell_of(*t).unwrap();
            assert!(!map.is_solid(r, c));
        }
    }

    #[test]
    fn interior_walls_are_merged() {
        let text = "\
#######
#S. . #
#####.#
#1. . #
#######";
        let map = load_map(text).unwrap();
        // 4 boundary segments + one interior run of length 2
        assert_eq!(map.walls().len(), 5);
        assert!(map
            .walls()
            .iter()
            .any(|w| (w.length() - 2.0).abs() < 1e-12 && w.a.y == 0.0));
    }

    #[test]
    fn cell_lookup_round_trips() {
        let map = presets::paper_map();
        for r in 0..10 {
            for c in 0..10 {
                assert_eq!(map.cell_of(map.cell_center(r, c)), Some((r, c)));
            }
        }
        assert_eq!(map.cell_of(Point::new(6.0, 0.0)), None);
    }
}
