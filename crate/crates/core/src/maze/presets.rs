//! Built-in maps.
//!
//! `PAPER_MAZE` is a 10 × 10 grid of 1 m cells whose targets sit at
//! (−2.5, 2.5), (−2.5, 4.5) and (4.5, 4.5). `DESK_MAZE` is a 5 × 5 grid for
//! quick experiments: target 1 is two metres from the start behind a wall,
//! target 3 is the far corner.

use super::map::{load_map, MazeMap};

pub const PAPER_MAZE: &str = "\
#####################
#....2....#.....#..3#
#.........#.....#...#
#.........#.........#
#########.#.......###
#....1#.............#
#.....#.....#######.#
#.....#.........#...#
#.....#.........#...#
#...............#...#
#.###########...#.###
#........S..#...#...#
#...........#...#...#
#...........#.......#
#...#############...#
#.......#...........#
#####...#.....#.....#
#.......#.....#.....#
#.......#.....#.....#
#.............#.....#
#####################
";

pub const DESK_MAZE: &str = "\
###########
#2......#3#
#.........#
#..1....#.#
#####...#.#
#.......#.#
#.........#
#..S......#
#.........#
#.........#
###########
";

pub fn paper_map() -> MazeMap {
    load_map(PAPER_MAZE).expect("built-in map parses")
}

pub fn desk_map() -> MazeMap {
    load_map(DESK_MAZE).expect("built-in map parses")
}
