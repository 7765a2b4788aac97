//! Multistage maze-navigation diagrams.
//!
//! Stage `t` (1-based) has a hidden position `Pt`, four wall sensors
//! `StN`, `StE`, `StS`, `StW` and a move decision `Dt`. The move lands in
//! `P(t+1)`; the value is 1 when the final position `P(T+1)` is the goal.
//!
//! # Grid format
//!
//! A maze of `W x H` cells is `2H + 1` lines of `2W + 1` characters. Cell
//! `(r, c)` sits at line `2r + 1`, column `2c + 1`; it is the goal when that
//! character is `G`, open otherwise. A `-` at line `2r`, column `2c + 1` is a
//! wall on the north side of the cell, a `|` at line `2r + 1`, column `2c` a
//! wall on its west side. Corners (`+`) are decorative and the outer boundary
//! is always walled.
//!
//! ```text
//! +-+-+
//! |G  |
//! + +-+
//! |   |
//! +-+-+
//! ```

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Decisions, InfluenceDiagram, ValueTree, Variable};

pub const DIRECTIONS: [&str; 4] = ["N", "E", "S", "W"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    /// Per cell (row-major), wall flags in N, E, S, W order.
    pub walls: Vec<[bool; 4]>,
    pub goal: usize,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Grid> {
        let lines: Vec<Vec<char>> = text
            .lines()
            .map(|l| l.trim_end().chars().collect::<Vec<_>>())
            .filter(|l| !l.is_empty())
            .collect();
        if lines.len() < 3 || lines.len().is_multiple_of(2) {
            return Err(Error::Invalid("maze grid needs an odd number (>= 3) of lines".into()));
        }
        let cols = lines[0].len();
        if cols < 3 || cols.is_multiple_of(2) {
            return Err(Error::Invalid("maze grid needs an odd line width (>= 3)".into()));
        }
        let height = lines.len() / 2;
        let width = cols / 2;
        let at = |r: usize, c: usize| lines[r].get(c).copied().unwrap_or(' ');
        let mut walls = vec![[false; 4]; width * height];
        let mut goal = None;
        for r in 0..height {
            for c in 0..width {
                let cell = r * width + c;
                if at(2 * r + 1, 2 * c + 1) == 'G' {
                    if goal.is_some() {
                        return Err(Error::Invalid("maze grid has more than one goal".into()));
                    }
                    goal = Some(cell);
                }
                walls[cell] = [
                    r == 0 || at(2 * r, 2 * c + 1) == '-',
                    c + 1 == width || at(2 * r + 1, 2 * c + 2) == '|',
                    r + 1 == height || at(2 * r + 2, 2 * c + 1) == '-',
                    c == 0 || at(2 * r + 1, 2 * c) == '|',
                ];
            }
        }
        let goal = goal.ok_or_else(|| Error::Invalid("maze grid has no goal cell `G`".into()))?;
        Ok(Grid { width, height, walls, goal })
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Destination of moving from `cell` in direction `dir`; walls block.
    pub fn step(&self, cell: usize, dir: usize) -> usize {
        if self.walls[cell][dir] {
            return cell;
        }
        match dir {
            0 => cell - self.width,
            1 => cell + 1,
            2 => cell + self.width,
            _ => cell - 1,
        }
    }

    /// A random maze: a depth-first spanning tree with each remaining
    /// interior wall knocked out with probability `extra_openings`.
    pub fn random(width: usize, height: usize, extra_openings: f64, rng: &mut impl Rng) -> Grid {
        let n = width * height;
        let mut walls = vec![[true; 4]; n];
        let mut visited = vec![false; n];
        let start = rng.random_range(0..n);
        let mut stack = vec![start];
        visited[start] = true;
        let neighbour = |cell: usize, dir: usize| -> Option<usize> {
            let (r, c) = (cell / width, cell % width);
            match dir {
                0 if r > 0 => Some(cell - width),
                1 if c + 1 < width => Some(cell + 1),
                2 if r + 1 < height => Some(cell + width),
                3 if c > 0 => Some(cell - 1),
                _ => None,
            }
        };
        while let Some(&cell) = stack.last() {
            let mut dirs: Vec<usize> = (0..4)
                .filter(|&d| neighbour(cell, d).is_some_and(|m| !visited[m]))
                .collect();
            if dirs.is_empty() {
                stack.pop();
                continue;
            }
            dirs.shuffle(rng);
            let d = dirs[0];
            let next = neighbour(cell, d).expect("checked");
            walls[cell][d] = false;
            walls[next][(d + 2) % 4] = false;
            visited[next] = true;
            stack.push(next);
        }
        for cell in 0..n {
            for d in [1, 2] {
                if let Some(m) = neighbour(cell, d) {
                    if walls[cell][d] && rng.random::<f64>() < extra_openings {
                        walls[cell][d] = false;
                        walls[m][(d + 2) % 4] = false;
                    }
                }
            }
        }
        let goal = rng.random_range(0..n);
        Grid { width, height, walls, goal }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.height {
            let mut top = String::from("+");
            let mut mid = String::new();
            for c in 0..self.width {
                let cell = r * self.width + c;
                top.push(if self.walls[cell][0] { '-' } else { ' ' });
                top.push('+');
                mid.push(if self.walls[cell][3] { '|' } else { ' ' });
                mid.push(if cell == self.goal { 'G' } else { ' ' });
            }
            mid.push('|');
            writeln!(f, "{top}")?;
            writeln!(f, "{mid}")?;
        }
        writeln!(f, "+{}", "-+".repeat(self.width))
    }
}

impl TryFrom<String> for Grid {
    type Error = Error;

    fn try_from(s: String) -> Result<Grid> {
        Grid::parse(&s)
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeSpec {
    pub grid: Grid,
    pub stages: usize,
    /// Probability that the intended move is replaced by one of the other
    /// three, chosen uniformly.
    pub actuator_noise: f64,
    /// Per-sensor flip probability.
    pub sensor_noise: f64,
    /// Distribution of the starting cell; uniform when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub start: Vec<f64>,
    pub seed: u64,
}

impl MazeSpec {
    pub fn new(grid: Grid, stages: usize, noise: f64) -> Self {
        MazeSpec {
            grid,
            stages,
            actuator_noise: noise,
            sensor_noise: noise,
            start: Vec::new(),
            seed: 0,
        }
    }

    fn start_distribution(&self) -> Vec<f64> {
        if self.start.is_empty() {
            vec![1.0 / self.grid.cells() as f64; self.grid.cells()]
        } else {
            self.start.clone()
        }
    }

    fn check(&self) -> Result<()> {
        let g = &self.grid;
        if g.goal >= g.cells() {
            return Err(Error::Invalid("goal outside the grid".into()));
        }
        if self.stages == 0 {
            return Err(Error::Invalid("maze needs at least one stage".into()));
        }
        for (name, x) in [("actuator", self.actuator_noise), ("sensor", self.sensor_noise)] {
            if !(0.0..=0.5).contains(&x) {
                return Err(Error::Invalid(format!("{name} noise {x} outside [0, 0.5]")));
            }
        }
        let start = self.start_distribution();
        if start.len() != g.cells() || start.iter().any(|p| *p < 0.0) || (start.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("start distribution must cover every cell and sum to 1".into()));
        }
        Ok(())
    }
}

pub fn position(t: usize) -> String {
    format!("P{t}")
}

pub fn sensor(t: usize, dir: usize) -> String {
    format!("S{t}{}", DIRECTIONS[dir])
}

pub fn decision(t: usize) -> String {
    format!("D{t}")
}

pub fn generate_maze(spec: &MazeSpec) -> Result<InfluenceDiagram> {
    spec.check()?;
    let g = &spec.grid;
    let cells = g.cells();
    let cell_labels: Vec<String> = (0..cells).map(|i| format!("r{}c{}", i / g.width, i % g.width)).collect();
    let cell_refs: Vec<&str> = cell_labels.iter().map(String::as_str).collect();
    let t_max = spec.stages;

    let mut variables = Vec::new();
    let mut parents = BTreeMap::new();
    let mut cpts = BTreeMap::new();
    let mut info_sets = BTreeMap::new();
    let mut seen: Vec<String> = Vec::new();

    let sensor_rows = |dir: usize| -> Vec<Vec<f64>> {
        (0..cells)
            .map(|c| {
                let e = spec.sensor_noise;
                if g.walls[c][dir] {
                    vec![e, 1.0 - e]
                } else {
                    vec![1.0 - e, e]
                }
            })
            .collect()
    };
    let mut move_rows = Vec::with_capacity(cells * 4);
    for cell in 0..cells {
        for intended in 0..4 {
            let mut row = vec![0.0; cells];
            if cell == g.goal {
                row[cell] = 1.0;
            } else {
                for actual in 0..4 {
                    let p = if actual == intended {
                        1.0 - spec.actuator_noise
                    } else {
                        spec.actuator_noise / 3.0
                    };
                    row[g.step(cell, actual)] += p;
                }
            }
            move_rows.push(row);
        }
    }

    for t in 1..=t_max {
        let p = position(t);
        variables.push(Variable::chance(p.clone(), &cell_refs));
        if t == 1 {
            parents.insert(p.clone(), vec![]);
            cpts.insert(p.clone(), vec![spec.start_distribution()]);
        } else {
            parents.insert(p.clone(), vec![position(t - 1), decision(t - 1)]);
            cpts.insert(p.clone(), move_rows.clone());
        }
        for dir in 0..4 {
            let s = sensor(t, dir);
            variables.push(Variable::chance(s.clone(), &["open", "wall"]));
            parents.insert(s.clone(), vec![p.clone()]);
            cpts.insert(s.clone(), sensor_rows(dir));
            seen.push(s);
        }
        let d = decision(t);
        variables.push(Variable::decision(d.clone(), &DIRECTIONS));
        info_sets.insert(d.clone(), seen.clone());
        seen.push(d);
    }
    let last = position(t_max + 1);
    variables.push(Variable::chance(last.clone(), &cell_refs));
    parents.insert(last.clone(), vec![position(t_max), decision(t_max)]);
    cpts.insert(last.clone(), move_rows);

    let value_tree = ValueTree::split(
        last,
        (0..cells).map(|c| ValueTree::leaf(if c == g.goal { 1.0 } else { 0.0 })).collect(),
    );

    Ok(InfluenceDiagram {
        variables,
        parents,
        cpts,
        decisions: Decisions {
            order: (1..=t_max).map(decision).collect(),
            info_sets,
        },
        value_tree,
    })
}

/// A random `width x height` maze spec; the layout and goal come from `seed`.
pub fn random_maze_spec(width: usize, height: usize, stages: usize, noise: f64, seed: u64) -> MazeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::random(width, height, 0.25, &mut rng);
    MazeSpec {
        seed,
        ..MazeSpec::new(grid, stages, noise)
    }
}

/// The four shipped maze layouts.
pub fn suite_grids() -> Vec<(&'static str, Grid)> {
    [
        ("maze1", include_str!("../../data/mazes/maze1.txt")),
        ("maze2", include_str!("../../data/mazes/maze2.txt")),
        ("maze3", include_str!("../../data/mazes/maze3.txt")),
        ("maze4", include_str!("../../data/mazes/maze4.txt")),
    ]
    .into_iter()
    .map(|(name, text)| (name, Grid::parse(text).expect("shipped maze parses")))
    .collect()
}

/// Agent noise levels paired with the shipped layouts. These are stand-ins:
/// agent `k` uses the same level for its actuators and its sensors.
pub const SUITE_NOISE: [f64; 4] = [0.0, 0.05, 0.1, 0.2];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    const SMALL: &str = "+-+-+\n|G  |\n+ +-+\n|   |\n+-+-+\n";

    #[test]
    fn parse_and_print_round_trip() {
        let g = Grid::parse(SMALL).unwrap();
        assert_eq!((g.width, g.height, g.goal), (2, 2, 0));
        assert_eq!(g.walls[0], [true, false, false, true]);
        assert_eq!(g.walls[1], [true, true, true, false]);
        assert_eq!(g.to_string(), SMALL);
    }

    #[test]
    fn missing_goal_is_rejected() {
        assert!(Grid::parse("+-+\n| |\n+-+\n").is_err());
    }

    #[test]
    fn transitions_rows_sum_to_one_and_goal_absorbs() {
        let spec = MazeSpec::new(Grid::parse(SMALL).unwrap(), 2, 0.1);
        let d = generate_maze(&spec).unwrap();
        assert!(validate(&d).is_empty(), "{:?}", validate(&d));
        let rows = &d.cpts["P2"];
        for row in rows {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for row in &rows[..4] {
            assert_eq!(*row, vec![1.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn noiseless_is_deterministic() {
        let spec = MazeSpec::new(Grid::parse(SMALL).unwrap(), 1, 0.0);
        let d = generate_maze(&spec).unwrap();
        for row in d.cpts["P2"].iter().chain(d.cpts["S1N"].iter()) {
            assert!(row.iter().all(|p| *p == 0.0 || *p == 1.0));
        }
        // cell 1 has a wall to the east
        assert_eq!(d.cpts["S1E"][1], vec![0.0, 1.0]);
    }

    #[test]
    fn ten_stage_information_count() {
        let (_, grid) = suite_grids().remove(0);
        let d = generate_maze(&MazeSpec::new(grid, 10, 0.1)).unwrap();
        assert_eq!(d.information_state_count("D10"), 1u128 << 58);
        assert!(d.decisions.info_sets["D3"].contains(&"D2".to_string()));
    }

    #[test]
    fn goal_outside_grid_is_rejected() {
        let mut spec = MazeSpec::new(Grid::parse(SMALL).unwrap(), 2, 0.0);
        spec.grid.goal = 9;
        assert!(generate_maze(&spec).is_err());
    }

    #[test]
    fn random_grids_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid::random(4, 3, 0.25, &mut rng);
        let mut seen = vec![false; g.cells()];
        let mut stack = vec![0];
        while let Some(c) = stack.pop() {
            if std::mem::replace(&mut seen[c], true) {
                continue;
            }
            stack.extend((0..4).map(|d| g.step(c, d)));
        }
        assert!(seen.iter().all(|s| *s));
        assert_eq!(Grid::parse(&g.to_string()).unwrap(), g);
    }
}
