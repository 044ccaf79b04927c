// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, EnvError, Environment, Outcome, StepResult};

/// Move directions; the action index is the declaration order. Row 0 is north.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    N,
    E,
    S,
    W,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::N, Direction::E, Direction::S, Direction::W];

    pub fn from_action(action: usize) -> Option<Self> {
        Self::ALL.get(action).copied()
    }

    pub fn action(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::N => Direction::S,
            Direction::E => Direction::W,
            Direction::S => Direction::N,
            Direction::W => Direction::E,
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::N => (0, -1),
            Direction::E => (1, 0),
            Direction::S => (0, 1),
            Direction::W => (-1, 0),
        }
    }

    pub fn arrow(self) -> char {
        match self {
            Direction::N => '^',
            Direction::E => '>',
            Direction::S => 'v',
            Direction::W => '<',
        }
    }
}

fn default_step_limit() -> u32 {
    8
}

fn default_true() -> bool {
    true
}

/// Grid layout. JSON form:
/// `{"width":5,"height":5,"goal":[2,2],"walls":[[2,2,"S"]],"step_limit":8}`.
/// A wall blocks movement in both directions across the named cell side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazeSpec {
    pub width: usize,
    pub height: usize,
    pub goal: [usize; 2],
    #[serde(default)]
    pub walls: Vec<(usize, usize, Direction)>,
    #[serde(default = "default_step_limit")]
    pub step_limit: u32,
    #[serde(default = "default_true")]
    pub exploring_starts: bool,
    /// Start cell when `exploring_starts` is off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[usize; 2]>,
}

impl Default for MazeSpec {
    fn default() -> Self {
        Self::open_arena()
    }
}

impl MazeSpec {
    /// 5x5 arena, no walls, goal in the center.
    pub fn open_arena() -> Self {
        Self { width: 5, height: 5, goal: [2, 2], walls: Vec::new(), step_limit: 8, exploring_starts: true, start: None }
    }

    /// Center goal walled on its south, east and west sides.
    pub fn north_approach() -> Self {
        Self {
            walls: vec![(2, 2, Direction::S), (2, 2, Direction::E), (2, 2, Direction::W)],
            ..Self::open_arena()
        }
    }

    /// Walls kept, goal moved to the bottom-center cell.
    pub fn bottom_goal() -> Self {
        Self { goal: [2, 4], ..Self::north_approach() }
    }

    /// The three-phase schedule: open arena, walled goal, relocated goal.
    pub fn phases() -> Vec<MazeSpec> {
        vec![Self::open_arena(), Self::north_approach(), Self::bottom_goal()]
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| EnvError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn goal_cell(&self) -> usize {
        self.cell(self.goal[0], self.goal[1])
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.width == 0 || self.height == 0 {
            return Err(EnvError::Spec("maze needs width and height >= 1".into()));
        }
        let inside = |x: usize, y: usize| x < self.width && y < self.height;
        if !inside(self.goal[0], self.goal[1]) {
            return Err(EnvError::Spec(format!("goal {:?} outside the grid", self.goal)));
        }
        if let Some(&(x, y, d)) = self.walls.iter().find(|&&(x, y, _)| !inside(x, y)) {
            return Err(EnvError::Spec(format!("wall ({x}, {y}, {d:?}) outside the grid")));
        }
        if self.step_limit == 0 {
            return Err(EnvError::Spec("step_limit must be >= 1".into()));
        }
        if let Some([x, y]) = self.start {
            if !inside(x, y) || [x, y] == self.goal {
                return Err(EnvError::Spec(format!("start {:?} must be a non-goal cell", [x, y])));
            }
        }
        if !self.exploring_starts && self.n_cells() < 2 {
            return Err(EnvError::Spec("maze has no non-goal start cell".into()));
        }
        Ok(())
    }

    /// Per-cell, per-direction blocking (grid boundary or wall). Symmetric by
    /// construction.
    pub fn blocked(&self) -> Vec<[bool; 4]> {
        let mut walls = HashSet::new();
        for &(x, y, d) in &self.walls {
            walls.insert((x, y, d));
            if let Some(n) = self.neighbor_xy(x, y, d) {
                walls.insert((n.0, n.1, d.opposite()));
            }
        }
        (0..self.n_cells())
            .map(|c| {
                let (x, y) = self.coords(c);
                Direction::ALL.map(|d| self.neighbor_xy(x, y, d).is_none() || walls.contains(&(x, y, d)))
            })
            .collect()
    }

    fn neighbor_xy(&self, x: usize, y: usize, d: Direction) -> Option<(usize, usize)> {
        let (dx, dy) = d.delta();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < self.width && ny < self.height).then_some((nx, ny))
    }

    /// Deterministic transition: the cell reached by moving `d` from `cell`.
    pub fn next_cell(&self, blocked: &[[bool; 4]], cell: usize, d: Direction) -> usize {
        if blocked[cell][d.action()] {
            return cell;
        }
        let (x, y) = self.coords(cell);
        let (nx, ny) = self.neighbor_xy(x, y, d).expect("unblocked move stays on the grid");
        self.cell(nx, ny)
    }
}

/// Gridworld episode: reach the goal within `step_limit` moves.
#[derive(Debug, Clone)]
pub struct Maze {
    spec: MazeSpec,
    blocked: Vec<[bool; 4]>,
    rng: ChaCha8Rng,
    position: usize,
    steps: u32,
    done: bool,
}

impl Maze {
    pub fn new(spec: MazeSpec, rng: ChaCha8Rng) -> Result<Self, EnvError> {
        spec.validate()?;
        let blocked = spec.blocked();
        Ok(Self { spec, blocked, rng, position: 0, steps: 0, done: true })
    }

    pub fn spec(&self) -> &MazeSpec {
        &self.spec
    }

    pub fn position(&self) -> usize {
        self.position
    }

    /// Replaces the wall set and goal. Ends the current episode; learner
    /// state is untouched.
    pub fn reconfigure(&mut self, walls: Vec<(usize, usize, Direction)>, goal: [usize; 2]) -> Result<(), EnvError> {
        let spec = MazeSpec { walls, goal, ..self.spec.clone() };
        spec.validate()?;
        self.blocked = spec.blocked();
        self.spec = spec;
        self.done = true;
        Ok(())
    }
}

impl Environment for Maze {
    fn n_states(&self) -> usize {
        self.spec.n_cells()
    }

    fn n_actions(&self) -> usize {
        4
    }

    fn reset(&mut self) -> usize {
        let goal = self.spec.goal_cell();
        self.position = if self.spec.exploring_starts {
            // uniform over the non-goal cells
            let k = self.rng.gen_range(0..self.spec.n_cells() - 1);
            if k >= goal {
                k + 1
            } else {
                k
            }
        } else {
            match self.spec.start {
                Some([x, y]) => self.spec.cell(x, y),
                None => usize::from(goal == 0),
            }
        };
        self.steps = 0;
        self.done = false;
        self.position
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        check_action(action, 4)?;
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        let d = Direction::from_action(action).expect("checked");
        self.position = self.spec.next_cell(&self.blocked, self.position, d);
        self.steps += 1;
        if self.position == self.spec.goal_cell() {
            self.done = true;
            Ok(StepResult::finished(self.position, Outcome::Reward))
        } else if self.steps >= self.spec.step_limit {
            self.done = true;
            Ok(StepResult::finished(self.position, Outcome::Punish))
        } else {
            Ok(StepResult::running(self.position))
        }
    }
}
