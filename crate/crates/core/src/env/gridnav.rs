//! 41×41 navigation grid with a central wall and a goal on the right edge.
//!
//! Positions are `(x, y)` = (column, row) with row 0 at the top. Leaving the
//! grid or entering the wall ends the episode without reward.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{EnvStep, Environment};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    Right = 0,
    Left = 1,
    Up = 2,
    Down = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Right, GridAction::Left, GridAction::Up, GridAction::Down];

    pub fn from_index(a: usize) -> Option<Self> {
        Self::ALL.get(a).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            GridAction::Right => (1, 0),
            GridAction::Left => (-1, 0),
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridNavConfig {
    pub width: usize,
    pub height: usize,
    pub obstacle: Rect,
    /// `(x, y)` of the goal cell.
    pub goal: (usize, usize),
    pub max_steps: usize,
}

impl Default for GridNavConfig {
    fn default() -> Self {
        Self {
            width: 41,
            height: 41,
            obstacle: Rect {
                x: 18,
                y: 3,
                width: 4,
                height: 34,
            },
            goal: (40, 10),
            max_steps: 100,
        }
    }
}

impl GridNavConfig {
    pub fn validate(&self) -> Result<()> {
        let o = &self.obstacle;
        if self.width < 2 || self.height < 2 || self.max_steps == 0 {
            return Err(Error::Invalid(format!("degenerate grid config {self:?}")));
        }
        if o.width == 0 || o.height == 0 || o.x + o.width > self.width || o.y + o.height > self.height {
            return Err(Error::Invalid(format!("obstacle {o:?} does not fit in the grid")));
        }
        let (gx, gy) = self.goal;
        if gx >= self.width || gy >= self.height || o.contains(gx, gy) {
            return Err(Error::Invalid(format!("goal {:?} is outside the grid or inside the obstacle", self.goal)));
        }
        if self.start_cells().is_empty() {
            return Err(Error::Invalid("no valid start cell".into()));
        }
        Ok(())
    }

    /// Left-half cells (`x < width / 2`) outside the obstacle and off the goal.
    pub fn start_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width / 2 {
                if !self.obstacle.contains(x, y) && (x, y) != self.goal {
                    cells.push((x, y));
                }
            }
        }
        cells
    }

    /// Normalized `(x, y)` observation in `[0, 1]²`.
    pub fn observation_of(&self, x: usize, y: usize) -> Vec<f64> {
        vec![x as f64 / (self.width - 1) as f64, y as f64 / (self.height - 1) as f64]
    }
}

#[derive(Clone, Debug)]
pub struct GridNav {
    config: GridNavConfig,
    start_cells: Vec<(usize, usize)>,
    pos: (usize, usize),
    steps: usize,
    done: bool,
}

impl GridNav {
    pub fn new(config: GridNavConfig) -> Result<Self> {
        config.validate()?;
        let start_cells = config.start_cells();
        let pos = start_cells[0];
        Ok(Self {
            config,
            start_cells,
            pos,
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &GridNavConfig {
        &self.config
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    /// Places the agent on `(x, y)` and starts a fresh episode there.
    pub fn reset_to(&mut self, x: usize, y: usize) -> Result<EnvStep> {
        if x >= self.config.width || y >= self.config.height || self.config.obstacle.contains(x, y) {
            return Err(Error::contract(format!("({x}, {y}) is not a free cell")));
        }
        self.pos = (x, y);
        self.steps = 0;
        self.done = false;
        Ok(EnvStep::start(self.config.observation_of(x, y)))
    }
}

impl Environment for GridNav {
    fn obs_dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvStep {
        let (x, y) = self.start_cells[rng.random_range(0..self.start_cells.len())];
        self.reset_to(x, y).expect("start cells are free")
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.done {
            return Err(Error::contract("gridnav step after episode end"));
        }
        let action = GridAction::from_index(action)
            .ok_or_else(|| Error::contract(format!("gridnav action {action} out of range")))?;
        self.steps += 1;
        let (dx, dy) = action.delta();
        let nx = self.pos.0 as isize + dx;
        let ny = self.pos.1 as isize + dy;
        let inside = nx >= 0 && ny >= 0 && (nx as usize) < self.config.width && (ny as usize) < self.config.height;

        let (reward_ext, terminated) = if !inside {
            // the agent stays on its last valid cell
            (0.0, true)
        } else {
            self.pos = (nx as usize, ny as usize);
            if self.pos == self.config.goal {
                (1.0, true)
            } else if self.config.obstacle.contains(self.pos.0, self.pos.1) {
                (0.0, true)
            } else {
                (0.0, false)
            }
        };
        let truncated = !terminated && self.steps >= self.config.max_steps;
        self.done = terminated || truncated;
        Ok(EnvStep {
            observation: self.config.observation_of(self.pos.0, self.pos.1),
            reward_ext,
            terminated,
            truncated,
        })
    }
}
