//! Deterministic grid worlds described by plain-text maps.
//!
//! Map legend: `#` wall, `S` start, `G` goal, space for floor, and the
//! arrows `>` `<` `^` `v` for one-way doors. A door cell can only be
//! entered by moving in the arrow's direction (a `>` cell is entered from
//! its left neighbour); leaving a door cell is unrestricted. All lines
//! must have equal length and the map needs exactly one start and one
//! goal.

use super::ShapingError;

/// External reward scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Goal pays 1, every other step pays a negative normalized Manhattan
    /// distance to the goal.
    Dense,
    /// Goal pays 1, everything else pays 0.
    Sparse,
}

/// The four grid moves, in fixed index order `Up, Down, Left, Right`
/// (up decreases `y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Left => 2,
            Action::Right => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }
}

/// A deterministic grid world; cells are `(x, y)` with the origin at the
/// top-left corner of the map text.
#[derive(Debug, Clone)]
pub struct GridEnv {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    doors: Vec<Option<Action>>,
    start: (usize, usize),
    goal: (usize, usize),
    reward_mode: RewardMode,
}

impl GridEnv {
    /// Parses a map; see the module docs for the legend.
    pub fn from_map(text: &str, reward_mode: RewardMode) -> Result<Self, ShapingError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(ShapingError::InvalidEnv("map has no rows".into()));
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        if width == 0 {
            return Err(ShapingError::InvalidEnv("map has empty rows".into()));
        }
        let mut walls = vec![false; width * height];
        let mut doors = vec![None; width * height];
        let mut start = None;
        let mut goal = None;
        for (y, line) in lines.iter().enumerate() {
            let row: Vec<char> = line.chars().collect();
            if row.len() != width {
                return Err(ShapingError::InvalidEnv(format!(
                    "row {y} has {} cells, expected {width}",
                    row.len()
                )));
            }
            for (x, ch) in row.into_iter().enumerate() {
                let idx = y * width + x;
                match ch {
                    '#' => walls[idx] = true,
                    ' ' => {}
                    'S' => {
                        if start.replace((x, y)).is_some() {
                            return Err(ShapingError::InvalidEnv("two start cells".into()));
                        }
                    }
                    'G' => {
                        if goal.replace((x, y)).is_some() {
                            return Err(ShapingError::InvalidEnv("two goal cells".into()));
                        }
                    }
                    '>' => doors[idx] = Some(Action::Right),
                    '<' => doors[idx] = Some(Action::Left),
                    '^' => doors[idx] = Some(Action::Up),
                    'v' => doors[idx] = Some(Action::Down),
                    other => {
                        return Err(ShapingError::InvalidEnv(format!(
                            "unknown map character {other:?} at ({x}, {y})"
                        )));
                    }
                }
            }
        }
        let start = start.ok_or_else(|| ShapingError::InvalidEnv("no start cell".into()))?;
        let goal = goal.ok_or_else(|| ShapingError::InvalidEnv("no goal cell".into()))?;
        Ok(GridEnv { width, height, walls, doors, start, goal, reward_mode })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn reward_mode(&self) -> RewardMode {
        self.reward_mode
    }

    /// Moves the start cell; it must be inside the grid and not a wall.
    pub fn set_start(&mut self, cell: (usize, usize)) -> Result<(), ShapingError> {
        self.check_open(cell)?;
        self.start = cell;
        Ok(())
    }

    /// Moves the goal cell; it must be inside the grid and not a wall.
    pub fn set_goal(&mut self, cell: (usize, usize)) -> Result<(), ShapingError> {
        self.check_open(cell)?;
        self.goal = cell;
        Ok(())
    }

    fn check_open(&self, cell: (usize, usize)) -> Result<(), ShapingError> {
        if cell.0 >= self.width || cell.1 >= self.height {
            return Err(ShapingError::InvalidEnv(format!(
                "cell ({}, {}) is outside the {}x{} grid",
                cell.0, cell.1, self.width, self.height
            )));
        }
        if self.is_wall(cell) {
            return Err(ShapingError::InvalidEnv(format!(
                "cell ({}, {}) is a wall",
                cell.0, cell.1
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    /// Flat index of a cell, row-major.
    pub fn cell_index(&self, cell: (usize, usize)) -> usize {
        cell.1 * self.width + cell.0
    }

    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        self.walls[self.cell_index(cell)]
    }

    /// Direction required to enter the cell, for one-way doors.
    pub fn door(&self, cell: (usize, usize)) -> Option<Action> {
        self.doors[self.cell_index(cell)]
    }

    /// Normalized cell-centre coordinates, the state feature fed to graphs
    /// and encoders: `((x+0.5)/width, (y+0.5)/height)`.
    pub fn feature(&self, cell: (usize, usize)) -> [f64; 2] {
        [
            (cell.0 as f64 + 0.5) / self.width as f64,
            (cell.1 as f64 + 0.5) / self.height as f64,
        ]
    }

    /// Cell whose centre feature is nearest to the given feature; features
    /// produced by [`GridEnv::feature`] invert exactly.
    pub fn nearest_cell(&self, feature: &[f64]) -> (usize, usize) {
        let x = (feature[0] * self.width as f64 - 0.5).round();
        let y = (feature[1] * self.height as f64 - 0.5).round();
        let x = x.clamp(0.0, (self.width - 1) as f64) as usize;
        let y = y.clamp(0.0, (self.height - 1) as f64) as usize;
        (x, y)
    }

    /// One deterministic step. Blocked moves (walls, map edges, and doors
    /// entered against their arrow) leave the agent in place. Returns the
    /// next cell, the external reward, and whether the goal was reached.
    pub fn step(&self, cell: (usize, usize), action: Action) -> ((usize, usize), f64, bool) {
        let (dx, dy) = action.delta();
        let nx = cell.0 as isize + dx;
        let ny = cell.1 as isize + dy;
        let next = if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height {
            cell
        } else {
            let target = (nx as usize, ny as usize);
            let door_blocks = matches!(self.door(target), Some(required) if required != action);
            if self.is_wall(target) || door_blocks {
                cell
            } else {
                target
            }
        };
        let done = next == self.goal;
        let reward = match self.reward_mode {
            RewardMode::Sparse => {
                if done {
                    1.0
                } else {
                    0.0
                }
            }
            RewardMode::Dense => {
                if done {
                    1.0
                } else {
                    let dist = next.0.abs_diff(self.goal.0) + next.1.abs_diff(self.goal.1);
                    -(dist as f64) / (self.width + self.height) as f64
                }
            }
        };
        (next, reward, done)
    }

    /// True when the goal can be reached from the start under the step
    /// dynamics (walls and one-way doors respected).
    pub fn goal_reachable(&self) -> bool {
        let mut seen = vec![false; self.cell_count()];
        seen[self.cell_index(self.start)] = true;
        let mut queue = vec![self.start];
        while let Some(cell) = queue.pop() {
            if cell == self.goal {
                return true;
            }
            for action in Action::ALL {
                let (next, _, _) = self.step(cell, action);
                let idx = self.cell_index(next);
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push(next);
                }
            }
        }
        false
    }
}
