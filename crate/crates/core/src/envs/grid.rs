use std::collections::VecDeque;

use rand::Rng as _;

use crate::{Error, Result, Rng, Transition};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;
pub const NOOP: usize = 4;

const MOVES: [(isize, isize); 5] = [(-1, 0), (1, 0), (0, -1), (0, 1), (0, 0)];

/// Side length of the square egocentric window.
pub const VIEW_SIZE: usize = 5;
pub const VIEW_LEN: usize = VIEW_SIZE * VIEW_SIZE;

static DYNA_MAZE: &str = include_str!("../../layouts/dyna_maze.txt");
static FOUR_ROOMS: &str = include_str!("../../layouts/four_rooms.txt");

/// A cell position, row-major from the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridState {
    pub row: usize,
    pub col: usize,
}

impl GridState {
    pub fn new(row: usize, col: usize) -> Self {
        GridState { row, col }
    }
}

/// Parsed ASCII layout: `#` wall, `.` free, `S` start, `G` goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<bool>,
    pub start: Option<GridState>,
    pub goal: GridState,
}

impl Layout {
    pub fn parse(text: &str) -> Result<Layout> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::Layout("empty layout".into()));
        }
        let width = lines[0].chars().count();
        let mut walls = Vec::with_capacity(width * lines.len());
        let mut start = None;
        let mut goal = None;
        for (row, line) in lines.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::Layout(format!(
                    "row {} has {} cells, expected {width}",
                    row + 1,
                    line.chars().count()
                )));
            }
            for (col, ch) in line.chars().enumerate() {
                let here = GridState::new(row, col);
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' if start.is_none() => {
                        start = Some(here);
                        walls.push(false);
                    }
                    'G' if goal.is_none() => {
                        goal = Some(here);
                        walls.push(false);
                    }
                    'S' | 'G' => {
                        return Err(Error::Layout(format!("duplicate '{ch}' at row {}", row + 1)))
                    }
                    other => {
                        return Err(Error::Layout(format!(
                            "unexpected character {other:?} at row {}, column {}",
                            row + 1,
                            col + 1
                        )))
                    }
                }
            }
        }
        let goal = goal.ok_or_else(|| Error::Layout("no goal cell 'G'".into()))?;
        Ok(Layout {
            width,
            height: lines.len(),
            walls,
            start,
            goal,
        })
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let here = GridState::new(row, col);
                let ch = if self.walls[row * self.width + col] {
                    '#'
                } else if Some(here) == self.start {
                    'S'
                } else if here == self.goal {
                    'G'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

/// The 5×5 egocentric wall map: 1 for wall or outside, 0 for free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeObservation(pub [f64; VIEW_LEN]);

impl MazeObservation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A grid world with the shared step/reset rules of the Dyna maze and the
/// four-rooms domain. States are dense indices over the free cells.
#[derive(Debug, Clone)]
pub struct GridWorld {
    layout: Layout,
    free_cells: Vec<GridState>,
    index_of: Vec<Option<usize>>,
    slip_probability: f64,
    discount: f64,
    goal_reward: f64,
    num_actions: usize,
}

impl GridWorld {
    pub fn new(
        layout: Layout,
        slip_probability: f64,
        discount: f64,
        num_actions: usize,
    ) -> Result<GridWorld> {
        if !(0.0..=1.0).contains(&slip_probability) {
            return Err(Error::InvalidArgument(format!(
                "slip probability {slip_probability} outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::InvalidArgument(format!("discount {discount} outside [0, 1]")));
        }
        if !(4..=5).contains(&num_actions) {
            return Err(Error::InvalidArgument(format!(
                "grid worlds have 4 or 5 actions, not {num_actions}"
            )));
        }
        let mut free_cells = Vec::new();
        let mut index_of = vec![None; layout.width * layout.height];
        for row in 0..layout.height {
            for col in 0..layout.width {
                let k = row * layout.width + col;
                if !layout.walls[k] {
                    index_of[k] = Some(free_cells.len());
                    free_cells.push(GridState::new(row, col));
                }
            }
        }
        Ok(GridWorld {
            layout,
            free_cells,
            index_of,
            slip_probability,
            discount,
            goal_reward: 1.0,
            num_actions,
        })
    }

    /// The 9×6 Dyna maze: fixed start, deterministic, four actions, γ = 0.95.
    pub fn dyna_maze() -> GridWorld {
        GridWorld::new(Layout::parse(DYNA_MAZE).expect("shipped layout"), 0.0, 0.95, 4)
            .expect("shipped layout")
    }

    /// The 13×13 four-rooms world: random start, five actions (incl. no-op), γ = 0.99.
    pub fn four_rooms(slip_probability: f64) -> Result<GridWorld> {
        GridWorld::new(Layout::parse(FOUR_ROOMS)?, slip_probability, 0.99, 5)
    }

    /// Looks up a shipped layout by name (`dyna_maze` or `four_rooms`).
    pub fn builtin(name: &str, slip_probability: f64) -> Result<GridWorld> {
        match name {
            "dyna_maze" => {
                let mut w = GridWorld::dyna_maze();
                if slip_probability != 0.0 {
                    w = GridWorld::new(w.layout, slip_probability, 0.95, 4)?;
                }
                Ok(w)
            }
            "four_rooms" => GridWorld::four_rooms(slip_probability),
            other => Err(Error::InvalidArgument(format!("unknown layout {other:?}"))),
        }
    }

    pub fn builtin_layout_text(name: &str) -> Option<&'static str> {
        match name {
            "dyna_maze" => Some(DYNA_MAZE),
            "four_rooms" => Some(FOUR_ROOMS),
            _ => None,
        }
    }

    pub fn with_goal_reward(mut self, goal_reward: f64) -> Self {
        self.goal_reward = goal_reward;
        self
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn height(&self) -> usize {
        self.layout.height
    }

    pub fn num_states(&self) -> usize {
        self.free_cells.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn goal_reward(&self) -> f64 {
        self.goal_reward
    }

    pub fn slip_probability(&self) -> f64 {
        self.slip_probability
    }

    pub fn goal(&self) -> usize {
        self.state_index(self.layout.goal).expect("goal is free")
    }

    /// The fixed start state, if the layout has one.
    pub fn start(&self) -> Option<usize> {
        self.layout.start.and_then(|c| self.state_index(c))
    }

    pub fn cell(&self, state: usize) -> Result<GridState> {
        self.free_cells
            .get(state)
            .copied()
            .ok_or(Error::InvalidState(state))
    }

    pub fn state_index(&self, cell: GridState) -> Option<usize> {
        if cell.row >= self.layout.height || cell.col >= self.layout.width {
            return None;
        }
        self.index_of[cell.row * self.layout.width + cell.col]
    }

    pub fn is_wall(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.layout.height || col as usize >= self.layout.width
        {
            return true;
        }
        self.layout.walls[row as usize * self.layout.width + col as usize]
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        state == self.goal()
    }

    /// Cell reached by `action` from `state` ignoring slip; walls and the
    /// border leave the agent in place.
    pub fn intended_next(&self, state: usize, action: usize) -> Result<usize> {
        if action >= self.num_actions {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.num_actions,
            });
        }
        let cell = self.cell(state)?;
        let (dr, dc) = MOVES[action];
        let (r, c) = (cell.row as isize + dr, cell.col as isize + dc);
        if self.is_wall(r, c) {
            Ok(state)
        } else {
            Ok(self.index_of[r as usize * self.layout.width + c as usize].expect("free cell"))
        }
    }

    /// Free 4-neighbours of `state`.
    pub fn free_neighbours(&self, state: usize) -> Result<Vec<usize>> {
        let cell = self.cell(state)?;
        Ok(MOVES[..4]
            .iter()
            .filter_map(|&(dr, dc)| {
                let (r, c) = (cell.row as isize + dr, cell.col as isize + dc);
                (!self.is_wall(r, c))
                    .then(|| self.index_of[r as usize * self.layout.width + c as usize].unwrap())
            })
            .collect())
    }

    fn outcome(&self, state: usize, action: usize, next_state: usize) -> Transition {
        if next_state == self.goal() {
            Transition::new(state, action, self.goal_reward, 0.0, next_state)
        } else {
            Transition::new(state, action, 0.0, self.discount, next_state)
        }
    }

    /// One environment step. With probability `slip_probability` the action
    /// is ignored and the agent moves to a uniformly random free neighbour.
    pub fn step(&self, state: usize, action: usize, rng: &mut Rng) -> Result<Transition> {
        if action >= self.num_actions {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.num_actions,
            });
        }
        self.cell(state)?;
        let next = if self.slip_probability > 0.0 && rng.random::<f64>() < self.slip_probability {
            let neighbours = self.free_neighbours(state)?;
            if neighbours.is_empty() {
                state
            } else {
                neighbours[rng.random_range(0..neighbours.len())]
            }
        } else {
            self.intended_next(state, action)?
        };
        Ok(self.outcome(state, action, next))
    }

    /// Exact next-state distribution of `step` as `(next_state, probability)`.
    pub fn transition_distribution(&self, state: usize, action: usize) -> Result<Vec<(usize, f64)>> {
        let intended = self.intended_next(state, action)?;
        let mut dist = vec![(intended, 1.0 - self.slip_probability)];
        if self.slip_probability > 0.0 {
            let neighbours = self.free_neighbours(state)?;
            if neighbours.is_empty() {
                dist.push((state, self.slip_probability));
            } else {
                let share = self.slip_probability / neighbours.len() as f64;
                dist.extend(neighbours.into_iter().map(|n| (n, share)));
            }
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (s, p) in dist {
            match merged.iter_mut().find(|(t, _)| *t == s) {
                Some(e) => e.1 += p,
                None => merged.push((s, p)),
            }
        }
        merged.retain(|e| e.1 > 0.0);
        Ok(merged)
    }

    /// Start state of a new episode: the layout's `S` when present,
    /// otherwise a uniformly random free non-goal cell.
    pub fn reset(&self, rng: &mut Rng) -> usize {
        if let Some(s) = self.start() {
            return s;
        }
        let goal = self.goal();
        let k = rng.random_range(0..self.num_states() - 1);
        if k >= goal {
            k + 1
        } else {
            k
        }
    }

    /// Row-major 5×5 window centred on the agent; outside cells count as walls.
    pub fn local_view(&self, state: usize) -> Result<MazeObservation> {
        let cell = self.cell(state)?;
        let half = (VIEW_SIZE / 2) as isize;
        let mut values = [0.0; VIEW_LEN];
        for dr in -half..=half {
            for dc in -half..=half {
                let k = ((dr + half) as usize) * VIEW_SIZE + (dc + half) as usize;
                if self.is_wall(cell.row as isize + dr, cell.col as isize + dc) {
                    values[k] = 1.0;
                }
            }
        }
        Ok(MazeObservation(values))
    }

    /// Breadth-first distances (in steps) from every state to the goal under
    /// deterministic moves; `None` for states that cannot reach it.
    pub fn distances_to_goal(&self) -> Vec<Option<usize>> {
        let n = self.num_states();
        let mut dist = vec![None; n];
        let goal = self.goal();
        dist[goal] = Some(0);
        let mut queue = VecDeque::from([goal]);
        while let Some(s) = queue.pop_front() {
            let d = dist[s].unwrap();
            for p in self.free_neighbours(s).unwrap_or_default() {
                if dist[p].is_none() {
                    dist[p] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// Mean shortest-path length over the states `reset` can return.
    pub fn mean_optimal_episode_length(&self) -> f64 {
        let dist = self.distances_to_goal();
        match self.start() {
            Some(s) => dist[s].unwrap_or(usize::MAX) as f64,
            None => {
                let goal = self.goal();
                let ds: Vec<f64> = (0..self.num_states())
                    .filter(|&s| s != goal)
                    .filter_map(|s| dist[s].map(|d| d as f64))
                    .collect();
                ds.iter().sum::<f64>() / ds.len() as f64
            }
        }
    }
}
