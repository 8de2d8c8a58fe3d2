//! Deterministic 4-room gridworld: layouts, state enumeration, 180° rotation,
//! compilation to an [`Mdp`] and PGM rendering.

use std::collections::VecDeque;

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;

/// `(row, col)`, 0-based, row 0 at the top.
pub type Cell = (usize, usize);

pub const DEFAULT_GAMMA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// The action that a 180° rotation maps this one to.
    pub fn rotated(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

/// Square grid with walls. Free cells are indexed densely in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoomLayout {
    n: usize,
    wall: Vec<bool>,
    doors: Vec<Cell>,
    free: Vec<Cell>,
    free_index: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDocument {
    n: usize,
    wall_cells: Vec<Cell>,
    door_cells: Vec<Cell>,
}

impl RoomLayout {
    /// Builds a layout from explicit wall and door cells and checks it.
    pub fn new(n: usize, walls: &[Cell], doors: &[Cell]) -> Result<Self> {
        if n < 3 {
            return Err(Error::Layout(format!("grid side {n} too small")));
        }
        let mut wall = vec![false; n * n];
        for &(r, c) in walls {
            if r >= n || c >= n {
                return Err(Error::Layout(format!("wall ({r}, {c}) outside the grid")));
            }
            wall[r * n + c] = true;
        }
        for &(r, c) in doors {
            if r >= n || c >= n || wall[r * n + c] {
                return Err(Error::Layout(format!("door ({r}, {c}) is not an open cell")));
            }
        }
        let layout = Self::from_mask(n, wall, doors.to_vec());
        layout.validate()?;
        Ok(layout)
    }

    fn from_mask(n: usize, wall: Vec<bool>, mut doors: Vec<Cell>) -> Self {
        doors.sort_unstable();
        let mut free = Vec::new();
        let mut free_index = vec![None; n * n];
        for r in 0..n {
            for c in 0..n {
                if !wall[r * n + c] {
                    free_index[r * n + c] = Some(free.len());
                    free.push((r, c));
                }
            }
        }
        Self { n, wall, doors, free, free_index }
    }

    /// Canonical 4-room layout: outer walls, interior walls on row and column
    /// `m = n / 2`, one door in each interior wall segment.
    pub fn canonical(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::Layout(format!("grid side {n} below the minimum of 8")));
        }
        let m = n / 2;
        let far = m + (n - m).div_ceil(2);
        let doors = vec![(m, m / 2), (m, far), (m / 2, m), (far, m)];
        let mut wall = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                let boundary = i == 0 || j == 0 || i == n - 1 || j == n - 1;
                let interior = i == m || j == m;
                wall[i * n + j] = boundary || interior;
            }
        }
        for &(r, c) in &doors {
            wall[r * n + c] = false;
        }
        let layout = Self::from_mask(n, wall, doors);
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for &(r, c) in &[(0, i), (n - 1, i), (i, 0), (i, n - 1)] {
                if !self.is_wall((r, c)) {
                    return Err(Error::Layout(format!("boundary cell ({r}, {c}) is open")));
                }
            }
        }
        let Some(&start) = self.free.first() else {
            return Err(Error::Layout("no free cells".into()));
        };
        let reached = self.flood_fill(start).len();
        if reached != self.free.len() {
            return Err(Error::Layout(format!(
                "layout is disconnected: {reached} of {} free cells reachable",
                self.free.len()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn doors(&self) -> &[Cell] {
        &self.doors
    }

    pub fn is_wall(&self, (r, c): Cell) -> bool {
        r >= self.n || c >= self.n || self.wall[r * self.n + c]
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> &[Cell] {
        &self.free
    }

    pub fn free_index(&self, (r, c): Cell) -> Option<usize> {
        if r >= self.n || c >= self.n {
            return None;
        }
        self.free_index[r * self.n + c]
    }

    pub fn wall_cells(&self) -> Vec<Cell> {
        (0..self.n * self.n)
            .filter(|&i| self.wall[i])
            .map(|i| (i / self.n, i % self.n))
            .collect()
    }

    /// Cell reached by moving from `cell`; walls leave the agent in place.
    pub fn move_from(&self, (r, c): Cell, action: Action) -> Cell {
        let (dr, dc) = action.delta();
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 {
            return (r, c);
        }
        let target = (nr as usize, nc as usize);
        if self.is_wall(target) {
            (r, c)
        } else {
            target
        }
    }

    /// Breadth-first search over free cells; returns the reached cells with distances.
    pub fn bfs_distances(&self, from: Cell) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.free.len()];
        let Some(start) = self.free_index(from) else {
            return dist;
        };
        dist[start] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.free_index(cell).unwrap()].unwrap();
            for action in Action::ALL {
                let next = self.move_from(cell, action);
                let idx = self.free_index(next).unwrap();
                if dist[idx].is_none() {
                    dist[idx] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    /// Free cells reachable from `from`.
    pub fn flood_fill(&self, from: Cell) -> Vec<Cell> {
        self.bfs_distances(from)
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some())
            .map(|(i, _)| self.free[i])
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LayoutDocument { n: self.n, wall_cells: self.wall_cells(), door_cells: self.doors.clone() };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LayoutDocument = serde_json::from_str(text)?;
        Self::new(doc.n, &doc.wall_cells, &doc.door_cells)
    }
}

/// Which squares are randomized across episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    /// Goal and start fixed.
    FixedGoal,
    /// Agent starts at a fixed cell, goal uniformly placed.
    RandomGoal,
    /// Agent and goal both uniformly placed.
    RandomBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub agent: Cell,
    pub goal: Cell,
}

/// Key hashed into the state dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKey {
    Live(GridState),
    Terminal,
}

/// Environment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub mode: GoalMode,
    /// Number of goal squares (fixed-goal mode only when above one).
    pub goals: usize,
    pub gamma: f64,
    /// Fixed start; `None` starts uniformly over live states.
    pub start: Option<Cell>,
    /// Episode cap for sampling; `None` uses `4n²`.
    pub horizon: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 8, mode: GoalMode::FixedGoal, goals: 1, gamma: DEFAULT_GAMMA, start: Some((1, 1)), horizon: None }
    }
}

impl GridConfig {
    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(4 * self.n * self.n)
    }

    pub fn build(&self, seed: u64) -> Result<FourRooms> {
        let layout = RoomLayout::canonical(self.n)?;
        let primary = (self.n - 2, self.n - 2);
        let mut goals = vec![primary];
        if self.goals == 0 {
            return Err(Error::InvalidArgument("at least one goal square is required".into()));
        }
        if self.goals > 1 {
            if self.mode != GoalMode::FixedGoal {
                return Err(Error::InvalidArgument("multiple goal squares need fixed_goal mode".into()));
            }
            let mut pool: Vec<Cell> = layout
                .free_cells()
                .iter()
                .copied()
                .filter(|&c| c != primary && Some(c) != self.start)
                .collect();
            if pool.len() < self.goals - 1 {
                return Err(Error::InvalidArgument(format!("{} goals do not fit", self.goals)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            pool.shuffle(&mut rng);
            goals.extend_from_slice(&pool[..self.goals - 1]);
        }
        let start = match self.mode {
            GoalMode::RandomBoth => None,
            _ => self.start,
        };
        FourRooms::compile(layout, self.mode, goals, start, self.gamma)
    }
}

/// Canonical 4-room world with default parameters (single goal, γ = 0.99).
pub fn build_four_rooms(n: usize, mode: GoalMode, seed: u64) -> Result<FourRooms> {
    GridConfig { n, mode, ..GridConfig::default() }.build(seed)
}

/// A compiled gridworld: layout, enumerated states and the MDP over them.
#[derive(Debug, Clone)]
pub struct FourRooms {
    pub layout: RoomLayout,
    pub mode: GoalMode,
    /// Goal squares in fixed-goal mode (`goals[0]` is the primary goal).
    pub goals: Vec<Cell>,
    pub start: Option<Cell>,
    pub mdp: Mdp,
    states: IndexSet<StateKey>,
}

impl FourRooms {
    pub fn compile(
        layout: RoomLayout,
        mode: GoalMode,
        goals: Vec<Cell>,
        start: Option<Cell>,
        gamma: f64,
    ) -> Result<Self> {
        for &g in &goals {
            if layout.free_index(g).is_none() {
                return Err(Error::Layout(format!("goal {g:?} is not a free cell")));
            }
        }
        if let Some(s) = start {
            if layout.free_index(s).is_none() || goals.contains(&s) {
                return Err(Error::Layout(format!("start {s:?} is not a free non-goal cell")));
            }
        }
        let states = enumerate_keys(&layout, mode, &goals);
        let n_states = states.len();
        let terminal = n_states - 1;
        let mut rows = Vec::with_capacity(n_states * 4);
        let mut reward = Vec::with_capacity(n_states * 4);
        for key in &states {
            for action in Action::ALL {
                match key {
                    StateKey::Terminal => {
                        rows.push(vec![(terminal, 1.0)]);
                        reward.push(0.0);
                    }
                    StateKey::Live(gs) => {
                        let (next, r, _) = transition(&layout, &goals, mode, gs, action);
                        let idx = states.get_index_of(&next).expect("successor is enumerated");
                        rows.push(vec![(idx, 1.0)]);
                        reward.push(r);
                    }
                }
            }
        }
        let mut rho0 = vec![0.0; n_states];
        let live: Vec<usize> = (0..terminal)
            .filter(|&i| match states[i] {
                StateKey::Live(gs) => start.is_none_or(|s| gs.agent == s),
                StateKey::Terminal => false,
            })
            .collect();
        let mass = 1.0 / live.len() as f64;
        for &i in &live {
            rho0[i] = mass;
        }
        let mdp = Mdp::new(n_states, 4, rows, reward, gamma, rho0)?;
        Ok(Self { layout, mode, goals, start, mdp, states })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &IndexSet<StateKey> {
        &self.states
    }

    pub fn key(&self, index: usize) -> StateKey {
        self.states[index]
    }

    pub fn index_of(&self, key: &StateKey) -> Option<usize> {
        self.states.get_index_of(key)
    }

    pub fn terminal_index(&self) -> usize {
        self.states.len() - 1
    }

    /// Indices of all non-terminal states, in order.
    pub fn live_states(&self) -> Vec<usize> {
        (0..self.terminal_index()).collect()
    }

    /// Steps a live state by index; consistent with the compiled MDP.
    pub fn step_index(&self, index: usize, action: Action) -> Result<(usize, f64, bool)> {
        let StateKey::Live(gs) = self.states[index] else {
            return Err(Error::Terminal(index));
        };
        let (next, r, done) = transition(&self.layout, &self.goals, self.mode, &gs, action);
        Ok((self.states.get_index_of(&next).expect("successor is enumerated"), r, done))
    }

    /// Per-free-cell field from per-state values (fixed-goal mode). Goal cells stay empty.
    pub fn cell_field(&self, values: &[f64]) -> Vec<Option<f64>> {
        let mut field = vec![None; self.layout.free_cells().len()];
        for (i, key) in self.states.iter().enumerate() {
            if let StateKey::Live(gs) = key {
                field[self.layout.free_index(gs.agent).unwrap()] = Some(values[i]);
            }
        }
        field
    }

    /// Same world on the 180°-rotated layout, plus the state bijection
    /// `original index -> rotated index`.
    pub fn rotated(&self) -> Result<(FourRooms, Vec<usize>)> {
        let (layout, rot) = rotate_180(&self.layout);
        let goals = self.goals.iter().map(|&g| rot.map_cell(g)).collect();
        let start = self.start.map(|s| rot.map_cell(s));
        let world = FourRooms::compile(layout, self.mode, goals, start, self.mdp.gamma())?;
        let bijection = self
            .states
            .iter()
            .map(|key| {
                let mapped = match key {
                    StateKey::Live(gs) => StateKey::Live(GridState {
                        agent: rot.map_cell(gs.agent),
                        goal: rot.map_cell(gs.goal),
                    }),
                    StateKey::Terminal => StateKey::Terminal,
                };
                world.index_of(&mapped).expect("rotation is a bijection")
            })
            .collect();
        Ok((world, bijection))
    }
}

fn enumerate_keys(layout: &RoomLayout, mode: GoalMode, goals: &[Cell]) -> IndexSet<StateKey> {
    let mut states = IndexSet::new();
    let cells = layout.free_cells();
    match mode {
        GoalMode::FixedGoal => {
            for &agent in cells {
                if !goals.contains(&agent) {
                    states.insert(StateKey::Live(GridState { agent, goal: goals[0] }));
                }
            }
        }
        GoalMode::RandomGoal | GoalMode::RandomBoth => {
            for &agent in cells {
                for &goal in cells {
                    if agent != goal {
                        states.insert(StateKey::Live(GridState { agent, goal }));
                    }
                }
            }
        }
    }
    states.insert(StateKey::Terminal);
    states
}

fn transition(
    layout: &RoomLayout,
    goals: &[Cell],
    mode: GoalMode,
    gs: &GridState,
    action: Action,
) -> (StateKey, f64, bool) {
    let agent = layout.move_from(gs.agent, action);
    let reached = match mode {
        GoalMode::FixedGoal => goals.contains(&agent),
        _ => agent == gs.goal,
    };
    if reached {
        (StateKey::Terminal, 1.0, true)
    } else {
        (StateKey::Live(GridState { agent, goal: gs.goal }), 0.0, false)
    }
}

/// Enumerates states of a layout in index order: row-major agent, then
/// row-major goal, terminal last. Fixed-goal mode uses the goal `(n-2, n-2)`.
pub fn enumerate_states(layout: &RoomLayout, mode: GoalMode) -> Vec<StateKey> {
    let goal = (layout.n() - 2, layout.n() - 2);
    enumerate_keys(layout, mode, &[goal]).into_iter().collect()
}

/// One step of a single-goal world.
pub fn step(layout: &RoomLayout, state: &GridState, action: Action) -> Result<(StateKey, f64, bool)> {
    if state.agent == state.goal {
        return Err(Error::InvalidArgument("agent already on the goal".into()));
    }
    Ok(transition(layout, &[state.goal], GoalMode::RandomBoth, state, action))
}

/// 180° rotation `(r, c) -> (n-1-r, n-1-c)` restricted to free cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rotation {
    n: usize,
    /// `free index in original -> free index in rotated`
    pub cell_map: Vec<usize>,
}

impl Rotation {
    pub fn map_cell(&self, (r, c): Cell) -> Cell {
        (self.n - 1 - r, self.n - 1 - c)
    }
}

pub fn rotate_180(layout: &RoomLayout) -> (RoomLayout, Rotation) {
    let n = layout.n();
    let mut wall = vec![false; n * n];
    for (r, c) in layout.wall_cells() {
        wall[(n - 1 - r) * n + (n - 1 - c)] = true;
    }
    let doors = layout.doors().iter().map(|&(r, c)| (n - 1 - r, n - 1 - c)).collect();
    let rotated = RoomLayout::from_mask(n, wall, doors);
    let rot = Rotation { n, cell_map: Vec::new() };
    let cell_map = layout
        .free_cells()
        .iter()
        .map(|&cell| rotated.free_index(rot.map_cell(cell)).expect("rotated cell is free"))
        .collect();
    (rotated, Rotation { n, cell_map })
}

/// Grey level used for cells without a value in field plots.
const EMPTY_GREY: u8 = 128;

/// Binary PGM (P5) of a per-free-cell scalar field. Walls are black; values
/// are mapped linearly to grey levels 32..=255.
pub fn render_field_pgm(layout: &RoomLayout, field: &[Option<f64>], scale: usize) -> Vec<u8> {
    let (lo, hi) = field
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let grey = |cell: Cell| -> u8 {
        if layout.is_wall(cell) {
            return 0;
        }
        match field[layout.free_index(cell).unwrap()] {
            None => EMPTY_GREY,
            Some(v) if span > 0.0 => (32.0 + 223.0 * (v - lo) / span).round() as u8,
            Some(_) => 255,
        }
    };
    pgm(layout.n(), scale, grey)
}

/// Binary PGM of the layout: walls black, free cells white, agent and goal grey.
pub fn render_layout_pgm(layout: &RoomLayout, agent: Option<Cell>, goals: &[Cell], scale: usize) -> Vec<u8> {
    pgm(layout.n(), scale, |cell| {
        if layout.is_wall(cell) {
            0
        } else if Some(cell) == agent {
            170
        } else if goals.contains(&cell) {
            85
        } else {
            255
        }
    })
}

fn pgm(n: usize, scale: usize, grey: impl Fn(Cell) -> u8) -> Vec<u8> {
    let scale = scale.max(1);
    let side = n * scale;
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    for y in 0..side {
        for x in 0..side {
            out.push(grey((y / scale, x / scale)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_small_layout_counts() {
        let layout = RoomLayout::canonical(8).unwrap();
        // 6x6 interior, minus the 11 cells of the two interior walls, plus 4 doors.
        assert_eq!(layout.free_cells().len(), 29);
        assert_eq!(layout.doors(), &[(2, 4), (4, 2), (4, 6), (6, 4)]);
        assert!(RoomLayout::canonical(7).is_err());
    }

    #[test]
    fn disconnected_layout_is_rejected() {
        let n = 8;
        let mut walls = Vec::new();
        for i in 0..n {
            walls.extend([(0, i), (n - 1, i), (i, 0), (i, n - 1), (4, i)]);
        }
        assert!(matches!(RoomLayout::new(n, &walls, &[]), Err(Error::Layout(_))));
    }

    #[test]
    fn moving_into_goal_ends_episode() {
        let layout = RoomLayout::canonical(8).unwrap();
        let gs = GridState { agent: (6, 5), goal: (6, 6) };
        assert_eq!(step(&layout, &gs, Action::Right).unwrap(), (StateKey::Terminal, 1.0, true));
    }

    #[test]
    fn wall_bump_keeps_position() {
        let layout = RoomLayout::canonical(8).unwrap();
        let gs = GridState { agent: (1, 1), goal: (6, 6) };
        for action in [Action::Up, Action::Left] {
            let (next, r, done) = step(&layout, &gs, action).unwrap();
            assert_eq!(next, StateKey::Live(gs));
            assert_eq!((r, done), (0.0, false));
        }
    }

    #[test]
    fn terminal_cannot_step() {
        let world = build_four_rooms(8, GoalMode::FixedGoal, 0).unwrap();
        let t = world.terminal_index();
        assert!(matches!(world.step_index(t, Action::Up), Err(Error::Terminal(_))));
    }

    #[test]
    fn rotation_maps_corner() {
        let layout = RoomLayout::canonical(8).unwrap();
        let (_, rot) = rotate_180(&layout);
        assert_eq!(rot.map_cell((1, 1)), (6, 6));
    }

    #[test]
    fn layout_json_roundtrip() {
        let layout = RoomLayout::canonical(10).unwrap();
        assert_eq!(RoomLayout::from_json(&layout.to_json().unwrap()).unwrap(), layout);
    }

    #[test]
    fn pgm_header_and_size() {
        let layout = RoomLayout::canonical(8).unwrap();
        let img = render_layout_pgm(&layout, Some((1, 1)), &[(6, 6)], 2);
        let header = b"P5\n16 16\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert_eq!(img.len(), header.len() + 256);
    }

    #[test]
    fn multiple_goals_are_seeded() {
        let cfg = GridConfig { goals: 5, ..GridConfig::default() };
        let a = cfg.build(3).unwrap();
        let b = cfg.build(3).unwrap();
        assert_eq!(a.goals, b.goals);
        assert_eq!(a.goals.len(), 5);
        assert_eq!(a.n_states(), 29 - 5 + 1);
        let random = GridConfig { goals: 2, mode: GoalMode::RandomGoal, ..GridConfig::default() };
        assert!(random.build(0).is_err());
    }
}
