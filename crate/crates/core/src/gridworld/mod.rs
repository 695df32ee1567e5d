//! Seedable, partially observable gridworlds.
//!
//! Four task families are provided: a 6x6 room with moving obstacles, an
//! unlock-then-pickup two-room layout, a small key corridor, and a
//! put-next-to task over two joined rooms. The agent sees a 7x7 egocentric
//! window subject to occlusion; the oracle planner has full state access.

mod layouts;
mod oracle;
mod view;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::oracle_action;
pub use view::{Observation, AGENT_VX, AGENT_VY, VIEW_SIZE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown environment kind `{0}`")]
    UnknownEnvKind(String),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("episode already finished; call reset first")]
    EpisodeFinished,
    #[error("action `{0}` is not available in this environment")]
    InvalidAction(String),
    #[error("invalid reward query: {0}")]
    InvalidReward(String),
    #[error("no feasible plan: {0}")]
    Unsolvable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
    Blue,
    Purple,
    Yellow,
    Grey,
}

impl Color {
    pub const ALL: [Color; 6] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Purple,
        Color::Yellow,
        Color::Grey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Purple => "purple",
            Color::Yellow => "yellow",
            Color::Grey => "grey",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Key,
    Ball,
    Box,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 3] = [ObjectKind::Key, ObjectKind::Ball, ObjectKind::Box];

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Key => "key",
            ObjectKind::Ball => "ball",
            ObjectKind::Box => "box",
        }
    }
}

/// A portable object: something that can be picked up and carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Object {
    pub kind: ObjectKind,
    pub color: Color,
}

impl Object {
    pub fn new(kind: ObjectKind, color: Color) -> Self {
        Self { kind, color }
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.color.name(), self.kind.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoorState {
    Open,
    Closed,
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Cell {
    Empty,
    Wall,
    Goal,
    Door { color: Color, state: DoorState },
    Key { color: Color },
    Ball { color: Color },
    Box { color: Color },
}

impl Cell {
    pub fn object(self) -> Option<Object> {
        match self {
            Cell::Key { color } => Some(Object::new(ObjectKind::Key, color)),
            Cell::Ball { color } => Some(Object::new(ObjectKind::Ball, color)),
            Cell::Box { color } => Some(Object::new(ObjectKind::Box, color)),
            _ => None,
        }
    }

    pub fn from_object(obj: Object) -> Cell {
        let color = obj.color;
        match obj.kind {
            ObjectKind::Key => Cell::Key { color },
            ObjectKind::Ball => Cell::Ball { color },
            ObjectKind::Box => Cell::Box { color },
        }
    }

    /// Whether the agent may stand on this cell.
    pub fn is_passable(self) -> bool {
        matches!(
            self,
            Cell::Empty
                | Cell::Goal
                | Cell::Door {
                    state: DoorState::Open,
                    ..
                }
        )
    }

    /// Whether light passes through this cell.
    pub fn see_behind(self) -> bool {
        match self {
            Cell::Wall => false,
            Cell::Door { state, .. } => state == DoorState::Open,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    /// Unit step in grid coordinates (y grows downwards).
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    pub fn turn_right(self) -> Self {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn turn_left(self) -> Self {
        match self {
            Direction::North => Direction::West,
            Direction::West => Direction::South,
            Direction::South => Direction::East,
            Direction::East => Direction::North,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "left turn")]
    LeftTurn,
    #[serde(rename = "right turn")]
    RightTurn,
    #[serde(rename = "move forward")]
    MoveForward,
    #[serde(rename = "pickup")]
    Pickup,
    #[serde(rename = "drop")]
    Drop,
    #[serde(rename = "toggle")]
    Toggle,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::LeftTurn,
        Action::RightTurn,
        Action::MoveForward,
        Action::Pickup,
        Action::Drop,
        Action::Toggle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::LeftTurn => "left turn",
            Action::RightTurn => "right turn",
            Action::MoveForward => "move forward",
            Action::Pickup => "pickup",
            Action::Drop => "drop",
            Action::Toggle => "toggle",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.iter().copied().find(|a| a.name() == name)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "dynamic-obstacles-6x6")]
    DynamicObstacles6x6,
    #[serde(rename = "unlock-pickup")]
    UnlockPickup,
    #[serde(rename = "key-corridor-s3r2")]
    KeyCorridorS3R2,
    #[serde(rename = "put-next-s5n2")]
    PutNextS5N2,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::DynamicObstacles6x6,
        EnvKind::UnlockPickup,
        EnvKind::KeyCorridorS3R2,
        EnvKind::PutNextS5N2,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            EnvKind::DynamicObstacles6x6 => "dynamic-obstacles-6x6",
            EnvKind::UnlockPickup => "unlock-pickup",
            EnvKind::KeyCorridorS3R2 => "key-corridor-s3r2",
            EnvKind::PutNextS5N2 => "put-next-s5n2",
        }
    }

    /// Human-readable task name used in prompts.
    pub fn title(self) -> &'static str {
        match self {
            EnvKind::DynamicObstacles6x6 => "Dynamic Obstacles",
            EnvKind::UnlockPickup => "Unlock Pickup",
            EnvKind::KeyCorridorS3R2 => "Key Corridor",
            EnvKind::PutNextS5N2 => "Put Next",
        }
    }

    pub fn default_max_steps(self) -> u32 {
        match self {
            // 4 * 6 * 6
            EnvKind::DynamicObstacles6x6 => 144,
            _ => 60,
        }
    }

    /// The actions available to the agent, in policy index order.
    pub fn actions(self) -> &'static [Action] {
        match self {
            EnvKind::DynamicObstacles6x6 => &Action::ALL[..3],
            _ => &Action::ALL,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        EnvKind::ALL
            .iter()
            .copied()
            .find(|k| k.slug() == norm)
            .ok_or_else(|| EnvError::UnknownEnvKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub max_steps: u32,
    pub seed: u64,
}

impl EnvConfig {
    pub fn new(kind: EnvKind, seed: u64) -> Self {
        Self {
            kind,
            max_steps: kind.default_max_steps(),
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// What the agent has to accomplish in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    ReachGoal,
    Pickup { target: Object },
    PutNext { moved: Object, anchor: Object },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Failure,
    Collision,
}

/// Terminal reward: `1 - 0.9 * total_steps / max_steps` on success, 0 on
/// timeout, −1 on collision with a moving obstacle.
pub fn compute_reward(total_steps: u32, max_steps: u32, outcome: Outcome) -> Result<f64, EnvError> {
    match outcome {
        Outcome::Success => {
            if max_steps == 0 || total_steps == 0 || total_steps > max_steps {
                return Err(EnvError::InvalidReward(format!(
                    "success after {total_steps} steps with max_steps {max_steps}"
                )));
            }
            Ok(1.0 - 0.9 * (f64::from(total_steps) / f64::from(max_steps)))
        }
        Outcome::Failure => Ok(0.0),
        Outcome::Collision => Ok(-1.0),
    }
}

/// Full hidden state of one episode.
#[derive(Debug, Clone)]
pub struct GridState {
    pub kind: EnvKind,
    pub width: i32,
    pub height: i32,
    /// Row-major, `cells[y * width + x]`.
    pub cells: Vec<Cell>,
    pub agent_pos: (i32, i32),
    pub agent_dir: Direction,
    pub carried: Option<Object>,
    pub step_count: u32,
    pub max_steps: u32,
    pub obstacle_positions: Vec<(i32, i32)>,
    pub mission: String,
    pub task: Task,
    pub finished: bool,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// Set when the episode ended this step.
    pub outcome: Option<Outcome>,
}

/// Builds the initial state and observation for `config`.
pub fn reset(config: &EnvConfig) -> Result<(GridState, Observation), EnvError> {
    config.validate()?;
    let state = layouts::generate(config);
    let obs = state.observation();
    Ok((state, obs))
}

impl GridState {
    /// Assembles a state from explicit parts. Mostly useful for tests and
    /// hand-built scenarios; `reset` is the usual entry point.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: EnvKind,
        width: i32,
        height: i32,
        cells: Vec<Cell>,
        agent_pos: (i32, i32),
        agent_dir: Direction,
        task: Task,
        mission: impl Into<String>,
        max_steps: u32,
        seed: u64,
    ) -> Self {
        use rand::SeedableRng;
        assert_eq!(cells.len(), (width * height) as usize, "cell count");
        let obstacle_positions = if kind == EnvKind::DynamicObstacles6x6 {
            (0..height)
                .flat_map(|y| (0..width).map(move |x| (x, y)))
                .filter(|&(x, y)| matches!(cells[(y * width + x) as usize], Cell::Ball { .. }))
                .collect()
        } else {
            Vec::new()
        };
        Self {
            kind,
            width,
            height,
            cells,
            agent_pos,
            agent_dir,
            carried: None,
            step_count: 0,
            max_steps,
            obstacle_positions,
            mission: mission.into(),
            task,
            finished: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && x < self.width && y < self.height
    }

    /// Cell content; out-of-bounds reads as wall.
    pub fn get(&self, x: i32, y: i32) -> Cell {
        if self.in_bounds(x, y) {
            self.cells[(y * self.width + x) as usize]
        } else {
            Cell::Wall
        }
    }

    pub fn set(&mut self, x: i32, y: i32, cell: Cell) {
        let w = self.width;
        self.cells[(y * w + x) as usize] = cell;
    }

    pub fn front_pos(&self) -> (i32, i32) {
        let (dx, dy) = self.agent_dir.delta();
        (self.agent_pos.0 + dx, self.agent_pos.1 + dy)
    }

    pub fn actions(&self) -> &'static [Action] {
        self.kind.actions()
    }

    /// Total number of portable objects, on the grid or carried.
    pub fn object_count(&self) -> usize {
        self.cells.iter().filter(|c| c.object().is_some()).count()
            + usize::from(self.carried.is_some())
    }

    /// Position of the first grid cell holding `obj`.
    pub fn find_object(&self, obj: Object) -> Option<(i32, i32)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .find(|&(x, y)| self.get(x, y).object() == Some(obj))
    }

    pub fn observation(&self) -> Observation {
        view::observe(self)
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.finished {
            return Err(EnvError::EpisodeFinished);
        }
        if !self.actions().contains(&action) {
            return Err(EnvError::InvalidAction(action.name().to_string()));
        }
        self.step_count += 1;
        let (fx, fy) = self.front_pos();
        let front = self.get(fx, fy);
        let mut outcome = None;

        match action {
            Action::LeftTurn => self.agent_dir = self.agent_dir.turn_left(),
            Action::RightTurn => self.agent_dir = self.agent_dir.turn_right(),
            Action::MoveForward => {
                if self.obstacle_positions.contains(&(fx, fy)) {
                    outcome = Some(Outcome::Collision);
                } else if front.is_passable() {
                    self.agent_pos = (fx, fy);
                    if front == Cell::Goal && self.task == Task::ReachGoal {
                        outcome = Some(Outcome::Success);
                    }
                }
            }
            Action::Pickup => {
                if self.carried.is_none() {
                    if let Some(obj) = front.object() {
                        self.carried = Some(obj);
                        self.set(fx, fy, Cell::Empty);
                        if let Task::Pickup { target } = self.task {
                            if obj == target {
                                outcome = Some(Outcome::Success);
                            }
                        }
                    }
                }
            }
            Action::Drop => {
                if let Some(obj) = self.carried {
                    if front == Cell::Empty && self.in_bounds(fx, fy) {
                        self.set(fx, fy, Cell::from_object(obj));
                        self.carried = None;
                        if let Task::PutNext { moved, anchor } = self.task {
                            if obj == moved {
                                if let Some((ax, ay)) = self.find_object(anchor) {
                                    if (ax - fx).abs() + (ay - fy).abs() == 1 {
                                        outcome = Some(Outcome::Success);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Action::Toggle => {
                if let Cell::Door { color, state } = front {
                    let next = match state {
                        DoorState::Locked => {
                            if self.carried == Some(Object::new(ObjectKind::Key, color)) {
                                DoorState::Open
                            } else {
                                DoorState::Locked
                            }
                        }
                        DoorState::Closed => DoorState::Open,
                        DoorState::Open => DoorState::Closed,
                    };
                    self.set(fx, fy, Cell::Door { color, state: next });
                }
            }
        }

        if outcome.is_none() && !self.obstacle_positions.is_empty() {
            self.move_obstacles();
        }
        let truncated = outcome.is_none() && self.step_count >= self.max_steps;
        if truncated {
            outcome = Some(Outcome::Failure);
        }
        let reward = match outcome {
            Some(o) => compute_reward(self.step_count, self.max_steps, o)?,
            None => 0.0,
        };
        let terminated = matches!(outcome, Some(Outcome::Success | Outcome::Collision));
        self.finished = terminated || truncated;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminated,
            truncated,
            outcome,
        })
    }

    /// Each obstacle picks uniformly among {stay, N, E, S, W}; the move
    /// happens only if the target cell is empty and not the agent's cell.
    fn move_obstacles(&mut self) {
        for i in 0..self.obstacle_positions.len() {
            let (ox, oy) = self.obstacle_positions[i];
            let choice = self.rng.gen_range(0..5usize);
            if choice == 0 {
                continue;
            }
            let (dx, dy) = Direction::ALL[choice - 1].delta();
            let (nx, ny) = (ox + dx, oy + dy);
            if self.in_bounds(nx, ny)
                && self.get(nx, ny) == Cell::Empty
                && (nx, ny) != self.agent_pos
            {
                let ball = self.get(ox, oy);
                self.set(ox, oy, Cell::Empty);
                self.set(nx, ny, ball);
                self.obstacle_positions[i] = (nx, ny);
            }
        }
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_room(kind: EnvKind, size: i32) -> Vec<Cell> {
        let mut cells = vec![Cell::Empty; (size * size) as usize];
        for y in 0..size {
            for x in 0..size {
                if x == 0 || y == 0 || x == size - 1 || y == size - 1 {
                    cells[(y * size + x) as usize] = Cell::Wall;
                }
            }
        }
        let _ = kind;
        cells
    }

    #[test]
    fn reward_formula_examples() {
        assert!((compute_reward(30, 60, Outcome::Success).unwrap() - 0.55).abs() < 1e-12);
        assert_eq!(compute_reward(60, 60, Outcome::Failure).unwrap(), 0.0);
        assert_eq!(compute_reward(12, 60, Outcome::Collision).unwrap(), -1.0);
        assert!(compute_reward(61, 60, Outcome::Success).is_err());
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = EnvConfig::new(EnvKind::DynamicObstacles6x6, 7);
        let (a, oa) = reset(&cfg).unwrap();
        let (b, ob) = reset(&cfg).unwrap();
        assert_eq!(a.obstacle_positions, b.obstacle_positions);
        assert_eq!(a.cells, b.cells);
        assert_eq!(oa, ob);
        assert_eq!(a.step_count, 0);
        assert_eq!(a.obstacle_positions.len(), 3);
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(matches!(
            "lava-crossing".parse::<EnvKind>(),
            Err(EnvError::UnknownEnvKind(_))
        ));
        assert_eq!(
            "key_corridor_s3r2".parse::<EnvKind>().unwrap(),
            EnvKind::KeyCorridorS3R2
        );
    }

    #[test]
    fn zero_max_steps_is_invalid() {
        let mut cfg = EnvConfig::new(EnvKind::UnlockPickup, 1);
        cfg.max_steps = 0;
        assert!(reset(&cfg).is_err());
    }

    #[test]
    fn blocked_move_into_wall() {
        let cells = open_room(EnvKind::UnlockPickup, 5);
        let mut s = GridState::from_parts(
            EnvKind::UnlockPickup,
            5,
            5,
            cells,
            (1, 1),
            Direction::North,
            Task::Pickup {
                target: Object::new(ObjectKind::Box, Color::Red),
            },
            "pick up the red box",
            60,
            0,
        );
        let r = s.step(Action::MoveForward).unwrap();
        assert_eq!(s.agent_pos, (1, 1));
        assert_eq!(s.step_count, 1);
        assert_eq!(r.reward, 0.0);
        assert!(!r.terminated && !r.truncated);
    }

    #[test]
    fn collision_with_obstacle_terminates() {
        let mut cells = open_room(EnvKind::DynamicObstacles6x6, 6);
        cells[(6 + 2) as usize] = Cell::Ball { color: Color::Blue };
        cells[(4 * 6 + 4) as usize] = Cell::Goal;
        let mut s = GridState::from_parts(
            EnvKind::DynamicObstacles6x6,
            6,
            6,
            cells,
            (1, 1),
            Direction::East,
            Task::ReachGoal,
            "get to the green goal square",
            144,
            3,
        );
        let r = s.step(Action::MoveForward).unwrap();
        assert_eq!(r.reward, -1.0);
        assert!(r.terminated);
        assert_eq!(r.outcome, Some(Outcome::Collision));
        assert_eq!(
            s.step(Action::LeftTurn).unwrap_err(),
            EnvError::EpisodeFinished
        );
    }

    #[test]
    fn timeout_truncates_with_zero_reward() {
        let mut cfg = EnvConfig::new(EnvKind::PutNextS5N2, 4);
        cfg.max_steps = 3;
        let (mut s, _) = reset(&cfg).unwrap();
        for i in 0..3 {
            let r = s.step(Action::LeftTurn).unwrap();
            assert_eq!(r.reward, 0.0);
            assert_eq!(r.truncated, i == 2);
            assert!(!r.terminated);
        }
        assert!(s.finished);
    }

    #[test]
    fn success_reward_uses_step_count() {
        let mut cells = open_room(EnvKind::DynamicObstacles6x6, 6);
        cells[(6 + 2) as usize] = Cell::Goal;
        let mut s = GridState::from_parts(
            EnvKind::DynamicObstacles6x6,
            6,
            6,
            cells,
            (1, 1),
            Direction::East,
            Task::ReachGoal,
            "get to the green goal square",
            144,
            3,
        );
        let r = s.step(Action::MoveForward).unwrap();
        assert!(r.terminated);
        assert!((r.reward - (1.0 - 0.9 / 144.0)).abs() < 1e-12);
    }

    #[test]
    fn unlock_then_pickup_sequence() {
        // key in front, locked door behind it, box behind the door
        let w = 7;
        let mut cells = vec![Cell::Wall; (w * 3) as usize];
        for x in 1..6 {
            cells[(w + x) as usize] = Cell::Empty;
        }
        cells[(w + 2) as usize] = Cell::Key {
            color: Color::Yellow,
        };
        cells[(w + 3) as usize] = Cell::Door {
            color: Color::Yellow,
            state: DoorState::Locked,
        };
        cells[(w + 4) as usize] = Cell::Box { color: Color::Red };
        let target = Object::new(ObjectKind::Box, Color::Red);
        let mut s = GridState::from_parts(
            EnvKind::UnlockPickup,
            w,
            3,
            cells,
            (1, 1),
            Direction::East,
            Task::Pickup { target },
            "pick up the red box",
            60,
            0,
        );
        let count = s.object_count();
        s.step(Action::Toggle).unwrap();
        s.step(Action::Pickup).unwrap();
        assert_eq!(s.carried.map(|o| o.kind), Some(ObjectKind::Key));
        s.step(Action::MoveForward).unwrap();
        assert_eq!(s.agent_pos, (2, 1));
        s.step(Action::Toggle).unwrap();
        assert!(matches!(
            s.get(3, 1),
            Cell::Door {
                state: DoorState::Open,
                ..
            }
        ));
        s.step(Action::MoveForward).unwrap();
        // pickup fails while carrying the key
        s.step(Action::Pickup).unwrap();
        assert_eq!(s.get(4, 1), Cell::Box { color: Color::Red });
        // facing the wall: drop is a no-op
        s.step(Action::LeftTurn).unwrap();
        s.step(Action::Drop).unwrap();
        assert!(s.carried.is_some());
        s.step(Action::LeftTurn).unwrap();
        s.step(Action::Drop).unwrap();
        assert!(s.carried.is_none());
        assert_eq!(
            s.get(2, 1),
            Cell::Key {
                color: Color::Yellow
            }
        );
        assert_eq!(s.object_count(), count);
    }
}
