//! Rule-based observation-to-text conversion.
//!
//! Sentences, in order: the carried object (if any), then a row-major scan
//! of the view from the agent's row outwards, left to right. Walls are only
//! reported for the nearest visible wall straight ahead, straight left and
//! straight right.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{
    self, Action, Cell, DoorState, EnvConfig, EnvError, EnvKind, GridState, Observation, Outcome,
    AGENT_VX, AGENT_VY, VIEW_SIZE,
};
use crate::trajectory::{EnvStep, EpisodeEnv};

/// Embedded in recorded demonstrations so stale recordings can be detected.
pub const CONVERTER_VERSION: &str = "babyai-text-v1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextObservation {
    pub sentences: Vec<String>,
    pub goal: String,
}

impl TextObservation {
    pub fn new(sentences: Vec<String>, goal: impl Into<String>) -> Self {
        Self {
            sentences,
            goal: goal.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("mission text is empty")]
    EmptyMission,
}

fn steps(n: usize) -> String {
    if n == 1 {
        "1 step".to_string()
    } else {
        format!("{n} steps")
    }
}

fn describe(cell: Cell) -> Option<String> {
    let text = match cell {
        Cell::Empty | Cell::Wall => return None,
        Cell::Goal => "green goal".to_string(),
        Cell::Door { color, state } => {
            let state = match state {
                DoorState::Open => "open",
                DoorState::Closed => "closed",
                DoorState::Locked => "locked",
            };
            format!("{state} {} door", color.name())
        }
        other => other.object().map(|o| o.to_string())?,
    };
    Some(text)
}

/// Relative position phrase for a view cell offset `lateral` columns to the
/// right (negative: left) and `forward` rows ahead.
fn offset_phrase(lateral: i32, forward: usize) -> String {
    let side = if lateral < 0 { "left" } else { "right" };
    let lat = lateral.unsigned_abs() as usize;
    match (lat, forward) {
        (0, f) => format!("{} forward", steps(f)),
        (l, 0) => format!("{} {side}", steps(l)),
        (l, f) => format!("{} {side} and {} forward", steps(l), steps(f)),
    }
}

pub fn observation_to_text(obs: &Observation) -> TextObservation {
    let mut sentences = Vec::new();
    if let Some(obj) = obs.carried {
        sentences.push(format!("You carry a {obj}"));
    }

    let is_wall = |vx: usize, vy: usize| obs.get(vx, vy) == Some(Cell::Wall);
    let wall_ahead = (0..AGENT_VY).rev().find(|&vy| is_wall(AGENT_VX, vy));
    let wall_left = (0..AGENT_VX).rev().find(|&vx| is_wall(vx, AGENT_VY));
    let wall_right = (AGENT_VX + 1..VIEW_SIZE).find(|&vx| is_wall(vx, AGENT_VY));

    for vy in (0..VIEW_SIZE).rev() {
        for vx in 0..VIEW_SIZE {
            if (vx, vy) == (AGENT_VX, AGENT_VY) {
                continue;
            }
            let Some(cell) = obs.get(vx, vy) else {
                continue;
            };
            let lateral = vx as i32 - AGENT_VX as i32;
            let forward = AGENT_VY - vy;
            if cell == Cell::Wall {
                let nearest = (vx == AGENT_VX && wall_ahead == Some(vy))
                    || (vy == AGENT_VY && (wall_left == Some(vx) || wall_right == Some(vx)));
                if nearest {
                    sentences.push(format!(
                        "You see a wall {}",
                        offset_phrase(lateral, forward)
                    ));
                }
            } else if let Some(what) = describe(cell) {
                sentences.push(format!(
                    "You see a {what} {}",
                    offset_phrase(lateral, forward)
                ));
            }
        }
    }

    TextObservation {
        sentences,
        goal: goal_to_text(&obs.mission).unwrap_or_default(),
    }
}

/// Normalizes an environment mission: whitespace collapsed, articles in
/// lower case, trailing period removed.
pub fn goal_to_text(mission: &str) -> Result<String, TextError> {
    let words: Vec<String> = mission
        .split_whitespace()
        .map(|w| match w {
            "A" | "An" | "The" => w.to_ascii_lowercase(),
            _ => w.to_string(),
        })
        .collect();
    let mut goal = words.join(" ");
    while goal.ends_with('.') {
        goal.pop();
    }
    let goal = goal.trim_end().to_string();
    if goal.is_empty() {
        return Err(TextError::EmptyMission);
    }
    Ok(goal)
}

/// A gridworld seen through the text converter.
#[derive(Debug, Clone)]
pub struct LanguageEnv {
    config: EnvConfig,
    state: Option<GridState>,
}

impl LanguageEnv {
    pub fn new(config: EnvConfig) -> Self {
        Self {
            config,
            state: None,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn kind(&self) -> EnvKind {
        self.config.kind
    }

    /// Hidden state of the running episode, if any.
    pub fn state(&self) -> Option<&GridState> {
        self.state.as_ref()
    }
}

impl EpisodeEnv for LanguageEnv {
    fn actions(&self) -> &[Action] {
        self.config.kind.actions()
    }

    fn reset(&mut self, seed: u64) -> Result<TextObservation, EnvError> {
        let (state, obs) = gridworld::reset(&self.config.with_seed(seed))?;
        self.state = Some(state);
        Ok(observation_to_text(&obs))
    }

    fn step(&mut self, action: Action) -> Result<EnvStep, EnvError> {
        let state = self.state.as_mut().ok_or(EnvError::EpisodeFinished)?;
        let r = state.step(action)?;
        Ok(EnvStep {
            observation: observation_to_text(&r.observation),
            reward: r.reward,
            terminated: r.terminated,
            truncated: r.truncated,
            success: r.outcome == Some(Outcome::Success),
        })
    }
}
