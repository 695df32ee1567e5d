//! Text assembly for the policy input.

use serde::{Deserialize, Serialize};

use crate::gridworld::{Action, EnvKind};
use crate::strategy::{format_for_prompt, StrategyList};
use crate::textgen::TextObservation;
use crate::trajectory::PseudoState;

pub const STRATEGY_HEADER: &str = "Strategies to follow:";
pub const GOAL_PREFIX: &str = "Goal of the agent: ";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelInput {
    pub text: String,
}

/// Short environment description placed at the top of every policy input.
pub fn env_description(kind: EnvKind) -> String {
    let task = match kind {
        EnvKind::DynamicObstacles6x6 => {
            "You are an agent in a room with moving blue ball obstacles. Reach the green goal square without touching an obstacle."
        }
        EnvKind::UnlockPickup => {
            "You are an agent in two rooms joined by a locked door. Get the key of the door color, open the door and pick up the target box."
        }
        EnvKind::KeyCorridorS3R2 => {
            "You are an agent in a corridor with small side rooms. Find the key, open the locked door and pick up the target ball."
        }
        EnvKind::PutNextS5N2 => {
            "You are an agent in a room with keys, balls and boxes. Pick up the named object and drop it next to the other named object."
        }
    };
    let actions: Vec<&str> = kind.actions().iter().map(|a| a.name()).collect();
    format!("{task}\nPossible actions: {}.", actions.join(", "))
}

pub fn observation_line(index: usize, obs: &TextObservation) -> String {
    let body = if obs.sentences.is_empty() {
        "nothing".to_string()
    } else {
        obs.sentences.join(", ")
    };
    format!("Observation {index}: {body}")
}

pub fn action_line(index: usize, action: Option<Action>) -> String {
    match action {
        Some(a) => format!("Action {index}: {}", a.name()),
        None => format!("Action {index}:"),
    }
}

/// Numbered Observation/Action lines for `steps`, starting at 1.
pub fn render_steps(steps: &[(TextObservation, Action)]) -> Vec<String> {
    let mut lines = Vec::with_capacity(steps.len() * 2);
    for (i, (obs, action)) in steps.iter().enumerate() {
        lines.push(observation_line(i + 1, obs));
        lines.push(action_line(i + 1, Some(*action)));
    }
    lines
}

/// Pseudo-state lines ending in the open action prompt.
pub fn render_pseudo_state(s: &PseudoState) -> Vec<String> {
    let mut lines = render_steps(&s.history);
    let n = s.history.len() + 1;
    lines.push(observation_line(n, &s.current));
    lines.push(action_line(n, None));
    lines
}

pub fn construct_input(
    env_description: &str,
    strategies: &StrategyList,
    goal: &str,
    s: &PseudoState,
) -> ModelInput {
    let mut lines = vec![env_description.trim_end().to_string()];
    if !strategies.is_empty() {
        lines.push(STRATEGY_HEADER.to_string());
        lines.push(format_for_prompt(strategies));
    }
    lines.push(format!("{GOAL_PREFIX}{goal}"));
    lines.extend(render_pseudo_state(s));
    ModelInput {
        text: lines.join("\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::StrategyItem;

    fn state(history: usize) -> PseudoState {
        let o =
            |i: usize| TextObservation::new(vec![format!("You see a wall {i} steps forward")], "g");
        PseudoState {
            history: (0..history).map(|i| (o(i + 1), Action::LeftTurn)).collect(),
            current: o(history + 1),
            goal: "g".into(),
        }
    }

    #[test]
    fn full_window_ends_with_action_three() {
        let input = construct_input("env", &StrategyList::empty(), "g", &state(2));
        assert!(input.text.ends_with("Action 3:"));
        assert_eq!(input.text.matches("Observation ").count(), 3);
    }

    #[test]
    fn first_step_has_one_observation() {
        let input = construct_input("env", &StrategyList::empty(), "g", &state(0));
        assert_eq!(input.text.matches("Observation ").count(), 1);
        assert!(input
            .text
            .ends_with("Observation 1: You see a wall 1 steps forward\nAction 1:"));
    }

    #[test]
    fn strategy_block_only_when_present() {
        let none = construct_input("env", &StrategyList::empty(), "g", &state(1));
        assert!(!none.text.contains(STRATEGY_HEADER));
        let some = StrategyList::new(vec![StrategyItem::new("Be careful", "Look first.")]);
        let with = construct_input("env", &some, "g", &state(1));
        let lines: Vec<&str> = with.text.lines().collect();
        assert_eq!(lines[0], "env");
        assert_eq!(lines[1], STRATEGY_HEADER);
        assert_eq!(lines[2], "1. Be careful:");
        assert_eq!(lines[4], "Goal of the agent: g");
    }

    #[test]
    fn description_lists_actions() {
        assert!(env_description(EnvKind::DynamicObstacles6x6)
            .ends_with("Possible actions: left turn, right turn, move forward."));
    }
}
