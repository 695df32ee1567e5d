//! Pseudo-states, expert demonstrations and the rollout buffer.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{self, oracle_action, Action, EnvConfig, EnvError, EnvKind, Outcome};
use crate::textgen::{observation_to_text, TextObservation, CONVERTER_VERSION};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("time step {t} outside 1..={len}")]
    StepOutOfRange { t: usize, len: usize },
    #[error("observation and action counts disagree ({obs} observations, {actions} actions)")]
    LengthMismatch { obs: usize, actions: usize },
    #[error("found only {found} solvable seeds out of {tried} tried, needed {needed}")]
    NotEnoughDemos {
        found: usize,
        needed: usize,
        tried: u64,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The windowed history plus current observation fed to the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoState {
    pub history: Vec<(TextObservation, Action)>,
    pub current: TextObservation,
    pub goal: String,
}

/// Builds the pseudo-state at 1-based time `t` from the episode so far.
/// `actions[i]` is the action taken after `observations[i]`; only the first
/// `t - 1` actions are read.
pub fn make_pseudo_state(
    observations: &[TextObservation],
    actions: &[Action],
    t: usize,
    window: usize,
    goal: &str,
) -> Result<PseudoState, TrajectoryError> {
    if t == 0 || t > observations.len() {
        return Err(TrajectoryError::StepOutOfRange {
            t,
            len: observations.len(),
        });
    }
    if actions.len() < t - 1 {
        return Err(TrajectoryError::LengthMismatch {
            obs: t,
            actions: actions.len(),
        });
    }
    let start = (t - 1).saturating_sub(window);
    let history = (start..t - 1)
        .map(|i| (observations[i].clone(), actions[i]))
        .collect();
    Ok(PseudoState {
        history,
        current: observations[t - 1].clone(),
        goal: goal.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub env_kind: EnvKind,
    pub seed: u64,
    pub goal: String,
    pub steps: Vec<(TextObservation, Action)>,
    #[serde(rename = "return")]
    pub ret: f64,
}

impl Demonstration {
    pub fn observations(&self) -> Vec<TextObservation> {
        self.steps.iter().map(|(o, _)| o.clone()).collect()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|(_, a)| *a).collect()
    }

    /// All (pseudo-state, expert action) pairs of this demonstration.
    pub fn pseudo_states(&self, window: usize) -> Vec<(PseudoState, Action)> {
        let obs = self.observations();
        let acts = self.actions();
        (1..=obs.len())
            .map(|t| {
                let s = make_pseudo_state(&obs, &acts, t, window, &self.goal).expect("in range");
                (s, acts[t - 1])
            })
            .collect()
    }
}

/// Rolls the oracle from `seed`. `None` if the oracle fails on this layout.
pub fn oracle_rollout(config: &EnvConfig, seed: u64) -> Result<Option<Demonstration>, EnvError> {
    let (mut state, obs) = gridworld::reset(&config.with_seed(seed))?;
    let mut text = observation_to_text(&obs);
    let goal = text.goal.clone();
    let mut steps = Vec::new();
    loop {
        let action = match oracle_action(&state) {
            Ok(a) => a,
            Err(EnvError::Unsolvable(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let r = state.step(action)?;
        steps.push((text, action));
        text = observation_to_text(&r.observation);
        if let Some(outcome) = r.outcome {
            if outcome != Outcome::Success {
                return Ok(None);
            }
            return Ok(Some(Demonstration {
                env_kind: config.kind,
                seed,
                goal,
                steps,
                ret: r.reward,
            }));
        }
    }
}

/// Records `n` successful oracle demonstrations on consecutive seeds from
/// `config.seed`, skipping layouts the oracle fails on.
pub fn record_demonstrations(
    config: &EnvConfig,
    n: usize,
) -> Result<Vec<Demonstration>, TrajectoryError> {
    let budget = 20 * n as u64 + 100;
    let mut demos = Vec::with_capacity(n);
    let mut tried = 0;
    while demos.len() < n {
        if tried == budget {
            return Err(TrajectoryError::NotEnoughDemos {
                found: demos.len(),
                needed: n,
                tried,
            });
        }
        if let Some(d) = oracle_rollout(config, config.seed.wrapping_add(tried))? {
            demos.push(d);
        }
        tried += 1;
    }
    Ok(demos)
}

#[derive(Serialize, Deserialize)]
struct DemoHeader {
    env_kind: EnvKind,
    seed: u64,
    converter_version: String,
    #[serde(rename = "return")]
    ret: f64,
    steps: usize,
}

#[derive(Serialize, Deserialize)]
struct DemoStep {
    t: usize,
    sentences: Vec<String>,
    action: Action,
    goal: String,
}

pub fn write_demonstrations<W: Write>(
    mut out: W,
    demos: &[Demonstration],
) -> Result<(), TrajectoryError> {
    for d in demos {
        let header = DemoHeader {
            env_kind: d.env_kind,
            seed: d.seed,
            converter_version: CONVERTER_VERSION.to_string(),
            ret: d.ret,
            steps: d.steps.len(),
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&header).expect("serializable")
        )?;
        for (i, (obs, action)) in d.steps.iter().enumerate() {
            let step = DemoStep {
                t: i + 1,
                sentences: obs.sentences.clone(),
                action: *action,
                goal: obs.goal.clone(),
            };
            writeln!(
                out,
                "{}",
                serde_json::to_string(&step).expect("serializable")
            )?;
        }
    }
    Ok(())
}

pub fn serialize_demonstrations(demos: &[Demonstration]) -> String {
    let mut buf = Vec::new();
    write_demonstrations(&mut buf, demos).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 json")
}

pub fn read_demonstrations<R: BufRead>(input: R) -> Result<Vec<Demonstration>, TrajectoryError> {
    let mut demos: Vec<Demonstration> = Vec::new();
    let mut pending = 0usize;
    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| TrajectoryError::Malformed { line: lineno, msg };
        if pending == 0 {
            let h: DemoHeader =
                serde_json::from_str(&line).map_err(|e| malformed(format!("bad header: {e}")))?;
            if h.converter_version != CONVERTER_VERSION {
                return Err(malformed(format!(
                    "converter version `{}` does not match `{CONVERTER_VERSION}`",
                    h.converter_version
                )));
            }
            if h.steps == 0 {
                return Err(malformed("demonstration with zero steps".into()));
            }
            pending = h.steps;
            demos.push(Demonstration {
                env_kind: h.env_kind,
                seed: h.seed,
                goal: String::new(),
                steps: Vec::with_capacity(h.steps),
                ret: h.ret,
            });
        } else {
            let s: DemoStep =
                serde_json::from_str(&line).map_err(|e| malformed(format!("bad step: {e}")))?;
            let demo = demos.last_mut().expect("header seen");
            let expected = demo.steps.len() + 1;
            if s.t != expected {
                return Err(malformed(format!(
                    "expected step {expected}, found {}",
                    s.t
                )));
            }
            if demo.steps.is_empty() {
                demo.goal = s.goal.clone();
            }
            demo.steps
                .push((TextObservation::new(s.sentences, s.goal), s.action));
            pending -= 1;
        }
    }
    if pending > 0 {
        return Err(TrajectoryError::Malformed {
            line: last_line + 1,
            msg: format!("file ends {pending} step(s) short of the last demonstration"),
        });
    }
    Ok(demos)
}

pub fn deserialize_demonstrations(text: &str) -> Result<Vec<Demonstration>, TrajectoryError> {
    read_demonstrations(text.as_bytes())
}

/// One frame of experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: PseudoState,
    pub action: Action,
    /// Index into the environment's action list.
    pub action_index: usize,
    pub reward: f64,
    pub value: f64,
    pub log_prob: f64,
    pub done: bool,
}

/// A contiguous run of frames from one worker. `tail_value` is the value
/// estimate of the state following the last frame, used when that frame
/// did not end its episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub tail_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperienceBuffer {
    pub entries: Vec<Experience>,
    pub segments: Vec<Segment>,
    pub advantages: Option<Vec<f64>>,
    pub returns_to_go: Option<Vec<f64>>,
}

impl ExperienceBuffer {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a worker's frames as a new segment.
    pub fn push_segment(&mut self, frames: Vec<Experience>, tail_value: f64) {
        let start = self.entries.len();
        let len = frames.len();
        self.entries.extend(frames);
        self.segments.push(Segment {
            start,
            len,
            tail_value,
        });
        self.advantages = None;
        self.returns_to_go = None;
    }
}

/// Something that plays episodes in text form.
pub trait EpisodeEnv {
    fn actions(&self) -> &[Action];
    fn reset(&mut self, seed: u64) -> Result<TextObservation, EnvError>;
    fn step(&mut self, action: Action) -> Result<EnvStep, EnvError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: TextObservation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub success: bool,
}

impl EnvStep {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(i: usize) -> TextObservation {
        TextObservation::new(vec![format!("o{i}")], "g")
    }

    fn episode(n: usize) -> (Vec<TextObservation>, Vec<Action>) {
        let o = (1..=n).map(obs).collect();
        let a = (0..n).map(|i| Action::ALL[i % 3]).collect();
        (o, a)
    }

    #[test]
    fn first_step_has_empty_history() {
        let (o, a) = episode(4);
        let s = make_pseudo_state(&o, &a, 1, 2, "g").unwrap();
        assert!(s.history.is_empty());
        assert_eq!(s.current, obs(1));
    }

    #[test]
    fn window_of_two_at_step_five() {
        let (o, a) = episode(6);
        let s = make_pseudo_state(&o, &a, 5, 2, "g").unwrap();
        assert_eq!(s.history, vec![(obs(3), a[2]), (obs(4), a[3])]);
        assert_eq!(s.current, obs(5));
    }

    #[test]
    fn zero_window_and_range_errors() {
        let (o, a) = episode(3);
        for t in 1..=3 {
            assert!(make_pseudo_state(&o, &a, t, 0, "g")
                .unwrap()
                .history
                .is_empty());
        }
        assert!(make_pseudo_state(&o, &a, 0, 2, "g").is_err());
        assert!(make_pseudo_state(&o, &a, 4, 2, "g").is_err());
    }

    #[test]
    fn demos_record_and_round_trip() {
        for kind in EnvKind::ALL {
            let demos = record_demonstrations(&EnvConfig::new(kind, 0), 5).unwrap();
            assert_eq!(demos.len(), 5);
            assert!(demos.iter().all(|d| d.ret > 0.0 && !d.steps.is_empty()));
            let text = serialize_demonstrations(&demos);
            assert_eq!(deserialize_demonstrations(&text).unwrap(), demos);
        }
        assert!(
            record_demonstrations(&EnvConfig::new(EnvKind::UnlockPickup, 0), 0)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn replay_reproduces_observations() {
        let cfg = EnvConfig::new(EnvKind::KeyCorridorS3R2, 11);
        for d in record_demonstrations(&cfg, 3).unwrap() {
            let (mut s, o) = gridworld::reset(&cfg.with_seed(d.seed)).unwrap();
            let mut text = observation_to_text(&o);
            for (expected, action) in &d.steps {
                assert_eq!(&text, expected);
                text = observation_to_text(&s.step(*action).unwrap().observation);
            }
        }
    }

    #[test]
    fn truncated_file_reports_line() {
        let demos =
            record_demonstrations(&EnvConfig::new(EnvKind::DynamicObstacles6x6, 0), 1).unwrap();
        let text = serialize_demonstrations(&demos);
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() - 1].join("\n");
        match deserialize_demonstrations(&cut) {
            Err(TrajectoryError::Malformed { line, .. }) => assert_eq!(line, lines.len()),
            other => panic!("expected malformed error, got {other:?}"),
        }
        let mut broken = lines.clone();
        broken[1] = "{\"t\": 1, \"sentences\": [";
        match deserialize_demonstrations(&broken.join("\n")) {
            Err(TrajectoryError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
        assert!(deserialize_demonstrations("").unwrap().is_empty());
    }
}
