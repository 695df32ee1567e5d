//! Prompts for strategy induction and revision, and the client that sends
//! them to a chat-completion endpoint or replays a scripted mock.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::gridworld::{Action, EnvKind};
use crate::policy::input::{render_pseudo_state, render_steps, GOAL_PREFIX};
use crate::strategy::{format_for_prompt, StrategyList};
use crate::trajectory::{Demonstration, PseudoState};

/// Shown in place of the strategy list when the agent has none.
pub const NO_STRATEGIES: &str = "(none yet)";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("at least one demonstration is required")]
    NoDemonstrations,
    #[error("demonstration {index} is from {found}, expected {expected}")]
    EnvMismatch {
        index: usize,
        expected: EnvKind,
        found: EnvKind,
    },
    #[error("at least one low-advantage pair is required")]
    NoPairs,
}

/// One low-advantage decision shown to the strategy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub state: PseudoState,
    pub action: Action,
    pub advantage: f64,
}

/// Prompt text pieces. `{title}`, `{n}` (demonstrations) and `{k}` (pairs)
/// are substituted when a prompt is built.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub env_blurbs: HashMap<EnvKind, String>,
    pub initial_query_suffix: String,
    pub dynamic_query_suffix: String,
}

const DYNAMIC_OBSTACLES_BLURB: &str = "Imagine now you are a reinforcement learning agent in a 2D gridworld RL platform called MiniGrid, and you are learning to complete tasks in a specific RL environment called 'Dynamic Obstacles' on this Minigrid platform. This 'Dynamic Obstacles' environment is an empty room with moving obstacles. In each run of this 'Dynamic Obstacles' task in this RL environment, your goal as an agent is to reach the green goal square using as few time steps as possible without colliding with any obstacle. If the agent collides with an obstacle, a large penalty is subtracted and the episode is terminated.";

const UNLOCK_PICKUP_BLURB: &str = "Imagine now you are a reinforcement learning agent in a 2D gridworld RL platform called BabyAI, and you are learning to complete tasks in a specific RL environment called 'Unlock Pickup' on this BabyAI platform. This 'Unlock Pickup' environment has two rooms joined by a locked door, and the box you must collect sits in the far room. In each run of this 'Unlock Pickup' task in this RL environment, your goal as an agent is to find the key that matches the door, open the door with it and then pick up the box using as few time steps as possible. You can only carry one object at a time.";

const KEY_CORRIDOR_BLURB: &str = "Imagine now you are a reinforcement learning agent in a 2D gridworld RL platform called BabyAI, and you are learning to complete tasks in a specific RL environment called 'Key Corridor' on this BabyAI platform. This 'Key Corridor' environment is a corridor with small rooms on both sides, one of which is locked and holds the ball you must collect. In each run of this 'Key Corridor' task in this RL environment, your goal as an agent is to search the side rooms for the key, unlock the locked room and pick up the ball using as few time steps as possible. You can only carry one object at a time.";

const PUT_NEXT_BLURB: &str = "Imagine now you are a reinforcement learning agent in a 2D gridworld RL platform called BabyAI, and you are learning to complete tasks in a specific RL environment called 'Put Next' on this BabyAI platform. This 'Put Next' environment is a single room holding a few keys, balls and boxes. In each run of this 'Put Next' task in this RL environment, your goal as an agent is to pick up the object named in the goal and drop it on a cell next to the other named object using as few time steps as possible. You can only carry one object at a time.";

const INITIAL_QUERY: &str = "Now based on your analysis and understanding of the {n} expert demonstrations of oracle trajectories provided to you above, please summarize a list of strategies that a reinforcement learning agent should follow when making action decisions in this '{title}' environment. Please write each strategy item as a numbered short title followed by a colon and a one-sentence explanation, and try to make the strategies general enough to apply to new runs of this '{title}' task rather than to the specific trajectories above. Please only return the list of strategies without any other text before or after the list.";

const DYNAMIC_QUERY: &str = "Now upon analyzing the above {k} state-action pairs with low advantage values, and based on your analysis and understanding of the {n} expert demonstrations of oracle trajectories provided to you earlier, please modify and update the list of strategies that you are currently following if you are confident that it is appropriate to do so. You can correct existing strategy items if you think they are inaccurate, you can add new strategy items if you think they are currently missing, and you can delete existing strategy items if you think they are wrong. Please remember that the above advantage values are estimated by the value network of the RL agent model during PPO training, and thus may not be entirely accurate and should be analyzed with caution. Therefore, you should consider the evidence suggested by the above observation-action pairs with low advantage values, the patterns and insights exhibited by the expert demonstration trajectories, and your own understanding, reasoning and judgement about this '{title}' task all together to make wise decisions when modifying and updating the list of strategies. Please only return the updated list of strategies without any other text before or after the list.";

impl Default for PromptTemplates {
    fn default() -> Self {
        let env_blurbs = [
            (EnvKind::DynamicObstacles6x6, DYNAMIC_OBSTACLES_BLURB),
            (EnvKind::UnlockPickup, UNLOCK_PICKUP_BLURB),
            (EnvKind::KeyCorridorS3R2, KEY_CORRIDOR_BLURB),
            (EnvKind::PutNextS5N2, PUT_NEXT_BLURB),
        ]
        .into_iter()
        .map(|(k, s)| (k, s.to_string()))
        .collect();
        Self {
            env_blurbs,
            initial_query_suffix: INITIAL_QUERY.into(),
            dynamic_query_suffix: DYNAMIC_QUERY.into(),
        }
    }
}

fn quoted_list(names: &[&str]) -> String {
    let q: Vec<String> = names.iter().map(|n| format!("'{n}'")).collect();
    match q.len() {
        0 => String::new(),
        1 => q[0].clone(),
        2 => format!("{} and {}", q[0], q[1]),
        n => format!("{}, and {}", q[..n - 1].join(", "), q[n - 1]),
    }
}

fn fill(template: &str, title: &str, n: usize, k: usize) -> String {
    template
        .replace("{title}", title)
        .replace("{n}", &n.to_string())
        .replace("{k}", &k.to_string())
}

fn check_demos(kind: EnvKind, demos: &[Demonstration]) -> Result<(), PromptError> {
    if demos.is_empty() {
        return Err(PromptError::NoDemonstrations);
    }
    if let Some((index, d)) = demos.iter().enumerate().find(|(_, d)| d.env_kind != kind) {
        return Err(PromptError::EnvMismatch {
            index,
            expected: kind,
            found: d.env_kind,
        });
    }
    Ok(())
}

impl PromptTemplates {
    /// Environment paragraph: the blurb plus the action set.
    pub fn env_paragraph(&self, kind: EnvKind) -> String {
        let names: Vec<&str> = kind.actions().iter().map(|a| a.name()).collect();
        let blurb = self.env_blurbs.get(&kind).map(String::as_str).unwrap_or("");
        let actions = format!(
            "Your possible actions as an agent at each time step are: {}.",
            quoted_list(&names)
        );
        if blurb.is_empty() {
            actions
        } else {
            format!("{blurb} {actions}")
        }
    }

    fn demo_section(&self, kind: EnvKind, demos: &[Demonstration]) -> String {
        let n = demos.len();
        let what = if n == 1 { "trajectory" } else { "trajectories" };
        let mut out = format!(
            "You are provided with {n} successful {what} of expert demonstrations of the oracle courses of actions to complete tasks in this '{}' environment for your reference, which are listed in detail below:\n\n",
            kind.title()
        );
        let blocks: Vec<String> = demos
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut lines = vec![
                    format!("Demonstration {}:", i + 1),
                    format!("{GOAL_PREFIX}{}", d.goal),
                ];
                lines.extend(render_steps(&d.steps));
                lines.join("\n")
            })
            .collect();
        out.push_str(&blocks.join("\n\n"));
        out
    }

    pub fn initial_prompt(
        &self,
        kind: EnvKind,
        demos: &[Demonstration],
    ) -> Result<String, PromptError> {
        check_demos(kind, demos)?;
        Ok([
            self.env_paragraph(kind),
            self.demo_section(kind, demos),
            fill(&self.initial_query_suffix, kind.title(), demos.len(), 0),
        ]
        .join("\n\n"))
    }

    pub fn dynamic_prompt(
        &self,
        kind: EnvKind,
        demos: &[Demonstration],
        current: &StrategyList,
        worst: &[WorstPair],
    ) -> Result<String, PromptError> {
        check_demos(kind, demos)?;
        if worst.is_empty() {
            return Err(PromptError::NoPairs);
        }
        let k = worst.len();
        let title = kind.title();
        let strategies = if current.is_empty() {
            NO_STRATEGIES.to_string()
        } else {
            format_for_prompt(current)
        };
        let pairs: Vec<String> = worst
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut lines = vec![
                    format!("State-action pair {}:", i + 1),
                    format!("{GOAL_PREFIX}{}", p.state.goal),
                ];
                lines.extend(render_pseudo_state(&p.state));
                if let Some(last) = lines.last_mut() {
                    last.push(' ');
                    last.push_str(p.action.name());
                }
                lines.push(format!("Advantage value: {:.4}", p.advantage));
                lines.join("\n")
            })
            .collect();
        Ok([
            self.env_paragraph(kind),
            self.demo_section(kind, demos),
            format!("Currently, as the reinforcement learning agent, you are following the following list of strategies when making action decisions in this '{title}' environment:"),
            strategies,
            format!("And in your current iteration of experience collection during a PPO training process, the following {k} state-action pairs (they may come from different episodes) received the lowest advantage values, which indicates that these action decisions might not be optimal:"),
            pairs.join("\n\n"),
            fill(&self.dynamic_query_suffix, title, demos.len(), k),
        ]
        .join("\n\n"))
    }
}

pub fn build_initial_prompt(kind: EnvKind, demos: &[Demonstration]) -> Result<String, PromptError> {
    PromptTemplates::default().initial_prompt(kind, demos)
}

pub fn build_dynamic_prompt(
    kind: EnvKind,
    demos: &[Demonstration],
    current: &StrategyList,
    worst: &[WorstPair],
) -> Result<String, PromptError> {
    PromptTemplates::default().dynamic_prompt(kind, demos, current, worst)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EndpointMode {
    Remote,
    Mock { script_path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpoint {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env_var_name: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
    pub temperature: f64,
    pub mode: EndpointMode,
}

impl Default for LlmEndpoint {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o".into(),
            api_key_env_var_name: "OPENAI_API_KEY".into(),
            timeout_secs: 120.0,
            max_retries: 3,
            backoff_ms: 1000,
            temperature: 0.0,
            mode: EndpointMode::Remote,
        }
    }
}

impl LlmEndpoint {
    pub fn mock(script_path: impl Into<PathBuf>) -> Self {
        Self {
            mode: EndpointMode::Mock {
                script_path: script_path.into(),
            },
            ..Self::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("response has no assistant message: {0}")]
    MalformedResponse(String),
    #[error("mock script exhausted after {served} responses")]
    ScriptExhausted { served: usize },
    #[error("mock script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a mock script: one response per non-blank line, either a JSON
/// string literal or raw text with `\n` escapes.
pub fn parse_mock_script(text: &str) -> Result<Vec<String>, LlmError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if line.trim_start().starts_with('"') {
            let s: String = serde_json::from_str(line.trim()).map_err(|e| LlmError::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(s);
        } else {
            out.push(unescape(line));
        }
    }
    Ok(out)
}

fn unescape(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Writes a mock script that [`parse_mock_script`] reads back unchanged.
pub fn format_mock_script(responses: &[String]) -> String {
    responses
        .iter()
        .map(|r| serde_json::to_string(r).expect("strings serialize") + "\n")
        .collect()
}

enum Backend {
    Remote {
        http: reqwest::blocking::Client,
        api_key: String,
    },
    Mock(VecDeque<String>),
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    call: usize,
    mode: &'a str,
    model: &'a str,
    prompt: &'a str,
    response: Option<&'a str>,
    error: Option<String>,
}

pub struct LlmClient {
    endpoint: LlmEndpoint,
    backend: Backend,
    calls: usize,
    served: usize,
    prompts: Vec<String>,
    audit: Option<File>,
}

impl LlmClient {
    pub fn new(endpoint: LlmEndpoint) -> Result<Self, LlmError> {
        let backend = match &endpoint.mode {
            EndpointMode::Remote => {
                let api_key = std::env::var(&endpoint.api_key_env_var_name)
                    .map_err(|_| LlmError::MissingApiKey(endpoint.api_key_env_var_name.clone()))?;
                let http = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs_f64(endpoint.timeout_secs))
                    .build()
                    .map_err(|e| LlmError::Transport {
                        attempts: 0,
                        message: e.to_string(),
                    })?;
                Backend::Remote { http, api_key }
            }
            EndpointMode::Mock { script_path } => {
                let text = std::fs::read_to_string(script_path)?;
                Backend::Mock(parse_mock_script(&text)?.into())
            }
        };
        Ok(Self {
            endpoint,
            backend,
            calls: 0,
            served: 0,
            prompts: Vec::new(),
            audit: None,
        })
    }

    /// A mock client over in-memory responses.
    pub fn scripted(responses: Vec<String>) -> Self {
        Self {
            endpoint: LlmEndpoint::mock(""),
            backend: Backend::Mock(responses.into()),
            calls: 0,
            served: 0,
            prompts: Vec::new(),
            audit: None,
        }
    }

    /// Appends one JSON record per query to `path`.
    pub fn with_audit_log(mut self, path: &Path) -> Result<Self, LlmError> {
        self.audit = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(self)
    }

    pub fn endpoint(&self) -> &LlmEndpoint {
        &self.endpoint
    }

    /// Queries made so far, including failed ones.
    pub fn call_count(&self) -> usize {
        self.calls
    }

    /// Every prompt sent, in order.
    pub fn prompts(&self) -> &[String] {
        &self.prompts
    }

    pub fn query(&mut self, prompt: &str) -> Result<String, LlmError> {
        self.calls += 1;
        self.prompts.push(prompt.to_string());
        let result = match &mut self.backend {
            Backend::Mock(queue) => match queue.pop_front() {
                Some(r) => {
                    self.served += 1;
                    Ok(r)
                }
                None => Err(LlmError::ScriptExhausted {
                    served: self.served,
                }),
            },
            Backend::Remote { http, api_key } => {
                remote_query(&self.endpoint, http, api_key, prompt)
            }
        };
        self.audit_record(prompt, &result)?;
        result
    }

    fn audit_record(
        &mut self,
        prompt: &str,
        result: &Result<String, LlmError>,
    ) -> Result<(), LlmError> {
        let Some(file) = self.audit.as_mut() else {
            return Ok(());
        };
        let mode = match self.endpoint.mode {
            EndpointMode::Remote => "remote",
            EndpointMode::Mock { .. } => "mock",
        };
        let rec = AuditRecord {
            call: self.calls,
            mode,
            model: &self.endpoint.model_name,
            prompt,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        let line = serde_json::to_string(&rec).expect("audit record serializes");
        writeln!(file, "{line}")?;
        Ok(())
    }
}

fn remote_query(
    endpoint: &LlmEndpoint,
    http: &reqwest::blocking::Client,
    api_key: &str,
    prompt: &str,
) -> Result<String, LlmError> {
    let url = format!(
        "{}/chat/completions",
        endpoint.base_url.trim_end_matches('/')
    );
    let body = json!({
        "model": endpoint.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
    });
    let attempts = endpoint.max_retries + 1;
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = endpoint
                .backoff_ms
                .saturating_mul(1 << (attempt - 1).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        let resp = match http.post(&url).bearer_auth(api_key).json(&body).send() {
            Ok(r) => r,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            last = format!("HTTP {status}");
            continue;
        }
        let text = resp.text().map_err(|e| LlmError::Transport {
            attempts: attempt + 1,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(LlmError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        return extract_content(&text);
    }
    Err(LlmError::Transport {
        attempts,
        message: last,
    })
}

fn extract_content(body: &str) -> Result<String, LlmError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    v["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| LlmError::MalformedResponse(body.chars().take(200).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::EnvConfig;
    use crate::strategy::StrategyItem;
    use crate::trajectory::record_demonstrations;

    fn demos(n: usize) -> Vec<Demonstration> {
        record_demonstrations(&EnvConfig::new(EnvKind::DynamicObstacles6x6, 0), n).unwrap()
    }

    fn worst(k: usize, d: &Demonstration) -> Vec<WorstPair> {
        d.pseudo_states(2)
            .into_iter()
            .cycle()
            .take(k)
            .enumerate()
            .map(|(i, (state, action))| WorstPair {
                state,
                action,
                advantage: -1.0 / (i + 1) as f64,
            })
            .collect()
    }

    #[test]
    fn initial_prompt_sections() {
        let d = demos(5);
        let p = build_initial_prompt(EnvKind::DynamicObstacles6x6, &d).unwrap();
        assert!(p.contains("5 successful trajectories of expert demonstrations"));
        let env = p.find("Your possible actions as an agent at each time step are: 'left turn', 'right turn', and 'move forward'.").unwrap();
        let demo = p.find("Demonstration 1:").unwrap();
        let query = p.find("please summarize a list of strategies").unwrap();
        assert!(env < demo && demo < query);
    }

    #[test]
    fn one_action_line_per_step() {
        let d = demos(1);
        let mut short = d[0].clone();
        short.steps.truncate(3);
        let p = build_initial_prompt(EnvKind::DynamicObstacles6x6, &[short]).unwrap();
        assert_eq!(p.lines().filter(|l| l.starts_with("Action ")).count(), 3);
        assert!(p.contains("1 successful trajectory of expert"));
    }

    #[test]
    fn guards() {
        assert_eq!(
            build_initial_prompt(EnvKind::DynamicObstacles6x6, &[]),
            Err(PromptError::NoDemonstrations)
        );
        let mut d = demos(2);
        d[1].env_kind = EnvKind::PutNextS5N2;
        assert!(matches!(
            build_initial_prompt(EnvKind::DynamicObstacles6x6, &d),
            Err(PromptError::EnvMismatch { index: 1, .. })
        ));
        let d = demos(1);
        assert_eq!(
            build_dynamic_prompt(
                EnvKind::DynamicObstacles6x6,
                &d,
                &StrategyList::empty(),
                &[]
            ),
            Err(PromptError::NoPairs)
        );
    }

    #[test]
    fn dynamic_prompt_order_and_wording() {
        let d = demos(5);
        let s = StrategyList::new(vec![StrategyItem::new("Avoid balls", "Turn away.")]);
        let p =
            build_dynamic_prompt(EnvKind::DynamicObstacles6x6, &d, &s, &worst(10, &d[0])).unwrap();
        let marks = [
            "Imagine now you are",
            "Demonstration 5:",
            "you are following the following list of strategies",
            "1. Avoid balls:\n  - Turn away.",
            "the following 10 state-action pairs",
            "State-action pair 10:",
            "Advantage value: -0.1000",
            "please modify and update the list of strategies",
            "may not be entirely accurate and should be analyzed with caution",
        ];
        let mut at = 0;
        for m in marks {
            let i = p[at..]
                .find(m)
                .unwrap_or_else(|| panic!("missing or out of order: {m}"));
            at += i;
        }
        assert!(p.contains("Now upon analyzing the above 10 state-action pairs"));
        assert!(!p.contains(NO_STRATEGIES));
        let empty = build_dynamic_prompt(
            EnvKind::DynamicObstacles6x6,
            &d,
            &StrategyList::empty(),
            &worst(2, &d[0]),
        )
        .unwrap();
        assert!(empty.contains(NO_STRATEGIES));
        assert_eq!(
            empty,
            build_dynamic_prompt(
                EnvKind::DynamicObstacles6x6,
                &d,
                &StrategyList::empty(),
                &worst(2, &d[0])
            )
            .unwrap()
        );
    }

    #[test]
    fn mock_replays_in_order_then_fails() {
        let mut c = LlmClient::scripted(vec!["1. A".into()]);
        assert_eq!(c.query("p1").unwrap(), "1. A");
        assert_eq!(c.prompts(), ["p1"]);
        assert!(matches!(
            c.query("p2"),
            Err(LlmError::ScriptExhausted { served: 1 })
        ));
        assert_eq!(c.call_count(), 2);
    }

    #[test]
    fn mock_script_formats() {
        let text = "\"1. A:\\n  - b\"\n\n1. raw\\nline two\nplain \\\\n kept\n";
        let r = parse_mock_script(text).unwrap();
        assert_eq!(
            r,
            vec!["1. A:\n  - b", "1. raw\nline two", "plain \\n kept"]
        );
        let round = vec!["x\ny".to_string(), "\"quoted\"".to_string()];
        assert_eq!(
            parse_mock_script(&format_mock_script(&round)).unwrap(),
            round
        );
        assert!(matches!(
            parse_mock_script("\"open"),
            Err(LlmError::Script { line: 1, .. })
        ));
    }

    #[test]
    fn audit_log_records_each_call() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("llm.audit.jsonl");
        let mut c = LlmClient::scripted(vec!["ok".into()])
            .with_audit_log(&path)
            .unwrap();
        c.query("first").unwrap();
        let _ = c.query("second");
        let text = std::fs::read_to_string(&path).unwrap();
        let recs: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0]["response"], "ok");
        assert_eq!(recs[1]["prompt"], "second");
        assert!(recs[1]["error"].as_str().unwrap().contains("exhausted"));
    }

    #[test]
    fn remote_requires_key() {
        let ep = LlmEndpoint {
            api_key_env_var_name: "DYSTIL_TEST_KEY_THAT_IS_NOT_SET".into(),
            ..LlmEndpoint::default()
        };
        assert!(matches!(
            LlmClient::new(ep),
            Err(LlmError::MissingApiKey(_))
        ));
    }

    #[test]
    fn remote_timeouts_exhaust_retries() {
        use std::net::TcpListener;
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let accepted = Arc::new(AtomicUsize::new(0));
        let counter = accepted.clone();
        std::thread::spawn(move || {
            let mut held = Vec::new();
            for stream in listener.incoming().flatten() {
                counter.fetch_add(1, Ordering::SeqCst);
                held.push(stream);
            }
        });
        std::env::set_var("DYSTIL_TEST_KEY_TIMEOUT", "k");
        let ep = LlmEndpoint {
            base_url: format!("http://{addr}/v1"),
            api_key_env_var_name: "DYSTIL_TEST_KEY_TIMEOUT".into(),
            timeout_secs: 0.2,
            max_retries: 2,
            backoff_ms: 1,
            ..LlmEndpoint::default()
        };
        let mut c = LlmClient::new(ep).unwrap();
        match c.query("hello") {
            Err(LlmError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected transport error, got {other:?}"),
        }
        assert_eq!(accepted.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn remote_success_is_parsed() {
        use std::io::{BufRead, BufReader, Read};
        use std::net::TcpListener;
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(s.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let reply = r#"{"choices":[{"message":{"role":"assistant","content":"1. Go"}}]}"#;
            write!(
                s,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
            String::from_utf8(body).unwrap()
        });
        std::env::set_var("DYSTIL_TEST_KEY_OK", "k");
        let ep = LlmEndpoint {
            base_url: format!("http://{addr}/v1/"),
            api_key_env_var_name: "DYSTIL_TEST_KEY_OK".into(),
            timeout_secs: 5.0,
            ..LlmEndpoint::default()
        };
        let mut c = LlmClient::new(ep).unwrap();
        assert_eq!(c.query("hi").unwrap(), "1. Go");
        let sent: serde_json::Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["messages"][0]["content"], "hi");
        assert_eq!(sent["temperature"], 0.0);
    }
}
