//! The training loop: induce strategies from demonstrations, clone the
//! expert, then alternate experience collection, strategy revision and
//! propose-and-test PPO updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bc::{bc_train, BcConfig, BcError, BcReport};
use crate::gridworld::{EnvConfig, EnvError};
use crate::llm_client::{LlmClient, PromptTemplates, WorstPair};
use crate::policy::{AgentModel, ModelConfig, PolicyError};
use crate::ppo::{
    compute_gae, play_greedy, ppo_update, CollectStats, PpoConfig, PpoError, PpoOptimizer, Rollout,
    UpdateStats,
};
use crate::rng::derive_seed;
use crate::strategy::{
    format_for_prompt, parse_strategy_list, Provenance, StrategyItem, StrategyList,
};
use crate::trajectory::{Demonstration, ExperienceBuffer};

/// First seed of the episodes that decide between candidate agents.
pub const SELECTION_SEED_BASE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Dystil,
    /// Keep the initial strategies for the whole run.
    Static,
    /// No strategies at all.
    NoStrategy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Dystil => "dystil",
            Mode::Static => "static",
            Mode::NoStrategy => "no-strategy",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dystil" => Ok(Mode::Dystil),
            "static" => Ok(Mode::Static),
            "no-strategy" | "no_strategy" => Ok(Mode::NoStrategy),
            other => Err(format!(
                "unknown mode `{other}` (expected dystil, static or no-strategy)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DystilConfig {
    /// Low-advantage pairs shown to the strategy model.
    pub k: usize,
    /// Epoch count; derived from the frame budget when unset.
    pub n_epochs: Option<usize>,
    pub eval_episodes: usize,
    pub mode: Mode,
}

impl Default for DystilConfig {
    fn default() -> Self {
        Self {
            k: 10,
            n_epochs: None,
            eval_episodes: 20,
            mode: Mode::Dystil,
        }
    }
}

#[derive(Debug, Error)]
pub enum DystilError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("asked for {k} pairs from a buffer of {len}")]
    TooManyPairs { k: usize, len: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("run observer failed: {0}")]
    Observer(String),
}

/// Everything a training run needs apart from the environment, the
/// demonstrations and the strategy model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub bc: BcConfig,
    pub ppo: PpoConfig,
    pub dystil: DystilConfig,
    /// Root of the rollout and update randomness.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), DystilError> {
        self.model.validate()?;
        self.bc.validate()?;
        self.ppo.validate()?;
        if self.dystil.eval_episodes == 0 {
            return Err(DystilError::InvalidConfig(
                "eval_episodes must be at least 1".into(),
            ));
        }
        if self.dystil.k == 0 || self.dystil.k > self.ppo.frames_per_update() {
            return Err(DystilError::InvalidConfig(format!(
                "k must be in 1..={} (frames per update)",
                self.ppo.frames_per_update()
            )));
        }
        Ok(())
    }

    /// Configured epoch count, or enough epochs to cover `total_frames`.
    pub fn epochs(&self) -> usize {
        self.dystil.n_epochs.unwrap_or_else(|| {
            let per = self.ppo.frames_per_update() as u64;
            self.ppo.total_frames.div_ceil(per) as usize
        })
    }
}

/// The `k` lowest-advantage frames, ascending; equal advantages keep buffer
/// order.
pub fn select_lowest_advantage(
    buffer: &ExperienceBuffer,
    k: usize,
) -> Result<Vec<WorstPair>, DystilError> {
    if k > buffer.len() {
        return Err(DystilError::TooManyPairs {
            k,
            len: buffer.len(),
        });
    }
    let adv = buffer
        .advantages
        .as_ref()
        .ok_or(PpoError::MissingAdvantages)?;
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    order.sort_by(|&a, &b| adv[a].total_cmp(&adv[b]));
    Ok(order[..k]
        .iter()
        .map(|&i| WorstPair {
            state: buffer.entries[i].state.clone(),
            action: buffer.entries[i].action,
            advantage: adv[i],
        })
        .collect())
}

pub fn selection_seeds(n: usize) -> Vec<u64> {
    (SELECTION_SEED_BASE..SELECTION_SEED_BASE + n as u64).collect()
}

/// Mean greedy return over the first `n_episodes` selection seeds.
pub fn evaluate_return(
    agent: &AgentModel,
    env_config: &EnvConfig,
    n_episodes: usize,
    window: usize,
) -> Result<f64, EnvError> {
    let results = play_greedy(
        agent,
        env_config,
        &selection_seeds(n_episodes.max(1)),
        window,
    )?;
    Ok(results.iter().map(|r| r.ret).sum::<f64>() / results.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvantageStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl AdvantageStats {
    pub fn of(adv: &[f64]) -> Self {
        if adv.is_empty() {
            return Self::default();
        }
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self {
            mean,
            std,
            min: adv.iter().copied().fold(f64::INFINITY, f64::min),
            max: adv.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// What happened in one epoch. `r1`/`r2` are set only when a candidate
/// list was actually tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub frames: u64,
    pub train_mean_return: f64,
    pub train_episodes: usize,
    pub advantages: AdvantageStats,
    pub worst_advantages: Vec<f64>,
    pub forked: bool,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub accepted: bool,
    /// Raw reply of the strategy model, if it was queried.
    pub candidate_text: Option<String>,
    pub candidate: Option<Vec<StrategyItem>>,
    pub llm_error: Option<String>,
    /// Memory after the epoch.
    pub strategies: Vec<StrategyItem>,
    pub strategy_version: u64,
    pub update: UpdateStats,
}

/// Mutable state of a run between epochs.
pub struct Trainer {
    pub agent: AgentModel,
    pub optimizer: PpoOptimizer,
    pub env_config: EnvConfig,
    pub demos: Vec<Demonstration>,
    pub config: PipelineConfig,
    pub templates: PromptTemplates,
    rollout: Rollout,
    epoch: usize,
    frames: u64,
}

impl Trainer {
    pub fn new(
        agent: AgentModel,
        env_config: EnvConfig,
        demos: Vec<Demonstration>,
        config: PipelineConfig,
    ) -> Result<Self, DystilError> {
        config.validate()?;
        let rollout = Rollout::new(
            &env_config,
            config.ppo.num_workers,
            config.ppo.history_window,
            derive_seed(config.seed, "rollout", &[]),
        )?;
        let optimizer = PpoOptimizer::new(&agent, config.ppo.learning_rate);
        Ok(Self {
            agent,
            optimizer,
            env_config,
            demos,
            config,
            templates: PromptTemplates::default(),
            rollout,
            epoch: 0,
            frames: 0,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    fn collect(&mut self) -> Result<(ExperienceBuffer, CollectStats), DystilError> {
        let (mut buffer, stats) = self
            .rollout
            .collect(&self.agent, self.config.ppo.frames_per_worker)?;
        compute_gae(
            &mut buffer,
            self.config.ppo.gamma,
            self.config.ppo.gae_lambda,
        );
        self.frames += buffer.len() as u64;
        Ok((buffer, stats))
    }

    /// Asks for a revised list. Any failure is reported, not raised.
    fn propose(
        &self,
        client: &mut LlmClient,
        worst: &[WorstPair],
    ) -> (Option<String>, Result<StrategyList, String>) {
        let prompt = match self.templates.dynamic_prompt(
            self.env_config.kind,
            &self.demos,
            &self.agent.memory,
            worst,
        ) {
            Ok(p) => p,
            Err(e) => return (None, Err(e.to_string())),
        };
        match client.query(&prompt) {
            Ok(reply) => {
                let parsed = parse_strategy_list(&reply).map_err(|e| e.to_string());
                (Some(reply), parsed)
            }
            Err(e) => (None, Err(e.to_string())),
        }
    }

    /// One epoch: collect, rank, maybe revise strategies, update, select.
    pub fn epoch(&mut self, client: &mut LlmClient) -> Result<EpochRecord, DystilError> {
        let epoch = self.epoch + 1;
        let (buffer, stats) = self.collect()?;
        let adv = buffer.advantages.clone().unwrap_or_default();
        let worst = select_lowest_advantage(&buffer, self.config.dystil.k)?;
        let shuffle_seed = derive_seed(self.config.seed, "ppo-update", &[epoch as u64]);
        let ppo = self.config.ppo.clone();

        let (candidate_text, candidate) = if self.config.dystil.mode == Mode::Dystil {
            self.propose(client, &worst)
        } else {
            (None, Err(String::new()))
        };

        let mut record = EpochRecord {
            epoch,
            frames: self.frames,
            train_mean_return: stats.mean_return(),
            train_episodes: stats.episodes,
            advantages: AdvantageStats::of(&adv),
            worst_advantages: worst.iter().map(|w| w.advantage).collect(),
            forked: false,
            r1: None,
            r2: None,
            accepted: false,
            candidate_text,
            candidate: None,
            llm_error: None,
            strategies: Vec::new(),
            strategy_version: 0,
            update: UpdateStats::default(),
        };

        match candidate {
            Ok(next) => {
                record.forked = true;
                record.candidate = Some(next.items.clone());
                let mut l1 = (self.agent.clone(), self.optimizer.clone());
                let mut l2 = (self.agent.clone(), self.optimizer.clone());
                l2.0.memory
                    .replace_with(&next, Provenance::DynamicEpoch(epoch));
                let (s1, s2) = rayon::join(
                    || ppo_update(&mut l1.0, &mut l1.1, &buffer, &ppo, shuffle_seed),
                    || ppo_update(&mut l2.0, &mut l2.1, &buffer, &ppo, shuffle_seed),
                );
                let (s1, s2) = (s1?, s2?);
                let n = self.config.dystil.eval_episodes;
                let w = ppo.history_window;
                let (r1, r2) = rayon::join(
                    || evaluate_return(&l1.0, &self.env_config, n, w),
                    || evaluate_return(&l2.0, &self.env_config, n, w),
                );
                let (r1, r2) = (r1?, r2?);
                record.r1 = Some(r1);
                record.r2 = Some(r2);
                if r2 > r1 {
                    record.accepted = true;
                    record.update = s2;
                    (self.agent, self.optimizer) = l2;
                } else {
                    record.update = s1;
                    (self.agent, self.optimizer) = l1;
                }
            }
            Err(msg) => {
                if !msg.is_empty() {
                    record.llm_error = Some(msg);
                }
                record.update = ppo_update(
                    &mut self.agent,
                    &mut self.optimizer,
                    &buffer,
                    &ppo,
                    shuffle_seed,
                )?;
            }
        }
        record.strategies = self.agent.memory.items.clone();
        record.strategy_version = self.agent.memory.version;
        self.epoch = epoch;
        Ok(record)
    }
}

/// Queries the initial strategy list from the demonstrations.
pub fn induce_initial(
    templates: &PromptTemplates,
    env_config: &EnvConfig,
    demos: &[Demonstration],
    client: &mut LlmClient,
) -> Result<(String, StrategyList), String> {
    let prompt = templates
        .initial_prompt(env_config.kind, demos)
        .map_err(|e| e.to_string())?;
    let reply = client.query(&prompt).map_err(|e| e.to_string())?;
    let mut list = parse_strategy_list(&reply).map_err(|e| e.to_string())?;
    list.provenance = Provenance::Initial;
    Ok((reply, list))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub agent: AgentModel,
    pub initial: StrategyList,
    pub initial_error: Option<String>,
    pub bc: BcReport,
    pub records: Vec<EpochRecord>,
}

/// Hooks into a run, for logging and checkpoints.
pub trait RunObserver {
    fn initial(&mut self, _strategies: &StrategyList, _reply: Option<&str>) {}
    fn after_bc(&mut self, _agent: &AgentModel, _report: &BcReport) {}
    fn after_epoch(
        &mut self,
        _agent: &AgentModel,
        _record: &EpochRecord,
    ) -> Result<(), DystilError> {
        Ok(())
    }
}

impl RunObserver for () {}

/// Full pipeline; see [`run_observed`].
pub fn run(
    env_config: &EnvConfig,
    demos: &[Demonstration],
    client: &mut LlmClient,
    config: &PipelineConfig,
) -> Result<RunOutput, DystilError> {
    run_observed(env_config, demos, client, config, &mut ())
}

/// Builds an agent with empty memory, induces the initial strategies
/// (skipped without strategies), clones the demonstrations, then runs the
/// epoch loop. Strategy-model failures never abort the run.
pub fn run_observed(
    env_config: &EnvConfig,
    demos: &[Demonstration],
    client: &mut LlmClient,
    config: &PipelineConfig,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput, DystilError> {
    config.validate()?;
    let templates = PromptTemplates::default();
    let mut agent = AgentModel::new(env_config.kind, config.model.clone())?;
    let mut initial_error = None;
    if config.dystil.mode != Mode::NoStrategy {
        match induce_initial(&templates, env_config, demos, client) {
            Ok((reply, list)) => {
                agent.memory.replace_with(&list, Provenance::Initial);
                observer.initial(&agent.memory, Some(&reply));
            }
            Err(e) => {
                initial_error = Some(e);
                observer.initial(&agent.memory, None);
            }
        }
    }
    let initial = agent.memory.clone();
    let bc = bc_train(&mut agent, demos, &config.bc)?;
    observer.after_bc(&agent, &bc);
    let mut trainer = Trainer::new(agent, *env_config, demos.to_vec(), config.clone())?;
    trainer.templates = templates;
    let mut records = Vec::new();
    for _ in 0..config.epochs() {
        let rec = trainer.epoch(client)?;
        observer.after_epoch(&trainer.agent, &rec)?;
        records.push(rec);
    }
    Ok(RunOutput {
        agent: trainer.agent,
        initial,
        initial_error,
        bc,
        records,
    })
}

/// Short human-readable summary of a strategy list.
pub fn describe_strategies(list: &StrategyList) -> String {
    if list.is_empty() {
        "(no strategies)".into()
    } else {
        format!(
            "v{} ({}):\n{}",
            list.version,
            list.provenance,
            format_for_prompt(list)
        )
    }
}
