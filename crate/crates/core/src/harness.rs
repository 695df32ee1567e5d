//! Metrics, learning curves, run configuration, run directories and the
//! command-line interface.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bc::{bc_train, BcConfig, BcReport};
use crate::dystil::{
    induce_initial, run_observed, DystilConfig, DystilError, EpochRecord, Mode, PipelineConfig,
    RunObserver,
};
use crate::gridworld::{EnvConfig, EnvError, EnvKind};
use crate::llm_client::{EndpointMode, LlmClient, LlmEndpoint, LlmError, PromptTemplates};
use crate::policy::{load_checkpoint, save_checkpoint, AgentModel, ModelConfig, PolicyError};
use crate::ppo::{play_greedy, EpisodeResult, PpoConfig};
use crate::rng::derive_seed;
use crate::strategy::{format_for_prompt, parse_strategy_list, StrategyItem, StrategyList};
use crate::trajectory::{
    read_demonstrations, record_demonstrations, write_demonstrations, Demonstration,
    TrajectoryError,
};

/// First seed of the held-out validation episodes behind the learning curve.
pub const VALIDATION_SEED_BASE: u64 = 2000;
/// First seed of the final test episodes.
pub const TEST_SEED_BASE: u64 = 3000;

pub const CONFIG_SNAPSHOT: &str = "config.snapshot";
pub const DEMOS_FILE: &str = "demos.jsonl";
pub const STRATEGY_LOG: &str = "strategies.log.jsonl";
pub const TRAIN_CSV: &str = "train.csv";
pub const CURVE_CSV: &str = "curve.csv";
pub const EVAL_REPORT: &str = "eval.report";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const LLM_AUDIT_LOG: &str = "llm.audit.jsonl";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("training log has no evaluations")]
    EmptyLog,
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Dystil(#[from] DystilError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Bc(#[from] crate::bc::BcError),
}

fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn open_file(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(|source| HarnessError::File {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_return: f64,
    pub success_rate: f64,
    pub n_episodes: usize,
    pub returns: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl EvalReport {
    /// Success means a positive final reward.
    pub fn from_episodes(results: &[EpisodeResult]) -> Self {
        let n = results.len();
        let returns: Vec<f64> = results.iter().map(|r| r.ret).collect();
        let (mean_return, success_rate) = if n == 0 {
            (0.0, 0.0)
        } else {
            (
                returns.iter().sum::<f64>() / n as f64,
                returns.iter().filter(|&&r| r > 0.0).count() as f64 / n as f64,
            )
        };
        Self {
            mean_return,
            success_rate,
            n_episodes: n,
            returns,
            seeds: results.iter().map(|r| r.seed).collect(),
        }
    }
}

pub fn seed_range(base: u64, n: usize) -> Vec<u64> {
    (base..base + n as u64).collect()
}

/// Greedy evaluation on the first `n_episodes` test seeds.
pub fn evaluate(
    agent: &AgentModel,
    env_config: &EnvConfig,
    n_episodes: usize,
    window: usize,
) -> Result<EvalReport, HarnessError> {
    if n_episodes == 0 {
        return Err(HarnessError::Config(
            "need at least one evaluation episode".into(),
        ));
    }
    let results = play_greedy(
        agent,
        env_config,
        &seed_range(TEST_SEED_BASE, n_episodes),
        window,
    )?;
    Ok(EvalReport::from_episodes(&results))
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub frames: u64,
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub validation_mr: f64,
}

pub const TRAIN_CSV_HEADER: &str =
    "frames,mean_return,policy_loss,value_loss,entropy,clip_fraction,validation_mr";

impl TrainRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.frames,
            self.mean_return,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction,
            self.validation_mr
        )
    }

    pub fn parse(line: &str) -> Result<Self, HarnessError> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || HarnessError::Config(format!("malformed training log row `{line}`"));
        if f.len() != 7 {
            return Err(bad());
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        Ok(Self {
            frames: f[0].parse().map_err(|_| bad())?,
            mean_return: num(1)?,
            policy_loss: num(2)?,
            value_loss: num(3)?,
            entropy: num(4)?,
            clip_fraction: num(5)?,
            validation_mr: num(6)?,
        })
    }
}

pub fn read_train_csv(text: &str) -> Result<Vec<TrainRow>, HarnessError> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(TrainRow::parse)
        .collect()
}

/// Running maximum of validation mean return against frames.
pub fn sample_efficiency_curve(log: &[TrainRow]) -> Result<Vec<(u64, f64)>, HarnessError> {
    if log.is_empty() {
        return Err(HarnessError::EmptyLog);
    }
    let mut best = f64::NEG_INFINITY;
    Ok(log
        .iter()
        .map(|r| {
            best = best.max(r.validation_mr);
            (r.frames, best)
        })
        .collect())
}

pub fn curve_csv(curve: &[(u64, f64)]) -> String {
    let mut out = String::from("frames,running_max_validation_mr\n");
    for (f, v) in curve {
        let _ = writeln!(out, "{f},{v}");
    }
    out
}

/// Writes `curve.csv` for a training log.
pub fn emit_sample_efficiency_curve(log: &[TrainRow], path: &Path) -> Result<(), HarnessError> {
    let curve = sample_efficiency_curve(log)?;
    fs::write(path, curve_csv(&curve))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub test_episodes: usize,
    pub validation_episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            test_episodes: 100,
            validation_episodes: 20,
        }
    }
}

/// A whole run in one TOML document. The `seed` fields inside the model
/// and bc sections are replaced by values derived from the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: EnvKind,
    pub max_steps: Option<u32>,
    pub seed: u64,
    pub n_demos: usize,
    /// Demonstrations are recorded on consecutive layouts from this seed.
    pub demo_seed: u64,
    pub demos_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub model: ModelConfig,
    pub bc: BcConfig,
    pub ppo: PpoConfig,
    pub dystil: DystilConfig,
    pub eval: EvalConfig,
    pub llm: LlmEndpoint,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::DynamicObstacles6x6,
            max_steps: None,
            seed: 0,
            n_demos: 5,
            demo_seed: 0,
            demos_path: None,
            out_dir: PathBuf::from("runs/default"),
            model: ModelConfig::default(),
            bc: BcConfig::default(),
            ppo: PpoConfig::default(),
            dystil: DystilConfig::default(),
            eval: EvalConfig::default(),
            llm: LlmEndpoint::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(format!("bad config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&read_file(path)?)
    }

    pub fn env_config(&self) -> EnvConfig {
        let mut c = EnvConfig::new(self.env, self.demo_seed);
        if let Some(m) = self.max_steps {
            c.max_steps = m;
        }
        c
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut model = self.model.clone();
        model.seed = derive_seed(self.seed, "model-init", &[]);
        let mut bc = self.bc.clone();
        bc.seed = derive_seed(self.seed, "bc", &[]);
        PipelineConfig {
            model,
            bc,
            ppo: self.ppo.clone(),
            dystil: self.dystil.clone(),
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.env_config().validate()?;
        self.pipeline().validate()?;
        if self.n_demos == 0 {
            return Err(HarnessError::Config("n_demos must be at least 1".into()));
        }
        if self.eval.test_episodes == 0 || self.eval.validation_episodes == 0 {
            return Err(HarnessError::Config(
                "evaluation episode counts must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Demonstrations from `demos_path` if set, otherwise freshly recorded.
    pub fn demonstrations(&self) -> Result<Vec<Demonstration>, HarnessError> {
        match &self.demos_path {
            Some(p) => Ok(read_demonstrations(BufReader::new(open_file(p)?))?),
            None => Ok(record_demonstrations(&self.env_config(), self.n_demos)?),
        }
    }

    /// Strategy-model client, with an audit log in `out_dir`.
    pub fn client(&self) -> Result<LlmClient, HarnessError> {
        let client = LlmClient::new(self.llm.clone())?;
        Ok(client.with_audit_log(&self.out_dir.join(LLM_AUDIT_LOG))?)
    }

    /// `client()`, except that runs without strategies never need one.
    pub fn client_for_mode(&self) -> Result<LlmClient, HarnessError> {
        if self.dystil.mode == Mode::NoStrategy && matches!(self.llm.mode, EndpointMode::Remote) {
            return Ok(LlmClient::scripted(Vec::new())
                .with_audit_log(&self.out_dir.join(LLM_AUDIT_LOG))?);
        }
        self.client()
    }
}

/// An entry of the strategy evolution log.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyLogEntry {
    Initial {
        strategies: Vec<StrategyItem>,
        version: u64,
        reply: Option<String>,
    },
    Epoch(EpochRecord),
}

pub fn read_strategy_log(text: &str) -> Result<Vec<StrategyLogEntry>, HarnessError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Writes the run directory as training progresses.
struct RunFiles {
    dir: PathBuf,
    env_config: EnvConfig,
    window: usize,
    validation_seeds: Vec<u64>,
    strategy_log: BufWriter<File>,
    train_csv: BufWriter<File>,
    rows: Vec<TrainRow>,
    best: f64,
    error: Option<HarnessError>,
}

impl RunFiles {
    fn create(config: &RunConfig) -> Result<Self, HarnessError> {
        let dir = config.out_dir.clone();
        fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
        let mut train_csv = BufWriter::new(File::create(dir.join(TRAIN_CSV))?);
        writeln!(train_csv, "{TRAIN_CSV_HEADER}")?;
        Ok(Self {
            strategy_log: BufWriter::new(File::create(dir.join(STRATEGY_LOG))?),
            train_csv,
            env_config: config.env_config(),
            window: config.ppo.history_window,
            validation_seeds: seed_range(VALIDATION_SEED_BASE, config.eval.validation_episodes),
            dir,
            rows: Vec::new(),
            best: f64::NEG_INFINITY,
            error: None,
        })
    }

    fn log(&mut self, entry: &StrategyLogEntry) -> Result<(), HarnessError> {
        writeln!(self.strategy_log, "{}", serde_json::to_string(entry)?)?;
        self.strategy_log.flush()?;
        Ok(())
    }

    fn checkpoint(&self, name: &str, agent: &AgentModel) -> Result<(), HarnessError> {
        Ok(save_checkpoint(
            &self.dir.join(CHECKPOINT_DIR).join(name),
            agent,
        )?)
    }

    fn epoch(&mut self, agent: &AgentModel, rec: &EpochRecord) -> Result<(), HarnessError> {
        self.log(&StrategyLogEntry::Epoch(rec.clone()))?;
        let results = play_greedy(agent, &self.env_config, &self.validation_seeds, self.window)?;
        let validation_mr = EvalReport::from_episodes(&results).mean_return;
        let row = TrainRow {
            frames: rec.frames,
            mean_return: rec.train_mean_return,
            policy_loss: rec.update.policy_loss,
            value_loss: rec.update.value_loss,
            entropy: rec.update.entropy,
            clip_fraction: rec.update.clip_fraction,
            validation_mr,
        };
        writeln!(self.train_csv, "{}", row.csv())?;
        self.train_csv.flush()?;
        self.rows.push(row);
        if validation_mr > self.best {
            self.best = validation_mr;
            self.checkpoint("best.ckpt", agent)?;
        }
        Ok(())
    }
}

impl RunObserver for RunFiles {
    fn initial(&mut self, strategies: &StrategyList, reply: Option<&str>) {
        let entry = StrategyLogEntry::Initial {
            strategies: strategies.items.clone(),
            version: strategies.version,
            reply: reply.map(str::to_string),
        };
        if let Err(e) = self.log(&entry) {
            self.error.get_or_insert(e);
        }
    }

    fn after_bc(&mut self, agent: &AgentModel, _report: &BcReport) {
        if let Err(e) = self.checkpoint("bc.ckpt", agent) {
            self.error.get_or_insert(e);
        }
    }

    fn after_epoch(&mut self, agent: &AgentModel, record: &EpochRecord) -> Result<(), DystilError> {
        if let Some(e) = self.error.take() {
            return Err(DystilError::Observer(e.to_string()));
        }
        self.epoch(agent, record)
            .map_err(|e| DystilError::Observer(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub out_dir: PathBuf,
    pub report: EvalReport,
    pub llm_calls: usize,
    pub epochs: usize,
    pub accepted: usize,
}

/// Runs the full pipeline and fills in a run directory.
pub fn train(config: &RunConfig) -> Result<TrainSummary, HarnessError> {
    config.validate()?;
    let demos = config.demonstrations()?;
    let mut files = RunFiles::create(config)?;
    fs::write(config.out_dir.join(CONFIG_SNAPSHOT), config.to_toml())?;
    write_demonstrations(
        BufWriter::new(File::create(config.out_dir.join(DEMOS_FILE))?),
        &demos,
    )?;
    let mut client = config.client_for_mode()?;
    let env = config.env_config();
    let out = run_observed(&env, &demos, &mut client, &config.pipeline(), &mut files)?;
    if let Some(e) = files.error.take() {
        return Err(e);
    }
    files.checkpoint("final.ckpt", &out.agent)?;
    if !files.rows.is_empty() {
        emit_sample_efficiency_curve(&files.rows, &config.out_dir.join(CURVE_CSV))?;
    }
    let report = evaluate(
        &out.agent,
        &env,
        config.eval.test_episodes,
        config.ppo.history_window,
    )?;
    fs::write(
        config.out_dir.join(EVAL_REPORT),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(TrainSummary {
        out_dir: config.out_dir.clone(),
        report,
        llm_calls: client.call_count(),
        epochs: out.records.len(),
        accepted: out.records.iter().filter(|r| r.accepted).count(),
    })
}

/// Item-level differences between two strategy lists, by title.
pub fn diff_strategies(old: &[StrategyItem], new: &[StrategyItem]) -> Vec<String> {
    let mut out = Vec::new();
    for item in old {
        match new.iter().find(|n| n.title == item.title) {
            None => out.push(format!("- {}", item.title)),
            Some(n) if n.body != item.body => out.push(format!("~ {}: {}", n.title, n.body)),
            Some(_) => {}
        }
    }
    for item in new {
        if !old.iter().any(|o| o.title == item.title) {
            out.push(format!("+ {}: {}", item.title, item.body));
        }
    }
    out
}

/// Human-readable history of a strategy log.
pub fn render_strategy_log(entries: &[StrategyLogEntry]) -> String {
    let mut out = String::new();
    let mut last: Vec<StrategyItem> = Vec::new();
    let fmt_r = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.4}"));
    for entry in entries {
        match entry {
            StrategyLogEntry::Initial {
                strategies,
                version,
                ..
            } => {
                let _ = writeln!(out, "initial strategies (version {version}):");
                let list = StrategyList::new(strategies.clone());
                let text = if list.is_empty() {
                    "(none)".to_string()
                } else {
                    format_for_prompt(&list)
                };
                let _ = writeln!(out, "{text}\n");
                last = strategies.clone();
            }
            StrategyLogEntry::Epoch(r) => {
                let status = if r.accepted {
                    "accepted"
                } else if r.forked {
                    "rejected"
                } else {
                    "no candidate"
                };
                let _ = writeln!(
                    out,
                    "epoch {}  frames {}  R1 {}  R2 {}  {}  version {}",
                    r.epoch,
                    r.frames,
                    fmt_r(r.r1),
                    fmt_r(r.r2),
                    status,
                    r.strategy_version
                );
                if let Some(e) = &r.llm_error {
                    let _ = writeln!(out, "  strategy model: {e}");
                }
                if r.accepted {
                    for line in diff_strategies(&last, &r.strategies) {
                        let _ = writeln!(out, "  {line}");
                    }
                    last = r.strategies.clone();
                }
                out.push('\n');
            }
        }
    }
    out
}

#[derive(Debug, Parser)]
#[command(
    name = "dystil",
    version,
    about = "Train strategy-conditioned gridworld agents"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub env: Option<EnvKind>,
    /// Replay strategy-model replies from this script instead of calling an endpoint.
    #[arg(long, global = true)]
    pub mock: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record oracle demonstrations.
    RecordDemos {
        #[arg(long)]
        n: Option<usize>,
        /// Defaults to demos.jsonl in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Induce an initial strategy list from demonstrations.
    Induce {
        #[arg(long)]
        demos: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Behavioral cloning only.
    BcTrain {
        #[arg(long)]
        demos: Option<PathBuf>,
        /// Numbered strategy list to condition on.
        #[arg(long)]
        strategies: Option<PathBuf>,
        /// Defaults to checkpoints/bc.ckpt in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Induction, cloning and PPO.
    Train {
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        frames: Option<u64>,
    },
    /// Evaluate a checkpoint on the test seeds.
    Eval {
        /// Defaults to checkpoints/final.ckpt in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Defaults to eval.report in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the strategy history of a run.
    InspectStrategies {
        /// Run directory; defaults to the output directory.
        run_dir: Option<PathBuf>,
    },
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(parsed, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig, HarnessError> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(e) = &g.env {
        c.env = *e;
    }
    if let Some(m) = &g.mock {
        c.llm.mode = EndpointMode::Mock {
            script_path: m.clone(),
        };
    }
    if let Some(d) = &g.out_dir {
        c.out_dir = d.clone();
    }
    Ok(c)
}

/// Runs a parsed command, writing human output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), HarnessError> {
    let mut config = resolve_config(&cli.global)?;
    match cli.command {
        Command::RecordDemos { n, output } => {
            if let Some(n) = n {
                config.n_demos = n;
            }
            config.demos_path = None;
            config.validate()?;
            let demos = config.demonstrations()?;
            let path = output.unwrap_or_else(|| config.out_dir.join(DEMOS_FILE));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            write_demonstrations(BufWriter::new(File::create(&path)?), &demos)?;
            let steps: usize = demos.iter().map(|d| d.steps.len()).sum();
            writeln!(
                out,
                "wrote {} demonstrations ({steps} steps) to {}",
                demos.len(),
                path.display()
            )?;
        }
        Command::Induce { demos, output } => {
            if demos.is_some() {
                config.demos_path = demos;
            }
            config.validate()?;
            let d = config.demonstrations()?;
            fs::create_dir_all(&config.out_dir)?;
            let mut client = config.client()?;
            let (_, list) = induce_initial(
                &PromptTemplates::default(),
                &config.env_config(),
                &d,
                &mut client,
            )
            .map_err(HarnessError::Config)?;
            let text = format_for_prompt(&list) + "\n";
            match output {
                Some(p) => {
                    fs::write(&p, &text)?;
                    writeln!(out, "wrote {} strategies to {}", list.len(), p.display())?;
                }
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::BcTrain {
            demos,
            strategies,
            output,
        } => {
            if demos.is_some() {
                config.demos_path = demos;
            }
            config.validate()?;
            let d = config.demonstrations()?;
            let pipeline = config.pipeline();
            let mut agent = AgentModel::new(config.env, pipeline.model.clone())?;
            if let Some(p) = strategies {
                let list = parse_strategy_list(&read_file(&p)?)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
                agent
                    .memory
                    .replace_with(&list, crate::strategy::Provenance::Manual);
            }
            let report = bc_train(&mut agent, &d, &pipeline.bc)?;
            let path =
                output.unwrap_or_else(|| config.out_dir.join(CHECKPOINT_DIR).join("bc.ckpt"));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            save_checkpoint(&path, &agent)?;
            for (i, l) in report.epoch_losses.iter().enumerate() {
                writeln!(out, "epoch {:2}  loss {l:.4}", i + 1)?;
            }
            writeln!(
                out,
                "accuracy {:.3} after {} steps; checkpoint {}",
                report.final_accuracy,
                report.steps,
                path.display()
            )?;
        }
        Command::Train {
            mode,
            demos,
            epochs,
            frames,
        } => {
            if let Some(m) = mode {
                config.dystil.mode = m;
            }
            if demos.is_some() {
                config.demos_path = demos;
            }
            if epochs.is_some() {
                config.dystil.n_epochs = epochs;
            }
            if let Some(f) = frames {
                config.ppo.total_frames = f;
            }
            let s = train(&config)?;
            writeln!(
                out,
                "{} epochs, {} accepted, {} strategy-model calls",
                s.epochs, s.accepted, s.llm_calls
            )?;
            writeln!(
                out,
                "test MR {:.4}  SR {:.3} over {} episodes; run directory {}",
                s.report.mean_return,
                s.report.success_rate,
                s.report.n_episodes,
                s.out_dir.display()
            )?;
        }
        Command::Eval {
            checkpoint,
            episodes,
            output,
        } => {
            let ckpt = checkpoint
                .unwrap_or_else(|| config.out_dir.join(CHECKPOINT_DIR).join("final.ckpt"));
            let agent = load_checkpoint(&ckpt)?;
            let n = episodes.unwrap_or(config.eval.test_episodes);
            let report = evaluate(&agent, &config.env_config(), n, config.ppo.history_window)?;
            let path = output.unwrap_or_else(|| config.out_dir.join(EVAL_REPORT));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
            writeln!(
                out,
                "MR {:.4}  SR {:.3} over {} episodes; report {}",
                report.mean_return,
                report.success_rate,
                report.n_episodes,
                path.display()
            )?;
        }
        Command::InspectStrategies { run_dir } => {
            let dir = run_dir.unwrap_or(config.out_dir);
            let entries = read_strategy_log(&read_file(&dir.join(STRATEGY_LOG))?)?;
            out.write_all(render_strategy_log(&entries).as_bytes())?;
        }
    }
    Ok(())
}
