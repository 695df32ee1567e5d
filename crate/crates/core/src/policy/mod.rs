//! The strategy-conditioned actor-critic.
//!
//! The core reasoning module is a small trainable text encoder: the input is
//! cut into segments (description lines, strategy lines, the goal, each
//! observation sentence, each past action) and every segment is embedded as
//! a scaled sum of token embeddings and role-tagged hashed n-gram features.
//! Segments are averaged within their role and the role vectors summed into
//! `h0`; the hidden vector is `w = tanh(W1 h0 + b1)`. The language-model head
//! maps `w` to next-token logits, the actor reads the logits of each action
//! name's first token, and the critic is a 1024-unit tanh layer on `w`.

mod checkpoint;
pub mod input;
pub mod params;
pub mod tokenizer;

use std::collections::HashMap;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Action, EnvKind};
use crate::rng::{fnv1a, substream};
use crate::strategy::StrategyList;
use crate::trajectory::PseudoState;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use input::{construct_input, env_description, ModelInput};
pub use params::{Adam, Block};
pub use tokenizer::{tokenize, Vocab};

use params::LayoutBuilder;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("actions `{first}` and `{second}` share the first token `{token}`")]
    FirstTokenCollision {
        token: String,
        first: String,
        second: String,
    },
    #[error("first token `{0}` of an action name is not in the vocabulary")]
    UnknownActionToken(String),
    #[error("empty action name")]
    EmptyActionName,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Hash buckets for role-tagged n-gram and sentence features.
    pub feature_buckets: usize,
    /// Hash buckets for out-of-vocabulary tokens.
    pub unk_buckets: usize,
    pub value_hidden: usize,
    /// Forward multiplier on both embedding tables.
    pub embed_mult: f64,
    /// Weight of the whole-segment feature relative to the normalized bag
    /// of tokens and n-grams.
    pub sentence_weight: f64,
    /// Forward multiplier on the language-model head.
    pub head_mult: f64,
    /// Standard deviation of the initial action logits (roughly).
    pub head_init_std: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 128,
            feature_buckets: 8192,
            unk_buckets: 256,
            value_hidden: 1024,
            embed_mult: 100.0,
            sentence_weight: 3.0,
            head_mult: 100.0,
            head_init_std: 0.05,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::InvalidConfig(m.to_string()));
        if self.embed_dim == 0
            || self.feature_buckets == 0
            || self.unk_buckets == 0
            || self.value_hidden == 0
        {
            return bad("dimensions must be positive");
        }
        if !(self.embed_mult > 0.0 && self.head_mult > 0.0 && self.head_init_std >= 0.0) {
            return bad("multipliers must be positive");
        }
        Ok(())
    }
}

/// Maps action names to the vocabulary ids of their first tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionHead {
    pub names: Vec<String>,
    pub token_ids: Vec<usize>,
}

impl ActionHead {
    pub fn new(vocab: &Vocab, names: &[&str]) -> Result<Self, PolicyError> {
        let mut firsts: Vec<String> = Vec::with_capacity(names.len());
        let mut token_ids = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let first = name
                .split_whitespace()
                .next()
                .ok_or(PolicyError::EmptyActionName)?;
            let first = tokenize(first)
                .into_iter()
                .next()
                .ok_or(PolicyError::EmptyActionName)?;
            if let Some(j) = firsts.iter().position(|f| *f == first) {
                return Err(PolicyError::FirstTokenCollision {
                    token: first,
                    first: names[j].to_string(),
                    second: names[i].to_string(),
                });
            }
            let id = vocab
                .lookup(&first)
                .ok_or_else(|| PolicyError::UnknownActionToken(first.clone()))?;
            firsts.push(first);
            token_ids.push(id);
        }
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            token_ids,
        })
    }

    /// The grouped logit vector, in action order.
    pub fn group(&self, next_token_logits: &[f64]) -> Vec<f64> {
        self.token_ids
            .iter()
            .map(|&i| next_token_logits[i])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = logits.iter().map(|z| z - lse).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Self { probs, log_probs }
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 })
            .sum::<f64>()
    }

    /// Index of the most likely action; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF sample from a uniform draw `u` in [0, 1).
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Groups next-token logits by action first tokens and normalizes.
pub fn action_distribution(next_token_logits: &[f64], head: &ActionHead) -> ActionDistribution {
    ActionDistribution::from_logits(&head.group(next_token_logits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreLayout {
    pub tok_emb: Block,
    pub feat_emb: Block,
    pub w1: Block,
    pub b1: Block,
    pub lm_head: Block,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueLayout {
    pub w1: Block,
    pub b1: Block,
    pub w2: Block,
    pub b2: Block,
    pub total: usize,
}

fn core_layout(cfg: &ModelConfig, vocab_size: usize) -> CoreLayout {
    let d = cfg.embed_dim;
    let mut b = LayoutBuilder::default();
    let tok_emb = b.block(vocab_size, d);
    let feat_emb = b.block(cfg.feature_buckets, d);
    let w1 = b.block(d, d);
    let b1 = b.block(1, d);
    let lm_head = b.block(vocab_size, d);
    CoreLayout {
        tok_emb,
        feat_emb,
        w1,
        b1,
        lm_head,
        total: b.total(),
    }
}

fn value_layout(cfg: &ModelConfig) -> ValueLayout {
    let (d, h) = (cfg.embed_dim, cfg.value_hidden);
    let mut b = LayoutBuilder::default();
    let w1 = b.block(h, d);
    let b1 = b.block(1, h);
    let w2 = b.block(1, h);
    let b2 = b.block(1, 1);
    ValueLayout {
        w1,
        b1,
        w2,
        b2,
        total: b.total(),
    }
}

/// One input segment: a line or sentence tagged with its role.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment {
    pub role: String,
    pub text: String,
}

/// Splits a policy input into role-tagged segments. Observation and action
/// roles carry their age relative to the current step.
pub fn segments(text: &str) -> Vec<Segment> {
    #[derive(PartialEq)]
    enum Section {
        Env,
        Strategy,
        Episode,
    }
    let parse_numbered = |line: &str, prefix: &str| -> Option<(usize, String)> {
        let rest = line.strip_prefix(prefix)?;
        let (num, body) = rest.split_once(':')?;
        let k = num.trim().parse().ok()?;
        Some((k, body.trim().to_string()))
    };
    let mut section = Section::Env;
    let mut raw: Vec<(String, Option<usize>, String)> = Vec::new();
    let mut last_obs = 0;
    for line in text.lines() {
        if line == input::STRATEGY_HEADER {
            section = Section::Strategy;
            continue;
        }
        if let Some(goal) = line.strip_prefix(input::GOAL_PREFIX) {
            section = Section::Episode;
            raw.push(("goal".into(), None, goal.trim().to_string()));
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match section {
            Section::Env => raw.push(("env".into(), None, trimmed.to_string())),
            Section::Strategy => raw.push(("strategy".into(), None, trimmed.to_string())),
            Section::Episode => {
                if let Some((k, body)) = parse_numbered(line, "Observation ") {
                    last_obs = last_obs.max(k);
                    for sentence in body.split(", ") {
                        raw.push(("obs".into(), Some(k), sentence.to_string()));
                    }
                } else if let Some((k, body)) = parse_numbered(line, "Action ") {
                    if body.is_empty() {
                        raw.push(("prompt".into(), None, "action".into()));
                    } else {
                        raw.push(("act".into(), Some(k), body));
                    }
                } else {
                    raw.push(("other".into(), None, trimmed.to_string()));
                }
            }
        }
    }
    raw.into_iter()
        .map(|(role, k, text)| {
            let role = match k {
                Some(k) => format!("{role}{}", last_obs.saturating_sub(k)),
                None => role,
            };
            Segment { role, text }
        })
        .collect()
}

/// Sparse feature rows of one segment.
#[derive(Debug, Clone)]
struct SegmentFeatures {
    tok_rows: Vec<usize>,
    feat_rows: Vec<usize>,
    scale: f64,
    sentence_row: usize,
    sentence_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoreOutput {
    pub w: Vec<f64>,
    pub next_token_logits: Vec<f64>,
}

/// Forward pass cache for one sample.
#[derive(Debug, Clone)]
pub struct SampleForward {
    /// (unique segment index, coefficient into h0)
    terms: Vec<(usize, f64)>,
    h0: Vec<f64>,
    pub w: Vec<f64>,
    pub logits: Vec<f64>,
    pub dist: ActionDistribution,
    pub value: Option<f64>,
    v_hidden: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct BatchForward {
    unique: Vec<SegmentFeatures>,
    pub samples: Vec<SampleForward>,
}

/// Loss gradient with respect to one sample's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrad {
    /// d loss / d grouped action logits.
    pub logits: Vec<f64>,
    /// d loss / d value.
    pub value: f64,
}

/// Strategy memory plus all trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentModel {
    pub memory: StrategyList,
    pub env_description: String,
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub head: ActionHead,
    pub actions: Vec<Action>,
    pub core_layout: CoreLayout,
    pub value_layout: ValueLayout,
    pub core_params: Vec<f64>,
    pub value_params: Vec<f64>,
}

fn fill_normal(rng: &mut impl rand::Rng, out: &mut [f64], std: f64) {
    if std == 0.0 {
        out.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let n = Normal::new(0.0, std).expect("finite std");
    for x in out {
        *x = n.sample(rng);
    }
}

impl AgentModel {
    /// A freshly initialized agent for `kind` with empty strategy memory.
    pub fn new(kind: EnvKind, config: ModelConfig) -> Result<Self, PolicyError> {
        let description = env_description(kind);
        Self::with_description(description, kind.actions(), config)
    }

    pub fn with_description(
        env_description: String,
        actions: &[Action],
        config: ModelConfig,
    ) -> Result<Self, PolicyError> {
        config.validate()?;
        let vocab = Vocab::build(&[&env_description], config.unk_buckets);
        let names: Vec<&str> = actions.iter().map(|a| a.name()).collect();
        let head = ActionHead::new(&vocab, &names)?;
        let core_layout = core_layout(&config, vocab.size());
        let value_layout = value_layout(&config);
        let mut model = Self {
            memory: StrategyList::empty(),
            env_description,
            vocab,
            head,
            actions: actions.to_vec(),
            core_params: vec![0.0; core_layout.total],
            value_params: vec![0.0; value_layout.total],
            core_layout,
            value_layout,
            config,
        };
        model.initialize();
        Ok(model)
    }

    fn initialize(&mut self) {
        let cfg = &self.config;
        let d = cfg.embed_dim as f64;
        let mut rng = substream(cfg.seed, "model-init", &[]);
        let cl = self.core_layout.clone();
        let emb_std = 1.0 / cfg.embed_mult;
        fill_normal(&mut rng, &mut self.core_params[cl.tok_emb.range()], emb_std);
        fill_normal(
            &mut rng,
            &mut self.core_params[cl.feat_emb.range()],
            emb_std,
        );
        fill_normal(
            &mut rng,
            &mut self.core_params[cl.w1.range()],
            1.0 / d.sqrt(),
        );
        let head_std = cfg.head_init_std / (cfg.head_mult * d.sqrt() * 0.6);
        fill_normal(
            &mut rng,
            &mut self.core_params[cl.lm_head.range()],
            head_std,
        );
        let vl = self.value_layout.clone();
        fill_normal(
            &mut rng,
            &mut self.value_params[vl.w1.range()],
            1.0 / d.sqrt(),
        );
        let h = cfg.value_hidden as f64;
        fill_normal(
            &mut rng,
            &mut self.value_params[vl.w2.range()],
            1.0 / h.sqrt(),
        );
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    pub fn input_for(&self, s: &PseudoState) -> ModelInput {
        construct_input(&self.env_description, &self.memory, &s.goal, s)
    }

    fn features(&self, seg: &Segment) -> SegmentFeatures {
        let tokens = tokenize(&seg.text);
        let tok_rows: Vec<usize> = tokens.iter().map(|t| self.vocab.id(t)).collect();
        let buckets = self.config.feature_buckets as u64;
        let hash = |kind: &str, body: &str| -> usize {
            let key = format!("{}\u{1}{kind}\u{1}{body}", seg.role);
            (fnv1a(key.as_bytes()) % buckets) as usize
        };
        let mut feat_rows = Vec::with_capacity(tokens.len() * 3 + 1);
        for (i, t) in tokens.iter().enumerate() {
            feat_rows.push(hash("1", t));
            if i + 1 < tokens.len() {
                feat_rows.push(hash("2", &format!("{t} {}", tokens[i + 1])));
            }
            if i + 2 < tokens.len() {
                feat_rows.push(hash(
                    "3",
                    &format!("{t} {} {}", tokens[i + 1], tokens[i + 2]),
                ));
            }
        }
        let sentence_row = hash("s", &tokens.join(" "));
        let count = (tok_rows.len() + feat_rows.len()).max(1) as f64;
        SegmentFeatures {
            tok_rows,
            feat_rows,
            scale: self.config.embed_mult / count.sqrt(),
            sentence_row,
            sentence_scale: self.config.embed_mult * self.config.sentence_weight,
        }
    }

    fn segment_vector(&self, f: &SegmentFeatures) -> Vec<f64> {
        let d = self.embed_dim();
        let p = &self.core_params;
        let cl = &self.core_layout;
        let mut v = vec![0.0; d];
        for &r in &f.tok_rows {
            for (x, e) in v.iter_mut().zip(&p[cl.tok_emb.row_range(r)]) {
                *x += e;
            }
        }
        for &r in &f.feat_rows {
            for (x, e) in v.iter_mut().zip(&p[cl.feat_emb.row_range(r)]) {
                *x += e;
            }
        }
        let sent = &p[cl.feat_emb.row_range(f.sentence_row)];
        for (x, e) in v.iter_mut().zip(sent) {
            *x = *x * f.scale + f.sentence_scale * e;
        }
        v
    }

    fn hidden(&self, h0: &[f64]) -> Vec<f64> {
        let d = self.embed_dim();
        let p = &self.core_params;
        let cl = &self.core_layout;
        let w1 = &p[cl.w1.range()];
        let b1 = &p[cl.b1.range()];
        (0..d)
            .map(|j| {
                let row = &w1[j * d..(j + 1) * d];
                let pre: f64 = b1[j] + row.iter().zip(h0).map(|(a, b)| a * b).sum::<f64>();
                pre.tanh()
            })
            .collect()
    }

    fn head_row(&self, token: usize) -> &[f64] {
        &self.core_params[self.core_layout.lm_head.row_range(token)]
    }

    /// Critic forward: value and hidden activations.
    fn value_forward(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let vp = &self.value_params;
        let vl = &self.value_layout;
        let d = self.embed_dim();
        let w1 = &vp[vl.w1.range()];
        let b1 = &vp[vl.b1.range()];
        let w2 = &vp[vl.w2.range()];
        let hidden: Vec<f64> = (0..self.config.value_hidden)
            .map(|j| {
                let row = &w1[j * d..(j + 1) * d];
                (b1[j] + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).tanh()
            })
            .collect();
        let v = vp[vl.b2.offset] + hidden.iter().zip(w2).map(|(h, c)| h * c).sum::<f64>();
        (v, hidden)
    }

    /// Critic value of a hidden vector.
    pub fn value(&self, w: &[f64]) -> f64 {
        self.value_forward(w).0
    }

    /// Hidden vector and full next-token logits for a single input.
    pub fn core_forward(&self, input: &ModelInput) -> CoreOutput {
        let fwd = self.forward_batch(std::slice::from_ref(input), false);
        let w = fwd.samples.into_iter().next().expect("one sample").w;
        let rows = self.core_layout.lm_head.rows;
        let m = self.config.head_mult;
        let next_token_logits = (0..rows)
            .map(|r| {
                m * self
                    .head_row(r)
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect();
        CoreOutput {
            w,
            next_token_logits,
        }
    }

    /// Action distribution for one input.
    pub fn distribution(&self, input: &ModelInput) -> ActionDistribution {
        self.forward_batch(std::slice::from_ref(input), false)
            .samples
            .remove(0)
            .dist
    }

    /// Batched forward pass. Identical segments across the batch are
    /// embedded once.
    pub fn forward_batch(&self, inputs: &[ModelInput], with_value: bool) -> BatchForward {
        let mut ids: HashMap<Segment, usize> = HashMap::new();
        let mut unique_segments: Vec<Segment> = Vec::new();
        let mut sample_terms: Vec<Vec<(usize, f64)>> = Vec::with_capacity(inputs.len());
        for input in inputs {
            let segs = segments(&input.text);
            let mut role_counts: Vec<(String, usize)> = Vec::new();
            for s in &segs {
                match role_counts.iter_mut().find(|(r, _)| *r == s.role) {
                    Some((_, c)) => *c += 1,
                    None => role_counts.push((s.role.clone(), 1)),
                }
            }
            let groups = (role_counts.len().max(1) as f64).sqrt();
            let terms = segs
                .into_iter()
                .map(|s| {
                    let n = role_counts
                        .iter()
                        .find(|(r, _)| *r == s.role)
                        .expect("counted")
                        .1;
                    let coef = 1.0 / ((n as f64).sqrt() * groups);
                    let next = unique_segments.len();
                    let id = *ids.entry(s.clone()).or_insert(next);
                    if id == next {
                        unique_segments.push(s);
                    }
                    (id, coef)
                })
                .collect();
            sample_terms.push(terms);
        }
        let unique: Vec<SegmentFeatures> =
            unique_segments.iter().map(|s| self.features(s)).collect();
        let vectors: Vec<Vec<f64>> = unique.par_iter().map(|f| self.segment_vector(f)).collect();
        let d = self.embed_dim();
        let m = self.config.head_mult;
        let samples = sample_terms
            .into_par_iter()
            .map(|terms| {
                let mut h0 = vec![0.0; d];
                for &(id, coef) in &terms {
                    for (x, v) in h0.iter_mut().zip(&vectors[id]) {
                        *x += coef * v;
                    }
                }
                let w = self.hidden(&h0);
                let logits: Vec<f64> = self
                    .head
                    .token_ids
                    .iter()
                    .map(|&t| {
                        m * self
                            .head_row(t)
                            .iter()
                            .zip(&w)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .collect();
                let dist = ActionDistribution::from_logits(&logits);
                let (value, v_hidden) = if with_value {
                    let (v, h) = self.value_forward(&w);
                    (Some(v), Some(h))
                } else {
                    (None, None)
                };
                SampleForward {
                    terms,
                    h0,
                    w,
                    logits,
                    dist,
                    value,
                    v_hidden,
                }
            })
            .collect();
        BatchForward { unique, samples }
    }

    /// Accumulates parameter gradients for the given output gradients.
    /// Critic gradients flow into `value_grad` (and through `w` into the
    /// core) only when it is provided.
    pub fn backward(
        &self,
        fwd: &BatchForward,
        grads: &[OutputGrad],
        core_grad: &mut [f64],
        mut value_grad: Option<&mut [f64]>,
    ) {
        assert_eq!(fwd.samples.len(), grads.len(), "one gradient per sample");
        let d = self.embed_dim();
        let cl = &self.core_layout;
        let p = &self.core_params;
        let m = self.config.head_mult;
        let mut dseg = vec![vec![0.0; d]; fwd.unique.len()];
        for (s, g) in fwd.samples.iter().zip(grads) {
            let mut dw = vec![0.0; d];
            for (a, &tok) in self.head.token_ids.iter().enumerate() {
                let gl = g.logits[a] * m;
                if gl == 0.0 {
                    continue;
                }
                let row = cl.lm_head.row_range(tok);
                for ((gw, x), wv) in core_grad[row.clone()]
                    .iter_mut()
                    .zip(&s.w)
                    .zip(dw.iter_mut().zip(&p[row]))
                {
                    *gw += gl * x;
                    *wv.0 += gl * wv.1;
                }
            }
            if let Some(vg) = value_grad.as_deref_mut() {
                if g.value != 0.0 {
                    let hidden = s
                        .v_hidden
                        .as_ref()
                        .expect("forward_batch(with_value = true)");
                    self.value_backward(&s.w, hidden, g.value, vg, &mut dw);
                }
            }
            // tanh layer
            let dpre: Vec<f64> = dw
                .iter()
                .zip(&s.w)
                .map(|(g, w)| g * (1.0 - w * w))
                .collect();
            let mut dh0 = vec![0.0; d];
            let w1 = &p[cl.w1.range()];
            for j in 0..d {
                let gj = dpre[j];
                if gj == 0.0 {
                    continue;
                }
                let off = cl.w1.offset + j * d;
                let row = &w1[j * d..(j + 1) * d];
                for k in 0..d {
                    core_grad[off + k] += gj * s.h0[k];
                    dh0[k] += gj * row[k];
                }
                core_grad[cl.b1.offset + j] += gj;
            }
            for &(id, coef) in &s.terms {
                for (x, g) in dseg[id].iter_mut().zip(&dh0) {
                    *x += coef * g;
                }
            }
        }
        for (f, ds) in fwd.unique.iter().zip(&dseg) {
            for &r in &f.tok_rows {
                for (x, g) in core_grad[cl.tok_emb.row_range(r)].iter_mut().zip(ds) {
                    *x += f.scale * g;
                }
            }
            for &r in &f.feat_rows {
                for (x, g) in core_grad[cl.feat_emb.row_range(r)].iter_mut().zip(ds) {
                    *x += f.scale * g;
                }
            }
            for (x, g) in core_grad[cl.feat_emb.row_range(f.sentence_row)]
                .iter_mut()
                .zip(ds)
            {
                *x += f.sentence_scale * g;
            }
        }
    }

    fn value_backward(&self, w: &[f64], hidden: &[f64], dv: f64, vg: &mut [f64], dw: &mut [f64]) {
        let vl = &self.value_layout;
        let vp = &self.value_params;
        let d = self.embed_dim();
        vg[vl.b2.offset] += dv;
        for (j, h) in hidden.iter().enumerate() {
            let c = vp[vl.w2.offset + j];
            vg[vl.w2.offset + j] += dv * h;
            let dz = dv * c * (1.0 - h * h);
            if dz == 0.0 {
                continue;
            }
            vg[vl.b1.offset + j] += dz;
            let off = vl.w1.offset + j * d;
            for k in 0..d {
                vg[off + k] += dz * w[k];
                dw[k] += dz * vp[off + k];
            }
        }
    }
}
