//! Behavioral cloning on expert demonstrations. Only the core encoder and
//! its language-model head are trained; the critic is left untouched.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::Action;
use crate::policy::{Adam, AgentModel, OutputGrad};
use crate::rng::substream;
use crate::trajectory::{Demonstration, PseudoState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub entropy_coeff: f64,
    pub history_window: usize,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-4,
            entropy_coeff: 0.01,
            history_window: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BcError {
    #[error("no demonstrations to clone")]
    NoDemonstrations,
    #[error("invalid behavioral cloning config: {0}")]
    InvalidConfig(String),
    #[error("expert action `{0}` is not in the agent's action set")]
    UnknownAction(Action),
}

impl BcConfig {
    pub fn validate(&self) -> Result<(), BcError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(BcError::InvalidConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || self.entropy_coeff < 0.0 {
            return Err(BcError::InvalidConfig(
                "learning_rate must be positive and entropy_coeff non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcLoss {
    pub total: f64,
    pub cross_entropy: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    /// Mean minibatch loss of each epoch, measured before each step.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
    pub final_accuracy: f64,
}

fn action_index(agent: &AgentModel, a: Action) -> Result<usize, BcError> {
    agent
        .actions
        .iter()
        .position(|&x| x == a)
        .ok_or(BcError::UnknownAction(a))
}

/// Loss and per-sample logit gradients of `CE - c * H` averaged over the batch.
fn loss_and_grads(
    agent: &AgentModel,
    batch: &[(PseudoState, Action)],
    entropy_coeff: f64,
) -> Result<(BcLoss, crate::policy::BatchForward, Vec<OutputGrad>), BcError> {
    let inputs: Vec<_> = batch.iter().map(|(s, _)| agent.input_for(s)).collect();
    let fwd = agent.forward_batch(&inputs, false);
    let n = batch.len() as f64;
    let mut ce = 0.0;
    let mut ent = 0.0;
    let mut grads = Vec::with_capacity(batch.len());
    for ((_, a), s) in batch.iter().zip(&fwd.samples) {
        let target = action_index(agent, *a)?;
        let p = &s.dist.probs;
        let lp = &s.dist.log_probs;
        let h = s.dist.entropy();
        ce -= lp[target];
        ent += h;
        let logits = (0..p.len())
            .map(|k| {
                let onehot = if k == target { 1.0 } else { 0.0 };
                ((p[k] - onehot) + entropy_coeff * p[k] * (lp[k] + h)) / n
            })
            .collect();
        grads.push(OutputGrad { logits, value: 0.0 });
    }
    let loss = BcLoss {
        total: ce / n - entropy_coeff * ent / n,
        cross_entropy: ce / n,
        entropy: ent / n,
    };
    Ok((loss, fwd, grads))
}

pub fn bc_loss(
    agent: &AgentModel,
    batch: &[(PseudoState, Action)],
    entropy_coeff: f64,
) -> Result<BcLoss, BcError> {
    if batch.is_empty() {
        return Err(BcError::InvalidConfig("empty batch".into()));
    }
    Ok(loss_and_grads(agent, batch, entropy_coeff)?.0)
}

/// All (pseudo-state, expert action) pairs in `demos`.
pub fn demo_pairs(demos: &[Demonstration], window: usize) -> Vec<(PseudoState, Action)> {
    demos.iter().flat_map(|d| d.pseudo_states(window)).collect()
}

/// Fraction of pairs where the agent's most likely action is the expert's.
pub fn argmax_accuracy(agent: &AgentModel, pairs: &[(PseudoState, Action)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let inputs: Vec<_> = pairs.iter().map(|(s, _)| agent.input_for(s)).collect();
    let fwd = agent.forward_batch(&inputs, false);
    let hits = pairs
        .iter()
        .zip(&fwd.samples)
        .filter(|((_, a), s)| agent.actions[s.dist.argmax()] == *a)
        .count();
    hits as f64 / pairs.len() as f64
}

pub fn bc_train(
    agent: &mut AgentModel,
    demos: &[Demonstration],
    config: &BcConfig,
) -> Result<BcReport, BcError> {
    config.validate()?;
    if demos.iter().all(|d| d.steps.is_empty()) {
        return Err(BcError::NoDemonstrations);
    }
    let mut pairs = demo_pairs(demos, config.history_window);
    for (_, a) in &pairs {
        action_index(agent, *a)?;
    }
    let mut opt = Adam::new(agent.core_params.len(), config.learning_rate);
    let mut grad = vec![0.0; agent.core_params.len()];
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = substream(config.seed, "bc-shuffle", &[epoch as u64]);
        pairs.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for batch in pairs.chunks(config.batch_size) {
            let (loss, fwd, grads) = loss_and_grads(agent, batch, config.entropy_coeff)?;
            grad.iter_mut().for_each(|g| *g = 0.0);
            agent.backward(&fwd, &grads, &mut grad, None);
            opt.step(&mut agent.core_params, &grad);
            total += loss.total;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    let final_accuracy = argmax_accuracy(agent, &pairs);
    Ok(BcReport {
        epoch_losses,
        steps: opt.steps(),
        final_accuracy,
    })
}
