//! Experience collection, generalized advantage estimation and the clipped
//! PPO update.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Action, EnvConfig, EnvError};
use crate::policy::{Adam, AgentModel, OutputGrad};
use crate::rng::{derive_seed, substream};
use crate::textgen::{LanguageEnv, TextObservation};
use crate::trajectory::{make_pseudo_state, EpisodeEnv, Experience, ExperienceBuffer, PseudoState};

/// Training episode seeds carry this bit so they never coincide with the
/// small fixed evaluation seeds.
pub const TRAIN_SEED_BIT: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub num_workers: usize,
    pub frames_per_worker: usize,
    pub total_frames: u64,
    /// Optimization passes over each buffer.
    pub epochs: usize,
    pub normalize_advantages: bool,
    pub history_window: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            entropy_coeff: 0.01,
            value_coeff: 0.5,
            batch_size: 32,
            learning_rate: 1e-5,
            num_workers: 4,
            frames_per_worker: 128,
            total_frames: 10_000,
            epochs: 4,
            normalize_advantages: true,
            history_window: 2,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PpoError {
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),
    #[error("advantages have not been computed for this buffer")]
    MissingAdvantages,
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if self.batch_size == 0
            || self.num_workers == 0
            || self.frames_per_worker == 0
            || self.epochs == 0
        {
            return bad("batch_size, num_workers, frames_per_worker and epochs must be positive");
        }
        if !(self.learning_rate > 0.0) || self.entropy_coeff < 0.0 || self.value_coeff < 0.0 {
            return bad("learning_rate must be positive and loss coefficients non-negative");
        }
        Ok(())
    }

    /// Frames per buffer.
    pub fn frames_per_update(&self) -> usize {
        self.num_workers * self.frames_per_worker
    }
}

struct Worker {
    env: LanguageEnv,
    id: u64,
    root: u64,
    episodes: u64,
    rng: ChaCha8Rng,
    observations: Vec<TextObservation>,
    actions: Vec<Action>,
    goal: String,
    ret: f64,
}

impl Worker {
    fn start_episode(&mut self) -> Result<(), EnvError> {
        let seed =
            derive_seed(self.root, "train-episode", &[self.id, self.episodes]) | TRAIN_SEED_BIT;
        self.episodes += 1;
        let obs = self.env.reset(seed)?;
        self.goal = obs.goal.clone();
        self.observations = vec![obs];
        self.actions.clear();
        self.ret = 0.0;
        Ok(())
    }

    fn pseudo_state(&self, window: usize) -> PseudoState {
        make_pseudo_state(
            &self.observations,
            &self.actions,
            self.observations.len(),
            window,
            &self.goal,
        )
        .expect("worker history is consistent")
    }
}

/// Summary of the episodes that finished during one collection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectStats {
    pub frames: usize,
    pub episodes: usize,
    pub successes: usize,
    pub returns: Vec<f64>,
}

impl CollectStats {
    /// Mean return of finished episodes, 0 if none finished.
    pub fn mean_return(&self) -> f64 {
        if self.returns.is_empty() {
            0.0
        } else {
            self.returns.iter().sum::<f64>() / self.returns.len() as f64
        }
    }
}

/// Persistent rollout workers. Episodes carry over between collections, so
/// a window that ends mid-episode resumes where it left off.
pub struct Rollout {
    workers: Vec<Worker>,
    window: usize,
}

impl Rollout {
    pub fn new(
        env_config: &EnvConfig,
        num_workers: usize,
        window: usize,
        seed: u64,
    ) -> Result<Self, EnvError> {
        env_config.validate()?;
        let mut workers = Vec::with_capacity(num_workers);
        for id in 0..num_workers as u64 {
            let mut w = Worker {
                env: LanguageEnv::new(*env_config),
                id,
                root: seed,
                episodes: 0,
                rng: substream(seed, "action-sampling", &[id]),
                observations: Vec::new(),
                actions: Vec::new(),
                goal: String::new(),
                ret: 0.0,
            };
            w.start_episode()?;
            workers.push(w);
        }
        Ok(Self { workers, window })
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    /// Steps every worker `frames_per_worker` times in lockstep, sampling
    /// actions from the agent's policy.
    pub fn collect(
        &mut self,
        agent: &AgentModel,
        frames_per_worker: usize,
    ) -> Result<(ExperienceBuffer, CollectStats), EnvError> {
        let n = self.workers.len();
        let mut frames: Vec<Vec<Experience>> = (0..n)
            .map(|_| Vec::with_capacity(frames_per_worker))
            .collect();
        let mut stats = CollectStats::default();
        for _ in 0..frames_per_worker {
            let states: Vec<PseudoState> = self
                .workers
                .iter()
                .map(|w| w.pseudo_state(self.window))
                .collect();
            let inputs: Vec<_> = states.iter().map(|s| agent.input_for(s)).collect();
            let fwd = agent.forward_batch(&inputs, true);
            for ((w, state), (sample, out)) in self
                .workers
                .iter_mut()
                .zip(states)
                .zip(fwd.samples.iter().zip(frames.iter_mut()))
            {
                let u: f64 = w.rng.gen();
                let idx = sample.dist.sample_with(u);
                let action = agent.actions[idx];
                let step = w.env.step(action)?;
                w.ret += step.reward;
                let done = step.done();
                out.push(Experience {
                    state,
                    action,
                    action_index: idx,
                    reward: step.reward,
                    value: sample.value.expect("value requested"),
                    log_prob: sample.dist.log_probs[idx],
                    done,
                });
                stats.frames += 1;
                if done {
                    stats.episodes += 1;
                    stats.successes += usize::from(step.success);
                    stats.returns.push(w.ret);
                    w.start_episode()?;
                } else {
                    w.actions.push(action);
                    w.observations.push(step.observation);
                }
            }
        }
        // bootstrap values for the states after each worker's last frame
        let tails: Vec<_> = self
            .workers
            .iter()
            .map(|w| agent.input_for(&w.pseudo_state(self.window)))
            .collect();
        let tail_fwd = agent.forward_batch(&tails, true);
        let mut buffer = ExperienceBuffer::default();
        for (f, s) in frames.into_iter().zip(&tail_fwd.samples) {
            buffer.push_segment(f, s.value.expect("value requested"));
        }
        Ok((buffer, stats))
    }
}

/// One-shot collection of `num_workers * frames_per_worker` frames with
/// fresh workers.
pub fn collect_experience(
    agent: &AgentModel,
    env_config: &EnvConfig,
    config: &PpoConfig,
    seed: u64,
) -> Result<ExperienceBuffer, PpoError> {
    config.validate()?;
    let mut rollout = Rollout::new(env_config, config.num_workers, config.history_window, seed)?;
    Ok(rollout.collect(agent, config.frames_per_worker)?.0)
}

/// Fills in advantages and returns-to-go. Within a segment the successor
/// of frame t is frame t+1; the last frame bootstraps from the segment's
/// tail value unless it ended its episode.
pub fn compute_gae(buffer: &mut ExperienceBuffer, gamma: f64, lambda: f64) {
    let mut adv = vec![0.0; buffer.len()];
    for seg in &buffer.segments {
        let mut next_value = seg.tail_value;
        let mut running = 0.0;
        for i in (seg.start..seg.start + seg.len).rev() {
            let e = &buffer.entries[i];
            let cont = if e.done { 0.0 } else { 1.0 };
            let delta = e.reward + gamma * next_value * cont - e.value;
            running = delta + gamma * lambda * cont * running;
            adv[i] = running;
            next_value = e.value;
        }
    }
    let returns = adv
        .iter()
        .zip(&buffer.entries)
        .map(|(a, e)| a + e.value)
        .collect();
    buffer.advantages = Some(adv);
    buffer.returns_to_go = Some(returns);
}

pub fn ppo_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of the surrogate with respect to the ratio.
fn surrogate_grad(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        0.0
    }
}

/// Shifts and scales to mean 0, std 1. Batches of one, or with zero
/// spread, are only centered.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.len() < 2 {
        return adv.to_vec();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return adv.iter().map(|a| a - mean).collect();
    }
    adv.iter().map(|a| (a - mean) / std).collect()
}

/// Adam state for both networks, kept across updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoOptimizer {
    pub core: Adam,
    pub value: Adam,
}

impl PpoOptimizer {
    pub fn new(agent: &AgentModel, lr: f64) -> Self {
        Self {
            core: Adam::new(agent.core_params.len(), lr),
            value: Adam::new(agent.value_params.len(), lr),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Per-sample loss terms and output gradients of
/// `-surrogate + c_v (V - R)^2 - c_e H`, each divided by `scale`.
fn sample_grads(
    agent_out: &crate::policy::SampleForward,
    e: &Experience,
    adv: f64,
    ret: f64,
    config: &PpoConfig,
    scale: f64,
) -> (OutputGrad, f64, f64, f64, bool) {
    let dist = &agent_out.dist;
    let a = e.action_index;
    let ratio = (dist.log_probs[a] - e.log_prob).exp();
    let surr = ppo_surrogate(ratio, adv, config.clip_eps);
    let d_logp = -surrogate_grad(ratio, adv, config.clip_eps) * ratio;
    let h = dist.entropy();
    let logits = (0..dist.probs.len())
        .map(|k| {
            let p = dist.probs[k];
            let onehot = if k == a { 1.0 } else { 0.0 };
            (d_logp * (onehot - p) + config.entropy_coeff * p * (dist.log_probs[k] + h)) / scale
        })
        .collect();
    let v = agent_out.value.expect("value requested");
    let value = 2.0 * config.value_coeff * (v - ret) / scale;
    let clipped = (ratio - 1.0).abs() > config.clip_eps;
    (
        OutputGrad { logits, value },
        -surr,
        (v - ret).powi(2),
        h,
        clipped,
    )
}

/// Runs `config.epochs` passes of shuffled minibatch steps over `buffer`.
pub fn ppo_update(
    agent: &mut AgentModel,
    optimizer: &mut PpoOptimizer,
    buffer: &ExperienceBuffer,
    config: &PpoConfig,
    shuffle_seed: u64,
) -> Result<UpdateStats, PpoError> {
    config.validate()?;
    let raw = buffer
        .advantages
        .as_ref()
        .ok_or(PpoError::MissingAdvantages)?;
    let returns = buffer
        .returns_to_go
        .as_ref()
        .ok_or(PpoError::MissingAdvantages)?;
    let adv = if config.normalize_advantages {
        normalize_advantages(raw)
    } else {
        raw.clone()
    };
    let mut stats = UpdateStats::default();
    let mut samples = 0usize;
    let mut clipped = 0usize;
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut core_grad = vec![0.0; agent.core_params.len()];
    let mut value_grad = vec![0.0; agent.value_params.len()];
    for epoch in 0..config.epochs {
        order.shuffle(&mut substream(shuffle_seed, "ppo-shuffle", &[epoch as u64]));
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<_> = batch
                .iter()
                .map(|&i| agent.input_for(&buffer.entries[i].state))
                .collect();
            let fwd = agent.forward_batch(&inputs, true);
            let scale = batch.len() as f64;
            let mut grads = Vec::with_capacity(batch.len());
            for (&i, s) in batch.iter().zip(&fwd.samples) {
                let (g, pl, vl, h, c) =
                    sample_grads(s, &buffer.entries[i], adv[i], returns[i], config, scale);
                stats.policy_loss += pl;
                stats.value_loss += vl;
                stats.entropy += h;
                clipped += usize::from(c);
                grads.push(g);
            }
            samples += batch.len();
            core_grad.iter_mut().for_each(|g| *g = 0.0);
            value_grad.iter_mut().for_each(|g| *g = 0.0);
            agent.backward(&fwd, &grads, &mut core_grad, Some(&mut value_grad));
            optimizer.core.step(&mut agent.core_params, &core_grad);
            optimizer.value.step(&mut agent.value_params, &value_grad);
            stats.minibatches += 1;
        }
    }
    if samples > 0 {
        let n = samples as f64;
        stats.policy_loss /= n;
        stats.value_loss /= n;
        stats.entropy /= n;
        stats.clip_fraction = clipped as f64 / n;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub ret: f64,
    pub success: bool,
    pub steps: u32,
}

/// Plays one greedy (argmax) episode per seed, batching the forward passes
/// of all unfinished episodes.
pub fn play_greedy(
    agent: &AgentModel,
    env_config: &EnvConfig,
    seeds: &[u64],
    window: usize,
) -> Result<Vec<EpisodeResult>, EnvError> {
    env_config.validate()?;
    play_greedy_in(agent, || LanguageEnv::new(*env_config), seeds, window)
}

/// [`play_greedy`] over environments built by `make_env`, one per seed.
pub fn play_greedy_in<E: EpisodeEnv>(
    agent: &AgentModel,
    mut make_env: impl FnMut() -> E,
    seeds: &[u64],
    window: usize,
) -> Result<Vec<EpisodeResult>, EnvError> {
    struct Slot<E> {
        env: E,
        observations: Vec<TextObservation>,
        actions: Vec<Action>,
        goal: String,
        result: Option<EpisodeResult>,
        ret: f64,
    }
    let mut slots = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut env = make_env();
        let obs = env.reset(seed)?;
        slots.push(Slot {
            env,
            goal: obs.goal.clone(),
            observations: vec![obs],
            actions: Vec::new(),
            result: None,
            ret: 0.0,
        });
    }
    loop {
        let live: Vec<usize> = (0..slots.len())
            .filter(|&i| slots[i].result.is_none())
            .collect();
        if live.is_empty() {
            break;
        }
        let inputs: Vec<_> = live
            .iter()
            .map(|&i| {
                let s = &slots[i];
                let ps = make_pseudo_state(
                    &s.observations,
                    &s.actions,
                    s.observations.len(),
                    window,
                    &s.goal,
                )
                .expect("episode history is consistent");
                agent.input_for(&ps)
            })
            .collect();
        let fwd = agent.forward_batch(&inputs, false);
        for (&i, sample) in live.iter().zip(&fwd.samples) {
            let s = &mut slots[i];
            let action = agent.actions[sample.dist.argmax()];
            let step = s.env.step(action)?;
            s.ret += step.reward;
            s.actions.push(action);
            if step.done() {
                s.result = Some(EpisodeResult {
                    seed: seeds[i],
                    ret: s.ret,
                    success: step.success,
                    steps: s.actions.len() as u32,
                });
            } else {
                s.observations.push(step.observation);
            }
        }
    }
    Ok(slots
        .into_iter()
        .map(|s| s.result.expect("finished"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::EnvKind;
    use crate::policy::ModelConfig;
    use crate::trajectory::Segment;
    use proptest::prelude::*;

    fn small() -> ModelConfig {
        ModelConfig {
            embed_dim: 16,
            feature_buckets: 512,
            unk_buckets: 16,
            value_hidden: 8,
            ..ModelConfig::default()
        }
    }

    fn frame(reward: f64, value: f64, done: bool) -> Experience {
        Experience {
            state: PseudoState {
                history: Vec::new(),
                current: TextObservation::new(Vec::new(), "get to the green goal square"),
                goal: "get to the green goal square".into(),
            },
            action: Action::MoveForward,
            action_index: 2,
            reward,
            value,
            log_prob: -(3f64.ln()),
            done,
        }
    }

    /// Frames as (reward, value, done) plus the tail value.
    type Seg = (Vec<(f64, f64, bool)>, f64);

    fn buffer(segs: &[Seg]) -> ExperienceBuffer {
        let mut b = ExperienceBuffer::default();
        for (frames, tail) in segs {
            b.push_segment(
                frames.iter().map(|&(r, v, d)| frame(r, v, d)).collect(),
                *tail,
            );
        }
        b
    }

    /// Direct double sum of discounted TD residuals up to the episode end.
    #[allow(clippy::needless_range_loop)]
    fn gae_oracle(b: &ExperienceBuffer, gamma: f64, lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; b.len()];
        for seg in &b.segments {
            let end = seg.start + seg.len;
            let delta = |i: usize| {
                let e = &b.entries[i];
                let next = if e.done {
                    0.0
                } else if i + 1 < end {
                    b.entries[i + 1].value
                } else {
                    seg.tail_value
                };
                e.reward + gamma * next - e.value
            };
            for t in seg.start..end {
                let mut sum = 0.0;
                for l in 0..end - t {
                    sum += (gamma * lambda).powi(l as i32) * delta(t + l);
                    if b.entries[t + l].done {
                        break;
                    }
                }
                out[t] = sum;
            }
        }
        out
    }

    #[test]
    fn single_terminal_step() {
        let mut b = buffer(&[(vec![(0.7, 0.2, true)], 5.0)]);
        compute_gae(&mut b, 0.9, 0.3);
        assert!((b.advantages.as_ref().unwrap()[0] - 0.5).abs() < 1e-12);
        assert!((b.returns_to_go.as_ref().unwrap()[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn undiscounted_lambda_one_telescopes() {
        let rs = [0.0, 0.0, 1.0, 0.0, 0.5];
        let vs = [0.3, -0.1, 0.4, 0.2, 0.9];
        let dones = [false, false, true, false, true];
        let frames: Vec<_> = (0..5).map(|i| (rs[i], vs[i], dones[i])).collect();
        let mut b = buffer(&[(frames, 0.0)]);
        compute_gae(&mut b, 1.0, 1.0);
        let adv = b.advantages.unwrap();
        let expect = [1.0 - 0.3, 1.0 + 0.1, 1.0 - 0.4, 0.5 - 0.2, 0.5 - 0.9];
        for (a, e) in adv.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_tail_bootstraps() {
        let mut b = buffer(&[(vec![(0.0, 0.1, false)], 0.8)]);
        compute_gae(&mut b, 0.5, 1.0);
        assert!((b.advantages.unwrap()[0] - (0.5 * 0.8 - 0.1)).abs() < 1e-12);
        assert_eq!(
            b.segments,
            vec![Segment {
                start: 0,
                len: 1,
                tail_value: 0.8
            }]
        );
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(ppo_surrogate(1.0, 0.37, 0.2), 0.37);
        assert!((ppo_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-12);
        assert!((ppo_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-12);
    }

    fn arb_buffer() -> impl Strategy<Value = Vec<Seg>> {
        let frame = (-1.0..1.0f64, -1.0..1.0f64, prop::bool::weighted(0.25));
        prop::collection::vec((prop::collection::vec(frame, 1..9), -1.0..1.0f64), 1..5)
    }

    proptest! {
        #[test]
        fn gae_matches_oracle(
            segs in arb_buffer(),
            gamma in prop::sample::select(vec![0.9, 0.99, 1.0]),
            lambda in prop::sample::select(vec![0.0, 0.5, 0.95, 1.0]),
        ) {
            let mut b = buffer(&segs);
            compute_gae(&mut b, gamma, lambda);
            let oracle = gae_oracle(&b, gamma, lambda);
            for (a, o) in b.advantages.as_ref().unwrap().iter().zip(&oracle) {
                prop_assert!((a - o).abs() <= 1e-9);
            }
        }

        #[test]
        fn episodes_are_isolated(tail in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8), r in -1.0..1.0f64) {
            // changing anything after a done frame leaves its advantage alone
            let mut first: Vec<_> = vec![(r, 0.1, true)];
            first.extend(tail.iter().map(|&(r, v)| (r, v, false)));
            let mut b = buffer(&[(first, 0.3)]);
            compute_gae(&mut b, 0.99, 0.95);
            prop_assert!((b.advantages.unwrap()[0] - (r - 0.1)).abs() < 1e-12);
        }

        #[test]
        fn normalization_moments(adv in prop::collection::vec(-10.0..10.0f64, 2..64)) {
            let spread = adv.iter().cloned().fold(f64::MIN, f64::max) - adv.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-6);
            let z = normalize_advantages(&adv);
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let std = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() <= 1e-9);
            prop_assert!((std - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn clipping_flattens_the_objective(a in 0.01..5.0f64, r1 in 0.0..3.0f64, r2 in 0.0..3.0f64, eps in 0.05..0.5f64) {
            let hi = |r: f64| 1.0 + eps + r;
            prop_assert_eq!(ppo_surrogate(hi(r1), a, eps), ppo_surrogate(hi(r2), a, eps));
            let lo = |r: f64| (1.0 - eps) * (1.0 - r / 3.0);
            prop_assert_eq!(ppo_surrogate(lo(r1).max(1e-9), -a, eps), ppo_surrogate(lo(r2).max(1e-9), -a, eps));
        }
    }

    #[test]
    fn default_buffer_has_512_frames_and_is_reproducible() {
        let agent = AgentModel::new(EnvKind::DynamicObstacles6x6, small()).unwrap();
        let env = EnvConfig::new(EnvKind::DynamicObstacles6x6, 0);
        let cfg = PpoConfig::default();
        let a = collect_experience(&agent, &env, &cfg, 7).unwrap();
        let b = collect_experience(&agent, &env, &cfg, 7).unwrap();
        assert_eq!(a.len(), 512);
        assert_eq!(a.segments.len(), 4);
        assert_eq!(a, b);
    }

    #[test]
    fn single_frame_buffer() {
        let agent = AgentModel::new(EnvKind::DynamicObstacles6x6, small()).unwrap();
        let env = EnvConfig::new(EnvKind::DynamicObstacles6x6, 0);
        let cfg = PpoConfig {
            num_workers: 1,
            frames_per_worker: 1,
            ..PpoConfig::default()
        };
        let b = collect_experience(&agent, &env, &cfg, 1).unwrap();
        assert_eq!(b.len(), 1);
        let e = &b.entries[0];
        assert_eq!(e.done, e.reward != 0.0);
        assert!(e.state.history.is_empty());
    }

    #[test]
    fn missing_advantages_is_an_error() {
        let mut agent = AgentModel::new(EnvKind::DynamicObstacles6x6, small()).unwrap();
        let mut opt = PpoOptimizer::new(&agent, 1e-5);
        let b = buffer(&[(vec![(0.0, 0.0, true)], 0.0)]);
        assert_eq!(
            ppo_update(&mut agent, &mut opt, &b, &PpoConfig::default(), 0),
            Err(PpoError::MissingAdvantages)
        );
    }

    fn collected(agent: &AgentModel) -> ExperienceBuffer {
        let env = EnvConfig::new(EnvKind::DynamicObstacles6x6, 0);
        let cfg = PpoConfig {
            frames_per_worker: 16,
            ..PpoConfig::default()
        };
        let mut b = collect_experience(agent, &env, &cfg, 3).unwrap();
        compute_gae(&mut b, 0.99, 0.95);
        b
    }

    #[test]
    fn update_is_reproducible_and_reports_sane_stats() {
        let agent = AgentModel::new(EnvKind::DynamicObstacles6x6, small()).unwrap();
        let b = collected(&agent);
        let run = || {
            let mut a = agent.clone();
            let mut opt = PpoOptimizer::new(&a, 1e-3);
            let s = ppo_update(&mut a, &mut opt, &b, &PpoConfig::default(), 11).unwrap();
            (a, s)
        };
        let (a1, s1) = run();
        let (a2, s2) = run();
        assert_eq!(a1, a2);
        assert_eq!(s1, s2);
        assert!((0.0..=1.0).contains(&s1.clip_fraction));
        assert_eq!(s1.minibatches, 4 * 2);
        assert_ne!(a1.core_params, agent.core_params);
        assert_ne!(a1.value_params, agent.value_params);
    }

    #[test]
    fn zero_advantage_exact_values_moves_only_by_entropy() {
        let agent = AgentModel::new(EnvKind::DynamicObstacles6x6, small()).unwrap();
        let mut b = collected(&agent);
        let n = b.len();
        b.advantages = Some(vec![0.0; n]);
        b.returns_to_go = Some(b.entries.iter().map(|e| e.value).collect());
        let cfg = PpoConfig {
            epochs: 1,
            batch_size: n,
            entropy_coeff: 0.0,
            ..PpoConfig::default()
        };
        let mut a = agent.clone();
        let mut opt = PpoOptimizer::new(&a, 1e-3);
        ppo_update(&mut a, &mut opt, &b, &cfg, 0).unwrap();
        assert_eq!(a, agent);
        let with_entropy = PpoConfig {
            entropy_coeff: 0.01,
            ..cfg
        };
        let mut opt = PpoOptimizer::new(&a, 1e-3);
        ppo_update(&mut a, &mut opt, &b, &with_entropy, 0).unwrap();
        assert_ne!(a.core_params, agent.core_params);
        assert_eq!(a.value_params, agent.value_params);
    }

    #[test]
    fn greedy_play_is_deterministic() {
        let agent = AgentModel::new(EnvKind::DynamicObstacles6x6, small()).unwrap();
        let env = EnvConfig::new(EnvKind::DynamicObstacles6x6, 0);
        let seeds = [1000, 1001, 1002];
        let a = play_greedy(&agent, &env, &seeds, 2).unwrap();
        assert_eq!(a, play_greedy(&agent, &env, &seeds, 2).unwrap());
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|r| r.steps >= 1 && r.steps <= 144));
    }
}
