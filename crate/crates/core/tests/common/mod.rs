#![allow(dead_code)]

use dystil::gridworld::{Action, EnvKind};
use dystil::policy::{AgentModel, ModelConfig, ModelInput, OutputGrad};
use dystil::strategy::{StrategyItem, StrategyList};
use dystil::textgen::TextObservation;
use dystil::trajectory::PseudoState;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SENTENCES: &[&str] = &[
    "You see a wall 1 step forward",
    "You see a wall 2 steps left",
    "You see a blue ball 1 step right and 2 steps forward",
    "You see a green goal 3 steps forward",
    "You see a closed red door 1 step left",
    "You carry a yellow key",
];

pub fn random_state(rng: &mut ChaCha8Rng) -> PseudoState {
    let goal = "get to the green goal square";
    let obs = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(0..3);
        let s = (0..n)
            .map(|_| SENTENCES.choose(rng).unwrap().to_string())
            .collect();
        TextObservation::new(s, goal)
    };
    let history_len = rng.gen_range(0..3);
    let history = (0..history_len)
        .map(|_| {
            let o = obs(rng);
            (
                o,
                *[Action::LeftTurn, Action::RightTurn, Action::MoveForward]
                    .choose(rng)
                    .unwrap(),
            )
        })
        .collect();
    PseudoState {
        history,
        current: obs(rng),
        goal: goal.into(),
    }
}

/// A randomly sized model with random strategies and a random input, drawn
/// from `seed`.
pub fn random_case(seed: u64) -> (AgentModel, ModelInput, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig {
        embed_dim: rng.gen_range(4..12),
        feature_buckets: rng.gen_range(16..128),
        unk_buckets: rng.gen_range(1..8),
        value_hidden: rng.gen_range(3..12),
        embed_mult: rng.gen_range(0.5..5.0),
        sentence_weight: rng.gen_range(0.0..2.0),
        head_mult: rng.gen_range(0.5..5.0),
        head_init_std: rng.gen_range(0.1..1.0),
        seed,
    };
    let mut agent = AgentModel::new(EnvKind::DynamicObstacles6x6, cfg).unwrap();
    // the critic starts from zeroed biases; give them values so their
    // gradients are exercised too
    for x in agent.value_params.iter_mut() {
        *x += rng.gen_range(-0.3..0.3);
    }
    if rng.gen_bool(0.5) {
        agent.memory = StrategyList::new(vec![StrategyItem::new(
            "Avoid balls",
            "Turn away from them.",
        )]);
    }
    let action = rng.gen_range(0..agent.actions.len());
    let input = agent.input_for(&random_state(&mut rng));
    (agent, input, action)
}

fn log_prob(agent: &AgentModel, input: &ModelInput, a: usize) -> f64 {
    agent
        .forward_batch(std::slice::from_ref(input), false)
        .samples[0]
        .dist
        .log_probs[a]
}

fn value(agent: &AgentModel, input: &ModelInput) -> f64 {
    agent
        .forward_batch(std::slice::from_ref(input), true)
        .samples[0]
        .value
        .unwrap()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between backprop and central differences for
/// log pi(a) and V, over a sample of parameter coordinates.
pub fn gradient_check(seed: u64) -> f64 {
    let (agent, input, a) = random_case(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let fwd = agent.forward_batch(std::slice::from_ref(&input), true);
    let p = &fwd.samples[0].dist.probs;

    let mut g_pi_core = vec![0.0; agent.core_params.len()];
    let onehot: Vec<f64> = (0..p.len())
        .map(|k| f64::from(u8::from(k == a)) - p[k])
        .collect();
    agent.backward(
        &fwd,
        &[OutputGrad {
            logits: onehot,
            value: 0.0,
        }],
        &mut g_pi_core,
        None,
    );
    let mut g_v_core = vec![0.0; agent.core_params.len()];
    let mut g_v_value = vec![0.0; agent.value_params.len()];
    agent.backward(
        &fwd,
        &[OutputGrad {
            logits: vec![0.0; p.len()],
            value: 1.0,
        }],
        &mut g_v_core,
        Some(&mut g_v_value),
    );

    let h = 1e-5;
    let pick = |g: &[f64], rng: &mut ChaCha8Rng| -> Vec<usize> {
        let nonzero: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0).collect();
        let mut out: Vec<usize> = nonzero.choose_multiple(rng, 12).copied().collect();
        out.extend((0..3).map(|_| rng.gen_range(0..g.len())));
        out
    };
    let mut worst: f64 = 0.0;
    for i in pick(&g_pi_core, &mut rng) {
        let mut up = agent.clone();
        up.core_params[i] += h;
        let mut dn = agent.clone();
        dn.core_params[i] -= h;
        let num = (log_prob(&up, &input, a) - log_prob(&dn, &input, a)) / (2.0 * h);
        worst = worst.max(rel_err(g_pi_core[i], num));
    }
    for i in pick(&g_v_core, &mut rng) {
        let mut up = agent.clone();
        up.core_params[i] += h;
        let mut dn = agent.clone();
        dn.core_params[i] -= h;
        let num = (value(&up, &input) - value(&dn, &input)) / (2.0 * h);
        worst = worst.max(rel_err(g_v_core[i], num));
    }
    for i in pick(&g_v_value, &mut rng) {
        let mut up = agent.clone();
        up.value_params[i] += h;
        let mut dn = agent.clone();
        dn.value_params[i] -= h;
        let num = (value(&up, &input) - value(&dn, &input)) / (2.0 * h);
        worst = worst.max(rel_err(g_v_value[i], num));
    }
    worst
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Compares `actual` with a checked-in file. With `DYSTIL_BLESS=1` the file
/// is rewritten instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = fixture_path(name);
    if std::env::var_os("DYSTIL_BLESS").is_some() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(a, b)| a != b)
        .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
    Err(format!("{name} differs from the fixture at {line}"))
}

/// The two Dynamic Obstacles prompts pinned by the golden files: two oracle
/// demonstrations, the initial fixture list and three hand-picked
/// state-action pairs.
pub fn golden_prompts() -> (String, String) {
    use dystil::gridworld::EnvConfig;
    use dystil::llm_client::{build_dynamic_prompt, build_initial_prompt, WorstPair};
    use dystil::strategy::parse_strategy_list;
    use dystil::trajectory::record_demonstrations;

    let kind = EnvKind::DynamicObstacles6x6;
    let demos = record_demonstrations(&EnvConfig::new(kind, 0), 2).unwrap();
    let initial = build_initial_prompt(kind, &demos).unwrap();
    let current = parse_strategy_list(&fixture("initial_strategies.txt")).unwrap();
    let states = demos[1].pseudo_states(2);
    let worst: Vec<WorstPair> = [(4, -0.8125), (6, -0.5), (1, -0.0625)]
        .into_iter()
        .map(|(i, adv)| {
            let (state, action) = states[i].clone();
            WorstPair {
                state,
                action,
                advantage: adv,
            }
        })
        .collect();
    let dynamic = build_dynamic_prompt(kind, &demos, &current, &worst).unwrap();
    (initial, dynamic)
}
