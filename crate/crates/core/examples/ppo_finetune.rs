//! Behavioral cloning followed by PPO fine-tuning, with success rates on
//! held-out seeds before and after each stage.

use dystil::bc::{bc_train, BcConfig};
use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::policy::{AgentModel, ModelConfig};
use dystil::ppo::{compute_gae, play_greedy, ppo_update, PpoConfig, PpoOptimizer, Rollout};
use dystil::trajectory::record_demonstrations;

fn success_rate(
    agent: &AgentModel,
    env: &EnvConfig,
    window: usize,
) -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let seeds: Vec<u64> = (3000..3100).collect();
    let r = play_greedy(agent, env, &seeds, window)?;
    let sr = r.iter().filter(|e| e.success).count() as f64 / r.len() as f64;
    let mr = r.iter().map(|e| e.ret).sum::<f64>() / r.len() as f64;
    Ok((sr, mr))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kind: EnvKind = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "dynamic-obstacles-6x6".into())
        .parse()?;
    let env = EnvConfig::new(kind, 0);
    let ppo = PpoConfig::default();
    let mut agent = AgentModel::new(kind, ModelConfig::default())?;
    let (sr, mr) = success_rate(&agent, &env, ppo.history_window)?;
    println!("untrained   SR {:.2}  MR {mr:.3}", sr);

    let demos = record_demonstrations(&env, 5)?;
    bc_train(&mut agent, &demos, &BcConfig::default())?;
    let (sr, mr) = success_rate(&agent, &env, ppo.history_window)?;
    println!("after BC    SR {:.2}  MR {mr:.3}", sr);

    let mut rollout = Rollout::new(&env, ppo.num_workers, ppo.history_window, 42)?;
    let mut opt = PpoOptimizer::new(&agent, ppo.learning_rate);
    let mut frames = 0u64;
    let mut update = 0u64;
    while frames < ppo.total_frames {
        let (mut buffer, stats) = rollout.collect(&agent, ppo.frames_per_worker)?;
        frames += buffer.len() as u64;
        compute_gae(&mut buffer, ppo.gamma, ppo.gae_lambda);
        let s = ppo_update(&mut agent, &mut opt, &buffer, &ppo, update)?;
        update += 1;
        println!(
            "frames {frames:5}  episodes {:3}  train MR {:.3}  pi {:+.4}  v {:.4}  H {:.3}  clip {:.2}",
            stats.episodes,
            stats.mean_return(),
            s.policy_loss,
            s.value_loss,
            s.entropy,
            s.clip_fraction
        );
    }
    let (sr, mr) = success_rate(&agent, &env, ppo.history_window)?;
    println!("after PPO   SR {:.2}  MR {mr:.3}", sr);
    Ok(())
}
