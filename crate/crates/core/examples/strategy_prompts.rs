//! Print the induction prompt and a revision prompt for Dynamic Obstacles.

use dystil::dystil::select_lowest_advantage;
use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::llm_client::{build_dynamic_prompt, build_initial_prompt};
use dystil::policy::{AgentModel, ModelConfig};
use dystil::ppo::{collect_experience, compute_gae, PpoConfig};
use dystil::strategy::parse_strategy_list;
use dystil::trajectory::record_demonstrations;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kind = EnvKind::DynamicObstacles6x6;
    let env = EnvConfig::new(kind, 0);
    let demos = record_demonstrations(&env, 2)?;
    println!("{}\n", build_initial_prompt(kind, &demos)?);
    println!("{}\n", "-".repeat(72));

    let agent = AgentModel::new(kind, ModelConfig::default())?;
    let cfg = PpoConfig {
        frames_per_worker: 16,
        ..PpoConfig::default()
    };
    let mut buffer = collect_experience(&agent, &env, &cfg, 0)?;
    compute_gae(&mut buffer, cfg.gamma, cfg.gae_lambda);
    let worst = select_lowest_advantage(&buffer, 3)?;
    let current = parse_strategy_list("1. Avoid balls: turn when one is 1 step forward")?;
    println!("{}", build_dynamic_prompt(kind, &demos, &current, &worst)?);
    Ok(())
}
