//! Collect one PPO buffer with an untrained agent, estimate advantages and
//! list the frames the strategy model would be shown.

use dystil::dystil::select_lowest_advantage;
use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::policy::input::render_pseudo_state;
use dystil::policy::{AgentModel, ModelConfig};
use dystil::ppo::{collect_experience, compute_gae, PpoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let agent = AgentModel::new(EnvKind::DynamicObstacles6x6, ModelConfig::default())?;
    let cfg = PpoConfig::default();
    let mut buffer = collect_experience(
        &agent,
        &EnvConfig::new(EnvKind::DynamicObstacles6x6, 0),
        &cfg,
        1,
    )?;
    compute_gae(&mut buffer, cfg.gamma, cfg.gae_lambda);
    let episodes = buffer.entries.iter().filter(|e| e.done).count();
    println!(
        "{} frames from {} workers, {episodes} finished episodes",
        buffer.len(),
        buffer.segments.len()
    );

    for (i, pair) in select_lowest_advantage(&buffer, 3)?.iter().enumerate() {
        println!(
            "\n#{} advantage {:.4}, action `{}`",
            i + 1,
            pair.advantage,
            pair.action
        );
        for line in render_pseudo_state(&pair.state) {
            println!("  {line}");
        }
    }
    Ok(())
}
