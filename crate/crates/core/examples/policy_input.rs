//! Assemble one policy input with strategies in memory and show the
//! resulting action distribution and value estimate.

use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::policy::{AgentModel, ModelConfig};
use dystil::strategy::{StrategyItem, StrategyList};
use dystil::trajectory::record_demonstrations;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demos = record_demonstrations(&EnvConfig::new(EnvKind::DynamicObstacles6x6, 0), 1)?;
    let mut agent = AgentModel::new(EnvKind::DynamicObstacles6x6, ModelConfig::default())?;
    agent.memory = StrategyList::new(vec![
        StrategyItem::new("Avoid obstacles", "Turn when a ball is 1 step forward."),
        StrategyItem::new(
            "Go for the goal",
            "Move forward when the goal is straight ahead.",
        ),
    ]);
    let (state, expert) = demos[0].pseudo_states(2).swap_remove(3);
    let input = agent.input_for(&state);
    println!("{}\n", input.text);

    let fwd = agent.forward_batch(std::slice::from_ref(&input), true);
    let s = &fwd.samples[0];
    for (a, p) in agent.actions.iter().zip(&s.dist.probs) {
        println!("{:>14}  {p:.4}", a.name());
    }
    println!(
        "value {:.4}, entropy {:.4}, expert chose `{expert}`",
        s.value.unwrap(),
        s.dist.entropy()
    );
    Ok(())
}
