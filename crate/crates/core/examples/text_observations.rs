//! Step a Dynamic Obstacles episode by hand and print the text converter's
//! sentences for each egocentric view.

use dystil::gridworld::{Action, EnvConfig, EnvKind};
use dystil::textgen::LanguageEnv;
use dystil::trajectory::EpisodeEnv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut env = LanguageEnv::new(EnvConfig::new(EnvKind::DynamicObstacles6x6, 0));
    let obs = env.reset(7)?;
    println!("goal: {}", obs.goal);
    println!("t=0: {:?}", obs.sentences);
    let plan = [
        Action::MoveForward,
        Action::LeftTurn,
        Action::MoveForward,
        Action::RightTurn,
    ];
    for (t, a) in plan.into_iter().enumerate() {
        let step = env.step(a)?;
        println!("t={} after `{a}`: {:?}", t + 1, step.observation.sentences);
        if step.done() {
            println!("episode over, reward {:.3}", step.reward);
            break;
        }
    }
    Ok(())
}
