//! A short strategy-revision run against a scripted strategy model. Each
//! epoch shows both candidates' returns and whether the revision was kept.

use dystil::dystil::{run, DystilConfig, Mode, PipelineConfig};
use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::llm_client::LlmClient;
use dystil::ppo::PpoConfig;
use dystil::trajectory::record_demonstrations;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = EnvConfig::new(EnvKind::DynamicObstacles6x6, 0);
    let demos = record_demonstrations(&env, 5)?;
    let replies = vec![
        "1. Avoid balls: turn when a ball is 1 step forward.\n2. Reach the goal: move forward when it is ahead.".to_string(),
        "1. Avoid balls: turn when a ball is 1 or 2 steps forward.\n2. Reach the goal: move forward when it is ahead.\n3. Walls: turn before a wall.".to_string(),
        "this reply has no list in it".to_string(),
        "1. Go forward: always.".to_string(),
    ];
    let mut client = LlmClient::scripted(replies);
    let config = PipelineConfig {
        ppo: PpoConfig::default(),
        dystil: DystilConfig {
            n_epochs: Some(3),
            mode: Mode::Dystil,
            ..DystilConfig::default()
        },
        ..PipelineConfig::default()
    };
    let out = run(&env, &demos, &mut client, &config)?;
    println!("BC accuracy {:.3}", out.bc.final_accuracy);
    for r in &out.records {
        let fmt = |x: Option<f64>| x.map_or("-".into(), |v| format!("{v:+.3}"));
        println!(
            "epoch {}  R1 {}  R2 {}  accepted {}  version {}{}",
            r.epoch,
            fmt(r.r1),
            fmt(r.r2),
            r.accepted,
            r.strategy_version,
            r.llm_error
                .as_deref()
                .map(|e| format!("  ({e})"))
                .unwrap_or_default()
        );
    }
    println!("{} strategy-model calls", client.call_count());
    Ok(())
}
