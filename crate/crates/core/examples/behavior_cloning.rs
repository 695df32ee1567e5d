//! Clone the oracle on five demonstrations and report imitation accuracy.

use dystil::bc::{argmax_accuracy, bc_train, demo_pairs, BcConfig};
use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::policy::{AgentModel, ModelConfig};
use dystil::trajectory::record_demonstrations;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kind: EnvKind = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "dynamic-obstacles-6x6".into())
        .parse()?;
    let demos = record_demonstrations(&EnvConfig::new(kind, 0), 5)?;
    let cfg = BcConfig::default();
    let pairs = demo_pairs(&demos, cfg.history_window);
    let mut agent = AgentModel::new(kind, ModelConfig::default())?;
    println!(
        "{} demo steps, accuracy before: {:.3}",
        pairs.len(),
        argmax_accuracy(&agent, &pairs)
    );
    let t = std::time::Instant::now();
    let report = bc_train(&mut agent, &demos, &cfg)?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:2}  loss {l:.4}", i + 1);
    }
    println!(
        "accuracy after {} steps: {:.3} ({:.1?})",
        report.steps,
        report.final_accuracy,
        t.elapsed()
    );
    Ok(())
}
