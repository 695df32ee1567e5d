//! Roll the planning oracle in every environment and print the first
//! demonstration of each as the policy would read it.

use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::policy::input::render_steps;
use dystil::trajectory::{oracle_rollout, record_demonstrations};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for kind in EnvKind::ALL {
        let config = EnvConfig::new(kind, 0);
        let solved = (0..50)
            .filter_map(|seed| oracle_rollout(&config, seed).transpose())
            .collect::<Result<Vec<_>, _>>()?;
        let mean_len =
            solved.iter().map(|d| d.steps.len()).sum::<usize>() as f64 / solved.len() as f64;
        println!(
            "== {kind}: oracle solved {}/50 layouts, {mean_len:.1} steps on average",
            solved.len()
        );

        let demo = &record_demonstrations(&config, 1)?[0];
        println!("goal: {}  return {:.3}", demo.goal, demo.ret);
        for line in render_steps(&demo.steps).iter().take(8) {
            println!("  {line}");
        }
        if demo.steps.len() > 4 {
            println!("  ... {} more steps", demo.steps.len() - 4);
        }
        println!();
    }
    Ok(())
}
