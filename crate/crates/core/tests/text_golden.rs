mod common;

use common::check_golden;
use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::textgen::LanguageEnv;
use dystil::trajectory::{record_demonstrations, EpisodeEnv};

/// First observations and the start of one oracle episode for every
/// environment, as the text converter renders them.
fn transcript() -> String {
    let mut out = String::new();
    for kind in EnvKind::ALL {
        out.push_str(&format!("# {kind}\n"));
        let mut env = LanguageEnv::new(EnvConfig::new(kind, 0));
        for seed in 0..3 {
            let obs = env.reset(seed).unwrap();
            out.push_str(&format!(
                "seed {seed}: {} | {}\n",
                obs.goal,
                obs.sentences.join("; ")
            ));
        }
        let demo = &record_demonstrations(&EnvConfig::new(kind, 0), 1).unwrap()[0];
        for (obs, action) in demo.steps.iter().take(6) {
            out.push_str(&format!("  {} -> {action}\n", obs.sentences.join("; ")));
        }
    }
    out
}

#[test]
fn text_observations_match_golden() {
    check_golden("text_observations.txt", &transcript()).unwrap();
}
