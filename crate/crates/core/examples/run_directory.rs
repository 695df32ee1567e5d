//! Train through the harness into a temporary run directory, then list the
//! files and the learning curve it produced.

use dystil::dystil::{DystilConfig, Mode};
use dystil::harness::{train, EvalConfig, RunConfig, CURVE_CSV};
use dystil::llm_client::{format_mock_script, LlmEndpoint};
use dystil::ppo::PpoConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("dystil-example-run");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir)?;
    let script = dir.join("mock.script");
    std::fs::write(
        &script,
        format_mock_script(&["1. Avoid balls: turn away from them.".to_string()]),
    )?;

    let defaults = RunConfig::default();
    let config = RunConfig {
        out_dir: dir.clone(),
        llm: LlmEndpoint::mock(script),
        dystil: DystilConfig {
            mode: Mode::Static,
            ..defaults.dystil.clone()
        },
        ppo: PpoConfig {
            total_frames: 2048,
            ..defaults.ppo.clone()
        },
        eval: EvalConfig {
            test_episodes: 20,
            ..defaults.eval.clone()
        },
        ..defaults
    };
    let summary = train(&config)?;
    println!(
        "test MR {:.3} SR {:.2}, {} strategy-model call(s)",
        summary.report.mean_return, summary.report.success_rate, summary.llm_calls
    );

    let mut names: Vec<String> = std::fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    names.sort();
    println!("{}: {}", dir.display(), names.join(", "));
    print!("{}", std::fs::read_to_string(dir.join(CURVE_CSV))?);
    Ok(())
}
