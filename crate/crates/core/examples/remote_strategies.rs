//! Ask a real chat-completion endpoint for an initial strategy list. Reads
//! the key from OPENAI_API_KEY; the base URL and model can be overridden
//! with LLM_BASE_URL and LLM_MODEL.

use dystil::dystil::induce_initial;
use dystil::gridworld::{EnvConfig, EnvKind};
use dystil::llm_client::{LlmClient, LlmEndpoint, PromptTemplates};
use dystil::strategy::format_for_prompt;
use dystil::trajectory::record_demonstrations;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut endpoint = LlmEndpoint::default();
    if let Ok(url) = std::env::var("LLM_BASE_URL") {
        endpoint.base_url = url;
    }
    if let Ok(model) = std::env::var("LLM_MODEL") {
        endpoint.model_name = model;
    }
    let mut client = match LlmClient::new(endpoint) {
        Ok(c) => c,
        Err(e) => {
            println!("not querying: {e}");
            return Ok(());
        }
    };
    let env = EnvConfig::new(EnvKind::DynamicObstacles6x6, 0);
    let demos = record_demonstrations(&env, 5)?;
    match induce_initial(&PromptTemplates::default(), &env, &demos, &mut client) {
        Ok((_, list)) => println!("{}", format_for_prompt(&list)),
        Err(e) => println!("induction failed: {e}"),
    }
    Ok(())
}
