//! A chat-model debate replayed from the recorded fixture, with no network.
//!
//! Point `ClientMode::Live` at an OpenAI-compatible endpoint to run it for
//! real; `Record` does the same and appends every exchange to the fixture.

use std::path::Path;
use std::sync::Arc;

use acemad::engine::ProtocolConfig;
use acemad::llm::{heterogeneous_mix, llm_agents, read_questions, ChatClient, ClientConfig, ClientMode};
use acemad::{run_debate, Protocol};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let question = read_questions(&fixtures.join("questions.jsonl"))?.remove(0);
    let space = question.answer_space()?;
    let client = ChatClient::new(
        ClientConfig::new("http://replay.invalid", "mock-model"),
        ClientMode::Replay,
        Some(&fixtures.join("debate_replay.jsonl")),
    )?;
    let mut agents = llm_agents(&question, &heterogeneous_mix(5), Arc::new(client));
    let t = run_debate(&mut agents, &space, &ProtocolConfig::new(Protocol::AceMAD), 0)?;

    println!("{}", question.question);
    for r in &t.rounds {
        println!("round {}: weights {:.3?}", r.round, r.weights_after);
        if let Some(arg) = r.arguments.last() {
            println!("  skeptic: {arg}");
        }
    }
    println!("decision: {}", space.labels()[t.final_decision]);
    Ok(())
}
