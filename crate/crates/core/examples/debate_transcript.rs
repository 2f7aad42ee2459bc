//! One debate, round by round, then its transcript as a JSON line.

use acemad::agents::ScenarioSpec;
use acemad::engine::ProtocolConfig;
use acemad::{generate_scenario, run_debate, Protocol};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = generate_scenario(&ScenarioSpec::separation())?;
    let mut agents = scenario.agents();
    let cfg = ProtocolConfig::new(Protocol::AceMAD).with_rounds(4);
    let t = run_debate(&mut agents, &scenario.space, &cfg, 0)?;

    let mu = t.mu_series.clone().unwrap_or_default();
    for (r, m) in t.rounds.iter().zip(mu.iter().skip(1)) {
        println!("round {}: mu {m:.4} scores {:.3?}", r.round, r.scores);
        println!("         weights {:.3?}", r.weights_after);
    }
    println!(
        "decision {} ({})",
        t.answer_space.labels()[t.final_decision],
        if t.correct() == Some(true) { "correct" } else { "wrong" }
    );
    println!("{}", t.to_line()?);
    Ok(())
}
