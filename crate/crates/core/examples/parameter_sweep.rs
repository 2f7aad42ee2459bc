//! A small grid over panel size, written as CSV to stdout.

use acemad::agents::ScenarioSpec;
use acemad::analysis::{run_trials, summarize_sweep, write_summaries_csv, SweepKey};
use acemad::engine::ProtocolConfig;
use acemad::Protocol;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut groups = Vec::new();
    for protocol in [Protocol::StandardMAD, Protocol::AceMAD] {
        for n in [2, 5, 10, 20] {
            let spec = ScenarioSpec {
                n_agents: n,
                n_truth_holders: ScenarioSpec::truth_holders_for_fraction(n, 0.2),
                ..ScenarioSpec::challenging()
            };
            let cfg = ProtocolConfig::new(protocol);
            groups.push((SweepKey::new(&spec, &cfg), run_trials(&spec, &cfg, 1000, 9)?));
        }
    }
    write_summaries_csv(&summarize_sweep(&groups), std::io::stdout())?;
    Ok(())
}
