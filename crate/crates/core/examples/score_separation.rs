//! Truth-holders outscore the crowd, with a 95% interval on the gap.

use acemad::agents::ScenarioSpec;
use acemad::analysis::{run_trials, score_separation};
use acemad::engine::ProtocolConfig;
use acemad::Protocol;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ProtocolConfig::new(Protocol::AceMAD);
    for (name, spec) in [
        ("noiseless", ScenarioSpec::static_noiseless()),
        ("jittered", ScenarioSpec::separation()),
        ("no peer model", ScenarioSpec { truth_holder_mix: 0.0, ..ScenarioSpec::separation() }),
    ] {
        let reports = run_trials(&spec, &cfg, 2000, 1)?;
        let gap = score_separation(&reports, &spec.truth_holder_indices())?;
        println!("{name:>14}: gap {gap}");
    }
    Ok(())
}
