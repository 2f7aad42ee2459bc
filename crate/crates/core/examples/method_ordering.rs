//! Accuracy of the three protocols on the same scenarios, with paired
//! intervals on the differences.

use acemad::agents::ScenarioSpec;
use acemad::analysis::compare_methods;
use acemad::engine::ProtocolConfig;
use acemad::stats::paired_difference;
use acemad::Protocol;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let configs = [
        ProtocolConfig::new(Protocol::AceMAD),
        ProtocolConfig::new(Protocol::StandardMAD),
        ProtocolConfig::new(Protocol::MajorityVote),
    ];
    let results = compare_methods(&ScenarioSpec::challenging(), &configs, 3000, 5)?;
    for r in &results {
        println!("{:>13}: {}", r.protocol.name(), r.accuracy);
    }
    for pair in results.windows(2) {
        let d = paired_difference(&pair[0].outcomes, &pair[1].outcomes);
        println!("{} - {}: {d}", pair[0].protocol.name(), pair[1].protocol.name());
    }
    Ok(())
}
