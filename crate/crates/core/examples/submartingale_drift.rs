//! Per-round drift of the aggregate under score-weighted aggregation, next
//! to the zero-learning-rate control.

use acemad::agents::ScenarioSpec;
use acemad::analysis::{estimate_drift, run_trials};
use acemad::engine::ProtocolConfig;
use acemad::Protocol;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ScenarioSpec::drift();
    for eta in [0.1, 0.0] {
        let cfg = ProtocolConfig::new(Protocol::AceMAD).with_rounds(5).with_eta(eta);
        println!("eta = {eta}");
        for d in estimate_drift(&run_trials(&spec, &cfg, 5000, 3)?)? {
            println!(
                "  round {}: drift {}  alpha_E*alpha_C {:.4}",
                d.round, d.drift, d.mean_alpha_product
            );
        }
    }
    Ok(())
}
