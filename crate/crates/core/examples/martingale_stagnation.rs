//! Linear averaging never moves the mean belief on the truth.
//!
//! Runs uniform-influence debates at several mixing rates and reports the
//! largest per-round change in the aggregate.

use acemad::agents::ScenarioSpec;
use acemad::analysis::run_trials;
use acemad::engine::ProtocolConfig;
use acemad::Protocol;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ScenarioSpec {
        n_agents: 9,
        n_truth_holders: 1,
        stubbornness_lambda: 0.0,
        ..ScenarioSpec::challenging()
    };
    for alpha in [0.0, 0.3, 0.7, 1.0] {
        let cfg = ProtocolConfig::new(Protocol::StandardMAD).with_rounds(10).with_alpha(alpha);
        let reports = run_trials(&spec, &cfg, 200, 7)?;
        let worst = reports
            .iter()
            .flat_map(|r| r.mu_series.windows(2).map(|w| (w[1] - w[0]).abs()))
            .fold(0.0, f64::max);
        let acc = reports.iter().filter(|r| r.correct).count() as f64 / reports.len() as f64;
        println!("alpha {alpha:.1}: max |step| {worst:.2e}, accuracy {acc:.3}");
    }
    Ok(())
}
