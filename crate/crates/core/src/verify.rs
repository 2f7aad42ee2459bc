//! Property suites with three-valued verdicts.
//!
//! A statistical check passes only when its interval lies on the claimed
//! side of zero. An interval that straddles zero is INCONCLUSIVE, and one on
//! the wrong side is FAIL.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::agents::ScenarioSpec;
use crate::analysis::{
    blackwell_risk_check, convergence_check, estimate_drift, run_trials, score_separation,
    AnalysisError,
};
use crate::engine::ProtocolConfig;
use crate::stats::{welch_difference, Estimate};
use crate::types::Protocol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Verdict for the claim "the quantity is positive".
    /// A single sample has no spread to judge, so it never decides.
    pub fn positive(e: &Estimate) -> Self {
        if e.n < 2 {
            Verdict::Inconclusive
        } else if e.lo > 0.0 {
            Verdict::Pass
        } else if e.hi < 0.0 {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<12} {}/{}: {}", self.verdict, self.suite, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Martingale,
    Separation,
    Drift,
    Blackwell,
    Convergence,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Martingale,
        Suite::Separation,
        Suite::Drift,
        Suite::Blackwell,
        Suite::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Martingale => "martingale",
            Suite::Separation => "separation",
            Suite::Drift => "drift",
            Suite::Blackwell => "blackwell",
            Suite::Convergence => "convergence",
        }
    }

    pub fn run(self, trials: usize, seed: u64) -> Result<Vec<Check>, AnalysisError> {
        match self {
            Suite::Martingale => martingale(trials, seed),
            Suite::Separation => separation(trials, seed),
            Suite::Drift => drift(trials, seed),
            Suite::Blackwell => blackwell(trials, seed),
            Suite::Convergence => convergence(trials, seed),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

fn check(suite: Suite, name: &str, verdict: Verdict, detail: String) -> Check {
    Check {
        suite,
        name: name.to_string(),
        verdict,
        detail,
    }
}

fn ace(rounds: usize, eta: f64) -> ProtocolConfig {
    ProtocolConfig::new(Protocol::AceMAD)
        .with_rounds(rounds)
        .with_eta(eta)
}

/// Largest `|mu_{t+1} - mu_t|` of linear debates with uniform influence.
pub fn martingale_max_step(
    alphas: &[f64],
    sizes: &[usize],
    rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    let mut worst = 0.0f64;
    for &n in sizes {
        let spec = ScenarioSpec {
            n_agents: n,
            n_truth_holders: ScenarioSpec::truth_holders_for_fraction(n, 0.2),
            stubbornness_lambda: 0.0,
            ..ScenarioSpec::challenging()
        };
        for &alpha in alphas {
            let cfg = ProtocolConfig::new(Protocol::StandardMAD)
                .with_rounds(rounds)
                .with_alpha(alpha);
            for r in run_trials(&spec, &cfg, trials, seed)? {
                for w in r.mu_series.windows(2) {
                    worst = worst.max((w[1] - w[0]).abs());
                }
            }
        }
    }
    Ok(worst)
}

pub fn martingale(trials: usize, seed: u64) -> Result<Vec<Check>, AnalysisError> {
    let worst = martingale_max_step(&[0.0, 0.3, 1.0], &[2, 5, 9], 10, trials, seed)?;
    Ok(vec![check(
        Suite::Martingale,
        "max_step",
        Verdict::from_bool(worst <= 1e-12),
        format!("max |mu_(t+1) - mu_t| = {worst:.3e} (limit 1e-12)"),
    )])
}

pub fn separation(trials: usize, seed: u64) -> Result<Vec<Check>, AnalysisError> {
    let cfg = ace(3, 2.0);
    let spec = ScenarioSpec::separation();
    let gap = score_separation(&run_trials(&spec, &cfg, trials, seed)?, &spec.truth_holder_indices())?;

    let exact_spec = ScenarioSpec::static_noiseless();
    let exact = score_separation(
        &run_trials(&exact_spec, &cfg, trials.min(100), seed)?,
        &exact_spec.truth_holder_indices(),
    )?;
    let exact_ok = (exact.mean - 0.08).abs() <= 1e-12 && exact.width() <= 1e-12;

    let mixed = |mix: f64| -> Result<Vec<f64>, AnalysisError> {
        let spec = ScenarioSpec {
            truth_holder_mix: mix,
            ..ScenarioSpec::separation()
        };
        let th = spec.truth_holder_indices();
        Ok(run_trials(&spec, &cfg, trials, seed)?
            .iter()
            .filter_map(|r| r.score_gap(&th))
            .collect())
    };
    let mix_gap = welch_difference(&mixed(1.0)?, &mixed(0.0)?);

    Ok(vec![
        check(Suite::Separation, "gap_positive", Verdict::positive(&gap), format!("gap {gap}")),
        check(
            Suite::Separation,
            "noiseless_gap",
            Verdict::from_bool(exact_ok),
            format!("gap {exact} (expected 0.08 exactly)"),
        ),
        check(
            Suite::Separation,
            "model_beats_no_model",
            Verdict::positive(&mix_gap),
            format!("gap(mix=1) - gap(mix=0) = {mix_gap}"),
        ),
    ])
}

/// Rounds whose trial-averaged `alpha_E * alpha_C` falls below this are
/// reported but not asserted; the drift bound vanishes there.
pub const DRIFT_ALPHA_FLOOR: f64 = 0.01;

/// Rounding slack for quantities that vanish in exact arithmetic.
pub const FLOAT_SLACK: f64 = 1e-12;

pub fn drift(trials: usize, seed: u64) -> Result<Vec<Check>, AnalysisError> {
    let spec = ScenarioSpec::drift();
    let mut out = Vec::new();
    for d in estimate_drift(&run_trials(&spec, &ace(5, 0.1), trials, seed)?)? {
        let asserted = d.mean_alpha_product >= DRIFT_ALPHA_FLOOR;
        let verdict = if asserted { Verdict::positive(&d.drift) } else { Verdict::Pass };
        out.push(check(
            Suite::Drift,
            &format!("round_{}", d.round),
            verdict,
            format!(
                "drift {} alpha_E*alpha_C {:.4}{}",
                d.drift,
                d.mean_alpha_product,
                if asserted { "" } else { " (not asserted)" }
            ),
        ));
    }
    let control = estimate_drift(&run_trials(&spec, &ace(5, 0.0), trials, seed)?)?;
    let worst = control
        .iter()
        .find(|d| !d.drift.contains_within(0.0, FLOAT_SLACK))
        .or(control.first())
        .expect("five rounds");
    out.push(check(
        Suite::Drift,
        "eta_zero_control",
        Verdict::from_bool(control.iter().all(|d| d.drift.contains_within(0.0, FLOAT_SLACK))),
        format!("round {} drift {:.3e} [{:.3e}, {:.3e}]", worst.round, worst.drift.mean, worst.drift.lo, worst.drift.hi),
    ));
    Ok(out)
}

pub fn blackwell(trials: usize, seed: u64) -> Result<Vec<Check>, AnalysisError> {
    let cfg = ace(3, 2.0);
    let main = blackwell_risk_check(&ScenarioSpec::separation(), &cfg, trials, seed)?;
    let null_spec = ScenarioSpec {
        n_truth_holders: 0,
        ..ScenarioSpec::separation()
    };
    let null = blackwell_risk_check(&null_spec, &cfg, trials, seed)?;
    Ok(vec![
        check(
            Suite::Blackwell,
            "informative_beats_standard",
            Verdict::positive(&main.gap),
            format!(
                "risk_info {} risk_std {} gap {}",
                main.risk_info, main.risk_std, main.gap
            ),
        ),
        check(
            Suite::Blackwell,
            "null_overlaps",
            Verdict::from_bool(null.risk_info.overlaps(&null.risk_std)),
            format!("risk_info {} risk_std {}", null.risk_info, null.risk_std),
        ),
    ])
}

pub fn convergence(trials: usize, seed: u64) -> Result<Vec<Check>, AnalysisError> {
    let spec = ScenarioSpec::static_noiseless();
    let n = trials.clamp(1, 100);
    let long = run_trials(&spec, &ace(50, 2.0), n, seed)?;
    let mut worst = 0.0f64;
    for r in &long {
        for (t, a) in r.truth_holder_share_series.iter().enumerate() {
            let closed = 1.0 / (1.0 + 4.0 * (-0.16 * t as f64).exp());
            worst = worst.max((a - closed).abs());
        }
    }
    let frac_long = convergence_check(&long, 0.99);
    let frac_short = convergence_check(&run_trials(&spec, &ace(1, 2.0), n, seed)?, 0.99);
    let frac_flat = convergence_check(&run_trials(&spec, &ace(50, 0.0), n, seed)?, 0.99);
    Ok(vec![
        check(
            Suite::Convergence,
            "closed_form",
            Verdict::from_bool(worst <= 1e-9),
            format!("max |alpha_E - 1/(1+4e^(-0.16t))| = {worst:.3e} over t <= 50"),
        ),
        check(
            Suite::Convergence,
            "reaches_0.99",
            Verdict::from_bool(frac_long == 1.0),
            format!("fraction {frac_long} at T=50"),
        ),
        check(
            Suite::Convergence,
            "short_horizon",
            Verdict::from_bool(frac_short == 0.0),
            format!("fraction {frac_short} at T=1"),
        ),
        check(
            Suite::Convergence,
            "eta_zero",
            Verdict::from_bool(frac_flat == 0.0),
            format!("fraction {frac_flat} with eta=0"),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        let e = |lo, hi| Estimate { mean: (lo + hi) / 2.0, lo, hi, n: 10 };
        assert_eq!(Verdict::positive(&e(0.1, 0.2)), Verdict::Pass);
        assert_eq!(Verdict::positive(&e(-0.1, 0.2)), Verdict::Inconclusive);
        assert_eq!(Verdict::positive(&e(-0.3, -0.2)), Verdict::Fail);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn exact_suites_pass_quickly() {
        for s in [Suite::Martingale, Suite::Convergence] {
            for c in s.run(10, 1).unwrap() {
                assert_eq!(c.verdict, Verdict::Pass, "{c}");
            }
        }
    }
}
