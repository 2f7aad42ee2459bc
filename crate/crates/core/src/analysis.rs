//! Monte Carlo estimators over many seeded debates.
//!
//! Trials run in parallel. Each trial derives its own seed from the base seed
//! and its index, and results are collected in index order, so every estimate
//! is independent of worker count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Scenario, ScenarioError, ScenarioGenerator, ScenarioSpec};
use crate::dynamics::majority_vote;
use crate::engine::{run_debate, EngineError, ProtocolConfig};
use crate::scoring::ScoreVector;
use crate::stats::{mean_interval, paired_difference, trial_seed, wilson_interval, Estimate, Moments};
use crate::types::{argmax_lowest, project_to_standard, Protocol, Transcript};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("reports do not share protocol and round count")]
    MixedShapes,
    #[error("nothing to estimate: {0}")]
    EmptyInput(&'static str),
    #[error("agent index {0} out of range")]
    BadIndex(usize),
    #[error("transcript has no known truth")]
    NoTruth,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The per-trial quantities every estimator works from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub scenario_seed: u64,
    pub protocol: Protocol,
    /// Length `T + 1`.
    pub mu_series: Vec<f64>,
    pub per_round_scores: Vec<ScoreVector>,
    pub final_weights: Vec<f64>,
    pub decision: usize,
    pub correct: bool,
    /// Total truth-holder weight, starting with the uniform initial share.
    pub truth_holder_share_series: Vec<f64>,
    pub truth_holders: Vec<usize>,
}

impl TrialReport {
    pub fn from_transcript(
        scenario_seed: u64,
        transcript: &Transcript,
        truth_holders: &[usize],
    ) -> Result<Self, AnalysisError> {
        let mu_series = transcript.mu_series.clone().ok_or(AnalysisError::NoTruth)?;
        let correct = transcript.correct().ok_or(AnalysisError::NoTruth)?;
        let n = transcript
            .rounds
            .first()
            .map(|r| r.n_agents())
            .unwrap_or(0);
        let share = |w: &[f64]| truth_holders.iter().map(|&i| w[i]).sum::<f64>();
        let mut shares = Vec::with_capacity(transcript.rounds.len() + 1);
        if n > 0 {
            shares.push(truth_holders.len() as f64 / n as f64);
        }
        shares.extend(transcript.rounds.iter().map(|r| share(&r.weights_after)));
        Ok(Self {
            scenario_seed,
            protocol: transcript.protocol,
            mu_series,
            per_round_scores: transcript
                .rounds
                .iter()
                .map(|r| ScoreVector {
                    round: r.round,
                    scores: r.scores.clone(),
                })
                .collect(),
            final_weights: transcript
                .rounds
                .last()
                .map(|r| r.weights_after.clone())
                .unwrap_or_default(),
            decision: transcript.final_decision,
            correct,
            truth_holder_share_series: shares,
            truth_holders: truth_holders.to_vec(),
        })
    }

    pub fn rounds(&self) -> usize {
        self.mu_series.len().saturating_sub(1)
    }

    /// Mean truth-holder score minus mean crowd score, averaged over rounds.
    pub fn score_gap(&self, truth_holders: &[usize]) -> Option<f64> {
        let n = self.per_round_scores.first()?.len();
        let crowd: Vec<usize> = (0..n).filter(|i| !truth_holders.contains(i)).collect();
        if truth_holders.is_empty() || crowd.is_empty() {
            return None;
        }
        let mean = |s: &[f64], idx: &[usize]| idx.iter().map(|&i| s[i]).sum::<f64>() / idx.len() as f64;
        let total: f64 = self
            .per_round_scores
            .iter()
            .map(|sv| mean(&sv.scores, truth_holders) - mean(&sv.scores, &crowd))
            .sum();
        Some(total / self.per_round_scores.len() as f64)
    }
}

/// Runs `n_trials` debates of `config` on fresh instances of `spec` and maps
/// each finished transcript through `f`. Results are in trial order.
pub fn run_trials_with<T, F>(
    spec: &ScenarioSpec,
    config: &ProtocolConfig,
    n_trials: usize,
    base_seed: u64,
    f: F,
) -> Result<Vec<T>, AnalysisError>
where
    T: Send,
    F: Fn(&Scenario, Transcript) -> Result<T, AnalysisError> + Sync,
{
    let generator = ScenarioGenerator::new(spec.clone())?;
    (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(base_seed, i as u64);
            let scenario = generator.instance(seed);
            let mut agents = scenario.agents();
            let transcript = run_debate(&mut agents, &scenario.space, config, seed)?;
            f(&scenario, transcript)
        })
        .collect()
}

pub fn run_trials(
    spec: &ScenarioSpec,
    config: &ProtocolConfig,
    n_trials: usize,
    base_seed: u64,
) -> Result<Vec<TrialReport>, AnalysisError> {
    run_trials_with(spec, config, n_trials, base_seed, |s, t| {
        TrialReport::from_transcript(s.spec.seed, &t, &s.truth_holders())
    })
}

fn check_shapes(reports: &[TrialReport]) -> Result<(), AnalysisError> {
    let first = reports.first().ok_or(AnalysisError::EmptyInput("no reports"))?;
    if reports
        .iter()
        .any(|r| r.protocol != first.protocol || r.mu_series.len() != first.mu_series.len())
    {
        return Err(AnalysisError::MixedShapes);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    /// The step from `mu_{round-1}` to `mu_round`.
    pub round: usize,
    pub drift: Estimate,
    /// Trial average of `alpha_E * (1 - alpha_E)` entering the step.
    pub mean_alpha_product: f64,
}

/// Per-round mean of `mu_{t+1} - mu_t` across trials.
pub fn estimate_drift(reports: &[TrialReport]) -> Result<Vec<DriftEstimate>, AnalysisError> {
    check_shapes(reports)?;
    let rounds = reports[0].rounds();
    let n = reports.len() as f64;
    Ok((0..rounds)
        .map(|t| {
            let diffs: Vec<f64> = reports
                .iter()
                .map(|r| r.mu_series[t + 1] - r.mu_series[t])
                .collect();
            let alpha = reports
                .iter()
                .map(|r| {
                    let a = r.truth_holder_share_series.get(t).copied().unwrap_or(0.0);
                    a * (1.0 - a)
                })
                .sum::<f64>()
                / n;
            DriftEstimate {
                round: t + 1,
                drift: mean_interval(&diffs),
                mean_alpha_product: alpha,
            }
        })
        .collect())
}

/// Truth-holder minus crowd score, over trials and rounds.
pub fn score_separation(
    reports: &[TrialReport],
    truth_holder_indices: &[usize],
) -> Result<Estimate, AnalysisError> {
    let mut gaps = Vec::with_capacity(reports.len());
    for r in reports {
        let n = r.per_round_scores.first().map(|s| s.len()).unwrap_or(0);
        if let Some(&bad) = truth_holder_indices.iter().find(|&&i| i >= n.max(1)) {
            return Err(AnalysisError::BadIndex(bad));
        }
        gaps.push(
            r.score_gap(truth_holder_indices)
                .ok_or(AnalysisError::EmptyInput("need scored rounds, truth-holders and crowd"))?,
        );
    }
    if gaps.is_empty() {
        return Err(AnalysisError::EmptyInput("no reports"));
    }
    Ok(mean_interval(&gaps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackwellResult {
    /// Error rate of following the top-scoring agent.
    pub risk_info: Estimate,
    /// Error rate of majority vote over final beliefs.
    pub risk_std: Estimate,
    /// Paired `risk_std - risk_info`.
    pub gap: Estimate,
}

/// Compares the decision risk of a policy that sees scores with the best
/// policy we instantiate from the score-free projection of the same debates.
pub fn blackwell_risk_check(
    spec: &ScenarioSpec,
    config: &ProtocolConfig,
    n_trials: usize,
    base_seed: u64,
) -> Result<BlackwellResult, AnalysisError> {
    let outcomes = run_trials_with(spec, config, n_trials, base_seed, |s, t| {
        let truth = s.space.truth_index().ok_or(AnalysisError::NoTruth)?;
        let last = t.rounds.last().ok_or(AnalysisError::EmptyInput("debate has no rounds"))?;
        let n = last.n_agents();
        let cumulative: Vec<f64> = (0..n)
            .map(|i| t.rounds.iter().map(|r| r.scores[i]).sum())
            .collect();
        let leader = argmax_lowest(&cumulative);
        let info_wrong = last.self_beliefs[leader].argmax() != truth;
        let std_view = project_to_standard(last);
        let std_wrong = majority_vote(&std_view.self_beliefs) != truth;
        Ok((info_wrong as u8 as f64, std_wrong as u8 as f64))
    })?;
    if outcomes.is_empty() {
        return Err(AnalysisError::EmptyInput("no trials"));
    }
    let info: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let std: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    let count = |v: &[f64]| v.iter().filter(|&&x| x > 0.5).count() as u64;
    let n = outcomes.len() as u64;
    Ok(BlackwellResult {
        risk_info: wilson_interval(count(&info), n),
        risk_std: wilson_interval(count(&std), n),
        gap: paired_difference(&std, &info),
    })
}

/// Fraction of trials whose final truth-holder share reaches `threshold`.
pub fn convergence_check(reports: &[TrialReport], threshold: f64) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    let hits = reports
        .iter()
        .filter(|r| r.truth_holder_share_series.last().is_some_and(|&a| a >= threshold))
        .count();
    hits as f64 / reports.len() as f64
}

/// Accuracy of several protocols on the same scenario seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub protocol: Protocol,
    pub accuracy: Estimate,
    /// 1.0 for a correct trial, 0.0 otherwise, in trial order.
    pub outcomes: Vec<f64>,
}

pub fn compare_methods(
    spec: &ScenarioSpec,
    configs: &[ProtocolConfig],
    n_trials: usize,
    base_seed: u64,
) -> Result<Vec<MethodResult>, AnalysisError> {
    configs
        .iter()
        .map(|cfg| {
            let outcomes = run_trials_with(spec, cfg, n_trials, base_seed, |_, t| {
                Ok(t.correct().ok_or(AnalysisError::NoTruth)? as u8 as f64)
            })?;
            let hits = outcomes.iter().filter(|&&x| x > 0.5).count() as u64;
            Ok(MethodResult {
                protocol: cfg.protocol,
                accuracy: wilson_interval(hits, outcomes.len().max(1) as u64),
                outcomes,
            })
        })
        .collect()
}

/// Grouping key of a sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepKey {
    pub protocol: Protocol,
    pub n_agents: usize,
    pub n_truth_holders: usize,
    pub rounds: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub lambda: f64,
}

impl SweepKey {
    pub fn new(spec: &ScenarioSpec, config: &ProtocolConfig) -> Self {
        Self {
            protocol: config.protocol,
            n_agents: spec.n_agents,
            n_truth_holders: spec.n_truth_holders,
            rounds: if config.protocol == Protocol::MajorityVote { 0 } else { config.rounds },
            eta: config.eta,
            epsilon: spec.crowd_bias_epsilon,
            delta: spec.truth_holder_delta,
            rho: spec.error_correlation_rho,
            sigma: spec.belief_noise_sigma,
            lambda: spec.stubbornness_lambda,
        }
    }

    fn same(&self, other: &SweepKey) -> bool {
        let bits = |k: &SweepKey| {
            [k.eta, k.epsilon, k.delta, k.rho, k.sigma, k.lambda].map(f64::to_bits)
        };
        self.protocol == other.protocol
            && self.n_agents == other.n_agents
            && self.n_truth_holders == other.n_truth_holders
            && self.rounds == other.rounds
            && bits(self) == bits(other)
    }
}

/// Sufficient statistics of one sweep cell. Merging is exact, so the summary
/// does not depend on how trials were split across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAccumulator {
    pub key: SweepKey,
    pub n_trials: u64,
    pub n_correct: u64,
    drift: Moments,
    gap: Moments,
    alpha: Moments,
}

impl SweepAccumulator {
    pub fn new(key: SweepKey) -> Self {
        Self {
            key,
            n_trials: 0,
            n_correct: 0,
            drift: Moments::default(),
            gap: Moments::default(),
            alpha: Moments::default(),
        }
    }

    pub fn push(&mut self, report: &TrialReport) {
        self.n_trials += 1;
        self.n_correct += report.correct as u64;
        let t = report.rounds();
        if t > 0 {
            let mu = &report.mu_series;
            self.drift.push((mu[t] - mu[0]) / t as f64);
        }
        if report.protocol == Protocol::AceMAD {
            if let Some(g) = report.score_gap(&report.truth_holders) {
                self.gap.push(g);
            }
        }
        if !report.truth_holders.is_empty() {
            if let Some(&a) = report.truth_holder_share_series.last() {
                self.alpha.push(a);
            }
        }
    }

    /// Panics when the keys differ.
    pub fn merge(&self, other: &SweepAccumulator) -> SweepAccumulator {
        assert!(self.key.same(&other.key), "merging different sweep cells");
        SweepAccumulator {
            key: self.key.clone(),
            n_trials: self.n_trials + other.n_trials,
            n_correct: self.n_correct + other.n_correct,
            drift: self.drift.merge(&other.drift),
            gap: self.gap.merge(&other.gap),
            alpha: self.alpha.merge(&other.alpha),
        }
    }

    pub fn summary(&self) -> SweepSummary {
        let accuracy = wilson_interval(self.n_correct, self.n_trials.max(1));
        SweepSummary {
            key: self.key.clone(),
            n_trials: self.n_trials,
            accuracy: accuracy.mean,
            accuracy_ci95: (accuracy.lo, accuracy.hi),
            mean_drift_per_round: self.drift.estimate(),
            mean_score_gap: self.gap.estimate(),
            mean_final_alpha_e: self.alpha.estimate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub key: SweepKey,
    pub n_trials: u64,
    pub accuracy: f64,
    pub accuracy_ci95: (f64, f64),
    pub mean_drift_per_round: Option<Estimate>,
    pub mean_score_gap: Option<Estimate>,
    pub mean_final_alpha_e: Option<Estimate>,
}

/// One summary per distinct key, in order of first appearance. Groups that
/// share a key are merged.
pub fn summarize_sweep(groups: &[(SweepKey, Vec<TrialReport>)]) -> Vec<SweepSummary> {
    let mut cells: Vec<SweepAccumulator> = Vec::new();
    for (key, reports) in groups {
        let mut acc = SweepAccumulator::new(key.clone());
        reports.iter().for_each(|r| acc.push(r));
        match cells.iter_mut().find(|c| c.key.same(key)) {
            Some(cell) => *cell = cell.merge(&acc),
            None => cells.push(acc),
        }
    }
    cells.iter().map(SweepAccumulator::summary).collect()
}

/// Flat CSV row. Column order is part of the output format.
#[derive(Debug, Serialize)]
struct CsvRow {
    protocol: String,
    n_agents: usize,
    n_truth_holders: usize,
    rounds: usize,
    eta: f64,
    epsilon: f64,
    delta: f64,
    rho: f64,
    sigma: f64,
    lambda: f64,
    n_trials: u64,
    accuracy: f64,
    accuracy_lo: f64,
    accuracy_hi: f64,
    drift_mean: Option<f64>,
    drift_lo: Option<f64>,
    drift_hi: Option<f64>,
    score_gap_mean: Option<f64>,
    score_gap_lo: Option<f64>,
    score_gap_hi: Option<f64>,
    alpha_e_mean: Option<f64>,
    alpha_e_lo: Option<f64>,
    alpha_e_hi: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 23] = [
    "protocol",
    "n_agents",
    "n_truth_holders",
    "rounds",
    "eta",
    "epsilon",
    "delta",
    "rho",
    "sigma",
    "lambda",
    "n_trials",
    "accuracy",
    "accuracy_lo",
    "accuracy_hi",
    "drift_mean",
    "drift_lo",
    "drift_hi",
    "score_gap_mean",
    "score_gap_lo",
    "score_gap_hi",
    "alpha_e_mean",
    "alpha_e_lo",
    "alpha_e_hi",
];

pub fn write_summaries_csv<W: Write>(
    summaries: &[SweepSummary],
    out: W,
) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    if summaries.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for s in summaries {
        let split = |e: Option<Estimate>| match e {
            Some(e) => (Some(e.mean), Some(e.lo), Some(e.hi)),
            None => (None, None, None),
        };
        let (drift_mean, drift_lo, drift_hi) = split(s.mean_drift_per_round);
        let (score_gap_mean, score_gap_lo, score_gap_hi) = split(s.mean_score_gap);
        let (alpha_e_mean, alpha_e_lo, alpha_e_hi) = split(s.mean_final_alpha_e);
        let k = &s.key;
        w.serialize(CsvRow {
            protocol: k.protocol.name().to_string(),
            n_agents: k.n_agents,
            n_truth_holders: k.n_truth_holders,
            rounds: k.rounds,
            eta: k.eta,
            epsilon: k.epsilon,
            delta: k.delta,
            rho: k.rho,
            sigma: k.sigma,
            lambda: k.lambda,
            n_trials: s.n_trials,
            accuracy: s.accuracy,
            accuracy_lo: s.accuracy_ci95.0,
            accuracy_hi: s.accuracy_ci95.1,
            drift_mean,
            drift_lo,
            drift_hi,
            score_gap_mean,
            score_gap_lo,
            score_gap_hi,
            alpha_e_mean,
            alpha_e_lo,
            alpha_e_hi,
        })?;
    }
    w.flush()?;
    Ok(())
}
