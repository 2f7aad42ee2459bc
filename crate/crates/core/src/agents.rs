//! Agent behaviours and the synthetic scenario generator.
//!
//! A synthetic population has a crowd that shares a misconception and a
//! minority of truth-holders. Crowd agents put mass `epsilon` on the truth and
//! the rest on a distractor. With probability `rho` the whole crowd shares one
//! distractor, otherwise each crowd agent draws its own. Truth-holders put
//! `1 - delta` on the truth and spread `delta` over the other labels. Every
//! initial belief is then jittered in logit space with scale `sigma`.
//!
//! Agents are ordered crowd first, truth-holders last. The truth is label 0.
//!
//! Crowd agents forecast that their peers believe what they believe. A
//! truth-holder forecasts the expected peer average under the generative
//! model, which is what a correct second-order model of the crowd means here.

use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AnswerSpace, Belief, BeliefError, RoundSnapshot};

/// Draw count for the cached Monte Carlo estimate of jittered beliefs.
pub const PEER_MODEL_SAMPLES: usize = 100_000;
const PEER_MODEL_SEED: u64 = 0x5eed_0f_be11ef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    /// The agent answered, but the commitment could not be used. The engine
    /// retries these once before carrying the previous belief forward.
    #[error("invalid commitment: {0}")]
    InvalidCommitment(String),
    /// The agent could not be reached at all. Fatal for the debate.
    #[error("agent transport failure: {0}")]
    Transport(String),
}

/// Generative model of one challenging-interval instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_agents: usize,
    pub n_truth_holders: usize,
    pub crowd_bias_epsilon: f64,
    pub truth_holder_delta: f64,
    pub error_correlation_rho: f64,
    pub k_labels: usize,
    pub belief_noise_sigma: f64,
    pub seed: u64,
    /// Per-round pull of each synthetic belief toward the previous aggregate.
    pub stubbornness_lambda: f64,
    /// Truth-holder forecast = `mix * model + (1 - mix) * own belief`.
    pub truth_holder_mix: f64,
}

impl Default for ScenarioSpec {
    /// Five agents, one of them a truth-holder, binary answers, noiseless.
    fn default() -> Self {
        Self {
            n_agents: 5,
            n_truth_holders: 1,
            crowd_bias_epsilon: 0.1,
            truth_holder_delta: 0.1,
            error_correlation_rho: 1.0,
            k_labels: 2,
            belief_noise_sigma: 0.0,
            seed: 0,
            stubbornness_lambda: 0.0,
            truth_holder_mix: 1.0,
        }
    }
}

impl ScenarioSpec {
    /// Static noiseless 4-vs-1 binary population.
    pub fn static_noiseless() -> Self {
        Self::default()
    }

    /// The static population with small logit jitter.
    pub fn separation() -> Self {
        Self {
            belief_noise_sigma: 0.05,
            ..Self::default()
        }
    }

    /// Jittered population whose beliefs drift toward the aggregate.
    pub fn drift() -> Self {
        Self {
            belief_noise_sigma: 0.05,
            stubbornness_lambda: 0.2,
            ..Self::default()
        }
    }

    /// Four-option population with a half-correlated crowd, used for the
    /// method comparisons.
    pub fn challenging() -> Self {
        Self {
            crowd_bias_epsilon: 0.3,
            truth_holder_delta: 0.1,
            error_correlation_rho: 0.5,
            k_labels: 4,
            belief_noise_sigma: 0.5,
            stubbornness_lambda: 0.2,
            ..Self::default()
        }
    }

    /// Truth-holder count for a fixed population fraction, rounded down.
    pub fn truth_holders_for_fraction(n_agents: usize, fraction: f64) -> usize {
        let m = (fraction * n_agents as f64 + 1e-9).floor() as usize;
        // keep the crowd a strict majority
        m.min(n_agents.saturating_sub(1) / 2)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidSpec(msg));
        if self.n_agents < 2 {
            return bad(format!("n_agents must be >= 2, got {}", self.n_agents));
        }
        if 2 * self.n_truth_holders >= self.n_agents {
            return bad(format!(
                "truth-holders must be a strict minority: {} of {}",
                self.n_truth_holders, self.n_agents
            ));
        }
        let open_half = |x: f64| x > 0.0 && x < 0.5;
        if !open_half(self.crowd_bias_epsilon) {
            return bad(format!(
                "crowd_bias_epsilon must be in (0, 0.5), got {}",
                self.crowd_bias_epsilon
            ));
        }
        if !open_half(self.truth_holder_delta) {
            return bad(format!(
                "truth_holder_delta must be in (0, 0.5), got {}",
                self.truth_holder_delta
            ));
        }
        for (name, v) in [
            ("error_correlation_rho", self.error_correlation_rho),
            ("stubbornness_lambda", self.stubbornness_lambda),
            ("truth_holder_mix", self.truth_holder_mix),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.k_labels < 2 || self.k_labels > 26 {
            return bad(format!("k_labels must be in 2..=26, got {}", self.k_labels));
        }
        if !(self.belief_noise_sigma >= 0.0 && self.belief_noise_sigma.is_finite()) {
            return bad(format!(
                "belief_noise_sigma must be finite and >= 0, got {}",
                self.belief_noise_sigma
            ));
        }
        Ok(())
    }

    pub fn n_crowd(&self) -> usize {
        self.n_agents - self.n_truth_holders
    }

    pub fn truth_holder_indices(&self) -> Vec<usize> {
        (self.n_crowd()..self.n_agents).collect()
    }

    fn crowd_base(&self, distractor: usize) -> Belief {
        let mut probs = vec![0.0; self.k_labels];
        probs[0] = self.crowd_bias_epsilon;
        probs[distractor] = 1.0 - self.crowd_bias_epsilon;
        Belief::new(probs).expect("crowd base is a valid belief")
    }

    fn truth_holder_base(&self) -> Belief {
        let rest = self.truth_holder_delta / (self.k_labels - 1) as f64;
        let mut probs = vec![rest; self.k_labels];
        probs[0] = 1.0 - self.truth_holder_delta;
        Belief::new(probs).expect("truth-holder base is a valid belief")
    }
}

/// Adds `sigma * N(0, 1)` to the log of every positive entry, then
/// renormalizes with a softmax. Zero entries stay zero.
pub fn jitter<R: Rng + ?Sized>(base: &Belief, sigma: f64, rng: &mut R) -> Belief {
    if sigma == 0.0 {
        return base.clone();
    }
    let logits: Vec<Option<f64>> = base
        .probs()
        .iter()
        .map(|&p| {
            (p > 0.0).then(|| {
                let z: f64 = rng.sample(StandardNormal);
                p.ln() + sigma * z
            })
        })
        .collect();
    let top = logits
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|l| l.map_or(0.0, |l| (l - top).exp()))
        .collect();
    crate::types::normalize(&exps).expect("softmax output is a valid belief")
}

/// Monte Carlo mean of `jitter(base, sigma)`.
pub fn expected_jitter(base: &Belief, sigma: f64, samples: usize, seed: u64) -> Belief {
    if sigma == 0.0 {
        return base.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; base.len()];
    for _ in 0..samples {
        let draw = jitter(base, sigma, &mut rng);
        for (a, p) in acc.iter_mut().zip(draw.probs()) {
            *a += p;
        }
    }
    crate::types::normalize(&acc).expect("mean of beliefs is a belief")
}

/// Swaps coordinates 1 and `d`, mapping the canonical distractor onto `d`.
fn move_distractor(b: &Belief, d: usize) -> Belief {
    let mut perm: Vec<usize> = (0..b.len()).collect();
    perm.swap(1, d);
    b.permuted(&perm)
}

/// Builds scenario instances for one spec, caching the expected jittered
/// beliefs so that repeated trials do not redo the Monte Carlo estimate.
#[derive(Debug, Clone)]
pub struct ScenarioGenerator {
    spec: ScenarioSpec,
    space: AnswerSpace,
    crowd_expected: Belief,
    truth_holder_expected: Belief,
}

impl ScenarioGenerator {
    pub fn new(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        spec.validate()?;
        let sigma = spec.belief_noise_sigma;
        let crowd_expected =
            expected_jitter(&spec.crowd_base(1), sigma, PEER_MODEL_SAMPLES, PEER_MODEL_SEED);
        let truth_holder_expected = expected_jitter(
            &spec.truth_holder_base(),
            sigma,
            PEER_MODEL_SAMPLES,
            PEER_MODEL_SEED ^ 1,
        );
        let space = AnswerSpace::lettered(spec.k_labels, Some(0))
            .map_err(|e| ScenarioError::InvalidSpec(e.to_string()))?;
        Ok(Self {
            spec,
            space,
            crowd_expected,
            truth_holder_expected,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// One instance, a pure function of `seed`.
    pub fn instance(&self, seed: u64) -> Scenario {
        let spec = &self.spec;
        let k = spec.k_labels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared = rng.random::<f64>() < spec.error_correlation_rho;
        let common = rng.random_range(1..k);
        let n_crowd = spec.n_crowd();

        let mut distractors = Vec::with_capacity(spec.n_agents);
        let mut bases = Vec::with_capacity(spec.n_agents);
        let mut expected = Vec::with_capacity(spec.n_agents);
        for _ in 0..n_crowd {
            let d = if shared { common } else { rng.random_range(1..k) };
            distractors.push(Some(d));
            bases.push(spec.crowd_base(d));
            expected.push(move_distractor(&self.crowd_expected, d));
        }
        for _ in n_crowd..spec.n_agents {
            distractors.push(None);
            bases.push(spec.truth_holder_base());
            expected.push(self.truth_holder_expected.clone());
        }
        let initial_beliefs = bases
            .iter()
            .map(|b| jitter(b, spec.belief_noise_sigma, &mut rng))
            .collect();

        Scenario {
            spec: ScenarioSpec {
                seed,
                ..spec.clone()
            },
            space: self.space.clone(),
            initial_beliefs,
            base_beliefs: bases,
            expected_beliefs: expected,
            distractors,
            shared_misconception: shared,
        }
    }
}

/// One generated population.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub space: AnswerSpace,
    pub initial_beliefs: Vec<Belief>,
    /// Beliefs before jitter.
    pub base_beliefs: Vec<Belief>,
    /// Expected initial beliefs given each agent's distractor, averaged over
    /// the jitter. Exact for `sigma = 0`, a cached estimate otherwise.
    pub expected_beliefs: Vec<Belief>,
    /// The distractor each crowd agent fell for; `None` for truth-holders.
    pub distractors: Vec<Option<usize>>,
    pub shared_misconception: bool,
}

/// Builds the instance described by `spec`, seeded with `spec.seed`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    Ok(ScenarioGenerator::new(spec.clone())?.instance(spec.seed))
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.initial_beliefs.len()
    }

    pub fn truth_holders(&self) -> Vec<usize> {
        self.spec.truth_holder_indices()
    }

    pub fn crowd(&self) -> Vec<usize> {
        (0..self.spec.n_crowd()).collect()
    }

    /// Expected average of the other agents' initial beliefs.
    pub fn truth_holder_peer_prediction(&self, own_index: usize) -> Belief {
        mean_excluding(&self.expected_beliefs, own_index)
    }

    /// Synthetic models for every agent, using the spec's truth-holder mix.
    pub fn agents(&self) -> Vec<Box<dyn AgentModel>> {
        let th = self.truth_holders();
        (0..self.n_agents())
            .map(|i| -> Box<dyn AgentModel> {
                if th.contains(&i) {
                    Box::new(self.imperfect_truth_holder(i, self.spec.truth_holder_mix))
                } else {
                    Box::new(SyntheticAgent::crowd(
                        self.initial_beliefs[i].clone(),
                        self.spec.stubbornness_lambda,
                    ))
                }
            })
            .collect()
    }

    /// A truth-holder whose forecast interpolates between the model
    /// expectation (`mix = 1`) and its own belief (`mix = 0`).
    pub fn imperfect_truth_holder(&self, index: usize, mix: f64) -> SyntheticAgent {
        SyntheticAgent {
            kind: AgentKind::TruthHolderSynthetic,
            initial: self.initial_beliefs[index].clone(),
            lambda: self.spec.stubbornness_lambda,
            forecast: PeerForecast::Model {
                expected_initial: self.expected_beliefs.clone(),
                mix,
            },
        }
    }
}

fn mean_excluding(beliefs: &[Belief], skip: usize) -> Belief {
    let k = beliefs[0].len();
    let mut acc = vec![0.0; k];
    let mut count = 0.0;
    for (j, b) in beliefs.iter().enumerate() {
        if j == skip {
            continue;
        }
        count += 1.0;
        for (a, p) in acc.iter_mut().zip(b.probs()) {
            *a += p;
        }
    }
    if count == 0.0 {
        return beliefs[0].clone();
    }
    crate::types::normalize(&acc.iter().map(|a| a / count).collect::<Vec<_>>())
        .expect("mean of beliefs is a belief")
}

/// False-consensus forecast: the crowd expects peers to agree with it.
pub fn crowd_peer_prediction(own_belief: &Belief) -> Belief {
    own_belief.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentKind {
    CrowdSynthetic,
    TruthHolderSynthetic,
    LlmBacked,
    Scripted,
}

/// What the engine shows an agent when it argues or commits in round `round`.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub agent: usize,
    pub round: usize,
    pub space: &'a AnswerSpace,
    /// Completed rounds `< round`. Unless the protocol reveals standing,
    /// peer predictions and scores are stripped.
    pub history: &'a [RoundSnapshot],
    /// The agent's own argument for this round; `None` while arguing.
    pub own_argument: Option<&'a str>,
    /// This agent's belief under the protocol's update law before its own
    /// stubbornness is applied.
    pub prior: &'a Belief,
    /// The engine's published aggregate after round `round - 1`.
    pub public_aggregate: &'a Belief,
    /// Current weights, only when the protocol reveals standing.
    pub weights: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub self_belief: Belief,
    pub peer_prediction: Belief,
}

/// Behaviour of one debate participant.
///
/// A model sees only what its [`AgentView`] carries; peers' same-round
/// commitments are never in it.
pub trait AgentModel: Send {
    fn kind(&self) -> AgentKind;

    /// Belief before any debate round; also the vote for majority voting.
    fn initial_belief(&mut self, space: &AnswerSpace) -> Result<Belief, AgentError>;

    fn argue(&mut self, view: &AgentView<'_>) -> Result<String, AgentError>;

    fn commit(&mut self, view: &AgentView<'_>) -> Result<Commitment, AgentError>;
}

#[derive(Debug, Clone, PartialEq)]
enum PeerForecast {
    OwnBelief,
    Model {
        expected_initial: Vec<Belief>,
        mix: f64,
    },
}

/// Synthetic crowd member or truth-holder.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAgent {
    kind: AgentKind,
    initial: Belief,
    lambda: f64,
    forecast: PeerForecast,
}

impl SyntheticAgent {
    pub fn crowd(initial: Belief, lambda: f64) -> Self {
        Self {
            kind: AgentKind::CrowdSynthetic,
            initial,
            lambda,
            forecast: PeerForecast::OwnBelief,
        }
    }

    fn update_belief(&self, prior: &Belief, aggregate: &Belief) -> Result<Belief, AgentError> {
        prior
            .mix(aggregate, self.lambda)
            .map_err(|e| AgentError::InvalidCommitment(e.to_string()))
    }
}

impl AgentModel for SyntheticAgent {
    fn kind(&self) -> AgentKind {
        self.kind
    }

    fn initial_belief(&mut self, _space: &AnswerSpace) -> Result<Belief, AgentError> {
        Ok(self.initial.clone())
    }

    fn argue(&mut self, _view: &AgentView<'_>) -> Result<String, AgentError> {
        Ok(String::new())
    }

    fn commit(&mut self, view: &AgentView<'_>) -> Result<Commitment, AgentError> {
        let self_belief = self.update_belief(view.prior, view.public_aggregate)?;
        let peer_prediction = match &self.forecast {
            PeerForecast::OwnBelief => crowd_peer_prediction(&self_belief),
            PeerForecast::Model {
                expected_initial,
                mix,
            } => {
                // Peers apply the same drift; before any commitments are
                // public the model falls back to their expected beliefs.
                let priors = match view.history.last() {
                    Some(last) => &last.self_beliefs,
                    None => expected_initial,
                };
                let drifted = priors
                    .iter()
                    .map(|p| self.update_belief(p, view.public_aggregate))
                    .collect::<Result<Vec<_>, _>>()?;
                let model = mean_excluding(&drifted, view.agent);
                model
                    .mix(&self_belief, 1.0 - mix)
                    .map_err(|e| AgentError::InvalidCommitment(e.to_string()))?
            }
        };
        Ok(Commitment {
            self_belief,
            peer_prediction,
        })
    }
}

/// What a scripted agent observed when it was called.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub phase: &'static str,
    pub round: usize,
    pub history_rounds: Vec<usize>,
    pub own_argument: Option<String>,
    pub saw_peer_predictions: bool,
}

/// Replays fixed per-round commitments and records every view it receives.
/// Rounds beyond the script repeat the last entry.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    initial: Belief,
    script: Vec<(String, Commitment)>,
    log: Arc<Mutex<Vec<Observation>>>,
}

impl ScriptedAgent {
    pub fn new(initial: Belief, script: Vec<(String, Commitment)>) -> Self {
        assert!(!script.is_empty(), "script needs at least one round");
        Self {
            initial,
            script,
            log: Arc::default(),
        }
    }

    /// Shared handle to the observation log.
    pub fn observations(&self) -> Arc<Mutex<Vec<Observation>>> {
        Arc::clone(&self.log)
    }

    fn entry(&self, round: usize) -> &(String, Commitment) {
        &self.script[(round.max(1) - 1).min(self.script.len() - 1)]
    }

    fn record(&self, phase: &'static str, view: &AgentView<'_>) {
        self.log.lock().expect("observation log").push(Observation {
            phase,
            round: view.round,
            history_rounds: view.history.iter().map(|s| s.round).collect(),
            own_argument: view.own_argument.map(str::to_owned),
            saw_peer_predictions: view.history.iter().any(RoundSnapshot::has_peer_information),
        });
    }
}

impl AgentModel for ScriptedAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Scripted
    }

    fn initial_belief(&mut self, _space: &AnswerSpace) -> Result<Belief, AgentError> {
        Ok(self.initial.clone())
    }

    fn argue(&mut self, view: &AgentView<'_>) -> Result<String, AgentError> {
        self.record("argue", view);
        Ok(self.entry(view.round).0.clone())
    }

    fn commit(&mut self, view: &AgentView<'_>) -> Result<Commitment, AgentError> {
        self.record("commit", view);
        Ok(self.entry(view.round).1.clone())
    }
}
