//! Debate round loops.
//!
//! Every protocol shares one loop. Each round has four phases: arguments,
//! private commitments, scoring, then the weight update. The linear protocols
//! differ only in how an agent's prior for the round is formed (the
//! influence-matrix update) and in skipping the last two phases.
//!
//! While committing, an agent sees the history of completed rounds and its
//! own argument for the current round, never a peer's current-round output.

use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, AgentModel, AgentView, Commitment};
use crate::dynamics::{
    final_decision, linear_update, majority_vote, mwu_update, weighted_aggregate, DynamicsError,
    InfluenceMatrix, WeightVector,
};
use crate::scoring::{score_round, ScoringError};
use crate::types::{project_to_standard, AnswerSpace, Belief, Protocol, RoundSnapshot, Transcript};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("agent {agent} failed in round {round}: {source}")]
    AgentFailure {
        agent: usize,
        round: usize,
        source: AgentError,
    },
    #[error("configuration does not fit this debate: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

fn default_protocol() -> Protocol {
    Protocol::AceMAD
}

fn default_eta() -> f64 {
    2.0
}

fn default_alpha() -> f64 {
    0.5
}

fn default_rounds() -> usize {
    3
}

fn default_degree() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Amplification rate. Zero disables the weight update.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Susceptibility of the linear protocols.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Explicit influence matrix for the decentralized protocol; uniform
    /// over peers when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub influence: Option<InfluenceMatrix>,
    #[serde(default = "default_degree")]
    pub sparse_degree: usize,
    #[serde(default)]
    pub centralized_hub: usize,
    /// Show agents their peers' scores, forecasts and the current weights.
    #[serde(default)]
    pub reveal_standing: bool,
    /// Call the agents of a round on separate threads.
    #[serde(default)]
    pub concurrent_calls: bool,
}

impl Default for ProtocolConfig {
    /// Peer-prediction debate, three rounds, amplification rate 2.
    fn default() -> Self {
        Self::new(default_protocol())
    }
}

impl ProtocolConfig {
    pub fn new(protocol: Protocol) -> Self {
        Self {
            protocol,
            rounds: default_rounds(),
            eta: default_eta(),
            alpha: default_alpha(),
            influence: None,
            sparse_degree: default_degree(),
            centralized_hub: 0,
            reveal_standing: false,
            concurrent_calls: false,
        }
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self, n_agents: usize) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::ConfigMismatch(m));
        if n_agents == 0 {
            return bad("no agents".into());
        }
        if self.protocol == Protocol::MajorityVote {
            return Ok(());
        }
        if n_agents < 2 {
            return bad(format!("a debate needs at least two agents, got {n_agents}"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be finite and >= 0, got {}", self.eta));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        match self.protocol {
            Protocol::SparseMAD if self.sparse_degree == 0 || self.sparse_degree >= n_agents => {
                bad(format!(
                    "sparse_degree must be in 1..{n_agents}, got {}",
                    self.sparse_degree
                ))
            }
            Protocol::CentralizedMAD if self.centralized_hub >= n_agents => bad(format!(
                "hub {} out of range for {n_agents} agents",
                self.centralized_hub
            )),
            Protocol::StandardMAD => match &self.influence {
                Some(m) if m.n_agents() != n_agents => bad(format!(
                    "influence matrix is {0}x{0}, debate has {n_agents} agents",
                    m.n_agents()
                )),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Influence matrix of a linear protocol; `seed` draws the sparse graph.
    pub fn influence_for(&self, n: usize, seed: u64) -> Result<Option<InfluenceMatrix>, EngineError> {
        let m = match self.protocol {
            Protocol::StandardMAD => match &self.influence {
                Some(m) => m.clone(),
                None => InfluenceMatrix::uniform(n, self.alpha)?,
            },
            Protocol::CentralizedMAD => {
                InfluenceMatrix::centralized(n, self.centralized_hub, self.alpha)?
            }
            Protocol::SparseMAD => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                InfluenceMatrix::sparse(n, self.sparse_degree, self.alpha, &mut rng)?
            }
            Protocol::AceMAD | Protocol::MajorityVote => return Ok(None),
        };
        Ok(Some(m))
    }
}

/// Runs `f` for every agent, in parallel when asked, and returns results in
/// agent order.
fn call_all<T, F>(agents: &mut [Box<dyn AgentModel>], concurrent: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut dyn AgentModel) -> T + Sync,
{
    if !concurrent {
        return agents
            .iter_mut()
            .enumerate()
            .map(|(i, a)| f(i, a.as_mut()))
            .collect();
    }
    thread::scope(|s| {
        let handles: Vec<_> = agents
            .iter_mut()
            .enumerate()
            .map(|(i, a)| {
                let f = &f;
                s.spawn(move || f(i, a.as_mut()))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("agent thread panicked"))
            .collect()
    })
}

/// One retry for unusable output; transport errors propagate.
fn with_retry<T>(
    agent: usize,
    round: usize,
    mut call: impl FnMut() -> Result<T, AgentError>,
) -> Result<Option<T>, EngineError> {
    for attempt in 0..2 {
        match call() {
            Ok(v) => return Ok(Some(v)),
            Err(AgentError::InvalidCommitment(msg)) => {
                log::warn!("agent {agent}, round {round}, attempt {attempt}: {msg}");
            }
            Err(source) => {
                return Err(EngineError::AgentFailure {
                    agent,
                    round,
                    source,
                })
            }
        }
    }
    Ok(None)
}

fn truth_mass(space: &AnswerSpace, b: &Belief) -> Option<f64> {
    space.truth_index().map(|t| b.get(t))
}

/// Runs one debate to completion.
///
/// Synthetic agents make the result a pure function of the agents' state,
/// `config` and `seed`.
pub fn run_debate(
    agents: &mut [Box<dyn AgentModel>],
    space: &AnswerSpace,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<Transcript, EngineError> {
    let n = agents.len();
    config.validate(n)?;
    let k = space.len();

    let initial = call_all(agents, config.concurrent_calls, |i, a| {
        with_retry(i, 0, || a.initial_belief(space))
    });
    let mut beliefs = Vec::with_capacity(n);
    for (i, b) in initial.into_iter().enumerate() {
        let b = b?.unwrap_or_else(|| {
            log::warn!("agent {i} gave no usable initial belief; using uniform");
            Belief::uniform(k)
        });
        if b.len() != k {
            return Err(EngineError::ConfigMismatch(format!(
                "agent {i} answered over {} labels, answer space has {k}",
                b.len()
            )));
        }
        beliefs.push(b);
    }

    let mut weights = WeightVector::uniform(n);
    let mut aggregate = weighted_aggregate(&beliefs, &weights)?;
    let mut mu = truth_mass(space, &aggregate).map(|m| vec![m]);

    if config.protocol == Protocol::MajorityVote {
        return Ok(Transcript {
            answer_space: space.clone(),
            protocol: config.protocol,
            rounds: Vec::new(),
            final_decision: majority_vote(&beliefs),
            mu_series: mu,
        });
    }

    let influence = config.influence_for(n, seed)?;
    let scored = config.protocol == Protocol::AceMAD;
    let mut history: Vec<RoundSnapshot> = Vec::with_capacity(config.rounds);
    let mut visible: Vec<RoundSnapshot> = Vec::with_capacity(config.rounds);

    for round in 1..=config.rounds {
        let priors = match &influence {
            Some(m) => linear_update(&beliefs, m)?,
            None => beliefs.clone(),
        };
        let shown_weights = config.reveal_standing.then(|| weights.weights());
        let base = AgentView {
            agent: 0,
            round,
            space,
            history: &visible,
            own_argument: None,
            prior: &priors[0],
            public_aggregate: &aggregate,
            weights: shown_weights,
        };

        let arguments = call_all(agents, config.concurrent_calls, |i, a| {
            a.argue(&AgentView { agent: i, prior: &priors[i], ..base }).map_err(|source| EngineError::AgentFailure {
                agent: i,
                round,
                source,
            })
        })
        .into_iter()
        .collect::<Result<Vec<String>, _>>()?;

        let commits = call_all(agents, config.concurrent_calls, |i, a| {
            with_retry(i, round, || a.commit(&AgentView {
                    agent: i,
                    prior: &priors[i],
                    own_argument: Some(&arguments[i]),
                    ..base
                }))
        });
        let mut self_beliefs = Vec::with_capacity(n);
        let mut predictions = Vec::with_capacity(n);
        for (i, c) in commits.into_iter().enumerate() {
            let c = c?.unwrap_or_else(|| {
                log::warn!("agent {i}, round {round}: carrying previous belief forward");
                Commitment {
                    self_belief: beliefs[i].clone(),
                    peer_prediction: beliefs[i].clone(),
                }
            });
            if c.self_belief.len() != k || c.peer_prediction.len() != k {
                return Err(EngineError::AgentFailure {
                    agent: i,
                    round,
                    source: AgentError::InvalidCommitment(format!(
                        "commitment is not over {k} labels"
                    )),
                });
            }
            self_beliefs.push(c.self_belief);
            predictions.push(c.peer_prediction);
        }

        let (scores, peer_predictions) = if scored {
            let s = score_round(&self_beliefs, &predictions)?;
            if config.eta > 0.0 {
                weights = mwu_update(&weights, &s, config.eta)?;
            }
            (s, predictions.into_iter().map(Some).collect())
        } else {
            (vec![0.0; n], vec![None; n])
        };

        beliefs = self_beliefs;
        aggregate = weighted_aggregate(&beliefs, &weights)?;
        if let (Some(series), Some(m)) = (mu.as_mut(), truth_mass(space, &aggregate)) {
            series.push(m);
        }
        let snapshot = RoundSnapshot {
            round,
            arguments,
            self_beliefs: beliefs.clone(),
            peer_predictions,
            scores,
            weights_after: weights.weights().to_vec(),
        };
        visible.push(if config.reveal_standing {
            snapshot.clone()
        } else {
            project_to_standard(&snapshot)
        });
        history.push(snapshot);
    }

    let decision = if scored {
        final_decision(&beliefs, &weights)
    } else {
        majority_vote(&beliefs)
    };
    Ok(Transcript {
        answer_space: space.clone(),
        protocol: config.protocol,
        rounds: history,
        final_decision: decision,
        mu_series: mu,
    })
}

/// Centralized and sparse debates: the same loop with the matching
/// influence matrix.
pub fn run_standard_variants(
    agents: &mut [Box<dyn AgentModel>],
    space: &AnswerSpace,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<Transcript, EngineError> {
    if !config.protocol.is_linear() {
        return Err(EngineError::ConfigMismatch(format!(
            "{} is not a linear-update protocol",
            config.protocol
        )));
    }
    run_debate(agents, space, config, seed)
}
