//! Belief and weight update laws.
//!
//! Two aggregation rules coexist on purpose. [`weighted_aggregate`] is the
//! linear weighted mean that defines `mu_t` and every theorem check.
//! [`final_decision`] squares the weights before aggregating, which is the rule
//! a debate reports as its answer.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{argmax_lowest, Belief, BeliefError, SIMPLEX_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("amplification rate must be positive, got {0}")]
    NonPositiveEta(f64),
    #[error("influence row {0} does not sum to 1")]
    RowNotStochastic(usize),
    #[error("influence matrix has non-zero diagonal at {0}")]
    SelfInfluence(usize),
    #[error("influence entry ({0}, {1}) is negative or non-finite")]
    BadEntry(usize, usize),
    #[error("susceptibility alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("weights must be non-negative and finite")]
    BadWeights,
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Peer influence for the linear update: a row-stochastic matrix with zero
/// diagonal, plus the susceptibility `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceMatrix {
    omega: Vec<Vec<f64>>,
    alpha: f64,
    doubly_stochastic: bool,
}

impl InfluenceMatrix {
    pub fn new(omega: Vec<Vec<f64>>, alpha: f64) -> Result<Self, DynamicsError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(DynamicsError::BadAlpha(alpha));
        }
        let n = omega.len();
        for (i, row) in omega.iter().enumerate() {
            if row.len() != n {
                return Err(DynamicsError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|w| !w.is_finite() || *w < 0.0) {
                return Err(DynamicsError::BadEntry(i, j));
            }
            if row[i] != 0.0 {
                return Err(DynamicsError::SelfInfluence(i));
            }
            // A single agent has no peers; its row is allowed to be empty.
            if n > 1 && (row.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(DynamicsError::RowNotStochastic(i));
            }
        }
        let doubly_stochastic = n > 1
            && (0..n).all(|j| {
                let col: f64 = omega.iter().map(|row| row[j]).sum();
                (col - 1.0).abs() <= SIMPLEX_TOLERANCE
            });
        Ok(Self {
            omega,
            alpha,
            doubly_stochastic,
        })
    }

    /// Every agent listens to every peer equally, `omega_ij = 1/(N-1)`.
    pub fn uniform(n: usize, alpha: f64) -> Result<Self, DynamicsError> {
        if n < 2 {
            return Err(DynamicsError::Topology(format!(
                "uniform influence needs at least two agents, got {n}"
            )));
        }
        let w = 1.0 / (n - 1) as f64;
        let omega = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { w }).collect())
            .collect();
        Self::new(omega, alpha)
    }

    /// Star topology: every non-hub agent listens only to the hub; the hub
    /// listens to everyone else uniformly.
    pub fn centralized(n: usize, hub: usize, alpha: f64) -> Result<Self, DynamicsError> {
        if n < 2 || hub >= n {
            return Err(DynamicsError::Topology(format!(
                "hub {hub} invalid for {n} agents"
            )));
        }
        let spread = 1.0 / (n - 1) as f64;
        let omega = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (i == hub, i == j, j == hub) {
                        (_, true, _) => 0.0,
                        (true, false, _) => spread,
                        (false, false, true) => 1.0,
                        (false, false, false) => 0.0,
                    })
                    .collect()
            })
            .collect();
        Self::new(omega, alpha)
    }

    /// Random `degree`-regular directed peer graph: agents are placed on a
    /// shuffled ring and each listens to the next `degree` agents on it.
    /// In- and out-degrees are both `degree`, so the matrix is doubly
    /// stochastic.
    pub fn sparse<R: Rng + ?Sized>(
        n: usize,
        degree: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Self, DynamicsError> {
        if n < 2 || degree == 0 || degree >= n {
            return Err(DynamicsError::Topology(format!(
                "sparse degree must be in 1..{n}, got {degree}"
            )));
        }
        let mut ring: Vec<usize> = (0..n).collect();
        ring.shuffle(rng);
        let w = 1.0 / degree as f64;
        let mut omega = vec![vec![0.0; n]; n];
        for (pos, &i) in ring.iter().enumerate() {
            for step in 1..=degree {
                omega[i][ring[(pos + step) % n]] = w;
            }
        }
        Self::new(omega, alpha)
    }

    pub fn n_agents(&self) -> usize {
        self.omega.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn omega(&self) -> &[Vec<f64>] {
        &self.omega
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        self.doubly_stochastic
    }

    /// Row `i` applied to `beliefs`: the peer mix agent `i` is pulled toward.
    pub fn peer_mix(&self, beliefs: &[Belief], i: usize) -> Result<Belief, DynamicsError> {
        let k = beliefs[0].len();
        let mut acc = vec![0.0; k];
        for (w, b) in self.omega[i].iter().zip(beliefs) {
            if *w == 0.0 {
                continue;
            }
            for (a, p) in acc.iter_mut().zip(b.probs()) {
                *a += w * p;
            }
        }
        Ok(Belief::new(acc)?)
    }
}

/// `p_i <- (1 - alpha) p_i + alpha * sum_j omega_ij p_j` for every agent.
pub fn linear_update(
    beliefs: &[Belief],
    infl: &InfluenceMatrix,
) -> Result<Vec<Belief>, DynamicsError> {
    let n = beliefs.len();
    if infl.n_agents() != n {
        return Err(DynamicsError::DimensionMismatch {
            expected: infl.n_agents(),
            got: n,
        });
    }
    check_dims(beliefs)?;
    if infl.alpha == 0.0 || n < 2 {
        return Ok(beliefs.to_vec());
    }
    (0..n)
        .map(|i| {
            let pull = infl.peer_mix(beliefs, i)?;
            Ok(beliefs[i].mix(&pull, infl.alpha)?)
        })
        .collect()
}

fn check_dims(beliefs: &[Belief]) -> Result<usize, DynamicsError> {
    let k = beliefs.first().map(Belief::len).unwrap_or(0);
    if let Some(b) = beliefs.iter().find(|b| b.len() != k) {
        return Err(DynamicsError::DimensionMismatch {
            expected: k,
            got: b.len(),
        });
    }
    Ok(k)
}

/// Agent influence weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    normalized: bool,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, DynamicsError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DynamicsError::BadWeights);
        }
        let normalized = (weights.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE;
        Ok(Self {
            weights,
            normalized,
        })
    }

    /// Algorithm start state: every agent weight one, then normalized.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            normalized: true,
        }
    }

    pub fn normalize(&self) -> Result<Self, DynamicsError> {
        let sum: f64 = self.weights.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(DynamicsError::BadWeights);
        }
        Ok(Self {
            weights: self.weights.iter().map(|w| w / sum).collect(),
            normalized: true,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Total weight held by `indices`.
    pub fn share(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.weights[i]).sum()
    }
}

/// `w_i <- w_i * exp(eta * S_i)`, followed by normalization.
///
/// The exponent is shifted by `max S` before exponentiating; the shift cancels
/// in the normalization and keeps the factors in `(0, 1]`.
pub fn mwu_update(
    weights: &WeightVector,
    scores: &[f64],
    eta: f64,
) -> Result<WeightVector, DynamicsError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(DynamicsError::NonPositiveEta(eta));
    }
    if scores.len() != weights.len() {
        return Err(DynamicsError::DimensionMismatch {
            expected: weights.len(),
            got: scores.len(),
        });
    }
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw = weights
        .weights
        .iter()
        .zip(scores)
        .map(|(w, s)| w * (eta * (s - top)).exp())
        .collect();
    WeightVector::new(raw)?.normalize()
}

/// Weighted mean of the beliefs under normalized `weights`.
pub fn weighted_aggregate(
    beliefs: &[Belief],
    weights: &WeightVector,
) -> Result<Belief, DynamicsError> {
    if beliefs.len() != weights.len() || beliefs.is_empty() {
        return Err(DynamicsError::DimensionMismatch {
            expected: weights.len(),
            got: beliefs.len(),
        });
    }
    let k = check_dims(beliefs)?;
    let w = weights.normalize()?;
    let mut acc = vec![0.0; k];
    for (wi, b) in w.weights.iter().zip(beliefs) {
        for (a, p) in acc.iter_mut().zip(b.probs()) {
            *a += wi * p;
        }
    }
    Ok(Belief::new(acc)?)
}

/// Per-label scores of the squared-weight rule, `sum_i w_i^2 p_i(y)`.
pub fn squared_weight_scores(beliefs: &[Belief], weights: &WeightVector) -> Vec<f64> {
    let k = beliefs.first().map(Belief::len).unwrap_or(0);
    let mut acc = vec![0.0; k];
    for (w, b) in weights.weights.iter().zip(beliefs) {
        for (a, p) in acc.iter_mut().zip(b.probs()) {
            *a += w * w * p;
        }
    }
    acc
}

/// `argmax_y sum_i w_i^2 p_i(y)`, lowest label index on ties.
pub fn final_decision(beliefs: &[Belief], weights: &WeightVector) -> usize {
    argmax_lowest(&squared_weight_scores(beliefs, weights))
}

/// Plurality over each agent's argmax label, lowest label index on ties.
pub fn majority_vote(beliefs: &[Belief]) -> usize {
    let k = beliefs.first().map(Belief::len).unwrap_or(0);
    let mut votes = vec![0.0; k];
    for b in beliefs {
        votes[b.argmax()] += 1.0;
    }
    argmax_lowest(&votes)
}

/// Truth-holder weight share after one update in the two-agent reduction:
/// `a e^{eta D} / (a e^{eta D} + (1 - a))`.
pub fn two_agent_weight_share(alpha_e: f64, score_gap: f64, eta: f64) -> f64 {
    let boosted = alpha_e * (eta * score_gap).exp();
    boosted / (boosted + (1.0 - alpha_e))
}
