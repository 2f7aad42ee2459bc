//! Peer-prediction scoring.
//!
//! Each agent forecasts the average belief of the *other* agents. The forecast
//! is scored against the realized peer average with a Brier-type rule,
//! `S = 1 - ||q - Q||^2`, which lies in `[-1, 1]` on the simplex. Negative
//! scores are kept as is; the weight update is well defined for them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Belief, BeliefError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("peer averaging needs at least two agents, got {0}")]
    TooFewAgents(usize),
    #[error("agent index {index} out of range for {n} agents")]
    BadIndex { index: usize, n: usize },
    #[error("expected {expected} peer predictions, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("decomposition check needs at least one sample")]
    EmptySamples,
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Per-agent scores for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub round: usize,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Coordinate-wise mean of every belief except agent `i`'s.
pub fn peer_average(beliefs: &[Belief], i: usize) -> Result<Belief, ScoringError> {
    let n = beliefs.len();
    if n < 2 {
        return Err(ScoringError::TooFewAgents(n));
    }
    if i >= n {
        return Err(ScoringError::BadIndex { index: i, n });
    }
    let k = beliefs[0].len();
    let mut acc = vec![0.0; k];
    for (j, b) in beliefs.iter().enumerate() {
        if j == i {
            continue;
        }
        if b.len() != k {
            return Err(BeliefError::DimensionMismatch {
                expected: k,
                got: b.len(),
            }
            .into());
        }
        for (a, p) in acc.iter_mut().zip(b.probs()) {
            *a += p;
        }
    }
    let denom = (n - 1) as f64;
    Ok(Belief::new(acc.into_iter().map(|a| a / denom).collect())?)
}

/// `1 - ||prediction - realized||_2^2`.
pub fn brier_score(prediction: &Belief, realized: &Belief) -> Result<f64, ScoringError> {
    Ok(1.0 - prediction.squared_distance(realized)?)
}

/// Scores every agent's peer prediction against the realized average of the
/// other agents' self-beliefs.
pub fn score_round(
    self_beliefs: &[Belief],
    peer_predictions: &[Belief],
) -> Result<Vec<f64>, ScoringError> {
    if self_beliefs.len() != peer_predictions.len() {
        return Err(ScoringError::LengthMismatch {
            expected: self_beliefs.len(),
            got: peer_predictions.len(),
        });
    }
    (0..self_beliefs.len())
        .map(|i| brier_score(&peer_predictions[i], &peer_average(self_beliefs, i)?))
        .collect()
}

/// Both sides of the squared-error decomposition
/// `E||q - X||^2 = E||X - m||^2 + ||q - m||^2`, evaluated against the
/// empirical distribution of `samples` (so `m` is the sample mean).
///
/// Returns `(lhs, rhs)`; they agree up to floating point error.
pub fn brier_decomposition_check(
    forecast: &Belief,
    samples: &[Belief],
) -> Result<(f64, f64), ScoringError> {
    if samples.is_empty() {
        return Err(ScoringError::EmptySamples);
    }
    let k = forecast.len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; k];
    for s in samples {
        if s.len() != k {
            return Err(BeliefError::DimensionMismatch {
                expected: k,
                got: s.len(),
            }
            .into());
        }
        for (m, p) in mean.iter_mut().zip(s.probs()) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let lhs = samples
        .iter()
        .map(|s| forecast.squared_distance(s))
        .sum::<Result<f64, _>>()?
        / n;
    let spread = samples
        .iter()
        .map(|s| sq_dist(s.probs(), &mean))
        .sum::<f64>()
        / n;
    let bias = sq_dist(forecast.probs(), &mean);
    Ok((lhs, spread + bias))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(v: &[f64]) -> Belief {
        Belief::new(v.to_vec()).unwrap()
    }

    #[test]
    fn peer_average_examples() {
        let beliefs = [b(&[0.5, 0.5]), b(&[0.8, 0.2]), b(&[0.6, 0.4])];
        let avg = peer_average(&beliefs, 0).unwrap();
        assert!((avg.get(0) - 0.7).abs() < 1e-12 && (avg.get(1) - 0.3).abs() < 1e-12);

        let pair = [b(&[0.3, 0.7]), b(&[1.0, 0.0])];
        assert_eq!(peer_average(&pair, 0).unwrap(), b(&[1.0, 0.0]));

        let mut five = vec![b(&[0.9, 0.1])];
        five.extend(std::iter::repeat_n(b(&[0.25, 0.75]), 4));
        assert_eq!(peer_average(&five, 0).unwrap(), b(&[0.25, 0.75]));
    }

    #[test]
    fn peer_average_errors() {
        assert_eq!(
            peer_average(&[b(&[0.5, 0.5])], 0),
            Err(ScoringError::TooFewAgents(1))
        );
        let pair = [b(&[0.5, 0.5]), b(&[0.5, 0.5])];
        assert!(matches!(
            peer_average(&pair, 2),
            Err(ScoringError::BadIndex { .. })
        ));
    }

    #[test]
    fn brier_examples() {
        let q = b(&[0.3, 0.7]);
        assert_eq!(brier_score(&q, &q).unwrap(), 1.0);
        assert_eq!(
            brier_score(&b(&[1.0, 0.0]), &b(&[0.0, 1.0])).unwrap(),
            -1.0
        );
        let s = brier_score(&b(&[0.3, 0.7]), &b(&[0.1, 0.9])).unwrap();
        assert!((s - 0.92).abs() < 1e-12);
        assert!(matches!(
            brier_score(&b(&[0.5, 0.5]), &b(&[0.2, 0.3, 0.5])),
            Err(ScoringError::Belief(BeliefError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn score_round_examples() {
        let shared = b(&[0.4, 0.6]);
        let all = vec![shared.clone(); 4];
        assert!(score_round(&all, &all).unwrap().iter().all(|&s| s == 1.0));

        let p = [b(&[1.0, 0.0]), b(&[0.0, 1.0])];
        let crossed = [b(&[0.0, 1.0]), b(&[1.0, 0.0])];
        assert_eq!(score_round(&p, &crossed).unwrap(), vec![1.0, 1.0]);
        // false consensus: each predicts its own belief
        assert_eq!(score_round(&p, &p).unwrap(), vec![-1.0, -1.0]);
    }

    #[test]
    fn decomposition_examples() {
        let q = b(&[0.3, 0.7]);
        assert_eq!(
            brier_decomposition_check(&q, &[q.clone()]).unwrap(),
            (0.0, 0.0)
        );
        let (lhs, rhs) =
            brier_decomposition_check(&b(&[0.5, 0.5]), &[b(&[1.0, 0.0]), b(&[0.0, 1.0])]).unwrap();
        assert!((lhs - 0.5).abs() < 1e-15 && (rhs - 0.5).abs() < 1e-15);
        assert_eq!(
            brier_decomposition_check(&q, &[]),
            Err(ScoringError::EmptySamples)
        );
    }

    fn belief_strategy(k: usize) -> impl Strategy<Value = Belief> {
        prop::collection::vec(0.01f64..1.0, k).prop_map(|v| crate::types::normalize(&v).unwrap())
    }

    proptest! {
        #[test]
        fn score_bounded_and_symmetric(q in belief_strategy(3), r in belief_strategy(3)) {
            let s = brier_score(&q, &r).unwrap();
            prop_assert!(s <= 1.0 && s >= -1.0);
            prop_assert_eq!(s, brier_score(&r, &q).unwrap());
            if q != r {
                prop_assert!(s < 1.0);
            }
        }

        #[test]
        fn sample_mean_forecast_zeroes_bias(samples in prop::collection::vec(belief_strategy(3), 1..12)) {
            let n = samples.len() as f64;
            let mean: Vec<f64> = (0..3)
                .map(|k| samples.iter().map(|s| s.get(k)).sum::<f64>() / n)
                .collect();
            let m = crate::types::normalize(&mean).unwrap();
            let (lhs, rhs) = brier_decomposition_check(&m, &samples).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        // The sample mean maximizes the average score over a grid of forecasts.
        #[test]
        fn sample_mean_beats_grid(samples in prop::collection::vec(belief_strategy(2), 1..8)) {
            let n = samples.len() as f64;
            let m0 = samples.iter().map(|s| s.get(0)).sum::<f64>() / n;
            let mean = Belief::new(vec![m0, 1.0 - m0]).unwrap();
            let avg = |q: &Belief| samples.iter().map(|s| brier_score(q, s).unwrap()).sum::<f64>() / n;
            let best = avg(&mean);
            for step in 0..=50 {
                let x = step as f64 / 50.0;
                let q = Belief::new(vec![x, 1.0 - x]).unwrap();
                prop_assert!(avg(&q) <= best + 1e-12);
            }
        }
    }
}
