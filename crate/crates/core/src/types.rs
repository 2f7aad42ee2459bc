//! Value types shared by every layer of the debate stack: answer spaces,
//! belief simplices, per-round snapshots and whole-debate transcripts.
//!
//! Transcripts serialize to one JSON object per line with the stable field
//! names `answer_space`, `protocol`, `rounds`, `final_decision` and
//! `mu_series`.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for every "sums to one" check in the crate.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("belief vector needs at least {min} entries, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("belief vector contains a non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("belief vector has no strictly positive entry")]
    AllZero,
    #[error("belief entry {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("belief entries sum to {0}, outside tolerance of 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnswerSpaceError {
    #[error("answer space needs at least two labels, got {0}")]
    TooFewLabels(usize),
    #[error("answer label at index {0} is empty")]
    EmptyLabel(usize),
    #[error("duplicate answer label {0:?}")]
    DuplicateLabel(String),
    #[error("truth index {index} out of range for {len} labels")]
    TruthOutOfRange { index: usize, len: usize },
}

/// Ordered set of answer labels, optionally with the index of the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAnswerSpace", into = "RawAnswerSpace")]
pub struct AnswerSpace {
    labels: Vec<String>,
    truth_index: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawAnswerSpace {
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth_index: Option<usize>,
}

impl TryFrom<RawAnswerSpace> for AnswerSpace {
    type Error = AnswerSpaceError;

    fn try_from(raw: RawAnswerSpace) -> Result<Self, Self::Error> {
        AnswerSpace::new(raw.labels, raw.truth_index)
    }
}

impl From<AnswerSpace> for RawAnswerSpace {
    fn from(space: AnswerSpace) -> Self {
        RawAnswerSpace {
            labels: space.labels,
            truth_index: space.truth_index,
        }
    }
}

impl AnswerSpace {
    pub fn new<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        truth_index: Option<usize>,
    ) -> Result<Self, AnswerSpaceError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(AnswerSpaceError::TooFewLabels(labels.len()));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(AnswerSpaceError::EmptyLabel(i));
            }
            if labels[..i].contains(label) {
                return Err(AnswerSpaceError::DuplicateLabel(label.clone()));
            }
        }
        if let Some(index) = truth_index {
            if index >= labels.len() {
                return Err(AnswerSpaceError::TruthOutOfRange {
                    index,
                    len: labels.len(),
                });
            }
        }
        Ok(Self {
            labels,
            truth_index,
        })
    }

    /// Labels `A`, `B`, `C`, ... for `k` options (`k <= 26`), as used by
    /// multiple-choice prompts.
    pub fn lettered(k: usize, truth_index: Option<usize>) -> Result<Self, AnswerSpaceError> {
        assert!(k <= 26, "lettered answer spaces support at most 26 options");
        Self::new((0..k).map(|i| ((b'A' + i as u8) as char).to_string()), truth_index)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn truth_index(&self) -> Option<usize> {
        self.truth_index
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A point on the probability simplex over an [`AnswerSpace`].
///
/// Construction always goes through validation, so every value of this type
/// has non-negative entries summing to one within [`SIMPLEX_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief(Vec<f64>);

impl TryFrom<Vec<f64>> for Belief {
    type Error = BeliefError;

    fn try_from(probs: Vec<f64>) -> Result<Self, Self::Error> {
        Belief::new(probs)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.0
    }
}

impl Belief {
    /// Validates an already-normalized vector. Entries within tolerance of a
    /// unit sum are renormalized silently; anything further off is rejected.
    pub fn new(probs: Vec<f64>) -> Result<Self, BeliefError> {
        if probs.len() < 2 {
            return Err(BeliefError::TooShort {
                min: 2,
                got: probs.len(),
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() {
                return Err(BeliefError::NonFinite(index));
            }
            if value < 0.0 {
                return Err(BeliefError::Negative { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(BeliefError::NotNormalized(sum));
        }
        if sum == 1.0 {
            return Ok(Self(probs));
        }
        Ok(Self(probs.into_iter().map(|p| p / sum).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k >= 2, "belief needs at least two labels");
        Self(vec![1.0 / k as f64; k])
    }

    /// Point mass on `index`.
    pub fn vertex(k: usize, index: usize) -> Self {
        assert!(k >= 2 && index < k);
        let mut probs = vec![0.0; k];
        probs[index] = 1.0;
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax_lowest(&self.0)
    }

    /// `sum_k (self_k - other_k)^2`.
    pub fn squared_distance(&self, other: &Belief) -> Result<f64, BeliefError> {
        if self.len() != other.len() {
            return Err(BeliefError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &Belief, t: f64) -> Result<Belief, BeliefError> {
        if self.len() != other.len() {
            return Err(BeliefError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let probs = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        Belief::new(probs)
    }

    /// Reorders coordinates so that `out[perm[k]] = self[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Belief {
        let mut out = vec![0.0; self.len()];
        for (k, &target) in perm.iter().enumerate() {
            out[target] = self.0[k];
        }
        Belief(out)
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p:.4}")?;
        }
        write!(f, ")")
    }
}

/// Divides each entry by the total. Used to repair near-simplex vectors such
/// as model-emitted probabilities.
pub fn normalize(raw: &[f64]) -> Result<Belief, BeliefError> {
    if raw.len() < 2 {
        return Err(BeliefError::TooShort {
            min: 2,
            got: raw.len(),
        });
    }
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(BeliefError::NonFinite(index));
    }
    if raw.iter().all(|&v| v <= 0.0) {
        return Err(BeliefError::AllZero);
    }
    if let Some(index) = raw.iter().position(|&v| v < 0.0) {
        return Err(BeliefError::Negative {
            index,
            value: raw[index],
        });
    }
    let sum: f64 = raw.iter().sum();
    Ok(Belief(raw.iter().map(|v| v / sum).collect()))
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Protocol {
    StandardMAD,
    CentralizedMAD,
    SparseMAD,
    AceMAD,
    MajorityVote,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::StandardMAD,
        Protocol::CentralizedMAD,
        Protocol::SparseMAD,
        Protocol::AceMAD,
        Protocol::MajorityVote,
    ];

    /// Protocols whose belief dynamics are the linear peer-influence law.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            Protocol::StandardMAD | Protocol::CentralizedMAD | Protocol::SparseMAD
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::StandardMAD => "StandardMAD",
            Protocol::CentralizedMAD => "CentralizedMAD",
            Protocol::SparseMAD => "SparseMAD",
            Protocol::AceMAD => "AceMAD",
            Protocol::MajorityVote => "MajorityVote",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Protocol {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Protocol> for String {
    fn from(p: Protocol) -> String {
        p.name().to_string()
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.to_ascii_lowercase().replace(['-', '_'], "");
        Protocol::ALL
            .into_iter()
            .find(|p| p.name().to_ascii_lowercase() == lowered)
            .or(match lowered.as_str() {
                "standard" | "decentralized" | "decentralizedmad" => Some(Protocol::StandardMAD),
                "centralized" => Some(Protocol::CentralizedMAD),
                "sparse" => Some(Protocol::SparseMAD),
                "majority" | "vote" => Some(Protocol::MajorityVote),
                _ => None,
            })
            .ok_or_else(|| format!("unknown protocol {s:?}"))
    }
}

/// Everything observable after one debate round: arguments, private
/// commitments, the realized scores and the normalized weights they produced.
///
/// For the linear protocols `peer_predictions` is empty and `scores` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSnapshot {
    pub round: usize,
    pub arguments: Vec<String>,
    pub self_beliefs: Vec<Belief>,
    pub peer_predictions: Vec<Option<Belief>>,
    pub scores: Vec<f64>,
    pub weights_after: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("snapshot lists have mismatched lengths: {0:?}")]
    LengthMismatch([usize; 5]),
    #[error("weights_after is not a probability vector (sum {0})")]
    BadWeights(f64),
}

impl RoundSnapshot {
    pub fn validate(&self) -> Result<(), SnapshotError> {
        let lens = [
            self.arguments.len(),
            self.self_beliefs.len(),
            self.peer_predictions.len(),
            self.scores.len(),
            self.weights_after.len(),
        ];
        if lens.iter().any(|&l| l != lens[0]) {
            return Err(SnapshotError::LengthMismatch(lens));
        }
        let sum: f64 = self.weights_after.iter().sum();
        if self.weights_after.iter().any(|&w| w < 0.0 || !w.is_finite())
            || (sum - 1.0).abs() > SIMPLEX_TOLERANCE
        {
            return Err(SnapshotError::BadWeights(sum));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.self_beliefs.len()
    }

    pub fn has_peer_information(&self) -> bool {
        self.peer_predictions.iter().any(Option::is_some) || self.scores.iter().any(|&s| s != 0.0)
    }
}

/// Drops peer predictions and scores, keeping only what a standard debate
/// would have exposed. Weights are derived from scores, so they are reset to
/// uniform. Deterministic and idempotent.
pub fn project_to_standard(info: &RoundSnapshot) -> RoundSnapshot {
    let n = info.weights_after.len();
    RoundSnapshot {
        round: info.round,
        arguments: info.arguments.clone(),
        self_beliefs: info.self_beliefs.clone(),
        peer_predictions: vec![None; info.peer_predictions.len()],
        scores: vec![0.0; info.scores.len()],
        weights_after: vec![1.0 / n as f64; n],
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("rounds are not strictly increasing at position {0}")]
    UnorderedRounds(usize),
    #[error("mu_series has length {got}, expected {expected}")]
    MuLength { expected: usize, got: usize },
    #[error("mu_series entry {0} is outside [0, 1]")]
    MuRange(usize),
    #[error("final decision {decision} out of range for {len} labels")]
    DecisionOutOfRange { decision: usize, len: usize },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("transcript line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The full record of one debate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub answer_space: AnswerSpace,
    pub protocol: Protocol,
    pub rounds: Vec<RoundSnapshot>,
    pub final_decision: usize,
    /// `mu_t`, the aggregate belief on the truth after round `t` (entry 0
    /// is the initial state). Present only when the truth is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_series: Option<Vec<f64>>,
}

impl Transcript {
    pub fn validate(&self) -> Result<(), TranscriptError> {
        for (i, pair) in self.rounds.windows(2).enumerate() {
            if pair[1].round <= pair[0].round {
                return Err(TranscriptError::UnorderedRounds(i + 1));
            }
        }
        for snap in &self.rounds {
            snap.validate()?;
        }
        if self.final_decision >= self.answer_space.len() {
            return Err(TranscriptError::DecisionOutOfRange {
                decision: self.final_decision,
                len: self.answer_space.len(),
            });
        }
        if let Some(mu) = &self.mu_series {
            if mu.len() != self.rounds.len() + 1 {
                return Err(TranscriptError::MuLength {
                    expected: self.rounds.len() + 1,
                    got: mu.len(),
                });
            }
            if let Some(i) = mu.iter().position(|m| !(0.0..=1.0).contains(m)) {
                return Err(TranscriptError::MuRange(i));
            }
        }
        Ok(())
    }

    /// Whether the final decision matches the truth, when the truth is known.
    pub fn correct(&self) -> Option<bool> {
        self.answer_space
            .truth_index()
            .map(|t| t == self.final_decision)
    }

    pub fn to_line(&self) -> Result<String, TranscriptError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_line(line: &str) -> Result<Self, TranscriptError> {
        let t: Transcript = serde_json::from_str(line)?;
        t.validate()?;
        Ok(t)
    }
}

/// Writes one transcript per line.
pub fn write_transcripts<'a, W: Write>(
    mut out: W,
    transcripts: impl IntoIterator<Item = &'a Transcript>,
) -> Result<(), TranscriptError> {
    for t in transcripts {
        writeln!(out, "{}", t.to_line()?)?;
    }
    Ok(())
}

/// Reads a line-delimited transcript file; blank lines are skipped.
pub fn read_transcripts<R: BufRead>(input: R) -> Result<Vec<Transcript>, TranscriptError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Transcript = serde_json::from_str(&line)
            .map_err(|source| TranscriptError::Parse { line: i + 1, source })?;
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[f64]) -> Belief {
        Belief::new(v.to_vec()).unwrap()
    }

    fn snapshot() -> RoundSnapshot {
        RoundSnapshot {
            round: 1,
            arguments: vec!["x".into()],
            self_beliefs: vec![b(&[0.2, 0.8])],
            peer_predictions: vec![Some(b(&[0.9, 0.1]))],
            scores: vec![0.8],
            weights_after: vec![1.0],
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 2.0]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(normalize(&[0.3, 0.7]).unwrap().probs(), &[0.3, 0.7]);
        assert_eq!(normalize(&[1.0, 3.0]).unwrap().probs(), &[0.25, 0.75]);
    }

    #[test]
    fn normalize_errors() {
        assert_eq!(normalize(&[0.0, 0.0]), Err(BeliefError::AllZero));
        assert_eq!(normalize(&[1.0, f64::NAN]), Err(BeliefError::NonFinite(1)));
        assert_eq!(
            normalize(&[f64::INFINITY, 1.0]),
            Err(BeliefError::NonFinite(0))
        );
        assert!(matches!(normalize(&[1.0]), Err(BeliefError::TooShort { .. })));
        assert!(matches!(
            normalize(&[1.0, -0.5]),
            Err(BeliefError::Negative { index: 1, .. })
        ));
    }

    #[test]
    fn belief_tolerance_policy() {
        let nearly = Belief::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((nearly.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(
            Belief::new(vec![0.5, 0.49]),
            Err(BeliefError::NotNormalized(_))
        ));
    }

    #[test]
    fn answer_space_invariants() {
        assert!(AnswerSpace::new(["A"], None).is_err());
        assert!(AnswerSpace::new(["A", "A"], None).is_err());
        assert!(AnswerSpace::new(["A", ""], None).is_err());
        assert!(AnswerSpace::new(["A", "B"], Some(2)).is_err());
        let s = AnswerSpace::lettered(4, Some(3)).unwrap();
        assert_eq!(s.labels(), &["A", "B", "C", "D"]);
        assert_eq!(s.index_of("C"), Some(2));
    }

    #[test]
    fn answer_space_rejects_invalid_json() {
        let bad = r#"{"labels":["A","B"],"truth_index":5}"#;
        assert!(serde_json::from_str::<AnswerSpace>(bad).is_err());
    }

    #[test]
    fn projection_clears_peer_information() {
        let p = project_to_standard(&snapshot());
        assert_eq!(p.self_beliefs, snapshot().self_beliefs);
        assert_eq!(p.arguments, snapshot().arguments);
        assert_eq!(p.peer_predictions, vec![None]);
        assert_eq!(p.scores, vec![0.0]);
        assert!(!p.has_peer_information());
    }

    #[test]
    fn projection_is_idempotent() {
        let once = project_to_standard(&snapshot());
        assert_eq!(project_to_standard(&once), once);
    }

    #[test]
    fn transcript_validation() {
        let space = AnswerSpace::new(["A", "B"], Some(0)).unwrap();
        let mut t = Transcript {
            answer_space: space,
            protocol: Protocol::AceMAD,
            rounds: vec![snapshot()],
            final_decision: 1,
            mu_series: Some(vec![0.2, 0.3]),
        };
        t.validate().unwrap();
        assert_eq!(t.correct(), Some(false));
        t.mu_series = Some(vec![0.2]);
        assert!(matches!(t.validate(), Err(TranscriptError::MuLength { .. })));
        t.mu_series = Some(vec![0.2, 1.5]);
        assert!(matches!(t.validate(), Err(TranscriptError::MuRange(1))));
        t.mu_series = None;
        t.rounds.push(snapshot());
        assert!(matches!(
            t.validate(),
            Err(TranscriptError::UnorderedRounds(1))
        ));
    }

    #[test]
    fn protocol_parsing() {
        assert_eq!("acemad".parse::<Protocol>(), Ok(Protocol::AceMAD));
        assert_eq!("standard".parse::<Protocol>(), Ok(Protocol::StandardMAD));
        assert_eq!("Majority_Vote".parse::<Protocol>(), Ok(Protocol::MajorityVote));
        assert!("nope".parse::<Protocol>().is_err());
    }
}
