//! Commitment parsing with light repair.
//!
//! The first JSON object in the reply is used. Labels are matched loosely
//! (`"a"`, `"(A)"`, `"A."` all mean `A`), missing labels get zero mass,
//! unknown labels are dropped with a warning, and both distributions are
//! renormalized.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::types::{normalize, AnswerSpace, Belief, BeliefError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no JSON object found in reply")]
    NoJsonFound,
    #[error("field '{0}' is missing or not an object")]
    MissingField(&'static str),
    #[error("field '{field}' has no mass on any known label")]
    AllZero { field: &'static str },
    #[error("field '{field}', label '{label}': {reason}")]
    BadValue {
        field: &'static str,
        label: String,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitPayload {
    pub self_prob: Belief,
    pub peer_prediction: Belief,
    pub raw_text: String,
}

impl CommitPayload {
    /// The payload in reply format, keyed by label.
    pub fn to_json(&self, space: &AnswerSpace) -> String {
        let map = |b: &Belief| {
            Value::Object(
                space
                    .labels()
                    .iter()
                    .zip(b.probs())
                    .map(|(l, p)| (l.clone(), Value::from(*p)))
                    .collect(),
            )
        };
        serde_json::json!({
            "self_prob": map(&self.self_prob),
            "peer_prediction": map(&self.peer_prediction),
        })
        .to_string()
    }
}

/// First `{...}` in `raw` that parses as a JSON object.
pub fn first_json_object(raw: &str) -> Option<Map<String, Value>> {
    raw.match_indices('{').find_map(|(start, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => Some(map),
            _ => None,
        }
    })
}

fn canonical(label: &str) -> String {
    label
        .trim()
        .trim_matches(|c: char| matches!(c, '(' | ')' | '.' | ':' | '"' | '\''))
        .trim()
        .to_ascii_uppercase()
}

fn distribution(
    obj: &Map<String, Value>,
    field: &'static str,
    space: &AnswerSpace,
) -> Result<Belief, ParseError> {
    let inner = obj
        .get(field)
        .and_then(Value::as_object)
        .ok_or(ParseError::MissingField(field))?;
    let wanted: Vec<String> = space.labels().iter().map(|l| canonical(l)).collect();
    let mut mass = vec![0.0; space.len()];
    for (key, value) in inner {
        let Some(slot) = wanted.iter().position(|w| *w == canonical(key)) else {
            log::warn!("dropping unknown label '{key}' in {field}");
            continue;
        };
        let bad = |reason: &str| ParseError::BadValue {
            field,
            label: key.clone(),
            reason: reason.to_string(),
        };
        let v = match value {
            Value::Number(n) => n.as_f64().ok_or_else(|| bad("not a finite number"))?,
            Value::String(s) => s
                .trim()
                .trim_end_matches('%')
                .parse::<f64>()
                .map_err(|_| bad("not a number"))?,
            _ => return Err(bad("not a number")),
        };
        mass[slot] += v;
    }
    normalize(&mass).map_err(|e| match e {
        BeliefError::AllZero => ParseError::AllZero { field },
        other => ParseError::BadValue {
            field,
            label: "*".into(),
            reason: other.to_string(),
        },
    })
}

pub fn parse_commit(raw: &str, space: &AnswerSpace) -> Result<CommitPayload, ParseError> {
    let obj = first_json_object(raw).ok_or(ParseError::NoJsonFound)?;
    Ok(CommitPayload {
        self_prob: distribution(&obj, "self_prob", space)?,
        peer_prediction: distribution(&obj, "peer_prediction", space)?,
        raw_text: raw.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space() -> AnswerSpace {
        AnswerSpace::lettered(3, Some(0)).unwrap()
    }

    #[test]
    fn exact_payload() {
        let raw = r#"{"self_prob": {"A": 0.2, "B": 0.5, "C": 0.3}, "peer_prediction": {"A": 0.1, "B": 0.8, "C": 0.1}}"#;
        let p = parse_commit(raw, &space()).unwrap();
        assert_eq!(p.self_prob.probs(), &[0.2, 0.5, 0.3]);
        assert_eq!(p.peer_prediction.probs(), &[0.1, 0.8, 0.1]);
        assert_eq!(p.raw_text, raw);
    }

    #[test]
    fn renormalizes_short_sum() {
        let raw = r#"{"self_prob": {"A": 0.49, "B": 0.49, "C": 0.0}, "peer_prediction": {"A": 0.5, "B": 0.5, "C": 0.0}}"#;
        let p = parse_commit(raw, &space()).unwrap();
        assert!((p.self_prob.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p.self_prob.get(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prose_wrapper_is_ignored() {
        let bare = r#"{"self_prob": {"A": 0.6, "B": 0.3, "C": 0.1}, "peer_prediction": {"A": 0.2, "B": 0.7, "C": 0.1}}"#;
        let wrapped = format!("Sure! Here is my answer:\n```json\n{bare}\n```\nHope that helps {{smile}}.");
        let a = parse_commit(bare, &space()).unwrap();
        let b = parse_commit(&wrapped, &space()).unwrap();
        assert_eq!(a.self_prob, b.self_prob);
        assert_eq!(a.peer_prediction, b.peer_prediction);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_commit("I think B.", &space()), Err(ParseError::NoJsonFound));
        assert_eq!(
            parse_commit(r#"{"self_prob": {"A": 1}}"#, &space()),
            Err(ParseError::MissingField("peer_prediction"))
        );
        assert_eq!(
            parse_commit(r#"{"self_prob": {"D": 1}, "peer_prediction": {"A": 1}}"#, &space()),
            Err(ParseError::AllZero { field: "self_prob" })
        );
        assert!(matches!(
            parse_commit(r#"{"self_prob": {"A": -1, "B": 2}, "peer_prediction": {"A": 1}}"#, &space()),
            Err(ParseError::BadValue { .. })
        ));
    }

    fn belief3() -> impl Strategy<Value = Belief> {
        prop::collection::vec(0.0f64..1.0, 3)
            .prop_filter("non-zero", |v| v.iter().sum::<f64>() > 1e-6)
            .prop_map(|v| normalize(&v).unwrap())
    }

    proptest! {
        #[test]
        fn emitted_payload_round_trips(s in belief3(), q in belief3()) {
            let payload = CommitPayload { self_prob: s, peer_prediction: q, raw_text: String::new() };
            let text = payload.to_json(&space());
            let back = parse_commit(&text, &space()).unwrap();
            for k in 0..3 {
                prop_assert!((back.self_prob.get(k) - payload.self_prob.get(k)).abs() < 1e-9);
                prop_assert!((back.peer_prediction.get(k) - payload.peer_prediction.get(k)).abs() < 1e-9);
            }
        }
    }
}
