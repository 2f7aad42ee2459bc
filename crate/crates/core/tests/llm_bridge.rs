mod common;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use acemad::engine::{run_debate, EngineError, ProtocolConfig};
use acemad::llm::{
    heterogeneous_mix, llm_agents, parse_commit, read_questions, ChatClient, ClientConfig,
    ClientMode, ParseError, Question,
};
use acemad::types::{AnswerSpace, Protocol, Transcript};
use common::{spawn_mock, MOCK_MODEL};
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn question() -> Question {
    read_questions(&fixture("questions.jsonl")).unwrap().remove(0)
}

fn debate(client: ChatClient) -> Result<Transcript, EngineError> {
    let q = question();
    let space = q.answer_space().unwrap();
    let mut agents = llm_agents(&q, &heterogeneous_mix(5), Arc::new(client));
    let cfg = ProtocolConfig::new(Protocol::AceMAD).with_rounds(3);
    run_debate(&mut agents, &space, &cfg, 0)
}

fn replay(path: &Path) -> ChatClient {
    ChatClient::new(ClientConfig::new("http://replay.invalid", MOCK_MODEL), ClientMode::Replay, Some(path))
        .unwrap()
}

/// Rewrites the committed replay fixture from the mock endpoint.
#[test]
#[ignore]
fn regenerate_debate_fixture() {
    let server = spawn_mock();
    let path = fixture("debate_replay.jsonl");
    let _ = std::fs::remove_file(&path);
    let client =
        ChatClient::new(ClientConfig::new(&server.url, MOCK_MODEL), ClientMode::Record, Some(&path)).unwrap();
    debate(client).unwrap();
}

#[test]
fn committed_fixture_replays_identically() {
    let path = fixture("debate_replay.jsonl");
    let a = debate(replay(&path)).unwrap().to_line().unwrap();
    let b = debate(replay(&path)).unwrap().to_line().unwrap();
    assert_eq!(a, b);
    let t = Transcript::from_line(&a).unwrap();
    assert_eq!(t.rounds.len(), 3);
    assert_eq!(t.rounds[0].n_agents(), 5);
    assert!(t.rounds.iter().all(|r| r.arguments.iter().all(|s| !s.is_empty())));
}

#[test]
fn record_then_replay_with_scrubbed_key() {
    const VAR: &str = "ACEMAD_BRIDGE_TEST_KEY";
    const SECRET: &str = "sk-test-do-not-leak-7f3a";
    std::env::set_var(VAR, SECRET);
    let server = spawn_mock();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec.jsonl");
    let mut cfg = ClientConfig::new(&server.url, MOCK_MODEL);
    cfg.api_key_env = VAR.into();

    let recorded = debate(ChatClient::new(cfg, ClientMode::Record, Some(&path)).unwrap()).unwrap();
    let replayed = debate(replay(&path)).unwrap();
    assert_eq!(recorded.to_line().unwrap(), replayed.to_line().unwrap());

    let seen = server.auth_headers.lock().unwrap();
    assert!(!seen.is_empty());
    assert!(seen.iter().all(|h| h == &format!("Bearer {SECRET}")));
    let fixture_text = std::fs::read_to_string(&path).unwrap();
    assert!(!fixture_text.contains(SECRET));
    assert!(!replayed.to_line().unwrap().contains(SECRET));
}

#[test]
fn live_mode_talks_to_the_endpoint() {
    let server = spawn_mock();
    let client = ChatClient::new(ClientConfig::new(&server.url, MOCK_MODEL), ClientMode::Live, None).unwrap();
    let t = debate(client).unwrap();
    // the skeptic's forecast of the crowd earns it weight
    assert!(t.rounds[2].weights_after[4] > 0.2);
}

#[test]
fn missing_key_variable_is_fatal() {
    let server = spawn_mock();
    let mut cfg = ClientConfig::new(&server.url, MOCK_MODEL);
    cfg.api_key_env = "ACEMAD_SURELY_UNSET_VARIABLE".into();
    let err = debate(ChatClient::new(cfg, ClientMode::Live, None).unwrap()).unwrap_err();
    assert!(matches!(err, EngineError::AgentFailure { round: 0, .. }), "{err}");
}

#[test]
fn replay_miss_names_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    let err = debate(replay(&path)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("no recorded response for request"), "{msg}");
}

#[derive(Deserialize)]
struct Case {
    name: String,
    raw: String,
    expect: String,
    #[serde(default)]
    self_prob: Vec<f64>,
    #[serde(default)]
    peer_prediction: Vec<f64>,
}

#[test]
fn malformed_corpus() {
    let text = std::fs::read_to_string(fixture("malformed_commits.json")).unwrap();
    let cases: Vec<Case> = serde_json::from_str(&text).unwrap();
    assert!(cases.len() >= 10);
    let space = AnswerSpace::lettered(3, None).unwrap();
    for c in cases {
        let got = parse_commit(&c.raw, &space);
        match (c.expect.as_str(), got) {
            ("ok", Ok(p)) => {
                for k in 0..3 {
                    assert!((p.self_prob.get(k) - c.self_prob[k]).abs() < 1e-12, "{}", c.name);
                    assert!((p.peer_prediction.get(k) - c.peer_prediction[k]).abs() < 1e-12, "{}", c.name);
                }
            }
            ("NoJsonFound", Err(ParseError::NoJsonFound))
            | ("AllZero", Err(ParseError::AllZero { .. }))
            | ("MissingField", Err(ParseError::MissingField(_)))
            | ("BadValue", Err(ParseError::BadValue { .. })) => {}
            (want, got) => panic!("{}: wanted {want}, got {got:?}", c.name),
        }
    }
}
