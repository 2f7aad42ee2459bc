//! Multi-agent debate with peer-prediction weighting.
//!
//! Agents commit to a belief over a finite answer set and forecast the
//! average belief of their peers. Forecasts are scored against what the
//! peers actually committed, and the scores drive a multiplicative weight
//! update. Agents who understand how the crowd errs forecast it better and
//! gain influence, which lets a correct minority overturn a wrong majority.

pub mod agents;
pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod engine;
pub mod llm;
pub mod scoring;
pub mod stats;
pub mod types;
pub mod verify;

pub use agents::{
    generate_scenario, AgentError, AgentKind, AgentModel, AgentView, Commitment, Scenario,
    ScenarioError, ScenarioGenerator, ScenarioSpec, ScriptedAgent, SyntheticAgent,
};
pub use dynamics::{
    final_decision, linear_update, majority_vote, mwu_update, weighted_aggregate, InfluenceMatrix,
    WeightVector,
};
pub use engine::{run_debate, run_standard_variants, EngineError, ProtocolConfig};
pub use scoring::{brier_score, peer_average, score_round};
pub use types::{normalize, AnswerSpace, Belief, Protocol, RoundSnapshot, Transcript};
