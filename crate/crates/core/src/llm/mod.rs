//! Chat-model agents: prompts, reply parsing and an HTTP client that can
//! record and replay its traffic.

mod agent;
mod client;
mod parse;
mod prompt;

pub use agent::{heterogeneous_mix, llm_agents, LlmAgent, LlmAgentConfig};
pub use client::{
    extract_content, ChatClient, ChatRequest, ClientConfig, ClientError, ClientMode, FixtureStore,
};
pub use parse::{first_json_object, parse_commit, CommitPayload, ParseError};
pub use prompt::{
    format_history, options_str, read_questions, render_messages, render_prompt, ChatMessage,
    Persona, Phase, Question, QuestionError, EMPTY_HISTORY, GENERALIST, SKEPTIC,
};
