//! Debate participants backed by a chat model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::client::{ChatClient, ClientError};
use super::parse::parse_commit;
use super::prompt::{format_history, options_str, render_messages, Persona, Phase, Question};
use crate::agents::{AgentError, AgentKind, AgentModel, AgentView, Commitment};
use crate::types::{AnswerSpace, Belief};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmAgentConfig {
    pub persona: Persona,
    pub temperature: f64,
}

impl LlmAgentConfig {
    /// Crowd member: trusting persona, near-greedy sampling.
    pub fn crowd() -> Self {
        Self {
            persona: Persona::Generalist,
            temperature: 0.1,
        }
    }

    /// Dissenting persona with more diverse sampling.
    pub fn skeptic() -> Self {
        Self {
            persona: Persona::Skeptic,
            temperature: 0.6,
        }
    }
}

/// Default mix: the last `floor(0.2 n)` agents are skeptics.
pub fn heterogeneous_mix(n: usize) -> Vec<LlmAgentConfig> {
    let skeptics = n / 5;
    (0..n)
        .map(|i| {
            if i + skeptics >= n {
                LlmAgentConfig::skeptic()
            } else {
                LlmAgentConfig::crowd()
            }
        })
        .collect()
}

pub struct LlmAgent {
    index: usize,
    question: Arc<Question>,
    config: LlmAgentConfig,
    client: Arc<ChatClient>,
}

impl LlmAgent {
    pub fn new(
        index: usize,
        question: Arc<Question>,
        config: LlmAgentConfig,
        client: Arc<ChatClient>,
    ) -> Self {
        Self {
            index,
            question,
            config,
            client,
        }
    }

    fn call(&self, phase: Phase, space: &AnswerSpace, history: &str) -> Result<String, AgentError> {
        let messages = render_messages(
            phase,
            &self.question.question,
            &options_str(space, &self.question.options),
            history,
            &self.config.persona,
        );
        self.client
            .chat_complete(messages, self.config.temperature)
            .map_err(transport)
    }

    fn commit_with(&self, space: &AnswerSpace, history: &str) -> Result<Commitment, AgentError> {
        let raw = self.call(Phase::Commit, space, history)?;
        let payload =
            parse_commit(&raw, space).map_err(|e| AgentError::InvalidCommitment(e.to_string()))?;
        Ok(Commitment {
            self_belief: payload.self_prob,
            peer_prediction: payload.peer_prediction,
        })
    }
}

fn transport(e: ClientError) -> AgentError {
    AgentError::Transport(e.to_string())
}

/// One agent per config, all answering `question`.
pub fn llm_agents(
    question: &Question,
    configs: &[LlmAgentConfig],
    client: Arc<ChatClient>,
) -> Vec<Box<dyn AgentModel>> {
    let q = Arc::new(question.clone());
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| -> Box<dyn AgentModel> {
            Box::new(LlmAgent::new(i, Arc::clone(&q), c.clone(), Arc::clone(&client)))
        })
        .collect()
}

impl AgentModel for LlmAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::LlmBacked
    }

    /// The answer to the commit prompt before any discussion.
    fn initial_belief(&mut self, space: &AnswerSpace) -> Result<Belief, AgentError> {
        let history = format_history(&[], self.index, None);
        Ok(self.commit_with(space, &history)?.self_belief)
    }

    fn argue(&mut self, view: &AgentView<'_>) -> Result<String, AgentError> {
        let history = format_history(view.history, self.index, None);
        self.call(Phase::Argue, view.space, &history)
    }

    fn commit(&mut self, view: &AgentView<'_>) -> Result<Commitment, AgentError> {
        let current = view.own_argument.map(|a| (view.round, a));
        let history = format_history(view.history, self.index, current);
        self.commit_with(view.space, &history)
    }
}
