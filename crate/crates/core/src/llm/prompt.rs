//! Prompt templates and question files.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AnswerSpace, AnswerSpaceError, RoundSnapshot};

pub const GENERALIST: &str =
    "You are a helpful assistant. You trust common knowledge and consensus.";
pub const SKEPTIC: &str = "You are a strict skeptic. You actively look for common misconceptions and logical traps. You suspect the majority might be wrong.";
pub const EMPTY_HISTORY: &str = "(no prior discussion)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Persona {
    Generalist,
    Skeptic,
    Custom(String),
}

impl Persona {
    pub fn system_line(&self) -> &str {
        match self {
            Persona::Generalist => GENERALIST,
            Persona::Skeptic => SKEPTIC,
            Persona::Custom(text) => text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Argue,
    Commit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

/// One multiple-choice item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub question: String,
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_index: Option<usize>,
}

#[derive(Debug, Error)]
pub enum QuestionError {
    #[error("question file line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("question '{id}': {source}")]
    Space { id: String, source: AnswerSpaceError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Question {
    /// Options are labelled A, B, C, ... in order.
    pub fn answer_space(&self) -> Result<AnswerSpace, QuestionError> {
        AnswerSpace::lettered(self.options.len(), self.answer_index).map_err(|source| {
            QuestionError::Space { id: self.id.clone(), source }
        })
    }
}

/// Reads one question per line; blank lines are skipped.
pub fn read_questions(path: &Path) -> Result<Vec<Question>, QuestionError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q: Question = serde_json::from_str(&line)
            .map_err(|source| QuestionError::Parse { line: i + 1, source })?;
        q.answer_space()?;
        out.push(q);
    }
    Ok(out)
}

pub fn options_str(space: &AnswerSpace, options: &[String]) -> String {
    space
        .labels()
        .iter()
        .zip(options)
        .map(|(l, o)| format!("{l}. {o}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Round-tagged, speaker-labelled blocks. `own` marks the reader's index;
/// `current` is an extra `(round, agent, text)` entry appended at the end.
pub fn format_history(
    history: &[RoundSnapshot],
    own: usize,
    current: Option<(usize, &str)>,
) -> String {
    let mut out = String::new();
    let speaker = |i: usize| {
        if i == own {
            format!("Agent {} (you)", i + 1)
        } else {
            format!("Agent {}", i + 1)
        }
    };
    for snap in history {
        for (i, arg) in snap.arguments.iter().enumerate() {
            if arg.is_empty() {
                continue;
            }
            let _ = writeln!(out, "[Round {}] {}: {}", snap.round, speaker(i), arg.trim());
        }
    }
    if let Some((round, text)) = current {
        let _ = writeln!(out, "[Round {round}] {}: {}", speaker(own), text.trim());
    }
    if out.is_empty() {
        EMPTY_HISTORY.to_string()
    } else {
        out.trim_end().to_string()
    }
}

fn body(phase: Phase, question: &str, options: &str, history: &str) -> String {
    match phase {
        Phase::Argue => format!(
            "Question: {question}\n\nOptions:\n{options}\n\nConversation History:\n{history}\n\n\
             Please provide a concise argument for what you believe is the correct answer.\n\
             Do NOT output JSON here. Just natural language debate."
        ),
        Phase::Commit => format!(
            "Question: {question}\nOptions:\n{options}\n\nConversation History:\n{history}\n\n\
             Task:\n\n\
             1. Self_Prob: Assign probability (0.0-1.0) to options based on your belief.\n\n\
             2. Peer_Prediction: Predict the AVERAGE probability distribution of the OTHER agents in this conversation.\n\
             (Critically: If others are 'Generalists', they might fall for common misconceptions. Predict their likely errors.)\n\n\
             Output JSON:\n{{\n    \"self_prob\": {{\"A\": 0.1, ...}},\n    \"peer_prediction\": {{\"A\": 0.3, ...}}\n}}"
        ),
    }
}

/// System line for the persona, then the phase template.
pub fn render_messages(
    phase: Phase,
    question: &str,
    options: &str,
    history: &str,
    persona: &Persona,
) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(persona.system_line()),
        ChatMessage::user(body(phase, question, options, history)),
    ]
}

/// The rendered messages joined into one string.
pub fn render_prompt(
    phase: Phase,
    question: &str,
    options: &str,
    history: &str,
    persona: &Persona,
) -> String {
    render_messages(phase, question, options, history, persona)
        .into_iter()
        .map(|m| m.content)
        .collect::<Vec<_>>()
        .join("\n\n")
}
