//! Chat-completions client with record and replay.
//!
//! Requests are keyed by the SHA-256 of the JSON body (model, messages,
//! temperature). Credentials travel only in the HTTP header and never reach
//! the key, the fixture file or the logs.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompt::ChatMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientMode {
    Live,
    Record,
    Replay,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("no recorded response for request {0}")]
    FixtureMiss(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
    #[error("fixture file {path}: {source}")]
    Fixture {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("fixture file {path}, line {line}: {source}")]
    FixtureParse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

/// Request body as sent on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn hash(&self) -> String {
        let body = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&body))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRecord {
    request_hash: String,
    request: ChatRequest,
    response: String,
}

/// Line-delimited `(request hash, response)` records.
#[derive(Debug)]
pub struct FixtureStore {
    path: PathBuf,
    entries: Mutex<HashMap<String, String>>,
    writer: Mutex<Option<File>>,
}

impl FixtureStore {
    /// Loads `path` if it exists; a missing file is an empty store.
    pub fn open(path: &Path) -> Result<Self, ClientError> {
        let io = |source| ClientError::Fixture {
            path: path.to_path_buf(),
            source,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: FixtureRecord =
                    serde_json::from_str(&line).map_err(|source| ClientError::FixtureParse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        source,
                    })?;
                entries.entry(rec.request_hash).or_insert(rec.response);
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn get(&self, hash: &str) -> Option<String> {
        self.entries.lock().expect("fixture map").get(hash).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("fixture map").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a record unless the hash is already stored.
    pub fn insert(&self, request: &ChatRequest, response: &str) -> Result<(), ClientError> {
        let hash = request.hash();
        {
            let mut entries = self.entries.lock().expect("fixture map");
            if entries.contains_key(&hash) {
                return Ok(());
            }
            entries.insert(hash.clone(), response.to_string());
        }
        let io = |source| ClientError::Fixture {
            path: self.path.clone(),
            source,
        };
        let mut writer = self.writer.lock().expect("fixture writer");
        if writer.is_none() {
            *writer = Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&self.path)
                    .map_err(io)?,
            );
        }
        let rec = FixtureRecord {
            request_hash: hash,
            request: request.clone(),
            response: response.to_string(),
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        let file = writer.as_mut().expect("writer opened above");
        writeln!(file, "{line}").and_then(|_| file.flush()).map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the variable holding the bearer token. Empty means no auth.
    #[serde(default)]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

fn default_in_flight() -> usize {
    8
}

impl ClientConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            api_key_env: String::new(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot count");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot count");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot count") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct ChatClient {
    config: ClientConfig,
    mode: ClientMode,
    fixtures: Option<FixtureStore>,
    http: Option<reqwest::blocking::Client>,
    slots: Slots,
}

impl ChatClient {
    /// `fixture` is required for record and replay, ignored for live.
    pub fn new(
        config: ClientConfig,
        mode: ClientMode,
        fixture: Option<&Path>,
    ) -> Result<Self, ClientError> {
        let fixtures = match (mode, fixture) {
            (ClientMode::Live, _) => None,
            (_, Some(p)) => Some(FixtureStore::open(p)?),
            (_, None) => {
                return Err(ClientError::Fixture {
                    path: PathBuf::new(),
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "record and replay need a fixture path",
                    ),
                })
            }
        };
        let http = match mode {
            ClientMode::Replay => None,
            _ => Some(
                reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs_f64(config.timeout_secs))
                    .build()
                    .map_err(|e| ClientError::Transport(e.to_string()))?,
            ),
        };
        let slots = Slots {
            free: Mutex::new(config.max_in_flight.max(1)),
            cv: Condvar::new(),
        };
        Ok(Self {
            config,
            mode,
            fixtures,
            http,
            slots,
        })
    }

    pub fn mode(&self) -> ClientMode {
        self.mode
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn request(&self, messages: Vec<ChatMessage>, temperature: f64) -> ChatRequest {
        ChatRequest {
            model: self.config.model_name.clone(),
            messages,
            temperature,
        }
    }

    pub fn chat_complete(
        &self,
        messages: Vec<ChatMessage>,
        temperature: f64,
    ) -> Result<String, ClientError> {
        let request = self.request(messages, temperature);
        if self.mode == ClientMode::Replay {
            let hash = request.hash();
            return self
                .fixtures
                .as_ref()
                .and_then(|f| f.get(&hash))
                .ok_or(ClientError::FixtureMiss(hash));
        }
        if let Some(hit) = self.fixtures.as_ref().and_then(|f| f.get(&request.hash())) {
            return Ok(hit);
        }
        let response = self.send_with_retries(&request)?;
        if let Some(store) = &self.fixtures {
            store.insert(&request, &response)?;
        }
        Ok(response)
    }

    fn send_with_retries(&self, request: &ChatRequest) -> Result<String, ClientError> {
        let mut attempt = 0;
        loop {
            match self.send(request) {
                Err(e @ (ClientError::Timeout | ClientError::Transport(_)))
                    if attempt < self.config.max_retries =>
                {
                    log::warn!("request failed ({e}), retrying");
                }
                Err(ClientError::Http { status, body })
                    if status >= 500 && attempt < self.config.max_retries =>
                {
                    log::warn!("HTTP {status}, retrying: {body}");
                }
                other => return other,
            }
            attempt += 1;
        }
    }

    fn send(&self, request: &ChatRequest) -> Result<String, ClientError> {
        let http = self.http.as_ref().expect("live client has http");
        let url = format!(
            "{}/chat/completions",
            self.config.endpoint_url.trim_end_matches('/')
        );
        let mut builder = http
            .post(&url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(serde_json::to_vec(request).expect("request serializes"));
        if !self.config.api_key_env.is_empty() {
            let key = std::env::var(&self.config.api_key_env)
                .map_err(|_| ClientError::MissingApiKey(self.config.api_key_env.clone()))?;
            builder = builder.bearer_auth(key);
        }
        let _slot = self.slots.acquire();
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() {
                ClientError::Timeout
            } else {
                ClientError::Transport(e.without_url().to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                ClientError::Timeout
            } else {
                ClientError::Transport(e.without_url().to_string())
            }
        })?;
        if !status.is_success() {
            return Err(ClientError::Http {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        extract_content(&text)
    }
}

/// `choices[0].message.content` of a chat-completions response.
pub fn extract_content(body: &str) -> Result<String, ClientError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ClientError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_owned)
        .ok_or_else(|| ClientError::BadResponse("missing choices[0].message.content".into()))
}
