//! Chat-completion backend with retry/backoff and cassette replay.
//!
//! Wire contract: `POST {base_url}/chat/completions` with a JSON body
//! `{model, temperature, messages: [{role, content}, ...]}` and an
//! `Authorization: Bearer <key>` header. The reply text is read from
//! `choices[0].message.content` and parsed with the translator grammar; this
//! module only moves bytes.
//!
//! Cassettes are JSON lines `{"request_hash": .., "response_body": ..}` with
//! an optional `status` (default 200). The hash is the SHA-256 of the URL, a
//! newline, and the request body; the key never enters it.

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{PathProposer, ScorerError, TaskScorer, TaskScorerQuery};
use crate::gridmap::{GridPose, OccupancyGrid};
use crate::grounded::{ActionId, Instruction};
use crate::translator::{self, StepPrompt, TranslateError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Per-attempt timeout in seconds.
    pub timeout: f64,
    pub max_retries: u32,
    pub temperature: f64,
}

impl Default for ChatEndpointConfig {
    fn default() -> Self {
        ChatEndpointConfig {
            base_url: "https://api.openai.com/v1".to_string(),
            model_name: "gpt-3.5-turbo".to_string(),
            api_key_env: "API_KEY".to_string(),
            timeout: 30.0,
            max_retries: 3,
            temperature: 0.0,
        }
    }
}

impl ChatEndpointConfig {
    pub fn validate(&self) -> Result<(), RemoteError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(RemoteError::InvalidConfig(format!(
                "timeout must be positive, got {}",
                self.timeout
            )));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(RemoteError::InvalidConfig(format!(
                "temperature {} is invalid",
                self.temperature
            )));
        }
        if self.base_url.is_empty() || self.model_name.is_empty() {
            return Err(RemoteError::InvalidConfig(
                "base_url and model_name are required".into(),
            ));
        }
        Ok(())
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn timeout_duration(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }
}

pub const BACKOFF_BASE: Duration = Duration::from_secs(1);
pub const BACKOFF_FACTOR: u32 = 2;

/// Delay before retry number `retry` (1-based): 1 s, 2 s, 4 s, ...
pub fn backoff_delay(retry: u32) -> Duration {
    BACKOFF_BASE * BACKOFF_FACTOR.saturating_pow(retry.saturating_sub(1))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("environment variable {0} with the API key is not set")]
    AuthMissing(String),
    #[error("malformed reply ({reason}): {raw:?}")]
    MalformedReply { raw: String, reason: String },
    #[error("gave up after {attempts} attempt(s); last error: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("endpoint answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("no cassette entry for request {0}")]
    CassetteMiss(String),
    #[error("cannot build prompt: {0}")]
    Prompt(#[from] TranslateError),
    #[error("invalid endpoint configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Io(String),
    #[error("request {0} not recorded")]
    NotRecorded(String),
}

pub trait ChatTransport: Send + Sync {
    fn post(&self, url: &str, api_key: &str, body: &str, timeout: Duration) -> Result<HttpResponse, TransportError>;
}

impl ChatTransport for Box<dyn ChatTransport> {
    fn post(&self, url: &str, api_key: &str, body: &str, timeout: Duration) -> Result<HttpResponse, TransportError> {
        (**self).post(url, api_key, body, timeout)
    }
}

pub fn request_hash(url: &str, body: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(url.as_bytes());
    hasher.update(b"\n");
    hasher.update(body.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Blocking HTTPS transport.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport {
            agent: ureq::AgentBuilder::new().build(),
        }
    }
}

impl ChatTransport for UreqTransport {
    fn post(&self, url: &str, api_key: &str, body: &str, timeout: Duration) -> Result<HttpResponse, TransportError> {
        let result = self
            .agent
            .post(url)
            .timeout(timeout)
            .set("Authorization", &format!("Bearer {api_key}"))
            .set("Content-Type", "application/json")
            .send_string(body);
        match result {
            Ok(resp) => {
                let status = resp.status();
                let body = resp.into_string().map_err(|e| TransportError::Io(e.to_string()))?;
                Ok(HttpResponse { status, body })
            }
            Err(ureq::Error::Status(status, resp)) => Ok(HttpResponse {
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") || msg.contains("Timeout") {
                    Err(TransportError::Timeout)
                } else {
                    Err(TransportError::Io(msg))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub request_hash: String,
    pub response_body: String,
    #[serde(default = "ok_status")]
    pub status: u16,
}

fn ok_status() -> u16 {
    200
}

/// Replays recorded responses. Repeated identical requests consume the
/// recorded responses in order; the last one is reused once they run out.
pub struct CassetteTransport {
    records: Mutex<HashMap<String, VecDeque<CassetteRecord>>>,
}

impl CassetteTransport {
    pub fn from_records(records: impl IntoIterator<Item = CassetteRecord>) -> Self {
        let mut map: HashMap<String, VecDeque<CassetteRecord>> = HashMap::new();
        for r in records {
            map.entry(r.request_hash.clone()).or_default().push_back(r);
        }
        CassetteTransport {
            records: Mutex::new(map),
        }
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<CassetteRecord>)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_records(records))
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

impl ChatTransport for CassetteTransport {
    fn post(&self, url: &str, _api_key: &str, body: &str, _timeout: Duration) -> Result<HttpResponse, TransportError> {
        let hash = request_hash(url, body);
        let mut records = self.records.lock().unwrap_or_else(|e| e.into_inner());
        let queue = records
            .get_mut(&hash)
            .ok_or_else(|| TransportError::NotRecorded(hash.clone()))?;
        let record = if queue.len() > 1 {
            queue.pop_front()
        } else {
            queue.front().cloned()
        };
        let record = record.ok_or(TransportError::NotRecorded(hash))?;
        Ok(HttpResponse {
            status: record.status,
            body: record.response_body,
        })
    }
}

/// Forwards to another transport and appends every exchange to a cassette.
pub struct RecordingTransport<T> {
    inner: T,
    path: PathBuf,
    file: Mutex<Option<File>>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T, path: impl Into<PathBuf>) -> Self {
        RecordingTransport {
            inner,
            path: path.into(),
            file: Mutex::new(None),
        }
    }

    fn append(&self, record: &CassetteRecord) -> io::Result<()> {
        let mut guard = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            *guard = Some(OpenOptions::new().create(true).append(true).open(&self.path)?);
        }
        if let Some(f) = guard.as_mut() {
            let line = serde_json::to_string(record)?;
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn post(&self, url: &str, api_key: &str, body: &str, timeout: Duration) -> Result<HttpResponse, TransportError> {
        let resp = self.inner.post(url, api_key, body, timeout)?;
        let record = CassetteRecord {
            request_hash: request_hash(url, body),
            response_body: resp.body.clone(),
            status: resp.status,
        };
        self.append(&record).map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(resp)
    }
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

pub fn request_body(cfg: &ChatEndpointConfig, prompt: &StepPrompt) -> String {
    let req = ChatRequest {
        model: &cfg.model_name,
        temperature: cfg.temperature,
        messages: vec![
            ChatMessage {
                role: "system",
                content: &prompt.system_text,
            },
            ChatMessage {
                role: "user",
                content: &prompt.user_text,
            },
        ],
    };
    // serializing plain strings and a finite float cannot fail
    serde_json::to_string(&req).unwrap_or_default()
}

pub fn extract_content(body: &str) -> Result<String, RemoteError> {
    let malformed = |reason: &str| RemoteError::MalformedReply {
        raw: body.to_string(),
        reason: reason.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| malformed(&e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| malformed("missing choices[0].message.content"))
}

/// One attempt in a call's history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    /// Sleep taken before this attempt; zero for the first one.
    pub backoff: Duration,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub content: String,
    pub attempts: Vec<Attempt>,
}

fn is_retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

type SleepFn = Box<dyn Fn(Duration) + Send + Sync>;

pub struct RemoteScorer<T = UreqTransport> {
    cfg: ChatEndpointConfig,
    api_key: String,
    transport: T,
    sleep: SleepFn,
    log: Mutex<Vec<Attempt>>,
}

impl RemoteScorer<UreqTransport> {
    /// Live client. Reads the key from `cfg.api_key_env`.
    pub fn from_env(cfg: ChatEndpointConfig) -> Result<Self, RemoteError> {
        let key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| RemoteError::AuthMissing(cfg.api_key_env.clone()))?;
        RemoteScorer::new(cfg, key, UreqTransport::default())
    }
}

impl<T: ChatTransport> RemoteScorer<T> {
    pub fn new(cfg: ChatEndpointConfig, api_key: impl Into<String>, transport: T) -> Result<Self, RemoteError> {
        cfg.validate()?;
        Ok(RemoteScorer {
            cfg,
            api_key: api_key.into(),
            transport,
            sleep: Box::new(std::thread::sleep),
            log: Mutex::new(Vec::new()),
        })
    }

    /// Replaces the real sleep used between retries.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    pub fn config(&self) -> &ChatEndpointConfig {
        &self.cfg
    }

    /// Attempts of the most recent call.
    pub fn last_attempts(&self) -> Vec<Attempt> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Sends one prompt, retrying transport failures, 429 and 5xx with
    /// exponential backoff.
    pub fn complete(&self, prompt: &StepPrompt) -> Result<ChatExchange, RemoteError> {
        let url = self.cfg.endpoint();
        let body = request_body(&self.cfg, prompt);
        let timeout = self.cfg.timeout_duration();
        let mut attempts: Vec<Attempt> = Vec::new();
        let mut last_timed_out = false;
        let mut last = String::new();

        let result = loop {
            let retry = attempts.len() as u32;
            if retry > self.cfg.max_retries {
                let n = attempts.len() as u32;
                break Err(if last_timed_out {
                    RemoteError::Timeout { attempts: n }
                } else {
                    RemoteError::RetriesExhausted {
                        attempts: n,
                        last: last.clone(),
                    }
                });
            }
            let backoff = if retry == 0 {
                Duration::ZERO
            } else {
                backoff_delay(retry)
            };
            if !backoff.is_zero() {
                (self.sleep)(backoff);
            }
            match self.transport.post(&url, &self.api_key, &body, timeout) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    attempts.push(Attempt {
                        backoff,
                        outcome: format!("HTTP {}", resp.status),
                    });
                    break extract_content(&resp.body);
                }
                Ok(resp) if is_retryable_status(resp.status) => {
                    last = format!("HTTP {}", resp.status);
                    last_timed_out = false;
                    attempts.push(Attempt {
                        backoff,
                        outcome: last.clone(),
                    });
                }
                Ok(resp) => {
                    attempts.push(Attempt {
                        backoff,
                        outcome: format!("HTTP {}", resp.status),
                    });
                    break Err(RemoteError::Http {
                        status: resp.status,
                        body: resp.body,
                    });
                }
                Err(TransportError::NotRecorded(hash)) => {
                    attempts.push(Attempt {
                        backoff,
                        outcome: "not recorded".into(),
                    });
                    break Err(RemoteError::CassetteMiss(hash));
                }
                Err(e) => {
                    last_timed_out = e == TransportError::Timeout;
                    last = e.to_string();
                    attempts.push(Attempt {
                        backoff,
                        outcome: last.clone(),
                    });
                }
            }
        };
        *self.log.lock().unwrap_or_else(|e| e.into_inner()) = attempts.clone();
        result.map(|content| ChatExchange { content, attempts })
    }

    /// Scores for the query's candidates, in the query's order.
    pub fn remote_score(&self, query: &TaskScorerQuery<'_>) -> Result<[f64; 4], RemoteError> {
        // the prompt and reply grammar use the fixed up, right, left, down order
        let mut grammar_candidates = [GridPose::new(0, 0); 4];
        for (id, c) in query.actions.iter().zip(query.candidates) {
            grammar_candidates[id.grammar_index()] = c;
        }
        let prompt =
            translator::serialize_step_prompt(query.grid, query.state, query.instruction, &grammar_candidates)?;
        let exchange = self.complete(&prompt)?;
        let parsed = translator::parse_action_scores(&exchange.content).map_err(|e| RemoteError::MalformedReply {
            raw: exchange.content.clone(),
            reason: e.to_string(),
        })?;
        Ok(query.actions.map(|id: ActionId| parsed[id.grammar_index()]))
    }
}

impl<T: ChatTransport> TaskScorer for RemoteScorer<T> {
    fn name(&self) -> &str {
        "remote"
    }

    fn score(&self, query: &TaskScorerQuery<'_>) -> Result<[f64; 4], ScorerError> {
        Ok(self.remote_score(query)?)
    }
}

impl<T: ChatTransport> PathProposer for RemoteScorer<T> {
    fn name(&self) -> &str {
        "remote"
    }

    fn propose_path(
        &self,
        grid: &OccupancyGrid,
        start: GridPose,
        instruction: &Instruction,
    ) -> Result<String, ScorerError> {
        let prompt = translator::serialize_fullpath_prompt(grid, start, instruction).map_err(RemoteError::from)?;
        Ok(self.complete(&prompt)?.content)
    }
}

/// Reads a cassette file line by line without loading it into a transport.
pub fn read_cassette(path: &Path) -> io::Result<Vec<CassetteRecord>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| l.and_then(|l| serde_json::from_str(&l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::CellState;
    use std::sync::Arc;

    fn p(x: i32, y: i32) -> GridPose {
        GridPose::new(x, y)
    }

    fn reply(content: &str) -> String {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    struct Scripted {
        responses: Mutex<VecDeque<Result<HttpResponse, TransportError>>>,
        seen: Mutex<Vec<(String, String, String)>>,
    }

    impl Scripted {
        fn new(responses: Vec<Result<HttpResponse, TransportError>>) -> Self {
            Scripted {
                responses: Mutex::new(responses.into()),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl ChatTransport for Scripted {
        fn post(&self, url: &str, key: &str, body: &str, _: Duration) -> Result<HttpResponse, TransportError> {
            self.seen.lock().unwrap().push((url.into(), key.into(), body.into()));
            self.responses
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or(Err(TransportError::Io("script exhausted".into())))
        }
    }

    fn status(code: u16, body: &str) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse {
            status: code,
            body: body.into(),
        })
    }

    fn query_parts() -> (OccupancyGrid, Instruction) {
        (
            OccupancyGrid::filled(5, 5, 1.0, CellState::Free).unwrap(),
            Instruction::new("reach the right side", p(4, 2)),
        )
    }

    fn query<'a>(grid: &'a OccupancyGrid, instruction: &'a Instruction) -> TaskScorerQuery<'a> {
        let s = p(2, 2);
        TaskScorerQuery {
            instruction,
            grid,
            state: s,
            actions: ActionId::ALL,
            candidates: ActionId::ALL.map(|a| a.action().apply(s)),
        }
    }

    fn recording_sleeper() -> (Arc<Mutex<Vec<Duration>>>, impl Fn(Duration) + Send + Sync) {
        let slept = Arc::new(Mutex::new(Vec::new()));
        let s2 = Arc::clone(&slept);
        (slept, move |d| s2.lock().unwrap().push(d))
    }

    #[test]
    fn backoff_schedule() {
        assert_eq!(backoff_delay(1), Duration::from_secs(1));
        assert_eq!(backoff_delay(2), Duration::from_secs(2));
        assert_eq!(backoff_delay(3), Duration::from_secs(4));
    }

    #[test]
    fn request_wire_format() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![status(200, &reply("scores: 0 1 0 0"))]);
        let cfg = ChatEndpointConfig {
            base_url: "http://localhost:9/v1/".into(),
            ..Default::default()
        };
        let scorer = RemoteScorer::new(cfg, "sk-test", t).unwrap();
        assert_eq!(scorer.remote_score(&query(&g, &i)).unwrap(), [0.0, 1.0, 0.0, 0.0]);
        let seen = scorer.transport.seen.lock().unwrap();
        let (url, key, body) = &seen[0];
        assert_eq!(url, "http://localhost:9/v1/chat/completions");
        assert_eq!(key, "sk-test");
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(v["model"], "gpt-3.5-turbo");
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["role"], "user");
        assert!(v["messages"][0]["content"].as_str().unwrap().contains("grammar_v1"));
        assert!(!body.contains("sk-test"));
    }

    #[test]
    fn cassette_replay() {
        let (g, i) = query_parts();
        let cfg = ChatEndpointConfig::default();
        let q = query(&g, &i);
        // default action order already matches the grammar order
        let prompt = translator::serialize_step_prompt(&g, q.state, &i, &q.candidates).unwrap();
        let hash = request_hash(&cfg.endpoint(), &request_body(&cfg, &prompt));
        let line = serde_json::to_string(&CassetteRecord {
            request_hash: hash,
            response_body: reply("scores: 0.1 0.7 0.1 0.1"),
            status: 200,
        })
        .unwrap();
        let cassette = CassetteTransport::parse(&line).unwrap();
        let scorer = RemoteScorer::new(cfg, "", cassette).unwrap();
        assert_eq!(scorer.remote_score(&q).unwrap(), [0.1, 0.7, 0.1, 0.1]);
        // replay is stateless for a single recorded answer
        assert_eq!(scorer.remote_score(&q).unwrap(), [0.1, 0.7, 0.1, 0.1]);
    }

    #[test]
    fn cassette_miss() {
        let (g, i) = query_parts();
        let scorer = RemoteScorer::new(ChatEndpointConfig::default(), "", CassetteTransport::from_records([])).unwrap();
        assert!(matches!(
            scorer.remote_score(&query(&g, &i)),
            Err(RemoteError::CassetteMiss(_))
        ));
    }

    #[test]
    fn reply_without_scores_line() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![status(200, &reply("I would go right."))]);
        let scorer = RemoteScorer::new(ChatEndpointConfig::default(), "k", t).unwrap();
        match scorer.remote_score(&query(&g, &i)) {
            Err(RemoteError::MalformedReply { raw, .. }) => assert_eq!(raw, "I would go right."),
            other => panic!("{other:?}"),
        }
        let t = Scripted::new(vec![status(200, "{\"choices\": []}")]);
        let scorer = RemoteScorer::new(ChatEndpointConfig::default(), "k", t).unwrap();
        assert!(matches!(
            scorer.remote_score(&query(&g, &i)),
            Err(RemoteError::MalformedReply { .. })
        ));
    }

    #[test]
    fn retries_server_errors_with_backoff() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![
            status(500, ""),
            status(500, ""),
            status(200, &reply("scores: 1 0 0 0")),
        ]);
        let (slept, sleeper) = recording_sleeper();
        let cfg = ChatEndpointConfig {
            max_retries: 3,
            ..Default::default()
        };
        let scorer = RemoteScorer::new(cfg, "k", t).unwrap().with_sleeper(sleeper);
        assert_eq!(scorer.remote_score(&query(&g, &i)).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            *slept.lock().unwrap(),
            vec![Duration::from_secs(1), Duration::from_secs(2)]
        );
        let log = scorer.last_attempts();
        assert_eq!(log.len(), 3);
        assert_eq!(
            log.iter().map(|a| a.backoff.as_secs()).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn rate_limit_then_exhaustion() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![status(429, ""), status(503, ""), status(502, "")]);
        let (slept, sleeper) = recording_sleeper();
        let cfg = ChatEndpointConfig {
            max_retries: 2,
            ..Default::default()
        };
        let scorer = RemoteScorer::new(cfg, "k", t).unwrap().with_sleeper(sleeper);
        assert_eq!(
            scorer.remote_score(&query(&g, &i)),
            Err(RemoteError::RetriesExhausted {
                attempts: 3,
                last: "HTTP 502".into()
            })
        );
        assert_eq!(slept.lock().unwrap().len(), 2);
    }

    #[test]
    fn timeouts_bound_total_wait() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![Err(TransportError::Timeout); 5]);
        let (slept, sleeper) = recording_sleeper();
        let cfg = ChatEndpointConfig {
            max_retries: 3,
            timeout: 2.0,
            ..Default::default()
        };
        let scorer = RemoteScorer::new(cfg, "k", t).unwrap().with_sleeper(sleeper);
        assert_eq!(
            scorer.remote_score(&query(&g, &i)),
            Err(RemoteError::Timeout { attempts: 4 })
        );
        // at most max_retries + 1 attempts, each capped by the timeout, plus 1+2+4 s backoff
        let total_backoff: Duration = slept.lock().unwrap().iter().sum();
        assert_eq!(total_backoff, Duration::from_secs(7));
        assert_eq!(scorer.transport.seen.lock().unwrap().len(), 4);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![status(401, "bad key"), status(200, &reply("scores: 1 1 1 1"))]);
        let scorer = RemoteScorer::new(ChatEndpointConfig::default(), "k", t)
            .unwrap()
            .with_sleeper(|_| panic!("must not sleep"));
        assert_eq!(
            scorer.remote_score(&query(&g, &i)),
            Err(RemoteError::Http {
                status: 401,
                body: "bad key".into()
            })
        );
    }

    #[test]
    fn missing_key() {
        let cfg = ChatEndpointConfig {
            api_key_env: "GRIDPLAN_TEST_SURELY_UNSET_KEY".into(),
            ..Default::default()
        };
        assert!(
            matches!(RemoteScorer::from_env(cfg), Err(RemoteError::AuthMissing(name)) if name == "GRIDPLAN_TEST_SURELY_UNSET_KEY")
        );
    }

    #[test]
    fn config_validation() {
        for cfg in [
            ChatEndpointConfig {
                timeout: 0.0,
                ..Default::default()
            },
            ChatEndpointConfig {
                temperature: f64::NAN,
                ..Default::default()
            },
            ChatEndpointConfig {
                base_url: String::new(),
                ..Default::default()
            },
        ] {
            assert!(matches!(
                RemoteScorer::new(cfg, "k", CassetteTransport::from_records([])),
                Err(RemoteError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn scores_reordered_for_custom_action_order() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![status(200, &reply("scores: 1 2 3 4"))]);
        let scorer = RemoteScorer::new(ChatEndpointConfig::default(), "k", t).unwrap();
        let s = p(2, 2);
        let order = [ActionId::Down, ActionId::Left, ActionId::Right, ActionId::Up];
        let q = TaskScorerQuery {
            instruction: &i,
            grid: &g,
            state: s,
            actions: order,
            candidates: order.map(|a| a.action().apply(s)),
        };
        assert_eq!(scorer.remote_score(&q).unwrap(), [4.0, 3.0, 2.0, 1.0]);
        // prompt lists moves in grammar order regardless
        let body = &scorer.transport.seen.lock().unwrap()[0].2;
        assert!(body.contains("up -> (2,1), right -> (3,2), left -> (1,2), down -> (2,3)"));
    }

    #[test]
    fn recording_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let (g, i) = query_parts();
        let live = Scripted::new(vec![status(200, &reply("scores: 0 3 0 1"))]);
        let rec = RemoteScorer::new(ChatEndpointConfig::default(), "k", RecordingTransport::new(live, &path)).unwrap();
        let first = rec.remote_score(&query(&g, &i)).unwrap();
        let records = read_cassette(&path).unwrap();
        assert_eq!(records.len(), 1);
        let replay = RemoteScorer::new(
            ChatEndpointConfig::default(),
            "",
            CassetteTransport::load(&path).unwrap(),
        )
        .unwrap();
        assert_eq!(replay.remote_score(&query(&g, &i)).unwrap(), first);
    }

    #[test]
    fn fullpath_mode_returns_reply_text() {
        let (g, i) = query_parts();
        let t = Scripted::new(vec![status(200, &reply("path: (2,2) (3,2) (4,2)"))]);
        let scorer = RemoteScorer::new(ChatEndpointConfig::default(), "k", t).unwrap();
        let text = scorer.propose_path(&g, p(2, 2), &i).unwrap();
        assert_eq!(
            translator::parse_coordinate_list(&text).unwrap().waypoints,
            vec![p(2, 2), p(3, 2), p(4, 2)]
        );
    }
}
