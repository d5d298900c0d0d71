//! Fixture-driven stand-in for a chat-completion endpoint.
//!
//! Responses are looked up by request digest (SHA-256 over prompt and seed).
//! Requests without a canned entry fall through to a deterministic generator
//! that composes a well-formed dialogue from an utterance bank, using the
//! label map and target emotion found in the prompt text.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use async_trait::async_trait;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::{
    AttemptError, BackendReply, ChatMessage, ChatRequestBody, ChatResponseBody, Choice, CompletionBackend,
    CompletionRequest,
};

/// Hex SHA-256 of `prompt`, a NUL byte, and the decimal seed (empty if unset).
pub fn request_digest(prompt: &str, seed: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.update([0u8]);
    if let Some(s) = seed {
        h.update(s.to_string().as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Candidate casts; the first whose names all occur in the prompt is used.
    pub speaker_sets: Vec<Vec<String>>,
    pub utterances: Vec<String>,
    pub min_turns: usize,
    pub max_turns: usize,
    /// Probability of prefixing a chatty preamble line.
    #[serde(default)]
    pub preamble_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MockFixture {
    #[serde(default)]
    pub canned: BTreeMap<String, String>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    /// Inclusive latency range in milliseconds, chosen per request digest.
    #[serde(default)]
    pub latency_ms: Option<(u64, u64)>,
}

fn label_map_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d+): ([A-Za-z][A-Za-z ]*?)\s*(?:,|;|\.|$)").unwrap())
}

fn target_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"expressing ([A-Za-z][A-Za-z ]*?)\s*(?:,|;|\.|$)").unwrap())
}

fn digest_rng(digest: &str) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    if let Ok(bytes) = hex::decode(digest) {
        for (s, b) in seed.iter_mut().zip(bytes) {
            *s = b;
        }
    }
    ChaCha8Rng::from_seed(seed)
}

impl MockFixture {
    /// The fixture shipped with the crate.
    pub fn bundled() -> Self {
        serde_json::from_str(include_str!("../../fixtures/mock_fixture.json")).expect("bundled fixture parses")
    }

    pub fn from_path(path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    pub fn latency(&self, digest: &str) -> Duration {
        match self.latency_ms {
            Some((lo, hi)) if hi >= lo => {
                let mut rng = digest_rng(digest);
                Duration::from_millis(rng.random_range(lo..=hi))
            }
            _ => Duration::ZERO,
        }
    }

    pub fn respond(&self, prompt: &str, seed: Option<u64>) -> Option<String> {
        let digest = request_digest(prompt, seed);
        if let Some(text) = self.canned.get(&digest) {
            return Some(text.clone());
        }
        self.generator.as_ref().and_then(|g| g.generate(prompt, &digest))
    }
}

impl GeneratorSpec {
    fn generate(&self, prompt: &str, digest: &str) -> Option<String> {
        let labels: Vec<(usize, String)> =
            label_map_re().captures_iter(prompt).filter_map(|c| Some((c[1].parse().ok()?, c[2].to_string()))).collect();
        if labels.is_empty() || self.utterances.len() < 2 || self.speaker_sets.is_empty() {
            return None;
        }
        let target =
            target_re().captures(prompt).and_then(|c| labels.iter().find(|(_, l)| *l == c[1]).map(|(n, _)| *n));
        let lower = prompt.to_lowercase();
        let cast = self
            .speaker_sets
            .iter()
            .find(|set| set.iter().all(|s| lower.contains(&s.to_lowercase())))
            .unwrap_or(&self.speaker_sets[0]);

        let mut rng = digest_rng(digest);
        let turns = rng.random_range(self.min_turns.max(2)..=self.max_turns.max(self.min_turns.max(2)));
        let target_pos = rng.random_range(0..turns);
        let mut out = String::new();
        if rng.random_bool(self.preamble_rate.clamp(0.0, 1.0)) {
            out.push_str("Sure! Here is the conversation:\n\n");
        }
        let (mut prev_speaker, mut prev_utt) = (usize::MAX, usize::MAX);
        for i in 0..turns {
            let mut s = rng.random_range(0..cast.len());
            if cast.len() > 1 && s == prev_speaker {
                s = (s + 1) % cast.len();
            }
            let mut u = rng.random_range(0..self.utterances.len());
            if u == prev_utt {
                u = (u + 1) % self.utterances.len();
            }
            let number = match target {
                Some(t) if i == target_pos => t,
                _ => labels[rng.random_range(0..labels.len())].0,
            };
            out.push_str(&format!("Speaker: {} | Utterance: {} | Number: {number}\n", cast[s], self.utterances[u]));
            prev_speaker = s;
            prev_utt = u;
        }
        Some(out)
    }
}

/// In-process backend answering straight from a fixture.
pub struct FixtureBackend {
    fixture: MockFixture,
}

impl FixtureBackend {
    pub fn new(fixture: MockFixture) -> Self {
        Self { fixture }
    }
}

#[async_trait]
impl CompletionBackend for FixtureBackend {
    async fn send(&self, r: &CompletionRequest) -> Result<BackendReply, AttemptError> {
        self.fixture
            .respond(&r.prompt, r.params.seed)
            .map(|text| BackendReply { text, metadata: serde_json::Value::Null })
            .ok_or(AttemptError::Status { status: 404, body: "no fixture response".into() })
    }
}

/// Counters observable from tests.
#[derive(Debug, Default)]
pub struct MockStats {
    pub requests: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub peak_in_flight: AtomicUsize,
    /// The first `fail_first` requests get HTTP 503.
    pub fail_first: AtomicUsize,
}

struct MockState {
    fixture: MockFixture,
    stats: Arc<MockStats>,
}

fn chat_response(text: String, model: &str) -> ChatResponseBody {
    ChatResponseBody {
        id: Some("mock".into()),
        model: Some(model.to_string()),
        choices: vec![Choice {
            index: 0,
            message: ChatMessage { role: "assistant".into(), content: text },
            finish_reason: Some("stop".into()),
        }],
        usage: None,
    }
}

async fn handle(State(state): State<Arc<MockState>>, body: Bytes) -> Response {
    let stats = &state.stats;
    let n = stats.requests.fetch_add(1, Ordering::SeqCst);
    let cur = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    stats.peak_in_flight.fetch_max(cur, Ordering::SeqCst);
    let response = async {
        if n < stats.fail_first.load(Ordering::SeqCst) {
            return (StatusCode::SERVICE_UNAVAILABLE, "scripted failure").into_response();
        }
        let req: ChatRequestBody = match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
        };
        let prompt = req.prompt();
        let digest = request_digest(prompt, req.seed);
        tokio::time::sleep(state.fixture.latency(&digest)).await;
        match state.fixture.respond(prompt, req.seed) {
            Some(text) => Json(chat_response(text, &req.model)).into_response(),
            None => (StatusCode::NOT_FOUND, format!("no fixture response for digest {digest}")).into_response(),
        }
    }
    .await;
    stats.in_flight.fetch_sub(1, Ordering::SeqCst);
    response
}

fn router(fixture: MockFixture, stats: Arc<MockStats>) -> Router {
    let state = Arc::new(MockState { fixture, stats });
    Router::new().fallback(axum::routing::post(handle)).with_state(state)
}

/// A running mock endpoint; stops when dropped or on [`MockServer::shutdown`].
pub struct MockServer {
    pub addr: SocketAddr,
    pub stats: Arc<MockStats>,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl MockServer {
    pub async fn start(fixture: MockFixture, addr: SocketAddr) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let stats = Arc::new(MockStats::default());
        let app = router(fixture, stats.clone());
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self { addr, stats, stop: Some(tx), task: Some(task) })
    }

    /// Binds an ephemeral local port.
    pub async fn start_local(fixture: MockFixture) -> std::io::Result<Self> {
        Self::start(fixture, SocketAddr::from(([127, 0, 0, 1], 0))).await
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }

    /// Serves until the process is stopped.
    pub async fn wait(mut self) {
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}
