use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{AttemptError, BackendReply, CompletionBackend, CompletionRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub chat_path: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            chat_path: "/v1/chat/completions".to_string(),
            model: "vicuna-13b-v1.5".to_string(),
            api_key: None,
            timeout_secs: 120,
        }
    }
}

impl EndpointConfig {
    pub fn url(&self) -> String {
        let path = self.chat_path.trim_start_matches('/');
        format!("{}/{path}", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body: the standard chat-completion fields plus the sampling
/// extensions (`top_k`, `repetition_penalty`, `typical_p`, `seed`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequestBody {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub repetition_penalty: f64,
    pub typical_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stream: bool,
}

impl ChatRequestBody {
    pub fn new(model: &str, request: &CompletionRequest) -> Self {
        let p = &request.params;
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage { role: "user".into(), content: request.prompt.clone() }],
            temperature: p.temperature,
            top_p: p.top_p,
            top_k: p.top_k,
            repetition_penalty: p.repetition_penalty,
            typical_p: p.typical_p,
            seed: p.seed,
            stream: false,
        }
    }

    /// Content of the last user message.
    pub fn prompt(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == "user").map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    #[serde(default)]
    pub index: u32,
    pub message: ChatMessage,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponseBody {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    pub choices: Vec<Choice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<serde_json::Value>,
}

pub struct HttpBackend {
    client: reqwest::Client,
    config: EndpointConfig,
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, reqwest::Error> {
        let client = reqwest::Client::builder().timeout(Duration::from_secs(config.timeout_secs)).build()?;
        Ok(Self { client, config })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }
}

#[async_trait]
impl CompletionBackend for HttpBackend {
    async fn send(&self, request: &CompletionRequest) -> Result<BackendReply, AttemptError> {
        let body = ChatRequestBody::new(&self.config.model, request);
        let mut builder = self.client.post(self.config.url()).json(&body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                AttemptError::Timeout
            } else {
                AttemptError::Transport(e.to_string())
            }
        };
        let response = builder.send().await.map_err(classify)?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(AttemptError::Status { status: status.as_u16(), body: body.chars().take(500).collect() });
        }
        let bytes = response.bytes().await.map_err(classify)?;
        let parsed: ChatResponseBody =
            serde_json::from_slice(&bytes).map_err(|e| AttemptError::Malformed(e.to_string()))?;
        let choice = parsed.choices.first().ok_or_else(|| AttemptError::Malformed("no choices".into()))?;
        Ok(BackendReply {
            text: choice.message.content.clone(),
            metadata: serde_json::json!({
                "id": parsed.id,
                "model": parsed.model,
                "finish_reason": choice.finish_reason,
                "usage": parsed.usage,
            }),
        })
    }
}
