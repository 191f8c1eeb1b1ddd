//! Single abstraction over all external model services.
//!
//! Chat generation, embedding, reranking and judging all go through the
//! [`Gateway`] trait. The HTTP implementation speaks a chat-completions
//! wire shape for generate/judge, `{texts} -> {vectors}` for embed and
//! `{query, passages} -> {scores}` for rerank. Every caller can also run
//! against [`MockGateway`], whose scripted behaviors are deterministic
//! and log every call, so no test needs a network.

mod http;
mod mock;
mod prompts;

pub use http::{HttpGateway, HttpGatewayConfig, RoleEndpoint};
pub use mock::{
    hashing_embedding, CallRecord, EmbedBehavior, GenerateBehavior, JudgeBehavior, Matcher,
    MockGateway, MockResponse, RerankBehavior, ScriptEntry,
};
pub use prompts::{PromptAssets, REQUIRED_PROMPTS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generate,
    Embed,
    Rerank,
    Judge,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Role::Generate => "generate",
            Role::Embed => "embed",
            Role::Rerank => "rerank",
            Role::Judge => "judge",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{role} call timed out after {after_ms} ms")]
    Timeout { role: Role, after_ms: u64 },
    #[error("{role} endpoint returned HTTP {status}")]
    Http { role: Role, status: u16 },
    #[error("{role} transport failure: {detail}")]
    Transport { role: Role, detail: String },
    #[error("{role} response malformed: {detail}")]
    Malformed { role: Role, detail: String },
    #[error("{role} response unparsable: {detail}")]
    Parse { role: Role, detail: String },
    #[error("scripted mock has no entry matching {role} request: {detail}")]
    Script { role: Role, detail: String },
    #[error("{role} role not configured")]
    Unconfigured { role: Role },
    #[error("batch shape invalid: {detail}")]
    BatchShape { detail: String },
    #[error("unknown prompt asset {0:?}")]
    UnknownPrompt(String),
}

/// Generation request: a fully rendered prompt plus decoding params.
#[derive(Debug, Clone, Default)]
pub struct GenerateRequest {
    pub prompt: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<usize>,
}

impl GenerateRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            ..Default::default()
        }
    }
}

/// Judge request; context passages are optional.
#[derive(Debug, Clone)]
pub struct JudgeRequest {
    pub question: String,
    pub answer: String,
    pub reference: String,
    pub context: Option<String>,
}

impl JudgeRequest {
    /// Canonical text a scripted judge matcher sees.
    pub fn canonical(&self) -> String {
        let mut s = format!(
            "question: {}\nanswer: {}\nreference: {}",
            self.question, self.answer, self.reference
        );
        if let Some(ctx) = &self.context {
            s.push_str("\ncontext: ");
            s.push_str(ctx);
        }
        s
    }
}

pub trait Gateway: Send + Sync {
    fn generate(&self, request: &GenerateRequest) -> Result<String, GatewayError>;
    /// One vector per input text, constant dimension across the batch.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f32>>, GatewayError>;
    /// One finite score per passage.
    fn rerank(&self, query: &str, passages: &[String]) -> Result<Vec<f64>, GatewayError>;
    /// Integer score 0..=5 parsed from the judge's structured response.
    fn judge(&self, request: &JudgeRequest) -> Result<u8, GatewayError>;
}

/// Parse a 0-5 judge score from model output. Accepts the JSON answer
/// format, a `score: N` fragment, or a bare integer.
pub fn parse_judge_score(text: &str) -> Result<u8, String> {
    let trimmed = text.trim();
    if let Some(value) = extract_json_object(trimmed) {
        if let Some(score) = value.get("score") {
            if let Some(n) = score.as_u64() {
                if n <= 5 {
                    return Ok(n as u8);
                }
                return Err(format!("score {n} out of range 0-5"));
            }
            if let Some(s) = score.as_str() {
                if let Ok(n) = s.trim().parse::<u8>() {
                    if n <= 5 {
                        return Ok(n);
                    }
                }
            }
            return Err(format!("unusable score field: {score}"));
        }
    }
    let lowered = trimmed.to_lowercase();
    if let Some(pos) = lowered.find("score") {
        let tail = &trimmed[pos + 5..];
        if let Some(digit) = tail.chars().find(|c| c.is_ascii_digit()) {
            let n = digit.to_digit(10).unwrap() as u8;
            if n <= 5 {
                return Ok(n);
            }
            return Err(format!("score {n} out of range 0-5"));
        }
    }
    if let Ok(n) = trimmed.parse::<u8>() {
        if n <= 5 {
            return Ok(n);
        }
        return Err(format!("score {n} out of range 0-5"));
    }
    Err(format!("no score found in {trimmed:?}"))
}

/// First balanced JSON object embedded in the text, if any.
pub fn extract_json_object(text: &str) -> Option<serde_json::Value> {
    let bytes = text.as_bytes();
    let start = bytes.iter().position(|&b| b == b'{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return serde_json::from_str(&text[start..=i]).ok();
                }
            }
            _ => {}
        }
    }
    None
}
