//! Deterministic scripted mocks for every gateway role.
//!
//! A scripted role matches each request against its entries in order and
//! answers with the first hit; an unmatched request is an explicit error,
//! never a silent default. Entries can also inject failures so fallback
//! paths are testable. Every call, matched or not, lands in the shared
//! call log.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{parse_judge_score, Gateway, GatewayError, GenerateRequest, JudgeRequest, Role};
use crate::index::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Any,
    Contains(String),
    ContainsAll(Vec<String>),
    Exact(String),
}

impl Matcher {
    pub fn matches(&self, request: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Contains(needle) => request.contains(needle),
            Matcher::ContainsAll(needles) => needles.iter().all(|n| request.contains(n)),
            Matcher::Exact(text) => request == text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockResponse {
    Text(String),
    /// Injected transport failure, for exercising fallback paths.
    Fail(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub response: MockResponse,
}

impl ScriptEntry {
    pub fn text(matcher: Matcher, response: impl Into<String>) -> Self {
        Self {
            matcher,
            response: MockResponse::Text(response.into()),
        }
    }

    pub fn fail(matcher: Matcher, detail: impl Into<String>) -> Self {
        Self {
            matcher,
            response: MockResponse::Fail(detail.into()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerateBehavior {
    /// Return the prompt unchanged.
    #[default]
    Echo,
    Const(String),
    Scripted(Vec<ScriptEntry>),
    Fail(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedBehavior {
    /// Deterministic content-hash projection: identical texts get
    /// identical vectors, distinct texts almost surely differ.
    Hashing { dim: usize },
    /// Exact text -> vector map; missing text is a script error.
    Map(BTreeMap<String, Vec<f64>>),
    Fail(String),
}

impl Default for EmbedBehavior {
    fn default() -> Self {
        EmbedBehavior::Hashing { dim: 32 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankBehavior {
    /// Score = count of distinct words shared with the query.
    #[default]
    LexicalOverlap,
    /// All scores zero; downstream tie-breaks keep input order.
    Identity,
    /// Score = passage position, so descending sort reverses input order.
    Reverse,
    Scripted(Vec<(Matcher, Vec<f64>)>),
    Fail(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeBehavior {
    /// Raw response text, run through the shared score parser.
    ConstText(String),
    Scripted(Vec<ScriptEntry>),
    Fail(String),
}

impl Default for JudgeBehavior {
    fn default() -> Self {
        JudgeBehavior::ConstText("{\"score\": 5}".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub role: Role,
    pub request: String,
}

#[derive(Debug, Default)]
pub struct MockGateway {
    pub generate_behavior: GenerateBehavior,
    pub embed_behavior: EmbedBehavior,
    pub rerank_behavior: RerankBehavior,
    pub judge_behavior: JudgeBehavior,
    call_log: Mutex<Vec<CallRecord>>,
}

impl MockGateway {
    pub fn echo() -> Self {
        Self::default()
    }

    pub fn with_generate(mut self, behavior: GenerateBehavior) -> Self {
        self.generate_behavior = behavior;
        self
    }

    pub fn with_embed(mut self, behavior: EmbedBehavior) -> Self {
        self.embed_behavior = behavior;
        self
    }

    pub fn with_rerank(mut self, behavior: RerankBehavior) -> Self {
        self.rerank_behavior = behavior;
        self
    }

    pub fn with_judge(mut self, behavior: JudgeBehavior) -> Self {
        self.judge_behavior = behavior;
        self
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.call_log.lock().expect("call log lock").clone()
    }

    pub fn calls_for(&self, role: Role) -> usize {
        self.call_log
            .lock()
            .expect("call log lock")
            .iter()
            .filter(|r| r.role == role)
            .count()
    }

    pub fn total_calls(&self) -> usize {
        self.call_log.lock().expect("call log lock").len()
    }

    fn record(&self, role: Role, request: &str) {
        self.call_log.lock().expect("call log lock").push(CallRecord {
            role,
            request: request.to_string(),
        });
    }

    fn scripted_text(
        entries: &[ScriptEntry],
        role: Role,
        request: &str,
    ) -> Result<String, GatewayError> {
        for entry in entries {
            if entry.matcher.matches(request) {
                return match &entry.response {
                    MockResponse::Text(text) => Ok(text.clone()),
                    MockResponse::Fail(detail) => Err(GatewayError::Transport {
                        role,
                        detail: detail.clone(),
                    }),
                };
            }
        }
        Err(GatewayError::Script {
            role,
            detail: truncate_for_log(request),
        })
    }
}

fn truncate_for_log(request: &str) -> String {
    let mut s: String = request.chars().take(160).collect();
    if s.len() < request.len() {
        s.push_str("...");
    }
    s
}

/// Deterministic pseudo-embedding from a content hash.
pub fn hashing_embedding(text: &str, dim: usize) -> EmbeddingVector<f32> {
    let digest = Sha256::digest(text.as_bytes());
    let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingVector::new((0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
}

impl Gateway for MockGateway {
    fn generate(&self, request: &GenerateRequest) -> Result<String, GatewayError> {
        self.record(Role::Generate, &request.prompt);
        match &self.generate_behavior {
            GenerateBehavior::Echo => Ok(request.prompt.clone()),
            GenerateBehavior::Const(text) => Ok(text.clone()),
            GenerateBehavior::Scripted(entries) => {
                Self::scripted_text(entries, Role::Generate, &request.prompt)
            }
            GenerateBehavior::Fail(detail) => Err(GatewayError::Transport {
                role: Role::Generate,
                detail: detail.clone(),
            }),
        }
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f32>>, GatewayError> {
        self.record(Role::Embed, &texts.join("\u{1f}"));
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let vectors: Vec<EmbeddingVector<f32>> = match &self.embed_behavior {
            EmbedBehavior::Hashing { dim } => {
                texts.iter().map(|t| hashing_embedding(t, *dim)).collect()
            }
            EmbedBehavior::Map(map) => {
                let mut out = Vec::with_capacity(texts.len());
                for text in texts {
                    let values = map.get(text).ok_or_else(|| GatewayError::Script {
                        role: Role::Embed,
                        detail: truncate_for_log(text),
                    })?;
                    out.push(EmbeddingVector::from_f64_slice(values));
                }
                out
            }
            EmbedBehavior::Fail(detail) => {
                return Err(GatewayError::Transport {
                    role: Role::Embed,
                    detail: detail.clone(),
                })
            }
        };
        let dim = vectors[0].dim();
        if vectors.iter().any(|v| v.dim() != dim) {
            return Err(GatewayError::BatchShape {
                detail: "embedding dimensions differ across batch".into(),
            });
        }
        Ok(vectors)
    }

    fn rerank(&self, query: &str, passages: &[String]) -> Result<Vec<f64>, GatewayError> {
        self.record(Role::Rerank, query);
        let scores = match &self.rerank_behavior {
            RerankBehavior::LexicalOverlap => {
                let query_words: std::collections::HashSet<String> = query
                    .split_whitespace()
                    .map(|w| w.to_lowercase())
                    .collect();
                passages
                    .iter()
                    .map(|p| {
                        p.split_whitespace()
                            .map(|w| w.to_lowercase())
                            .collect::<std::collections::HashSet<_>>()
                            .intersection(&query_words)
                            .count() as f64
                    })
                    .collect()
            }
            RerankBehavior::Identity => vec![0.0; passages.len()],
            RerankBehavior::Reverse => (0..passages.len()).map(|i| i as f64).collect(),
            RerankBehavior::Scripted(entries) => {
                let hit = entries.iter().find(|(m, _)| m.matches(query));
                match hit {
                    Some((_, scores)) => scores.clone(),
                    None => {
                        return Err(GatewayError::Script {
                            role: Role::Rerank,
                            detail: truncate_for_log(query),
                        })
                    }
                }
            }
            RerankBehavior::Fail(detail) => {
                return Err(GatewayError::Transport {
                    role: Role::Rerank,
                    detail: detail.clone(),
                })
            }
        };
        if scores.len() != passages.len() {
            return Err(GatewayError::BatchShape {
                detail: format!(
                    "{} scores for {} passages",
                    scores.len(),
                    passages.len()
                ),
            });
        }
        Ok(scores)
    }

    fn judge(&self, request: &JudgeRequest) -> Result<u8, GatewayError> {
        let canonical = request.canonical();
        self.record(Role::Judge, &canonical);
        let raw = match &self.judge_behavior {
            JudgeBehavior::ConstText(text) => text.clone(),
            JudgeBehavior::Scripted(entries) => {
                Self::scripted_text(entries, Role::Judge, &canonical)?
            }
            JudgeBehavior::Fail(detail) => {
                return Err(GatewayError::Transport {
                    role: Role::Judge,
                    detail: detail.clone(),
                })
            }
        };
        parse_judge_score(&raw).map_err(|detail| GatewayError::Parse {
            role: Role::Judge,
            detail,
        })
    }
}
