//! JSON-over-HTTP gateway with retries and exponential backoff.
//!
//! Generate and judge speak a chat-completions shape; embed posts
//! `{model, texts}` and reads `{vectors}`; rerank posts
//! `{model, query, passages}` and reads `{scores}`. 5xx statuses,
//! transport failures and timeouts are retried up to the configured
//! count; 4xx statuses are not.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    parse_judge_score, Gateway, GatewayError, GenerateRequest, JudgeRequest, PromptAssets, Role,
};
use crate::index::EmbeddingVector;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleEndpoint {
    pub url: String,
    #[serde(default)]
    pub model: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpGatewayConfig {
    pub generate: Option<RoleEndpoint>,
    pub embed: Option<RoleEndpoint>,
    pub rerank: Option<RoleEndpoint>,
    pub judge: Option<RoleEndpoint>,
    /// Per-attempt timeout.
    pub timeout_ms: u64,
    /// Extra attempts after the first.
    pub retry: u32,
    /// Backoff before attempt n+1 is `backoff_base_ms * 2^n`.
    pub backoff_base_ms: u64,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for HttpGatewayConfig {
    fn default() -> Self {
        Self {
            generate: None,
            embed: None,
            rerank: None,
            judge: None,
            timeout_ms: 30_000,
            retry: 2,
            backoff_base_ms: 250,
            api_key: None,
        }
    }
}

pub struct HttpGateway {
    config: HttpGatewayConfig,
    assets: PromptAssets,
    client: reqwest::blocking::Client,
}

impl HttpGateway {
    /// Build the gateway. Constructing the blocking client inside an async
    /// runtime panics, so create gateways before starting one.
    pub fn new(config: HttpGatewayConfig, assets: PromptAssets) -> Result<Self, GatewayError> {
        assets.validate_required()?;
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| GatewayError::Transport {
                role: Role::Generate,
                detail: e.to_string(),
            })?;
        Ok(Self {
            config,
            assets,
            client,
        })
    }

    fn endpoint(&self, role: Role) -> Result<&RoleEndpoint, GatewayError> {
        let ep = match role {
            Role::Generate => &self.config.generate,
            Role::Embed => &self.config.embed,
            Role::Rerank => &self.config.rerank,
            Role::Judge => &self.config.judge,
        };
        ep.as_ref().ok_or(GatewayError::Unconfigured { role })
    }

    fn post_with_retry(
        &self,
        role: Role,
        url: &str,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, GatewayError> {
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let mut attempt = 0u32;
        loop {
            let mut request = self.client.post(url).json(body).timeout(timeout);
            if let Some(key) = &self.config.api_key {
                request = request.bearer_auth(key);
            }
            let err: GatewayError = match request.send() {
                Ok(response) => {
                    let status = response.status().as_u16();
                    if (200..300).contains(&status) {
                        return response
                            .json::<serde_json::Value>()
                            .map_err(|e| GatewayError::Malformed {
                                role,
                                detail: e.to_string(),
                            });
                    }
                    let err = GatewayError::Http { role, status };
                    if status >= 500 {
                        err
                    } else {
                        return Err(err);
                    }
                }
                Err(e) if e.is_timeout() => GatewayError::Timeout {
                    role,
                    after_ms: self.config.timeout_ms,
                },
                Err(e) => GatewayError::Transport {
                    role,
                    detail: e.to_string(),
                },
            };
            if attempt >= self.config.retry {
                return Err(err);
            }
            let backoff = self.config.backoff_base_ms.saturating_mul(1 << attempt);
            std::thread::sleep(Duration::from_millis(backoff));
            attempt += 1;
        }
    }

    fn chat(&self, role: Role, prompt: &str, request: &GenerateRequest) -> Result<String, GatewayError> {
        let endpoint = self.endpoint(role)?;
        let mut body = json!({
            "model": endpoint.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = request.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = request.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let value = self.post_with_retry(role, &endpoint.url, &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| GatewayError::Malformed {
                role,
                detail: "missing choices[0].message.content".into(),
            })
    }

    pub fn assets(&self) -> &PromptAssets {
        &self.assets
    }
}

impl Gateway for HttpGateway {
    fn generate(&self, request: &GenerateRequest) -> Result<String, GatewayError> {
        self.chat(Role::Generate, &request.prompt, request)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f32>>, GatewayError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let endpoint = self.endpoint(Role::Embed)?;
        let body = json!({"model": endpoint.model, "texts": texts});
        let value = self.post_with_retry(Role::Embed, &endpoint.url, &body)?;
        let raw = value["vectors"]
            .as_array()
            .ok_or_else(|| GatewayError::Malformed {
                role: Role::Embed,
                detail: "missing vectors array".into(),
            })?;
        if raw.len() != texts.len() {
            return Err(GatewayError::BatchShape {
                detail: format!("{} vectors for {} texts", raw.len(), texts.len()),
            });
        }
        let mut out = Vec::with_capacity(raw.len());
        for v in raw {
            let values: Vec<f64> = v
                .as_array()
                .ok_or_else(|| GatewayError::Malformed {
                    role: Role::Embed,
                    detail: "vector is not an array".into(),
                })?
                .iter()
                .map(|x| x.as_f64().unwrap_or(f64::NAN))
                .collect();
            out.push(EmbeddingVector::<f32>::from_f64_slice(&values));
        }
        let dim = out[0].dim();
        if out.iter().any(|v| v.dim() != dim) {
            return Err(GatewayError::BatchShape {
                detail: "embedding dimensions differ across batch".into(),
            });
        }
        Ok(out)
    }

    fn rerank(&self, query: &str, passages: &[String]) -> Result<Vec<f64>, GatewayError> {
        if passages.is_empty() {
            return Ok(Vec::new());
        }
        let endpoint = self.endpoint(Role::Rerank)?;
        let body = json!({"model": endpoint.model, "query": query, "passages": passages});
        let value = self.post_with_retry(Role::Rerank, &endpoint.url, &body)?;
        let scores: Vec<f64> = value["scores"]
            .as_array()
            .ok_or_else(|| GatewayError::Malformed {
                role: Role::Rerank,
                detail: "missing scores array".into(),
            })?
            .iter()
            .map(|x| x.as_f64().unwrap_or(f64::NAN))
            .collect();
        if scores.len() != passages.len() {
            return Err(GatewayError::BatchShape {
                detail: format!("{} scores for {} passages", scores.len(), passages.len()),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(GatewayError::Malformed {
                role: Role::Rerank,
                detail: "non-finite score".into(),
            });
        }
        Ok(scores)
    }

    fn judge(&self, request: &JudgeRequest) -> Result<u8, GatewayError> {
        let format_instructions = self.assets.get("format_instructions")?;
        let mut prompt = self.assets.render(
            "judge",
            &[
                ("question", request.question.as_str()),
                ("output", request.answer.as_str()),
                ("reference", request.reference.as_str()),
                ("format_instructions", format_instructions),
            ],
        )?;
        if let Some(ctx) = &request.context {
            prompt.push_str("\nContext: \"");
            prompt.push_str(ctx);
            prompt.push_str("\"\n");
        }
        let raw = self.chat(Role::Judge, &prompt, &GenerateRequest::default())?;
        parse_judge_score(&raw).map_err(|detail| GatewayError::Parse {
            role: Role::Judge,
            detail,
        })
    }
}
