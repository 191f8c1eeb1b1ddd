//! Application configuration: TOML file, env-var overrides for gateway
//! secrets, strict key checking, path validation at load.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use grounded_core::chunk::{ChunkConfig, FilterConfig};
use grounded_core::conversation::TokenBudget;
use grounded_core::corpus::{CleanConfig, MinHashConfig};
use grounded_core::gateway::{
    EmbedBehavior, Gateway, GenerateBehavior, HttpGateway, HttpGatewayConfig, JudgeBehavior,
    MockGateway, PromptAssets, RerankBehavior, RoleEndpoint,
};
use grounded_core::retrieval::RetrievalConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub log_level: Option<String>,
    pub gateway: GatewaySection,
    pub retrieval: RetrievalConfig,
    pub chunk: ChunkConfig,
    pub chunk_filter: FilterConfig,
    pub clean: CleanConfig,
    pub minhash: MinHashConfig,
    pub budget: TokenBudget,
    /// kb id -> index directory.
    pub kbs: BTreeMap<String, PathBuf>,
    pub service: ServiceSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    /// "mock" or "http".
    pub mode: String,
    pub timeout_ms: u64,
    pub retry: u32,
    pub backoff_base_ms: u64,
    /// Directory of prompt overrides (<id>.txt).
    pub prompt_dir: Option<PathBuf>,
    /// Mock-mode behavior script (JSON).
    pub mock_script: Option<PathBuf>,
    /// Hashing-embedder dimension in mock mode without a script.
    pub embed_dim: usize,
    pub endpoints: EndpointsSection,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            mode: "mock".into(),
            timeout_ms: 30_000,
            retry: 2,
            backoff_base_ms: 250,
            prompt_dir: None,
            mock_script: None,
            embed_dim: 32,
            endpoints: EndpointsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointsSection {
    pub generate: Option<RoleEndpoint>,
    pub embed: Option<RoleEndpoint>,
    pub rerank: Option<RoleEndpoint>,
    pub judge: Option<RoleEndpoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceSection {
    pub addr: String,
    pub session_capacity: usize,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8080".into(),
            session_capacity: 256,
        }
    }
}

/// Scripted mock behaviors, loaded from `gateway.mock_script`.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MockScript {
    pub generate: Option<GenerateBehavior>,
    pub embed: Option<EmbedBehavior>,
    pub rerank: Option<RerankBehavior>,
    pub judge: Option<JudgeBehavior>,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: AppConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config
            .validate(path.parent().unwrap_or(Path::new(".")))
            .with_context(|| format!("validating config {}", path.display()))?;
        Ok(config)
    }

    /// Paths are resolved relative to the config file location.
    fn validate(&self, base: &Path) -> Result<()> {
        for (kb, dir) in &self.kbs {
            let resolved = resolve(base, dir);
            if !resolved.is_dir() {
                bail!("kb {kb:?}: index directory {} does not exist", resolved.display());
            }
        }
        if let Some(dir) = &self.gateway.prompt_dir {
            let resolved = resolve(base, dir);
            if !resolved.is_dir() {
                bail!("gateway.prompt_dir {} does not exist", resolved.display());
            }
        }
        if let Some(script) = &self.gateway.mock_script {
            let resolved = resolve(base, script);
            if !resolved.is_file() {
                bail!("gateway.mock_script {} does not exist", resolved.display());
            }
        }
        match self.gateway.mode.as_str() {
            "mock" | "http" => {}
            other => bail!("gateway.mode must be \"mock\" or \"http\", got {other:?}"),
        }
        self.chunk.validate()?;
        Ok(())
    }

    pub fn resolved_kbs(&self, base: &Path) -> BTreeMap<String, PathBuf> {
        self.kbs
            .iter()
            .map(|(k, v)| (k.clone(), resolve(base, v)))
            .collect()
    }

    pub fn prompt_assets(&self, base: &Path) -> Result<PromptAssets> {
        Ok(match &self.gateway.prompt_dir {
            Some(dir) => PromptAssets::with_overrides(&resolve(base, dir))?,
            None => PromptAssets::default(),
        })
    }

    /// Build the configured gateway. Env vars override endpoint config:
    /// GROUNDED_API_KEY, GROUNDED_<ROLE>_URL, GROUNDED_<ROLE>_MODEL.
    pub fn build_gateway(&self, base: &Path) -> Result<Arc<dyn Gateway>> {
        let assets = self.prompt_assets(base)?;
        match self.gateway.mode.as_str() {
            "mock" => {
                let script: MockScript = match &self.gateway.mock_script {
                    Some(path) => {
                        let text = std::fs::read_to_string(resolve(base, path))?;
                        serde_json::from_str(&text).context("parsing mock_script")?
                    }
                    None => MockScript::default(),
                };
                let mut mock = MockGateway::echo();
                mock.generate_behavior = script.generate.unwrap_or_default();
                mock.embed_behavior = script.embed.unwrap_or(EmbedBehavior::Hashing {
                    dim: self.gateway.embed_dim,
                });
                mock.rerank_behavior = script.rerank.unwrap_or_default();
                mock.judge_behavior = script.judge.unwrap_or_default();
                Ok(Arc::new(mock))
            }
            "http" => {
                let e = &self.gateway.endpoints;
                let http_config = HttpGatewayConfig {
                    generate: override_endpoint(e.generate.clone(), "GENERATE"),
                    embed: override_endpoint(e.embed.clone(), "EMBED"),
                    rerank: override_endpoint(e.rerank.clone(), "RERANK"),
                    judge: override_endpoint(e.judge.clone(), "JUDGE"),
                    timeout_ms: self.gateway.timeout_ms,
                    retry: self.gateway.retry,
                    backoff_base_ms: self.gateway.backoff_base_ms,
                    api_key: std::env::var("GROUNDED_API_KEY").ok(),
                };
                Ok(Arc::new(HttpGateway::new(http_config, assets)?))
            }
            other => bail!("unknown gateway mode {other:?}"),
        }
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn override_endpoint(config: Option<RoleEndpoint>, role: &str) -> Option<RoleEndpoint> {
    let url_var = std::env::var(format!("GROUNDED_{role}_URL")).ok();
    let model_var = std::env::var(format!("GROUNDED_{role}_MODEL")).ok();
    match (config, url_var) {
        (Some(mut ep), maybe_url) => {
            if let Some(url) = maybe_url {
                ep.url = url;
            }
            if let Some(model) = model_var {
                ep.model = model;
            }
            Some(ep)
        }
        (None, Some(url)) => Some(RoleEndpoint {
            url,
            model: model_var.unwrap_or_default(),
        }),
        (None, None) => None,
    }
}
