//! Answer orchestration and the JSON-over-HTTP service.
//!
//! One [`App`] owns the loaded indexes, the gateway, the hallucination
//! pipeline and the in-memory session store. The same `answer` path
//! serves the CLI one-shot command and the POST /answer endpoint, and
//! reports per-stage durations (rewrite, embed, retrieve, rerank,
//! generate, hallucination) on every response.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Json, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::json;

use grounded_core::conversation::{
    ApproxTokenCounter, ContextChunk, ConversationManager, ConversationState,
};
use grounded_core::gateway::{Gateway, GatewayError, GenerateRequest};
use grounded_core::hallucination::{HallucinationPipeline, RevisionTrace};
use grounded_core::retrieval::{
    KbRegistry, RetrievalCandidate, RetrievalError, RetrievalPipeline,
};

use crate::config::AppConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub rewrite_ms: f64,
    pub embed_ms: f64,
    pub retrieve_ms: f64,
    pub rerank_ms: f64,
    pub generate_ms: f64,
    pub hallucination_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Citation {
    pub chunk_id: String,
    pub kb_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub v: u32,
    pub session_id: String,
    pub answer: String,
    pub citations: Vec<Citation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revision_trace: Option<RevisionTrace>,
    pub timing: StageTimings,
    pub warnings: Vec<String>,
}

/// Sessions held in memory with least-recently-used eviction.
pub struct SessionStore {
    capacity: usize,
    sessions: HashMap<String, Arc<Mutex<ConversationState>>>,
    order: Vec<String>,
}

impl SessionStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            sessions: HashMap::new(),
            order: Vec::new(),
        }
    }

    pub fn get_or_create(&mut self, session_id: &str) -> Arc<Mutex<ConversationState>> {
        if let Some(state) = self.sessions.get(session_id) {
            let state = state.clone();
            self.touch(session_id);
            return state;
        }
        if self.sessions.len() >= self.capacity {
            let evict = self.order.remove(0);
            self.sessions.remove(&evict);
        }
        let state = Arc::new(Mutex::new(ConversationState::new(session_id)));
        self.sessions.insert(session_id.to_string(), state.clone());
        self.order.push(session_id.to_string());
        state
    }

    fn touch(&mut self, session_id: &str) {
        if let Some(pos) = self.order.iter().position(|s| s == session_id) {
            let s = self.order.remove(pos);
            self.order.push(s);
        }
    }

    #[cfg(test)]
    fn len(&self) -> usize {
        self.sessions.len()
    }
}

pub struct App {
    pub gateway: Arc<dyn Gateway>,
    pub registry: Arc<KbRegistry>,
    pub retrieval: Arc<RetrievalPipeline>,
    pub halluc: HallucinationPipeline,
    pub convo: ConversationManager,
    pub sessions: Mutex<SessionStore>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("gateway unreachable: {0}")]
    Unavailable(GatewayError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl App {
    /// Build everything from config. Call before starting an async
    /// runtime: the HTTP gateway owns a blocking client.
    pub fn from_config(config: &AppConfig, base: &Path) -> Result<Arc<Self>> {
        let gateway = config.build_gateway(base)?;
        let assets = config.prompt_assets(base)?;
        assets.validate_required()?;
        let registry = Arc::new(
            KbRegistry::load(&config.resolved_kbs(base)).context("loading kb indexes")?,
        );
        let mut retrieval_config = config.retrieval.clone();
        if retrieval_config.kbs.is_empty() {
            retrieval_config.kbs = registry.ids().map(String::from).collect();
        }
        let retrieval = Arc::new(RetrievalPipeline::new(
            registry.clone(),
            gateway.clone(),
            assets.clone(),
            retrieval_config,
        ));
        let halluc = HallucinationPipeline::new(retrieval.clone());
        let convo = ConversationManager::new(
            gateway.clone(),
            assets,
            config.budget.clone(),
            Arc::new(ApproxTokenCounter),
        );
        Ok(Arc::new(Self {
            gateway,
            registry,
            retrieval,
            halluc,
            convo,
            sessions: Mutex::new(SessionStore::new(config.service.session_capacity)),
        }))
    }

    /// Stateless retrieval: embed, per-KB candidate search, rescore,
    /// rerank, top-k.
    pub fn retrieve(
        &self,
        query: &str,
        k: Option<usize>,
        kbs: Option<Vec<String>>,
        filter: Option<String>,
    ) -> Result<(Vec<RetrievalCandidate>, Vec<String>), ServeError> {
        let mut pipeline_config = self.retrieval.config.clone();
        if let Some(k) = k {
            if k == 0 {
                return Err(ServeError::BadRequest("k must be >= 1".into()));
            }
            pipeline_config.k = k;
        }
        if let Some(kbs) = kbs {
            pipeline_config.kbs = kbs;
        }
        if let Some(filter) = filter {
            pipeline_config.filter = filter;
        }
        let pipeline = RetrievalPipeline::new(
            self.registry.clone(),
            self.gateway.clone(),
            self.retrieval.assets.clone(),
            pipeline_config,
        );
        let pool = pipeline.retrieve(query).map_err(|e| match e {
            RetrievalError::Gateway(g) => ServeError::Unavailable(g),
            other => ServeError::Retrieval(other),
        })?;
        let k = pipeline.config.k;
        let (selected, warning) = pipeline.rerank_and_select(query, pool, k);
        Ok((selected, warning.into_iter().collect()))
    }

    /// Full pipeline: rewrite, retrieve, rerank, budgeted prompt
    /// assembly, generation, hallucination check, session update.
    pub fn answer(&self, session_id: &str, query: &str) -> Result<AnswerResponse, ServeError> {
        let session = {
            let mut store = self.sessions.lock().expect("session store lock");
            store.get_or_create(session_id)
        };
        // Per-session serialization: hold the session lock for the whole
        // turn so concurrent requests to one session run in order.
        let mut state = session.lock().expect("session lock");
        let mut warnings = Vec::new();
        let mut timing = StageTimings::default();

        let started = Instant::now();
        let (rewritten, rewrite_warning) = self.retrieval.rewrite_query(query, &state.summary);
        warnings.extend(rewrite_warning);
        timing.rewrite_ms = ms_since(started);

        let started = Instant::now();
        let embedding = self.retrieval.embed_query(&rewritten).map_err(|e| match e {
            RetrievalError::Gateway(g) => ServeError::Unavailable(g),
            other => ServeError::Retrieval(other),
        })?;
        timing.embed_ms = ms_since(started);

        let started = Instant::now();
        let pool = self.retrieval.retrieve_with_embedding(&embedding)?;
        timing.retrieve_ms = ms_since(started);

        let started = Instant::now();
        let (selected, rerank_warning) =
            self.retrieval
                .rerank_and_select(&rewritten, pool, self.retrieval.config.k);
        warnings.extend(rerank_warning);
        timing.rerank_ms = ms_since(started);

        let context_chunks: Vec<ContextChunk> = selected
            .iter()
            .map(|c| ContextChunk {
                chunk_id: c.chunk_id.clone(),
                text: c.text.clone(),
                similarity: c.rerank_score.unwrap_or(c.embed_score),
            })
            .collect();
        let sections = self.convo.start_turn(&mut state, query, &context_chunks);
        warnings.extend(sections.flags.iter().cloned());

        let started = Instant::now();
        let prompt = self.convo.render_answer_prompt(&sections);
        let draft = self
            .gateway
            .generate(&GenerateRequest::new(prompt))
            .map_err(ServeError::Unavailable)?;
        timing.generate_ms = ms_since(started);

        let started = Instant::now();
        let evidence: Vec<String> = selected.iter().map(|c| c.text.clone()).collect();
        let trace = self.halluc.run(&rewritten, &draft, &evidence);
        timing.hallucination_ms = ms_since(started);

        let final_answer = trace.final_answer.clone();
        warnings.extend(trace.flags.iter().cloned());
        let citations: Vec<Citation> = selected
            .iter()
            .map(|c| Citation {
                chunk_id: c.chunk_id.clone(),
                kb_id: c.kb_id.clone(),
                score: c.rerank_score.unwrap_or(c.embed_score),
            })
            .collect();
        self.convo.complete_turn(
            &mut state,
            query,
            &final_answer,
            citations.iter().map(|c| c.chunk_id.clone()).collect(),
        );

        Ok(AnswerResponse {
            v: 1,
            session_id: session_id.to_string(),
            answer: final_answer,
            citations,
            revision_trace: Some(trace),
            timing,
            warnings,
        })
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

// HTTP layer

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RetrieveBody {
    query: String,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    kbs: Option<Vec<String>>,
    #[serde(default)]
    filter: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    query: String,
    session_id: String,
}

impl IntoResponse for ServeError {
    fn into_response(self) -> Response {
        let (status, message) = match &self {
            ServeError::BadRequest(m) => (StatusCode::BAD_REQUEST, m.clone()),
            ServeError::Unavailable(e) => (StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
            ServeError::Retrieval(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        };
        (status, Json(json!({"v": 1, "error": message}))).into_response()
    }
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/retrieve", post(retrieve_handler))
        .route("/answer", post(answer_handler))
        .with_state(app)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn retrieve_handler(
    State(app): State<Arc<App>>,
    body: Result<Json<RetrieveBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<serde_json::Value>, ServeError> {
    let Json(body) = body.map_err(|e| ServeError::BadRequest(e.to_string()))?;
    let app = app.clone();
    let result = tokio::task::spawn_blocking(move || {
        app.retrieve(&body.query, body.k, body.kbs, body.filter)
    })
    .await
    .map_err(|e| ServeError::BadRequest(format!("task join: {e}")))??;
    let (candidates, warnings) = result;
    Ok(Json(json!({
        "v": 1,
        "candidates": candidates,
        "warnings": warnings,
    })))
}

async fn answer_handler(
    State(app): State<Arc<App>>,
    body: Result<Json<AnswerBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<AnswerResponse>, ServeError> {
    let Json(body) = body.map_err(|e| ServeError::BadRequest(e.to_string()))?;
    if body.session_id.is_empty() {
        return Err(ServeError::BadRequest("session_id must be non-empty".into()));
    }
    let app = app.clone();
    let response = tokio::task::spawn_blocking(move || app.answer(&body.session_id, &body.query))
        .await
        .map_err(|e| ServeError::BadRequest(format!("task join: {e}")))??;
    Ok(Json(response))
}

/// Serve until the process is stopped.
pub fn serve_blocking(app: Arc<App>, addr: &str) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(app)).await?;
        Ok(())
    })
}
