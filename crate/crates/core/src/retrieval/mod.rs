//! Retrieval orchestration: query rewriting, per-KB candidate search,
//! reranking, top-K selection.
//!
//! Each KB contributes at most `candidate_multiplier * k` candidates from
//! Hamming search plus full-precision rescoring; the pools merge into one
//! list that the reranker scores as a whole. Gateway failures fall back
//! (raw query, embed-score order) and are flagged, never fatal while the
//! pool is non-empty.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenerateRequest, PromptAssets};
use crate::index::{
    binarize, EmbeddingVector, FilterExpr, IndexError, RescoreMetric, VectorIndex,
};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("unknown kb {0:?}")]
    UnknownKb(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("embedding gateway returned {got} vectors for {expected} texts")]
    EmbeddingShape { got: usize, expected: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Final selection size.
    pub k: usize,
    /// Candidate pool per KB is `candidate_multiplier * k`.
    pub candidate_multiplier: usize,
    pub kbs: Vec<String>,
    /// Filter expression text; empty means no filter.
    pub filter: String,
    pub metric: RescoreMetric,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 10,
            candidate_multiplier: 2,
            kbs: Vec::new(),
            filter: String::new(),
            metric: RescoreMetric::Cosine,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalCandidate {
    pub chunk_id: String,
    pub kb_id: String,
    pub embed_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rerank_score: Option<f64>,
    /// 1-based position after final selection; 0 while still pooled.
    pub rank: usize,
    pub text: String,
}

/// Immutable map of loaded KB indexes.
#[derive(Default)]
pub struct KbRegistry {
    kbs: BTreeMap<String, Arc<VectorIndex<f32>>>,
}

impl KbRegistry {
    pub fn insert(&mut self, index: VectorIndex<f32>) {
        self.kbs.insert(index.kb_id().to_string(), Arc::new(index));
    }

    pub fn get(&self, kb_id: &str) -> Result<&Arc<VectorIndex<f32>>, RetrievalError> {
        self.kbs
            .get(kb_id)
            .ok_or_else(|| RetrievalError::UnknownKb(kb_id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.kbs.keys().map(|s| s.as_str())
    }

    pub fn load(paths: &BTreeMap<String, PathBuf>) -> Result<Self, RetrievalError> {
        let mut registry = Self::default();
        for (kb_id, dir) in paths {
            let index = VectorIndex::<f32>::load(Path::new(dir))?;
            registry.kbs.insert(kb_id.clone(), Arc::new(index));
        }
        Ok(registry)
    }

    pub fn chunk_text(&self, kb_id: &str, chunk_id: &str) -> Option<String> {
        let index = self.kbs.get(kb_id)?;
        index
            .entries()
            .iter()
            .find(|e| e.chunk_id == chunk_id)
            .map(|e| e.text.clone())
    }
}

pub struct RetrievalPipeline {
    pub registry: Arc<KbRegistry>,
    pub gateway: Arc<dyn Gateway>,
    pub assets: PromptAssets,
    pub config: RetrievalConfig,
}

impl RetrievalPipeline {
    pub fn new(
        registry: Arc<KbRegistry>,
        gateway: Arc<dyn Gateway>,
        assets: PromptAssets,
        config: RetrievalConfig,
    ) -> Self {
        Self {
            registry,
            gateway,
            assets,
            config,
        }
    }

    /// Gateway rewrite of the raw query given the conversation summary.
    /// On failure the raw query is used and a warning returned.
    pub fn rewrite_query(&self, raw_query: &str, summary: &str) -> (String, Option<String>) {
        let prompt = match self
            .assets
            .render("rewrite", &[("summary", summary), ("query", raw_query)])
        {
            Ok(p) => p,
            Err(e) => return (raw_query.to_string(), Some(e.to_string())),
        };
        match self.gateway.generate(&GenerateRequest::new(prompt.clone())) {
            Ok(rewritten) => {
                let rewritten = rewritten.trim().to_string();
                if rewritten.is_empty() {
                    (raw_query.to_string(), Some("empty rewrite".into()))
                } else if rewritten == prompt.trim() {
                    // A model that parrots the prompt (or an identity mock)
                    // has not rewritten anything; keep the raw query.
                    (raw_query.to_string(), None)
                } else {
                    (rewritten, None)
                }
            }
            Err(e) => (
                raw_query.to_string(),
                Some(format!("rewrite fallback: {e}")),
            ),
        }
    }

    pub fn embed_query(&self, query: &str) -> Result<EmbeddingVector<f32>, RetrievalError> {
        let vectors = self.gateway.embed(&[query.to_string()])?;
        if vectors.len() != 1 {
            return Err(RetrievalError::EmbeddingShape {
                got: vectors.len(),
                expected: 1,
            });
        }
        Ok(vectors.into_iter().next().expect("one vector"))
    }

    /// Per-KB Hamming top-(multiplier*k) plus rescoring, merged into one
    /// pool tagged by kb id.
    pub fn retrieve(&self, query: &str) -> Result<Vec<RetrievalCandidate>, RetrievalError> {
        let embedding = self.embed_query(query)?;
        self.retrieve_with_embedding(&embedding)
    }

    pub fn retrieve_with_embedding(
        &self,
        embedding: &EmbeddingVector<f32>,
    ) -> Result<Vec<RetrievalCandidate>, RetrievalError> {
        let filter = FilterExpr::parse(&self.config.filter)
            .map_err(|e| RetrievalError::Index(IndexError::Format(e.to_string())))?;
        let n = self.config.candidate_multiplier * self.config.k;
        let code = binarize(embedding).map_err(|e| {
            RetrievalError::Index(IndexError::Quantize {
                chunk_id: "<query>".into(),
                source: e,
            })
        })?;
        let mut pool = Vec::new();
        for kb_id in &self.config.kbs {
            let index = self.registry.get(kb_id)?;
            if index.is_empty() {
                continue;
            }
            let hamming = index.hamming_top_n(&code, &filter, n.max(1))?;
            let rescored = index.rescore(embedding, &hamming, self.config.metric)?;
            for r in rescored {
                let entry = index.entry(r.entry_idx);
                pool.push(RetrievalCandidate {
                    chunk_id: r.chunk_id,
                    kb_id: kb_id.clone(),
                    embed_score: r.score,
                    rerank_score: None,
                    rank: 0,
                    text: entry.text.clone(),
                });
            }
        }
        Ok(pool)
    }

    /// Rerank the merged pool and keep the top k. Ties break by
    /// descending embed score, then chunk id. Rerank failure falls back
    /// to embed-score order with a warning.
    pub fn rerank_and_select(
        &self,
        query: &str,
        mut pool: Vec<RetrievalCandidate>,
        k: usize,
    ) -> (Vec<RetrievalCandidate>, Option<String>) {
        let passages: Vec<String> = pool.iter().map(|c| c.text.clone()).collect();
        let mut warning = None;
        match self.gateway.rerank(query, &passages) {
            Ok(scores) if scores.len() == pool.len() => {
                for (candidate, score) in pool.iter_mut().zip(scores) {
                    candidate.rerank_score = Some(score);
                }
                pool.sort_by(|a, b| {
                    b.rerank_score
                        .partial_cmp(&a.rerank_score)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| {
                            b.embed_score
                                .partial_cmp(&a.embed_score)
                                .unwrap_or(std::cmp::Ordering::Equal)
                        })
                        .then_with(|| a.chunk_id.cmp(&b.chunk_id))
                });
            }
            Ok(scores) => {
                warning = Some(format!(
                    "rerank fallback: {} scores for {} passages",
                    scores.len(),
                    pool.len()
                ));
                sort_by_embed(&mut pool);
            }
            Err(e) => {
                warning = Some(format!("rerank fallback: {e}"));
                sort_by_embed(&mut pool);
            }
        }
        pool.truncate(k);
        for (i, candidate) in pool.iter_mut().enumerate() {
            candidate.rank = i + 1;
        }
        (pool, warning)
    }

    /// rewrite -> retrieve -> rerank -> top-k in one call.
    pub fn run(
        &self,
        raw_query: &str,
        summary: &str,
    ) -> Result<RetrievalRun, RetrievalError> {
        let mut warnings = Vec::new();
        let (rewritten, rewrite_warning) = self.rewrite_query(raw_query, summary);
        warnings.extend(rewrite_warning);
        let pool = self.retrieve(&rewritten)?;
        let (selected, rerank_warning) =
            self.rerank_and_select(&rewritten, pool.clone(), self.config.k);
        warnings.extend(rerank_warning);
        Ok(RetrievalRun {
            rewritten_query: rewritten,
            pool,
            selected,
            warnings,
        })
    }
}

fn sort_by_embed(pool: &mut [RetrievalCandidate]) {
    pool.sort_by(|a, b| {
        b.embed_score
            .partial_cmp(&a.embed_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrievalRun {
    pub rewritten_query: String,
    pub pool: Vec<RetrievalCandidate>,
    pub selected: Vec<RetrievalCandidate>,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{
        hashing_embedding, GenerateBehavior, Matcher, MockGateway, RerankBehavior, ScriptEntry,
    };

    fn toy_registry(kb_ids: &[&str], chunks_per_kb: usize, dim: usize) -> KbRegistry {
        let mut registry = KbRegistry::default();
        for kb_id in kb_ids {
            let items = (0..chunks_per_kb).map(|i| {
                let text = format!("{kb_id} chunk {i} body text");
                (
                    format!("{kb_id}-c{i}"),
                    hashing_embedding(&text, dim),
                    BTreeMap::new(),
                    text,
                )
            });
            registry.insert(VectorIndex::build(kb_id, items).unwrap());
        }
        registry
    }

    fn pipeline(
        registry: KbRegistry,
        gateway: MockGateway,
        config: RetrievalConfig,
    ) -> (RetrievalPipeline, Arc<MockGateway>) {
        let gw = Arc::new(gateway);
        (
            RetrievalPipeline::new(
                Arc::new(registry),
                gw.clone(),
                PromptAssets::default(),
                config,
            ),
            gw,
        )
    }

    #[test]
    fn echo_mock_rewrite_is_identity() {
        // The echo mock parrots the rendered prompt, which counts as "no
        // rewrite": the raw query passes through unchanged.
        let (p, _) = pipeline(
            toy_registry(&["a"], 2, 32),
            MockGateway::echo(),
            RetrievalConfig::default(),
        );
        let (rewritten, warning) = p.rewrite_query("what is SAR", "");
        assert_eq!(rewritten, "what is SAR");
        assert!(warning.is_none());
    }

    #[test]
    fn scripted_rewrite_disambiguates_with_summary() {
        let gateway = MockGateway::echo().with_generate(GenerateBehavior::Scripted(vec![
            ScriptEntry::text(
                Matcher::ContainsAll(vec![
                    "its resolution?".into(),
                    "Sentinel-2 MSI".into(),
                ]),
                "What is the spatial resolution of the Sentinel-2 MSI sensor?",
            ),
        ]));
        let (p, _) = pipeline(
            toy_registry(&["a"], 2, 32),
            gateway,
            RetrievalConfig::default(),
        );
        let (rewritten, _) = p.rewrite_query("its resolution?", "Sentinel-2 MSI");
        assert_eq!(
            rewritten,
            "What is the spatial resolution of the Sentinel-2 MSI sensor?"
        );
    }

    #[test]
    fn rewrite_failure_falls_back_to_raw_query() {
        let gateway = MockGateway::echo().with_generate(GenerateBehavior::Fail("down".into()));
        let (p, _) = pipeline(
            toy_registry(&["a"], 2, 32),
            gateway,
            RetrievalConfig::default(),
        );
        let (rewritten, warning) = p.rewrite_query("raw query", "");
        assert_eq!(rewritten, "raw query");
        assert!(warning.is_some());
    }

    #[test]
    fn small_kb_returns_all_chunks() {
        let config = RetrievalConfig {
            kbs: vec!["a".into()],
            ..Default::default()
        };
        let (p, _) = pipeline(toy_registry(&["a"], 3, 32), MockGateway::echo(), config);
        let pool = p.retrieve("anything").unwrap();
        assert_eq!(pool.len(), 3);
    }

    #[test]
    fn per_kb_candidate_bound_holds() {
        let config = RetrievalConfig {
            k: 1,
            candidate_multiplier: 2,
            kbs: vec!["a".into(), "b".into()],
            ..Default::default()
        };
        let (p, _) = pipeline(toy_registry(&["a", "b"], 10, 32), MockGateway::echo(), config);
        let pool = p.retrieve("query").unwrap();
        assert!(pool.len() <= 4);
        for kb in ["a", "b"] {
            assert!(pool.iter().filter(|c| c.kb_id == kb).count() <= 2);
        }
    }

    #[test]
    fn embed_failure_is_surfaced() {
        let config = RetrievalConfig {
            kbs: vec!["a".into()],
            ..Default::default()
        };
        let gateway = MockGateway::echo()
            .with_embed(crate::gateway::EmbedBehavior::Fail("down".into()));
        let (p, _) = pipeline(toy_registry(&["a"], 2, 32), gateway, config);
        assert!(matches!(
            p.retrieve("q").unwrap_err(),
            RetrievalError::Gateway(_)
        ));
    }

    #[test]
    fn identity_rerank_keeps_embed_order() {
        let config = RetrievalConfig {
            kbs: vec!["a".into()],
            ..Default::default()
        };
        let (p, _) = pipeline(
            toy_registry(&["a"], 5, 32),
            MockGateway::echo().with_rerank(RerankBehavior::Identity),
            config,
        );
        let pool = p.retrieve("query").unwrap();
        let mut by_embed = pool.clone();
        sort_by_embed(&mut by_embed);
        let (selected, warning) = p.rerank_and_select("query", pool, 5);
        assert!(warning.is_none());
        let got: Vec<&str> = selected.iter().map(|c| c.chunk_id.as_str()).collect();
        let expect: Vec<&str> = by_embed.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn unknown_kb_is_an_error() {
        let config = RetrievalConfig {
            kbs: vec!["missing".into()],
            ..Default::default()
        };
        let (p, _) = pipeline(toy_registry(&["a"], 2, 32), MockGateway::echo(), config);
        assert!(matches!(
            p.retrieve("q").unwrap_err(),
            RetrievalError::UnknownKb(_)
        ));
    }

    #[test]
    fn empty_kbs_give_empty_pool() {
        let config = RetrievalConfig {
            kbs: vec![],
            ..Default::default()
        };
        let (p, _) = pipeline(toy_registry(&["a"], 2, 32), MockGateway::echo(), config);
        assert!(p.retrieve("q").unwrap().is_empty());
    }

    #[test]
    fn reranker_reversal_is_observed() {
        let config = RetrievalConfig {
            kbs: vec!["a".into()],
            ..Default::default()
        };
        let (p, _) = pipeline(
            toy_registry(&["a"], 3, 32),
            MockGateway::echo().with_rerank(RerankBehavior::Reverse),
            config,
        );
        let pool = p.retrieve("query text").unwrap();
        let mut by_embed = pool.clone();
        sort_by_embed(&mut by_embed);
        // pool arrives in rescored (embed) order per KB; Reverse scores by
        // position, so selection order is the reverse of the pool order.
        let (selected, warning) = p.rerank_and_select("query text", pool.clone(), 3);
        assert!(warning.is_none());
        let expect: Vec<&str> = pool.iter().rev().map(|c| c.chunk_id.as_str()).collect();
        let got: Vec<&str> = selected.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn rerank_failure_falls_back_to_embed_order() {
        let config = RetrievalConfig {
            kbs: vec!["a".into()],
            ..Default::default()
        };
        let (p, _) = pipeline(
            toy_registry(&["a"], 4, 32),
            MockGateway::echo().with_rerank(RerankBehavior::Fail("down".into())),
            config,
        );
        let pool = p.retrieve("query").unwrap();
        let (selected, warning) = p.rerank_and_select("query", pool.clone(), 4);
        assert!(warning.is_some());
        let mut by_embed = pool;
        sort_by_embed(&mut by_embed);
        let expect: Vec<&str> = by_embed.iter().map(|c| c.chunk_id.as_str()).collect();
        let got: Vec<&str> = selected.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn selection_is_bounded_and_subset_of_pool() {
        let config = RetrievalConfig {
            k: 2,
            candidate_multiplier: 2,
            kbs: vec!["a".into(), "b".into()],
            ..Default::default()
        };
        let (p, _) = pipeline(toy_registry(&["a", "b"], 5, 32), MockGateway::echo(), config);
        let run = p.run("some question", "").unwrap();
        assert!(run.selected.len() <= 2);
        for c in &run.selected {
            assert!(run
                .pool
                .iter()
                .any(|pc| pc.chunk_id == c.chunk_id && pc.kb_id == c.kb_id));
        }
        let ranks: Vec<usize> = run.selected.iter().map(|c| c.rank).collect();
        assert_eq!(ranks, (1..=run.selected.len()).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_given_deterministic_gateway() {
        let config = RetrievalConfig {
            kbs: vec!["a".into(), "b".into()],
            ..Default::default()
        };
        let registry = toy_registry(&["a", "b"], 6, 32);
        let gw = Arc::new(MockGateway::echo());
        let p = RetrievalPipeline::new(
            Arc::new(registry),
            gw,
            PromptAssets::default(),
            config,
        );
        let a = serde_json::to_string(&p.run("q", "").unwrap().selected).unwrap();
        let b = serde_json::to_string(&p.run("q", "").unwrap().selected).unwrap();
        assert_eq!(a, b);
    }
}
