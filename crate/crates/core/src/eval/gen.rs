//! Semi-synthetic retrieval eval-set generation.
//!
//! A gateway call turns each source passage into a query plus a verbatim
//! excerpt; the excerpt is located in the document to produce the gold
//! byte range. Under scripted mocks this yields deterministic fixtures.

use std::sync::Arc;

use super::{EvalError, RetrievalEvalSample, SpanRef};
use crate::gateway::{extract_json_object, Gateway, GenerateRequest, PromptAssets};

/// Generate one sample per (doc_id, text) passage. Passages whose
/// generated excerpt cannot be found verbatim are skipped.
pub fn generate_eval_set(
    docs: &[(String, String)],
    gateway: Arc<dyn Gateway>,
    assets: &PromptAssets,
) -> Result<Vec<RetrievalEvalSample>, EvalError> {
    let mut samples = Vec::new();
    for (i, (doc_id, text)) in docs.iter().enumerate() {
        let prompt = assets.render("query_gen", &[("text", text.as_str())])?;
        let raw = gateway.generate(&GenerateRequest::new(prompt))?;
        let Some(value) = extract_json_object(&raw) else {
            continue;
        };
        let (Some(query), Some(excerpt)) = (value["query"].as_str(), value["excerpt"].as_str())
        else {
            continue;
        };
        let Some(start) = text.find(excerpt) else {
            continue;
        };
        samples.push(RetrievalEvalSample {
            query_id: format!("gen-{i}"),
            query: query.to_string(),
            gold_excerpts: vec![SpanRef {
                doc_id: doc_id.clone(),
                start,
                end: start + excerpt.len(),
            }],
            retrieved_chunks: Vec::new(),
        });
    }
    Ok(samples)
}
