//! Hallucination detect -> reformulate -> re-retrieve -> revise -> rank,
//! as an explicit state machine over gateway calls.
//!
//! A grounded verdict short-circuits after exactly one gateway call. A
//! flagged answer costs four generation calls (detect, reformulate,
//! revise, rank) plus one embed for the re-retrieval. Every failure path
//! still returns an answer and raises a flag; the original answer is
//! never discarded.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gateway::{extract_json_object, GenerateRequest};
use crate::retrieval::{RetrievalCandidate, RetrievalPipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictLabel {
    Hallucinated,
    Grounded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HallucinationVerdict {
    pub label: VerdictLabel,
    /// Non-empty whenever the label is hallucinated.
    pub justification: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalChoice {
    Original,
    Revised,
}

/// Full record of one pipeline run; serialized as the trace JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RevisionTrace {
    pub original_answer: String,
    pub verdict: HallucinationVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reformulated_query: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_candidates: Option<Vec<RetrievalCandidate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revised_answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critique: Option<String>,
    pub final_choice: FinalChoice,
    pub final_answer: String,
    /// Visited states in order.
    pub step_log: Vec<String>,
    pub flags: Vec<String>,
}

/// Legal transitions, including the failure short-circuit revise -> end.
pub const LEGAL_TRANSITIONS: &[(&str, &str)] = &[
    ("detect", "end"),
    ("detect", "reformulate"),
    ("reformulate", "retrieve"),
    ("retrieve", "revise"),
    ("revise", "rank"),
    ("revise", "end"),
    ("rank", "end"),
];

pub fn step_log_is_legal(log: &[String]) -> bool {
    if log.first().map(|s| s.as_str()) != Some("detect")
        || log.last().map(|s| s.as_str()) != Some("end")
    {
        return false;
    }
    log.windows(2).all(|w| {
        LEGAL_TRANSITIONS
            .iter()
            .any(|(from, to)| *from == w[0] && *to == w[1])
    })
}

pub struct HallucinationPipeline {
    retrieval: Arc<RetrievalPipeline>,
}

impl HallucinationPipeline {
    /// Re-retrieval reuses the retrieval pipeline (and its config) that
    /// produced the original evidence.
    pub fn new(retrieval: Arc<RetrievalPipeline>) -> Self {
        Self { retrieval }
    }

    pub fn run(&self, question: &str, answer: &str, evidence: &[String]) -> RevisionTrace {
        let mut trace = RevisionTrace {
            original_answer: answer.to_string(),
            verdict: HallucinationVerdict {
                label: VerdictLabel::Grounded,
                justification: String::new(),
            },
            reformulated_query: None,
            new_candidates: None,
            revised_answer: None,
            critique: None,
            final_choice: FinalChoice::Original,
            final_answer: answer.to_string(),
            step_log: Vec::new(),
            flags: Vec::new(),
        };

        trace.step_log.push("detect".into());
        trace.verdict = self.detect(question, answer, evidence, &mut trace.flags);
        if trace.verdict.label == VerdictLabel::Grounded {
            trace.step_log.push("end".into());
            return trace;
        }

        trace.step_log.push("reformulate".into());
        let query = self.reformulate(question, &trace.verdict.justification, &mut trace.flags);
        trace.reformulated_query = Some(query.clone());

        trace.step_log.push("retrieve".into());
        let new_candidates = self.re_retrieve(&query, &mut trace.flags);
        let new_evidence: Vec<String> = new_candidates.iter().map(|c| c.text.clone()).collect();
        trace.new_candidates = Some(new_candidates);

        trace.step_log.push("revise".into());
        match self.revise(question, answer, evidence, &new_evidence, &mut trace.flags) {
            Some((revised, critique)) => {
                trace.revised_answer = Some(revised);
                trace.critique = Some(critique);
            }
            None => {
                // Revision forfeits; the original stands.
                trace.final_choice = FinalChoice::Original;
                trace.final_answer = answer.to_string();
                trace.step_log.push("end".into());
                return trace;
            }
        }

        trace.step_log.push("rank".into());
        let revised = trace.revised_answer.clone().expect("revised answer set");
        let mut all_evidence: Vec<String> = evidence.to_vec();
        all_evidence.extend(new_evidence);
        trace.final_choice =
            self.rank_and_select(question, answer, &revised, &all_evidence, &mut trace.flags);
        trace.final_answer = match trace.final_choice {
            FinalChoice::Original => answer.to_string(),
            FinalChoice::Revised => revised,
        };
        trace.step_log.push("end".into());
        trace
    }

    /// Binary verdict with justification. Anything unparsable is treated
    /// as hallucinated ("parse-failure") and flagged, never dropped.
    fn detect(
        &self,
        question: &str,
        answer: &str,
        evidence: &[String],
        flags: &mut Vec<String>,
    ) -> HallucinationVerdict {
        let conservative = |flags: &mut Vec<String>, flag: &str| {
            flags.push(flag.to_string());
            HallucinationVerdict {
                label: VerdictLabel::Hallucinated,
                justification: "parse-failure".into(),
            }
        };
        let prompt = self
            .retrieval
            .assets
            .render(
                "halluc_detect",
                &[
                    ("question", question),
                    ("answer", answer),
                    ("evidence", &join_evidence(evidence)),
                ],
            )
            .expect("halluc_detect prompt present");
        let raw = match self.retrieval.gateway.generate(&GenerateRequest::new(prompt)) {
            Ok(raw) => raw,
            Err(_) => return conservative(flags, "detect-error"),
        };
        let Some(value) = extract_json_object(&raw) else {
            return conservative(flags, "detect-unparsable");
        };
        let label = match value["label"].as_str() {
            Some("grounded") => VerdictLabel::Grounded,
            Some("hallucinated") => VerdictLabel::Hallucinated,
            _ => return conservative(flags, "detect-unparsable"),
        };
        let mut justification = value["justification"].as_str().unwrap_or("").to_string();
        if label == VerdictLabel::Hallucinated && justification.is_empty() {
            justification = "unspecified".into();
        }
        HallucinationVerdict {
            label,
            justification,
        }
    }

    /// New retrieval query incorporating the justification; on failure
    /// the original question is reused and flagged.
    fn reformulate(&self, question: &str, justification: &str, flags: &mut Vec<String>) -> String {
        let prompt = self
            .retrieval
            .assets
            .render(
                "halluc_reformulate",
                &[("question", question), ("justification", justification)],
            )
            .expect("halluc_reformulate prompt present");
        match self
            .retrieval
            .gateway
            .generate(&GenerateRequest::new(prompt.clone()))
        {
            // A parroted prompt (identity mock) means no reformulation.
            Ok(query) if query.trim() == prompt.trim() => question.to_string(),
            Ok(query) if !query.trim().is_empty() => query.trim().to_string(),
            Ok(_) => {
                flags.push("reformulate-empty".into());
                question.to_string()
            }
            Err(_) => {
                flags.push("reformulate-error".into());
                question.to_string()
            }
        }
    }

    /// Embed + candidate search + rescore with the original config; no
    /// rewrite and no rerank on this path.
    fn re_retrieve(&self, query: &str, flags: &mut Vec<String>) -> Vec<RetrievalCandidate> {
        match self.retrieval.retrieve(query) {
            Ok(mut pool) => {
                pool.sort_by(|a, b| {
                    b.embed_score
                        .partial_cmp(&a.embed_score)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| a.chunk_id.cmp(&b.chunk_id))
                });
                pool.truncate(self.retrieval.config.k);
                for (i, c) in pool.iter_mut().enumerate() {
                    c.rank = i + 1;
                }
                pool
            }
            Err(e) => {
                flags.push(format!("re-retrieval-error: {e}"));
                Vec::new()
            }
        }
    }

    /// Revised answer plus critique; None forfeits to the original.
    fn revise(
        &self,
        question: &str,
        answer: &str,
        prior_evidence: &[String],
        new_evidence: &[String],
        flags: &mut Vec<String>,
    ) -> Option<(String, String)> {
        let prompt = self
            .retrieval
            .assets
            .render(
                "halluc_revise",
                &[
                    ("question", question),
                    ("answer", answer),
                    ("prior_evidence", &join_evidence(prior_evidence)),
                    ("new_evidence", &join_evidence(new_evidence)),
                ],
            )
            .expect("halluc_revise prompt present");
        let raw = match self.retrieval.gateway.generate(&GenerateRequest::new(prompt)) {
            Ok(raw) => raw,
            Err(_) => {
                flags.push("revise-error".into());
                return None;
            }
        };
        let Some(value) = extract_json_object(&raw) else {
            flags.push("revise-unparsable".into());
            return None;
        };
        let revised = value["revised_answer"].as_str()?.to_string();
        let critique = value["critique"].as_str().unwrap_or("").to_string();
        Some((revised, critique))
    }

    /// Gateway comparison of original vs revised; ties go to the revised
    /// answer, failures to the original with a flag.
    fn rank_and_select(
        &self,
        question: &str,
        original: &str,
        revised: &str,
        evidence: &[String],
        flags: &mut Vec<String>,
    ) -> FinalChoice {
        let prompt = self
            .retrieval
            .assets
            .render(
                "halluc_rank",
                &[
                    ("question", question),
                    ("original", original),
                    ("revised", revised),
                    ("evidence", &join_evidence(evidence)),
                ],
            )
            .expect("halluc_rank prompt present");
        let raw = match self.retrieval.gateway.generate(&GenerateRequest::new(prompt)) {
            Ok(raw) => raw,
            Err(_) => {
                flags.push("rank-error".into());
                return FinalChoice::Original;
            }
        };
        match extract_json_object(&raw).and_then(|v| v["winner"].as_str().map(String::from)) {
            Some(w) if w == "original" => FinalChoice::Original,
            Some(w) if w == "revised" => FinalChoice::Revised,
            Some(w) if w == "tie" => FinalChoice::Revised,
            _ => {
                flags.push("rank-unparsable".into());
                FinalChoice::Original
            }
        }
    }
}

fn join_evidence(evidence: &[String]) -> String {
    if evidence.is_empty() {
        return "(none)".to_string();
    }
    evidence.join("\n---\n")
}
