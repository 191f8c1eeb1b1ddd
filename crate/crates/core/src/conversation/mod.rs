//! Conversation state with rolling summarization and token budgets.
//!
//! At turn t the assembled prompt carries a compressed summary of turns
//! 1..t-2, the previous turn verbatim, the retrieved context, and the new
//! query, each capped by its own token budget. The summary folds one turn
//! per step: summary' = summarize(summary, turn t-2) happens when turn t
//! starts, so the summarizer has run exactly max(0, t-2) times.

mod token;

pub use token::{ApproxTokenCounter, TokenCounter};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GenerateRequest, PromptAssets};

/// Per-section token budgets. Defaults follow the deployed allocation:
/// 30K query, 7K retrieved context, 5K summary, 15K response, 57K
/// previous turn.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenBudget {
    pub query: usize,
    pub context: usize,
    pub summary: usize,
    pub response: usize,
    pub previous_turn: usize,
}

impl Default for TokenBudget {
    fn default() -> Self {
        Self {
            query: 30_000,
            context: 7_000,
            summary: 5_000,
            response: 15_000,
            previous_turn: 57_000,
        }
    }
}

/// One completed exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Turn {
    pub query: String,
    pub answer: String,
    #[serde(default)]
    pub context_refs: Vec<String>,
}

impl Turn {
    /// Verbatim rendering used for the previous-turn section and for
    /// summarization input.
    pub fn rendered(&self) -> String {
        format!("User: {}\nAssistant: {}", self.query, self.answer)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversationState {
    pub session_id: String,
    /// Append-only.
    pub turns: Vec<Turn>,
    /// Rolling summary of turns 1..t-2.
    pub summary: String,
    /// Completed summary folds; at turn t this is max(0, t-2). A strict
    /// re-prompt inside one fold does not count twice.
    pub summarizer_calls: usize,
}

impl ConversationState {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            turns: Vec::new(),
            summary: String::new(),
            summarizer_calls: 0,
        }
    }
}

/// A retrieved chunk offered for the context section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContextChunk {
    pub chunk_id: String,
    pub text: String,
    pub similarity: f64,
}

/// Assembled prompt sections; a section is None when it has no content.
/// Token counts and truncation flags ride along for inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptSections {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub previous_turn: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub query: String,
    pub token_counts: SectionTokenCounts,
    pub flags: Vec<String>,
    /// Context chunks that fit the budget, in descending similarity.
    pub kept_chunks: Vec<String>,
    /// Chunks dropped whole, lowest similarity first.
    pub dropped_chunks: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SectionTokenCounts {
    pub summary: usize,
    pub previous_turn: usize,
    pub context: usize,
    pub query: usize,
}

pub struct ConversationManager {
    gateway: Arc<dyn Gateway>,
    assets: PromptAssets,
    budget: TokenBudget,
    counter: Arc<dyn TokenCounter>,
}

impl ConversationManager {
    pub fn new(
        gateway: Arc<dyn Gateway>,
        assets: PromptAssets,
        budget: TokenBudget,
        counter: Arc<dyn TokenCounter>,
    ) -> Self {
        Self {
            gateway,
            assets,
            budget,
            counter,
        }
    }

    pub fn budget(&self) -> &TokenBudget {
        &self.budget
    }

    pub fn counter(&self) -> &dyn TokenCounter {
        self.counter.as_ref()
    }

    /// Fold turn t-2 into the summary, then build the prompt sections for
    /// the new query. Call once per turn before generating.
    pub fn start_turn(
        &self,
        state: &mut ConversationState,
        new_query: &str,
        retrieved: &[ContextChunk],
    ) -> PromptSections {
        // At turn t = turns.len() + 1: fold turn t-2 (index t-3) when t >= 3.
        if state.turns.len() >= 2 {
            self.update_summary(state, state.turns.len() - 2);
        }
        self.assemble_prompt(state, new_query, retrieved)
    }

    /// Record the completed turn.
    pub fn complete_turn(
        &self,
        state: &mut ConversationState,
        query: &str,
        answer: &str,
        context_refs: Vec<String>,
    ) {
        state.turns.push(Turn {
            query: query.to_string(),
            answer: answer.to_string(),
            context_refs,
        });
    }

    /// summary' = summarize(summary, turn[idx]); enforces the summary
    /// budget by one strict re-prompt, then hard truncation with a flag.
    /// On gateway failure the old summary is kept and the state flagged.
    fn update_summary(&self, state: &mut ConversationState, idx: usize) {
        let turn_text = state.turns[idx].rendered();
        let prompt = self
            .assets
            .render(
                "summarize",
                &[("summary", state.summary.as_str()), ("turn", turn_text.as_str())],
            )
            .expect("summarize prompt present");
        state.summarizer_calls += 1;
        let mut produced = match self.gateway.generate(&GenerateRequest::new(prompt)) {
            Ok(text) => text,
            Err(_) => return, // keep old summary; caller sees flag via sections
        };
        if self.counter.count(&produced) > self.budget.summary {
            let strict = self
                .assets
                .render(
                    "summarize_strict",
                    &[
                        ("summary", state.summary.as_str()),
                        ("turn", turn_text.as_str()),
                        ("budget", &self.budget.summary.to_string()),
                    ],
                )
                .expect("summarize_strict prompt present");
            if let Ok(retry) = self.gateway.generate(&GenerateRequest::new(strict)) {
                produced = retry;
            }
            if self.counter.count(&produced) > self.budget.summary {
                produced = self
                    .counter
                    .truncate_tail(&produced, self.budget.summary);
            }
        }
        state.summary = produced;
    }

    /// Build sections under the fixed budgets. Context chunks are dropped
    /// whole in ascending similarity order until the section fits.
    pub fn assemble_prompt(
        &self,
        state: &ConversationState,
        new_query: &str,
        retrieved: &[ContextChunk],
    ) -> PromptSections {
        let mut flags = Vec::new();
        let counter = self.counter.as_ref();

        let query = if counter.count(new_query) > self.budget.query {
            flags.push("query-truncated".to_string());
            counter.truncate_tail(new_query, self.budget.query)
        } else {
            new_query.to_string()
        };

        let summary = (!state.summary.is_empty()).then(|| state.summary.clone());

        let previous_turn = state.turns.last().map(|turn| {
            let text = turn.rendered();
            if counter.count(&text) > self.budget.previous_turn {
                flags.push("previous-turn-truncated".to_string());
                counter.truncate_middle(&text, self.budget.previous_turn)
            } else {
                text
            }
        });

        // Sort descending by similarity; drop lowest-similarity chunks
        // whole until within budget.
        let mut ordered: Vec<&ContextChunk> = retrieved.iter().collect();
        ordered.sort_by(|a, b| {
            b.similarity
                .partial_cmp(&a.similarity)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        let mut kept = ordered.clone();
        let mut dropped: Vec<String> = Vec::new();
        loop {
            let total: usize = kept.iter().map(|c| counter.count(&c.text)).sum();
            if total <= self.budget.context || kept.is_empty() {
                break;
            }
            let lowest = kept.pop().expect("non-empty");
            dropped.push(lowest.chunk_id.clone());
            flags.push(format!("context-dropped:{}", lowest.chunk_id));
        }
        let context = (!kept.is_empty()).then(|| {
            kept.iter()
                .map(|c| c.text.as_str())
                .collect::<Vec<_>>()
                .join("\n\n")
        });

        let token_counts = SectionTokenCounts {
            summary: summary.as_deref().map_or(0, |s| counter.count(s)),
            previous_turn: previous_turn.as_deref().map_or(0, |s| counter.count(s)),
            context: kept.iter().map(|c| counter.count(&c.text)).sum(),
            query: counter.count(&query),
        };

        PromptSections {
            summary,
            previous_turn,
            context,
            query,
            token_counts,
            flags,
            kept_chunks: kept.iter().map(|c| c.chunk_id.clone()).collect(),
            dropped_chunks: dropped,
        }
    }

    /// Render the final answer prompt from assembled sections.
    pub fn render_answer_prompt(&self, sections: &PromptSections) -> String {
        let summary_section = sections
            .summary
            .as_deref()
            .map(|s| format!("Conversation summary:\n{s}\n\n"))
            .unwrap_or_default();
        let previous_turn_section = sections
            .previous_turn
            .as_deref()
            .map(|s| format!("Previous turn:\n{s}\n\n"))
            .unwrap_or_default();
        self.assets
            .render(
                "answer",
                &[
                    ("summary_section", summary_section.as_str()),
                    ("previous_turn_section", previous_turn_section.as_str()),
                    ("context", sections.context.as_deref().unwrap_or("(none)")),
                    ("query", sections.query.as_str()),
                ],
            )
            .expect("answer prompt present")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GenerateBehavior, Matcher, MockGateway, ScriptEntry};

    fn manager(gateway: MockGateway) -> (ConversationManager, Arc<MockGateway>) {
        let gw = Arc::new(gateway);
        let mgr = ConversationManager::new(
            gw.clone(),
            PromptAssets::default(),
            TokenBudget::default(),
            Arc::new(ApproxTokenCounter),
        );
        (mgr, gw)
    }

    fn chunk(id: &str, text: &str, sim: f64) -> ContextChunk {
        ContextChunk {
            chunk_id: id.into(),
            text: text.into(),
            similarity: sim,
        }
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn first_turn_has_only_query_section() {
        let (mgr, _) = manager(MockGateway::echo());
        let mut state = ConversationState::new("s");
        let sections = mgr.start_turn(&mut state, "what is SAR?", &[]);
        assert!(sections.summary.is_none());
        assert!(sections.previous_turn.is_none());
        assert!(sections.context.is_none());
        assert_eq!(sections.query, "what is SAR?");
        assert_eq!(state.summarizer_calls, 0);
    }

    #[test]
    fn second_turn_has_previous_turn_but_no_summary() {
        let (mgr, _) = manager(MockGateway::echo());
        let mut state = ConversationState::new("s");
        mgr.complete_turn(&mut state, "q1", "a1", vec![]);
        let sections = mgr.start_turn(&mut state, "q2", &[]);
        assert!(sections.summary.is_none());
        assert_eq!(sections.previous_turn.as_deref(), Some("User: q1\nAssistant: a1"));
        assert_eq!(state.summarizer_calls, 0);
    }

    #[test]
    fn third_turn_summarizes_turn_one() {
        let gateway = MockGateway::echo().with_generate(GenerateBehavior::Scripted(vec![
            ScriptEntry::text(Matcher::Contains("User: q1".into()), "summary of turn one"),
        ]));
        let (mgr, gw) = manager(gateway);
        let mut state = ConversationState::new("s");
        mgr.complete_turn(&mut state, "q1", "a1", vec![]);
        mgr.complete_turn(&mut state, "q2", "a2", vec![]);
        let sections = mgr.start_turn(&mut state, "q3", &[]);
        assert_eq!(sections.summary.as_deref(), Some("summary of turn one"));
        assert_eq!(sections.previous_turn.as_deref(), Some("User: q2\nAssistant: a2"));
        assert_eq!(state.summarizer_calls, 1);
        assert_eq!(gw.total_calls(), 1);
    }

    #[test]
    fn summarizer_call_count_is_t_minus_two() {
        let (mgr, _) = manager(MockGateway::echo().with_generate(GenerateBehavior::Const("s".into())));
        let mut state = ConversationState::new("s");
        for t in 1usize..=8 {
            let _ = mgr.start_turn(&mut state, &format!("q{t}"), &[]);
            assert_eq!(state.summarizer_calls, t.saturating_sub(2));
            mgr.complete_turn(&mut state, &format!("q{t}"), &format!("a{t}"), vec![]);
        }
    }

    #[test]
    fn context_drops_lowest_similarity_whole() {
        // Budgets in tokens; the approximate counter gives ceil(words*4/3).
        // 3000/2250/1500-word chunks count 4000/3000/2000 tokens: the last
        // is dropped to fit the 7000-token budget.
        let (mgr, _) = manager(MockGateway::echo());
        let state = ConversationState::new("s");
        let chunks = vec![
            chunk("c1", &words(3000), 0.9),
            chunk("c2", &words(2250), 0.8),
            chunk("c3", &words(1500), 0.7),
        ];
        let sections = mgr.assemble_prompt(&state, "q", &chunks);
        assert_eq!(sections.kept_chunks, vec!["c1", "c2"]);
        assert_eq!(sections.dropped_chunks, vec!["c3"]);
        assert_eq!(sections.token_counts.context, 7000);
    }

    #[test]
    fn oversize_query_is_truncated_with_flag() {
        let (mgr, _) = manager(MockGateway::echo());
        let state = ConversationState::new("s");
        let huge = words(40_000); // ~53334 tokens > 30000
        let sections = mgr.assemble_prompt(&state, &huge, &[]);
        assert!(sections.flags.iter().any(|f| f == "query-truncated"));
        assert!(sections.token_counts.query <= 30_000);
    }

    #[test]
    fn over_budget_summary_reprompts_then_truncates() {
        // First summarize reply is ~8000 tokens (too big), the strict
        // retry is still too big, so the result is hard-truncated.
        let long_summary = words(6000);
        let still_long = words(5900);
        let gateway = MockGateway::echo().with_generate(GenerateBehavior::Scripted(vec![
            ScriptEntry::text(Matcher::Contains("too long".into()), still_long.clone()),
            ScriptEntry::text(Matcher::Any, long_summary.clone()),
        ]));
        let (mgr, gw) = manager(gateway);
        let mut state = ConversationState::new("s");
        mgr.complete_turn(&mut state, "q1", "a1", vec![]);
        mgr.complete_turn(&mut state, "q2", "a2", vec![]);
        let sections = mgr.start_turn(&mut state, "q3", &[]);
        assert_eq!(gw.total_calls(), 2, "strict re-prompt expected");
        assert!(sections.token_counts.summary <= 5000);
        // two gateway calls but one fold
        assert_eq!(state.summarizer_calls, 1);
    }

    #[test]
    fn summarizer_failure_keeps_old_summary() {
        let gateway =
            MockGateway::echo().with_generate(GenerateBehavior::Fail("down".into()));
        let (mgr, _) = manager(gateway);
        let mut state = ConversationState::new("s");
        state.summary = "existing summary".into();
        mgr.complete_turn(&mut state, "q1", "a1", vec![]);
        mgr.complete_turn(&mut state, "q2", "a2", vec![]);
        let sections = mgr.start_turn(&mut state, "q3", &[]);
        assert_eq!(sections.summary.as_deref(), Some("existing summary"));
    }

    #[test]
    fn oversize_previous_turn_middle_truncated() {
        let (mgr, _) = manager(MockGateway::echo());
        let mut state = ConversationState::new("s");
        let huge_answer = words(60_000); // 80000 tokens > 57000
        mgr.complete_turn(&mut state, "q1", &huge_answer, vec![]);
        let sections = mgr.assemble_prompt(&state, "q2", &[]);
        assert!(sections
            .flags
            .iter()
            .any(|f| f == "previous-turn-truncated"));
        assert!(sections.token_counts.previous_turn <= 57_000);
        let text = sections.previous_turn.unwrap();
        assert!(text.starts_with("User: q1"));
        assert!(text.contains("[...]"));
    }
}
