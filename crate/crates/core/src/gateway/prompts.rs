//! Prompt assets: plain-text templates keyed by id.
//!
//! Defaults are compiled in; a directory of `<id>.txt` files overrides
//! them. Placeholders use `{name}` and are substituted literally.

use std::collections::BTreeMap;
use std::path::Path;

use super::GatewayError;

/// Prompt ids other modules resolve at startup; config validation fails
/// fast when one is missing.
pub const REQUIRED_PROMPTS: &[&str] = &[
    "judge",
    "format_instructions",
    "rewrite",
    "summarize",
    "summarize_strict",
    "halluc_detect",
    "halluc_reformulate",
    "halluc_revise",
    "halluc_rank",
    "answer",
    "query_gen",
    "pairwise",
    "ar_filter",
    "ar_strategy_specific",
    "ar_strategy_predefined",
    "ar_generation",
    "selfqa",
    "contextqa_filter",
];

const DEFAULTS: &[(&str, &str)] = &[
    ("judge", include_str!("../../assets/prompts/judge.txt")),
    (
        "format_instructions",
        include_str!("../../assets/prompts/format_instructions.txt"),
    ),
    ("rewrite", include_str!("../../assets/prompts/rewrite.txt")),
    ("summarize", include_str!("../../assets/prompts/summarize.txt")),
    (
        "summarize_strict",
        include_str!("../../assets/prompts/summarize_strict.txt"),
    ),
    (
        "halluc_detect",
        include_str!("../../assets/prompts/halluc_detect.txt"),
    ),
    (
        "halluc_reformulate",
        include_str!("../../assets/prompts/halluc_reformulate.txt"),
    ),
    (
        "halluc_revise",
        include_str!("../../assets/prompts/halluc_revise.txt"),
    ),
    (
        "halluc_rank",
        include_str!("../../assets/prompts/halluc_rank.txt"),
    ),
    ("answer", include_str!("../../assets/prompts/answer.txt")),
    ("query_gen", include_str!("../../assets/prompts/query_gen.txt")),
    ("pairwise", include_str!("../../assets/prompts/pairwise.txt")),
    ("ar_filter", include_str!("../../assets/prompts/ar_filter.txt")),
    (
        "ar_strategy_specific",
        include_str!("../../assets/prompts/ar_strategy_specific.txt"),
    ),
    (
        "ar_strategy_predefined",
        include_str!("../../assets/prompts/ar_strategy_predefined.txt"),
    ),
    (
        "ar_generation",
        include_str!("../../assets/prompts/ar_generation.txt"),
    ),
    ("selfqa", include_str!("../../assets/prompts/selfqa.txt")),
    (
        "contextqa_filter",
        include_str!("../../assets/prompts/contextqa_filter.txt"),
    ),
];

#[derive(Debug, Clone)]
pub struct PromptAssets {
    templates: BTreeMap<String, String>,
}

impl Default for PromptAssets {
    fn default() -> Self {
        Self {
            templates: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl PromptAssets {
    /// Defaults overlaid with any `<id>.txt` files found in `dir`.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut assets = Self::default();
        if dir.is_dir() {
            for entry in std::fs::read_dir(dir)? {
                let entry = entry?;
                let path = entry.path();
                if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        assets
                            .templates
                            .insert(stem.to_string(), std::fs::read_to_string(&path)?);
                    }
                }
            }
        }
        Ok(assets)
    }

    pub fn get(&self, id: &str) -> Result<&str, GatewayError> {
        self.templates
            .get(id)
            .map(|s| s.as_str())
            .ok_or_else(|| GatewayError::UnknownPrompt(id.to_string()))
    }

    /// Render a template, substituting `{name}` for each provided var.
    pub fn render(&self, id: &str, vars: &[(&str, &str)]) -> Result<String, GatewayError> {
        let mut text = self.get(id)?.to_string();
        for (name, value) in vars {
            text = text.replace(&format!("{{{name}}}"), value);
        }
        Ok(text)
    }

    /// Fail when any prompt id another module relies on is missing.
    pub fn validate_required(&self) -> Result<(), GatewayError> {
        for id in REQUIRED_PROMPTS {
            self.get(id)?;
        }
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(|s| s.as_str())
    }
}
