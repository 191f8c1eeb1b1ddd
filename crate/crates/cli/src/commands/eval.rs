//! `eval`: the metric harness over JSONL fixtures.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use serde::Deserialize;
use serde_json::json;

use grounded_core::eval::{
    judge_panel_score, nls, retrieval_eval, win_rate, EvalReport, EvaluatorTally, PairwiseTally,
    RetrievalEvalSample, SpanRef, TokenizedCorpus,
};
use grounded_core::gateway::{
    extract_json_object, Gateway, GatewayError, GenerateRequest, JudgeRequest, PromptAssets,
};

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Token-level retrieval metrics over samples plus a run file.
    Retrieval(RetrievalArgs),
    /// Normalized Levenshtein similarity between prediction and gold text.
    Ocr(OcrArgs),
    /// Judge-panel scores for answers.
    Judge(JudgeArgs),
    /// Pairwise win rate of answer set A over answer set B.
    Pairwise(PairwiseArgs),
}

#[derive(Debug, Args)]
pub struct RetrievalArgs {
    /// JSONL of {query_id, query, gold_excerpts}.
    #[arg(long)]
    pub samples: PathBuf,
    /// JSONL of {query_id, retrieved} ranked runs.
    #[arg(long)]
    pub runs: PathBuf,
    /// JSONL of {id, text} documents the byte ranges refer to.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub at: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OcrArgs {
    /// JSONL of {id, text} predictions.
    #[arg(long)]
    pub pred: PathBuf,
    /// JSONL of {id, text} references.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// JSONL of {id, question, answer, reference, context?}.
    #[arg(long)]
    pub answers: PathBuf,
    /// Comma-separated judge specs: mock:<0-5>, mock:nls, config.
    #[arg(long, value_delimiter = ',')]
    pub judges: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairwiseArgs {
    /// JSONL of {id, question, answer, reference?} for model A.
    #[arg(long)]
    pub a: PathBuf,
    /// JSONL for model B, same schema and ids.
    #[arg(long)]
    pub b: PathBuf,
    /// Comma-separated evaluator specs: mock:nls, mock:first, mock:tie,
    /// config.
    #[arg(long, value_delimiter = ',')]
    pub judges: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(cmd: EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Retrieval(args) => retrieval(args),
        EvalCmd::Ocr(args) => ocr(args),
        EvalCmd::Judge(args) => judge(args),
        EvalCmd::Pairwise(args) => pairwise(args),
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file =
        std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{} line {}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

fn emit(report: &EvalReport, out: &Option<PathBuf>, csv: &Option<PathBuf>) -> Result<()> {
    if let Some(path) = out {
        report.write_json(path)?;
    } else {
        println!("{}", serde_json::to_string_pretty(report)?);
    }
    if let Some(path) = csv {
        report.write_csv(path)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RunRecord {
    query_id: String,
    retrieved: Vec<SpanRef>,
}

#[derive(Debug, Deserialize)]
struct DocRecord {
    id: String,
    text: String,
}

fn retrieval(args: RetrievalArgs) -> Result<()> {
    let mut samples: Vec<RetrievalEvalSample> = read_jsonl(&args.samples)?;
    let runs: Vec<RunRecord> = read_jsonl(&args.runs)?;
    let docs: Vec<DocRecord> = read_jsonl(&args.corpus)?;
    let by_id: BTreeMap<String, Vec<SpanRef>> = runs
        .into_iter()
        .map(|r| (r.query_id, r.retrieved))
        .collect();
    for sample in &mut samples {
        if let Some(retrieved) = by_id.get(&sample.query_id) {
            sample.retrieved_chunks = retrieved.clone();
        }
    }
    let corpus = TokenizedCorpus::new(docs.into_iter().map(|d| (d.id, d.text)));
    let report = retrieval_eval(&samples, &corpus, args.at)?;
    emit(&report, &Some(args.out.clone()), &args.csv)
}

fn ocr(args: OcrArgs) -> Result<()> {
    let pred: Vec<DocRecord> = read_jsonl(&args.pred)?;
    let gold: Vec<DocRecord> = read_jsonl(&args.gold)?;
    let gold_by_id: BTreeMap<String, String> =
        gold.into_iter().map(|d| (d.id, d.text)).collect();
    let mut report = EvalReport {
        config: json!({"metric": "nls"}),
        ..Default::default()
    };
    let mut sum = 0.0;
    let mut counted = 0usize;
    for p in &pred {
        let Some(reference) = gold_by_id.get(&p.id) else {
            report.excluded.push(grounded_core::eval::ExcludedSample {
                query_id: p.id.clone(),
                reason: "missing-gold".into(),
            });
            continue;
        };
        let score = nls(&p.text, reference);
        sum += score;
        counted += 1;
        report
            .per_sample
            .push(json!({"id": p.id, "nls": score}));
    }
    if counted == 0 {
        bail!("no prediction/gold pairs matched by id");
    }
    report
        .metrics
        .insert("nls".to_string(), sum / counted as f64);
    emit(&report, &args.out, &args.csv)
}

#[derive(Debug, Deserialize)]
struct AnswerRecord {
    id: String,
    question: String,
    answer: String,
    #[serde(default)]
    reference: String,
    #[serde(default)]
    context: Option<String>,
}

/// Deterministic local judge: score = round(5 * nls(answer, reference)).
struct NlsJudge;

impl Gateway for NlsJudge {
    fn generate(&self, _: &GenerateRequest) -> Result<String, GatewayError> {
        Err(GatewayError::Unconfigured {
            role: grounded_core::gateway::Role::Generate,
        })
    }
    fn embed(
        &self,
        _: &[String],
    ) -> Result<Vec<grounded_core::index::EmbeddingVector<f32>>, GatewayError> {
        Err(GatewayError::Unconfigured {
            role: grounded_core::gateway::Role::Embed,
        })
    }
    fn rerank(&self, _: &str, _: &[String]) -> Result<Vec<f64>, GatewayError> {
        Err(GatewayError::Unconfigured {
            role: grounded_core::gateway::Role::Rerank,
        })
    }
    fn judge(&self, request: &JudgeRequest) -> Result<u8, GatewayError> {
        let score = (5.0 * nls(&request.answer, &request.reference)).round();
        Ok(score.clamp(0.0, 5.0) as u8)
    }
}

fn build_judges(
    specs: &[String],
    config: &Option<PathBuf>,
) -> Result<Vec<Arc<dyn Gateway>>> {
    if specs.is_empty() {
        bail!("--judges requires at least one judge spec");
    }
    let mut judges: Vec<Arc<dyn Gateway>> = Vec::new();
    for spec in specs {
        match spec.as_str() {
            "config" => {
                let (config, base) = super::load_config(config)?;
                judges.push(config.build_gateway(&base)?);
            }
            "mock:nls" => judges.push(Arc::new(NlsJudge)),
            other => {
                if let Some(score) = other.strip_prefix("mock:") {
                    let score: u8 = score
                        .parse()
                        .with_context(|| format!("judge spec {other:?}"))?;
                    if score > 5 {
                        bail!("mock judge score must be 0-5, got {score}");
                    }
                    judges.push(Arc::new(
                        grounded_core::gateway::MockGateway::echo().with_judge(
                            grounded_core::gateway::JudgeBehavior::ConstText(format!(
                                "{{\"score\": {score}}}"
                            )),
                        ),
                    ));
                } else {
                    bail!("unknown judge spec {other:?} (use mock:<0-5>, mock:nls, config)");
                }
            }
        }
    }
    Ok(judges)
}

fn judge(args: JudgeArgs) -> Result<()> {
    let answers: Vec<AnswerRecord> = read_jsonl(&args.answers)?;
    let judges = build_judges(&args.judges, &args.config)?;
    let mut report = EvalReport {
        config: json!({"judges": args.judges}),
        ..Default::default()
    };
    let mut sum = 0.0;
    let mut counted = 0usize;
    for a in &answers {
        match judge_panel_score(
            &a.question,
            &a.answer,
            &a.reference,
            a.context.as_deref(),
            &judges,
        ) {
            Ok(panel) => {
                sum += panel.mean;
                counted += 1;
                report.per_sample.push(json!({
                    "id": a.id,
                    "mean": panel.mean,
                    "per_judge": panel.per_judge,
                    "flags": panel.flags,
                }));
            }
            Err(e) => report.excluded.push(grounded_core::eval::ExcludedSample {
                query_id: a.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if counted == 0 {
        bail!("no sample produced a usable panel score");
    }
    report
        .metrics
        .insert("judge_score".to_string(), sum / counted as f64);
    emit(&report, &args.out, &None)
}

fn pairwise(args: PairwiseArgs) -> Result<()> {
    let a: Vec<AnswerRecord> = read_jsonl(&args.a)?;
    let b: Vec<AnswerRecord> = read_jsonl(&args.b)?;
    let b_by_id: BTreeMap<String, AnswerRecord> =
        b.into_iter().map(|r| (r.id.clone(), r)).collect();
    if args.judges.is_empty() {
        bail!("--judges requires at least one evaluator spec");
    }

    enum Evaluator {
        Nls,
        First,
        Tie,
        Gateway(Arc<dyn Gateway>, PromptAssets),
    }
    let mut evaluators = Vec::new();
    for spec in &args.judges {
        evaluators.push(match spec.as_str() {
            "mock:nls" => Evaluator::Nls,
            "mock:first" => Evaluator::First,
            "mock:tie" => Evaluator::Tie,
            "config" => {
                let (config, base) = super::load_config(&args.config)?;
                let assets = config.prompt_assets(&base)?;
                Evaluator::Gateway(config.build_gateway(&base)?, assets)
            }
            other => bail!("unknown evaluator spec {other:?}"),
        });
    }

    let mut tally = PairwiseTally::default();
    let mut per_sample = Vec::new();
    for evaluator in &evaluators {
        let mut counts = EvaluatorTally {
            wins_a: 0,
            ties: 0,
            losses_a: 0,
        };
        for sample_a in &a {
            let Some(sample_b) = b_by_id.get(&sample_a.id) else {
                continue;
            };
            let verdict = match evaluator {
                Evaluator::First => "A".to_string(),
                Evaluator::Tie => "tie".to_string(),
                Evaluator::Nls => {
                    let sa = nls(&sample_a.answer, &sample_a.reference);
                    let sb = nls(&sample_b.answer, &sample_a.reference);
                    if sa > sb {
                        "A".into()
                    } else if sb > sa {
                        "B".into()
                    } else {
                        "tie".into()
                    }
                }
                Evaluator::Gateway(gateway, assets) => {
                    let prompt = assets.render(
                        "pairwise",
                        &[
                            ("question", sample_a.question.as_str()),
                            ("reference", sample_a.reference.as_str()),
                            ("answer_a", sample_a.answer.as_str()),
                            ("answer_b", sample_b.answer.as_str()),
                        ],
                    )?;
                    let raw = gateway.generate(&GenerateRequest::new(prompt))?;
                    extract_json_object(&raw)
                        .and_then(|v| v["winner"].as_str().map(String::from))
                        .unwrap_or_else(|| "tie".to_string())
                }
            };
            match verdict.as_str() {
                "A" => counts.wins_a += 1,
                "B" => counts.losses_a += 1,
                _ => counts.ties += 1,
            }
            per_sample.push(json!({"id": sample_a.id, "winner": verdict}));
        }
        tally.evaluators.push(counts);
    }

    let wr = win_rate(&tally)?;
    let mut report = EvalReport {
        config: json!({"judges": args.judges}),
        per_sample,
        ..Default::default()
    };
    report.metrics.insert("win_rate_a".to_string(), wr);
    for (i, e) in tally.evaluators.iter().enumerate() {
        report.per_sample.push(json!({
            "evaluator": i,
            "wins_a": e.wins_a,
            "ties": e.ties,
            "losses_a": e.losses_a,
        }));
    }
    emit(&report, &args.out, &None)
}
