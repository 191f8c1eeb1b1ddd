//! `grounded`: command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

mod commands;
mod config;
mod service;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "grounded",
    version,
    about = "Grounded retrieval engine: corpus cleaning, chunking, quantized vector search, hallucination-aware answering and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, deduplicate and anonymize a JSONL corpus
    Clean(commands::clean::CleanArgs),
    /// Split cleaned documents into retrieval chunks
    Chunk(commands::chunk::ChunkArgs),
    /// Build or query a KB vector index
    #[command(subcommand)]
    Index(commands::index::IndexCmd),
    /// Run the retrieval pipeline for one query
    Query(commands::query::QueryArgs),
    /// Answer a question with the full grounded pipeline
    Answer(commands::answer::AnswerArgs),
    /// Run the hallucination pipeline on a question/answer pair
    HallucCheck(commands::halluc::HallucArgs),
    /// Replay a scripted conversation and emit prompt sections
    Replay(commands::replay::ReplayArgs),
    /// Evaluation harness
    #[command(subcommand)]
    Eval(commands::eval::EvalCmd),
    /// Run the JSON-over-HTTP service
    Serve(commands::serve::ServeArgs),
}

fn main() {
    let cli = Cli::parse();
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let result = match cli.command {
        Command::Clean(args) => commands::clean::run(args),
        Command::Chunk(args) => commands::chunk::run(args),
        Command::Index(cmd) => commands::index::run(cmd),
        Command::Query(args) => commands::query::run(args),
        Command::Answer(args) => commands::answer::run(args),
        Command::HallucCheck(args) => commands::halluc::run(args),
        Command::Replay(args) => commands::replay::run(args),
        Command::Eval(cmd) => commands::eval::run(cmd),
        Command::Serve(args) => commands::serve::run(args),
    };
    if let Err(error) = result {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
