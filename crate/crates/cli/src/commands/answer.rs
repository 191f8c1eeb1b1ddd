//! `answer`: one-shot grounded answer through the full pipeline.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use crate::service::App;

#[derive(Debug, Args)]
pub struct AnswerArgs {
    /// Question text.
    #[arg(long)]
    pub q: String,
    #[arg(long, default_value = "cli")]
    pub session: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: AnswerArgs) -> Result<()> {
    let (config, base) = super::load_config(&args.config)?;
    let app = App::from_config(&config, &base)?;
    let response = app.answer(&args.session, &args.q)?;
    let body = serde_json::to_string_pretty(&response)?;
    match &args.out {
        Some(path) => std::fs::write(path, body + "\n")?,
        None => println!("{body}"),
    }
    Ok(())
}
