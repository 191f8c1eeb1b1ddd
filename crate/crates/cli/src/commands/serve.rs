//! `serve`: run the JSON-over-HTTP service.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use crate::service::{serve_blocking, App};

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the configured listen address.
    #[arg(long)]
    pub addr: Option<String>,
}

pub fn run(args: ServeArgs) -> Result<()> {
    let (config, base) = super::load_config(&args.config)?;
    // Gateways own a blocking HTTP client; build before the runtime.
    let app = App::from_config(&config, &base)?;
    let addr = args.addr.unwrap_or_else(|| config.service.addr.clone());
    serve_blocking(app, &addr)
}
