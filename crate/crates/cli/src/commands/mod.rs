pub mod answer;
pub mod chunk;
pub mod clean;
pub mod eval;
pub mod halluc;
pub mod index;
pub mod query;
pub mod replay;
pub mod serve;

use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::config::AppConfig;

/// Load the config when given, defaults otherwise. Returns the config and
/// the base dir for resolving relative paths inside it.
pub fn load_config(path: &Option<PathBuf>) -> Result<(AppConfig, PathBuf)> {
    match path {
        Some(p) => {
            let config = AppConfig::load(p)?;
            let base = p.parent().unwrap_or(Path::new(".")).to_path_buf();
            Ok((config, base))
        }
        None => Ok((AppConfig::default(), PathBuf::from("."))),
    }
}
