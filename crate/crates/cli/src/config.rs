use std::path::Path;

use serde::Deserialize;

use crate::failure::Failure;

/// Flag values read from `--config`. Command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub bits: Option<u32>,
    pub bound: Option<u32>,
    pub rows: Option<usize>,
    pub top_width: Option<usize>,
    pub max_width: Option<usize>,
    pub occurrence: Option<usize>,
    pub occurrence_second: Option<usize>,
    pub c: Option<String>,
    pub d: Option<String>,
    pub tie_left: Option<bool>,
    pub reduce: Option<bool>,
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub windows: Option<String>,
    pub max_pi: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}
