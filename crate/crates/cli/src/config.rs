use std::fs;
use std::path::{Path, PathBuf};

use gcan::harness::HarnessOptions;
use gcan::model::GcanConfig;
use gcan::synthgen::GeneratorConfig;
use gcan::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Everything a run needs, loaded from one JSON document. Missing sections
/// take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: GcanConfig,
    pub generator: GeneratorConfig,
    pub harness: HarnessOptions,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.generator.validate()?;
        self.harness.validate()
    }
}

/// The flag value if given, else the config value, else an input error
/// naming the flag.
pub fn require_path(
    flag: Option<PathBuf>,
    config: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf> {
    flag.or_else(|| config.clone()).ok_or_else(|| {
        Error::InvalidInput(format!(
            "--{name} is required (or paths.{name} in the config)"
        ))
    })
}
