//! Run manifests: the full [`RunSpec`] plus the version that produced it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::runner::RunSpec;
use crate::CliError;

pub const FILE_NAME: &str = "manifest.toml";

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("SWIPT_GIT_REV"), ")");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub outputs: Vec<String>,
    pub run: RunSpec,
}

impl Manifest {
    pub fn new(run: RunSpec, outputs: Vec<String>) -> Self {
        Self { version: VERSION.to_string(), outputs, run }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("manifest: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("manifest: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::write(dir.join(FILE_NAME), self.to_toml()?)?;
        Ok(())
    }
}
