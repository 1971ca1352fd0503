use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentKind;
use crate::dataset::write_text;
use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
    /// Wall-clock outputs differ between runs by construction.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Full config text the run was started from.
    pub config: String,
    pub stages: Vec<StageTime>,
    pub outputs: Vec<OutputDigest>,
}

pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(kind: ExperimentKind, config: &str, seed: u64) -> Self {
        RunManifest {
            tool: "offload".to_string(),
            version: TOOL_VERSION.to_string(),
            kind,
            seed,
            config: config.to_string(),
            stages: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub(crate) fn record_outputs(&mut self, files: &[PathBuf]) -> Result<()> {
        for path in files {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let file = path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            self.outputs.push(OutputDigest {
                timing: file.contains("timing"),
                sha256: digest_hex(&bytes),
                file,
            });
        }
        Ok(())
    }

    /// Digests of the outputs that are expected to reproduce bit for bit.
    pub fn deterministic_outputs(&self) -> Vec<&OutputDigest> {
        self.outputs.iter().filter(|o| !o.timing).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("cannot encode manifest: {e}")))?;
        write_text(path, &(text + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}
