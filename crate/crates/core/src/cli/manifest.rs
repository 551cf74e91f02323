//! Run manifests: enough to replay a command and check its outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Settings;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub command: String,
    /// Arguments that reproduce the run without any config file.
    pub argv: Vec<String>,
    pub settings: Settings,
    pub seed: u64,
    pub version: String,
    pub preprocessing: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub elapsed_ms: u64,
}

pub const PREPROCESSING: &str = "features standardized once on the full input (column mean 0, sd 1) \
before any split; outputs are mapped back to the input scale";

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest fields serialize");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Checkpoint(format!("manifest: unsupported format {}", m.format)));
        }
        if m.argv.first().map(String::as_str) != Some(m.command.as_str()) {
            return Err(Error::Checkpoint(
                "manifest: argv does not start with the command".into(),
            ));
        }
        if m.command == "replay" {
            return Err(Error::Checkpoint("manifest: cannot replay a replay".into()));
        }
        let hex_ok = |d: &FileDigest| d.sha256.len() == 64 && d.sha256.bytes().all(|b| b.is_ascii_hexdigit());
        if !m.inputs.iter().chain(&m.outputs).all(hex_ok) {
            return Err(Error::Checkpoint("manifest: malformed digest".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest {
            format: MANIFEST_FORMAT,
            command: "simulate".into(),
            argv: vec!["simulate".into(), "--out".into(), "x.csv".into()],
            settings: Settings::default(),
            seed: 3,
            version: "0.1.0".into(),
            preprocessing: PREPROCESSING.into(),
            inputs: vec![],
            outputs: vec![FileDigest {
                path: "x.csv".into(),
                sha256: "ab".repeat(32),
            }],
            elapsed_ms: 5,
        }
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        assert_eq!(RunManifest::parse(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn rejects_inconsistent() {
        let mut m = sample();
        m.argv[0] = "augment".into();
        assert!(RunManifest::parse(&m.to_json()).is_err());
        let mut m = sample();
        m.outputs[0].sha256 = "zz".into();
        assert!(RunManifest::parse(&m.to_json()).is_err());
        assert!(RunManifest::parse("{").is_err());
    }
}
