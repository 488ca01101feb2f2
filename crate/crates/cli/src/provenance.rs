//! Input digests and output bookkeeping for `run.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use morphforge_core::{fsio, Error, Result};
use serde::{Deserialize, Serialize};

use crate::args::Cli;

pub const RUN_RECORD: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one invocation. The timestamp lives only here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub finished_unix_secs: u64,
}

impl RunRecord {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: RunRecord = serde_json::from_slice(bytes)?;
        if r.subcommand.is_empty()
            || r.inputs
                .iter()
                .chain(&r.outputs)
                .any(|d| d.sha256.len() != 64)
        {
            return Err(Error::Validation("malformed run record".into()));
        }
        Ok(r)
    }
}

#[derive(Debug, Default)]
pub(crate) struct Recorder {
    inputs: BTreeMap<PathBuf, String>,
    outputs: BTreeMap<PathBuf, String>,
}

impl Recorder {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fsio::read(path)?;
        self.inputs
            .insert(path.to_path_buf(), fsio::sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fsio::write_atomic(path, bytes)?;
        self.outputs
            .insert(path.to_path_buf(), fsio::sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(path, &bytes)
    }

    pub fn finish(self, cli: &Cli, dir: &Path) -> Result<()> {
        let digests = |m: BTreeMap<PathBuf, String>| {
            m.into_iter()
                .map(|(p, sha256)| FileDigest {
                    path: p.display().to_string(),
                    sha256,
                })
                .collect()
        };
        let record = RunRecord {
            tool: "morphforge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: cli.command.name().into(),
            seed: cli.command.seed(),
            config: serde_json::to_value(&cli.command)?,
            inputs: digests(self.inputs),
            outputs: digests(self.outputs),
            finished_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        fsio::write_json_atomic(&dir.join(RUN_RECORD), &record)
    }
}
