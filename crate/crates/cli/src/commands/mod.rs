use std::collections::HashSet;
use std::path::{Path, PathBuf};

use morphforge_core::imaging::{decode_png, LandmarkFile};
use morphforge_core::protocol::{resolve_image_path, DatasetManifest, SplitProtocol};
use morphforge_core::regen::external::ExternalBackend;
use morphforge_core::{fsio, Error, FaceImage, Result};

use crate::args::{BackendArgs, Cli, Command};
use crate::index::{MorphEntry, MorphIndex, MORPH_INDEX};
use crate::provenance::Recorder;
use crate::BACKEND_CMD_ENV;

mod mad;
mod morph;
mod protocol;
mod report;
mod vuln;

pub(crate) fn execute(cli: &Cli) -> Result<()> {
    let mut rec = Recorder::default();
    let dir = match &cli.command {
        Command::Protocol(a) => protocol::run(a, &mut rec)?,
        Command::Morph(a) => morph::run(a, &mut rec)?,
        Command::Vuln(a) => vuln::run(a, &mut rec)?,
        Command::MadTrain(a) => mad::train(a, &mut rec)?,
        Command::MadEval(a) => mad::eval(a, &mut rec)?,
        Command::Report(a) => report::run(a, &mut rec)?,
    };
    rec.finish(cli, &dir)
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Labels end up in file names.
pub(crate) fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "label `{label}` must be non-empty [A-Za-z0-9_-]"
        )))
    }
}

/// Manifest plus a protocol checked against it.
pub(crate) struct Dataset {
    pub manifest_path: PathBuf,
    pub manifest: DatasetManifest,
    pub protocol: SplitProtocol,
}

impl Dataset {
    pub fn load(rec: &mut Recorder, manifest: &Path, pairs: &Path) -> Result<Self> {
        let m = DatasetManifest::from_json(&rec.read(manifest)?)?;
        let protocol = SplitProtocol::from_json(&rec.read(pairs)?)?;
        protocol.validate(Some(&m))?;
        Ok(Dataset {
            manifest_path: manifest.to_path_buf(),
            manifest: m,
            protocol,
        })
    }

    pub fn image(&self, rec: &mut Recorder, id: &str) -> Result<FaceImage> {
        let (_, record) = self
            .manifest
            .image(id)
            .ok_or_else(|| Error::Validation(format!("unknown image `{id}`")))?;
        decode_png(&rec.read(&resolve_image_path(&self.manifest_path, record))?)
    }
}

pub(crate) fn load_landmarks(
    rec: &mut Recorder,
    dir: &Path,
    image_id: &str,
) -> Result<LandmarkFile> {
    let lf = LandmarkFile::from_json(&rec.read(&dir.join(format!("{image_id}.json")))?)?;
    if lf.image_id != image_id {
        return Err(Error::Validation(format!(
            "landmark file for `{image_id}` names `{}`",
            lf.image_id
        )));
    }
    Ok(lf)
}

pub(crate) fn load_index(rec: &mut Recorder, dir: &Path) -> Result<MorphIndex> {
    let index = MorphIndex::from_json(&rec.read(&dir.join(MORPH_INDEX))?)?;
    check_label(&index.attack)?;
    Ok(index)
}

/// Reads a morph image and checks it against the digest in the index.
pub(crate) fn load_morph(rec: &mut Recorder, dir: &Path, entry: &MorphEntry) -> Result<FaceImage> {
    let bytes = rec.read(&dir.join(&entry.file))?;
    if fsio::sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::Validation(format!(
            "morph `{}` does not match its recorded digest",
            entry.id
        )));
    }
    decode_png(&bytes)
}

/// Loads every index, rejecting repeated attack labels.
pub(crate) fn load_indices(rec: &mut Recorder, dirs: &[PathBuf]) -> Result<Vec<MorphIndex>> {
    let mut seen = HashSet::new();
    dirs.iter()
        .map(|d| {
            let index = load_index(rec, d)?;
            if !seen.insert(index.attack.clone()) {
                return Err(Error::Validation(format!(
                    "attack `{}` given twice",
                    index.attack
                )));
            }
            Ok(index)
        })
        .collect()
}

pub(crate) fn external_backend(args: &BackendArgs, latent_dim: usize) -> Result<ExternalBackend> {
    let cmd = match &args.backend_cmd {
        Some(c) => c.clone(),
        None => std::env::var(BACKEND_CMD_ENV).map_err(|_| {
            Error::Precondition(format!(
                "external backend needs --backend-cmd or {BACKEND_CMD_ENV}"
            ))
        })?,
    };
    let size = args.backend_size;
    ExternalBackend::new(
        cmd.split_whitespace().map(String::from).collect(),
        (size, size),
        latent_dim,
    )
}
