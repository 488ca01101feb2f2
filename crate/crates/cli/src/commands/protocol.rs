use std::path::{Path, PathBuf};

use morphforge_core::protocol::{
    build_splits, validate_counts, BonafidePolicy, DatasetManifest, ExpectedCounts,
    PUBLISHED_COUNTS,
};
use morphforge_core::Result;

use super::parent_dir;
use crate::args::ProtocolArgs;
use crate::provenance::Recorder;

pub(super) fn run(a: &ProtocolArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let manifest = DatasetManifest::from_json(&rec.read(&a.manifest)?)?;
    let protocol = build_splits(&manifest, a.train_fraction, a.pairs_per_identity, a.seed)?;
    protocol.validate(Some(&manifest))?;
    rec.write_json(&a.out, &protocol)?;
    if let Some(source) = &a.check_counts {
        let expected: ExpectedCounts = if source == "published" {
            PUBLISHED_COUNTS
        } else {
            serde_json::from_slice(&rec.read(Path::new(source))?)?
        };
        let report = validate_counts(
            &protocol,
            &expected,
            Some(&manifest),
            BonafidePolicy::default(),
        );
        rec.write_json(&a.out.with_extension("counts.json"), &report)?;
    }
    Ok(parent_dir(&a.out))
}
