use std::path::PathBuf;

use morphforge_core::Result;

use crate::args::ReportArgs;
use crate::plots::emit;
use crate::provenance::Recorder;

pub(super) fn run(a: &ReportArgs, rec: &mut Recorder) -> Result<PathBuf> {
    emit(rec, &a.reports, &a.out)?;
    Ok(a.out.clone())
}
