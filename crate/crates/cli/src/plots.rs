//! Plot data: CSV series plus a JSON description of axes and reference
//! lines. Nothing is rendered.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use morphforge_core::mad::MadReport;
use morphforge_core::vuln::VulnReport;
use morphforge_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::provenance::Recorder;

pub const PLOT_INDEX: &str = "plots.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// Morph scores against both subjects.
    Scatter,
    /// APCER/BPCER trade-off.
    Det,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub column: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefLine {
    /// `x` for a vertical line, `y` for a horizontal one.
    pub axis: String,
    pub value: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    /// File name of the report the data came from.
    pub source: String,
    pub file: String,
    pub rows: usize,
    pub x: Axis,
    pub y: Axis,
    pub lines: Vec<RefLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotData {
    pub plots: Vec<PlotSpec>,
}

fn axis(column: &str, label: &str) -> Axis {
    Axis {
        column: column.into(),
        label: label.into(),
    }
}

fn line(axis: &str, value: f64, label: &str) -> RefLine {
    RefLine {
        axis: axis.into(),
        value,
        label: label.into(),
    }
}

/// Writes one CSV per report plus `plots.json` under `out_dir`.
pub fn emit_plots(reports: &[PathBuf], out_dir: &Path) -> Result<PlotData> {
    emit(&mut Recorder::default(), reports, out_dir)
}

pub(crate) fn emit(rec: &mut Recorder, reports: &[PathBuf], out_dir: &Path) -> Result<PlotData> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("reports"));
    }
    let mut plots = Vec::new();
    let mut files = HashSet::new();
    for path in reports {
        let bytes = rec.read(path)?;
        let source = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let value: serde_json::Value = serde_json::from_slice(&bytes)?;
        let (spec, csv) = if value.get("mmpmr").is_some() {
            scatter(&VulnReport::from_json(&bytes)?, source)?
        } else if value.get("d_eer").is_some() {
            det(&MadReport::from_json(&bytes)?, source)?
        } else {
            return Err(Error::Validation(format!(
                "{}: not a vulnerability or detector report",
                path.display()
            )));
        };
        if !files.insert(spec.file.clone()) {
            return Err(Error::Validation(format!(
                "two reports map to {}",
                spec.file
            )));
        }
        rec.write(&out_dir.join(&spec.file), &csv)?;
        plots.push(spec);
    }
    let data = PlotData { plots };
    rec.write_json(&out_dir.join(PLOT_INDEX), &data)?;
    Ok(data)
}

fn scatter(r: &VulnReport, source: String) -> Result<(PlotSpec, Vec<u8>)> {
    let spec = PlotSpec {
        kind: PlotKind::Scatter,
        title: format!(
            "{} morphs against {} (MMPMR {:.2}%)",
            r.attack, r.backend, r.mmpmr
        ),
        source,
        file: format!("scatter_{}_{}.csv", r.attack, r.backend),
        rows: r.scatter.len(),
        x: axis("subject1_score", "score against subject 1"),
        y: axis("subject2_score", "score against subject 2"),
        lines: vec![
            line("x", r.tau, "decision threshold"),
            line("y", r.tau, "decision threshold"),
        ],
    };
    Ok((spec, r.scatter_csv()?))
}

fn det(r: &MadReport, source: String) -> Result<(PlotSpec, Vec<u8>)> {
    let mut out = String::from("threshold,apcer,bpcer\n");
    for [t, a, b] in &r.roc_points {
        out.push_str(&format!("{t},{a},{b}\n"));
    }
    let spec = PlotSpec {
        kind: PlotKind::Det,
        title: format!(
            "detector trained on {} tested on {} (D-EER {:.4})",
            r.trained_on, r.tested_on, r.d_eer
        ),
        source,
        file: format!("det_{}_on_{}.csv", r.trained_on, r.tested_on),
        rows: r.roc_points.len(),
        x: axis("apcer", "APCER"),
        y: axis("bpcer", "BPCER"),
        lines: vec![line("x", r.d_eer, "D-EER"), line("y", r.d_eer, "D-EER")],
    };
    Ok((spec, out.into_bytes()))
}
