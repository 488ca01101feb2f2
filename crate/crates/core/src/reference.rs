//! Published vulnerability and detectability figures for full-scale
//! ReGenMorph experiments (FRGC-scale data, pretrained StyleGAN, ArcFace and a
//! commercial matcher). They are carried into reports as context only and are
//! NOT reproduced by the toy backends shipped here.

use serde::{Deserialize, Serialize};

pub const NOT_REPRODUCED: &str = "Published full-scale figures, embedded for context only. \
They were NOT reproduced: they need FRGC-V2, a pretrained StyleGAN, ArcFace weights and a \
commercial matcher, none of which are used by this run.";

/// MMPMR / FMMPMR in percent at FMR 0.1%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedVulnerability {
    pub attack: &'static str,
    pub backend: &'static str,
    pub mmpmr: f64,
    pub fmmpmr: f64,
}

const fn vuln(
    attack: &'static str,
    backend: &'static str,
    mmpmr: f64,
    fmmpmr: f64,
) -> PublishedVulnerability {
    PublishedVulnerability {
        attack,
        backend,
        mmpmr,
        fmmpmr,
    }
}

pub const PUBLISHED_VULNERABILITY: [PublishedVulnerability; 10] = [
    vuln("lma", "cots", 100.00, 98.84),
    vuln("lma", "arcface", 99.68, 98.00),
    vuln("stylegan", "cots", 64.68, 41.49),
    vuln("stylegan", "arcface", 72.80, 56.95),
    vuln("mipgan-ii", "cots", 92.93, 81.59),
    vuln("mipgan-ii", "arcface", 94.21, 86.94),
    vuln("morgan", "cots", 0.00, 0.00),
    vuln("morgan", "arcface", 0.00, 0.00),
    vuln("regen", "cots", 42.24, 34.47),
    vuln("regen", "arcface", 33.98, 14.05),
];

/// Detectability of ReGenMorph attacks, all values in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedDetection {
    /// Attack type the detector was trained on.
    pub trained_on: &'static str,
    pub detector: &'static str,
    pub d_eer: f64,
    pub bpcer_at_apcer_5: f64,
    pub bpcer_at_apcer_10: f64,
}

const fn det(
    trained_on: &'static str,
    detector: &'static str,
    d_eer: f64,
    b5: f64,
    b10: f64,
) -> PublishedDetection {
    PublishedDetection {
        trained_on,
        detector,
        d_eer,
        bpcer_at_apcer_5: b5,
        bpcer_at_apcer_10: b10,
    }
}

pub const PUBLISHED_DETECTION: [PublishedDetection; 6] = [
    det("regen", "hybrid", 2.48, 4.97, 4.97),
    det("regen", "ensemble", 0.00, 0.00, 0.00),
    det("lma", "hybrid", 0.08, 0.17, 0.27),
    det("lma", "ensemble", 0.16, 0.17, 0.17),
    det("mipgan-ii", "hybrid", 50.00, 100.00, 100.00),
    det("mipgan-ii", "ensemble", 33.34, 70.33, 82.68),
];

/// Context block attached to every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedContext {
    pub reproduced: bool,
    pub note: String,
    pub vulnerability: Vec<VulnerabilityEntry>,
    pub detection: Vec<DetectionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VulnerabilityEntry {
    pub attack: String,
    pub backend: String,
    pub mmpmr: f64,
    pub fmmpmr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionEntry {
    pub trained_on: String,
    pub tested_on: String,
    pub detector: String,
    pub d_eer: f64,
    pub bpcer_at_apcer_5: f64,
    pub bpcer_at_apcer_10: f64,
}

impl PublishedContext {
    pub fn new() -> Self {
        PublishedContext {
            reproduced: false,
            note: NOT_REPRODUCED.to_string(),
            vulnerability: PUBLISHED_VULNERABILITY
                .iter()
                .filter(|v| v.attack == "regen")
                .map(|v| VulnerabilityEntry {
                    attack: v.attack.into(),
                    backend: v.backend.into(),
                    mmpmr: v.mmpmr,
                    fmmpmr: v.fmmpmr,
                })
                .collect(),
            detection: PUBLISHED_DETECTION
                .iter()
                .map(|d| DetectionEntry {
                    trained_on: d.trained_on.into(),
                    tested_on: "regen".into(),
                    detector: d.detector.into(),
                    d_eer: d.d_eer,
                    bpcer_at_apcer_5: d.bpcer_at_apcer_5,
                    bpcer_at_apcer_10: d.bpcer_at_apcer_10,
                })
                .collect(),
        }
    }

    /// True when the block is flagged as non-reproduced context.
    pub fn is_contextual(&self) -> bool {
        !self.reproduced && self.note.contains("NOT reproduced")
    }
}

impl Default for PublishedContext {
    fn default() -> Self {
        Self::new()
    }
}
