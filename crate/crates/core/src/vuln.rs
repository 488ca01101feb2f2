//! Face-recognition vulnerability: morph-vs-probe scoring, FMR-anchored
//! thresholds, MMPMR and FMMPMR.
//!
//! Scores are similarities (higher = more alike). Distance-based matchers are
//! wrapped as `-distance`, so every decision is `score > tau`.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::imaging::FaceImage;
use crate::reference::PublishedContext;
use crate::regen::external::{ExternalBackend, Op, Tensor};

pub trait RecognitionBackend: Send + Sync {
    fn name(&self) -> &str;
    fn embed(&self, image: &FaceImage) -> Result<Vec<f64>>;
    /// Symmetric similarity.
    fn compare(&self, a: &[f64], b: &[f64]) -> f64;
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Toy matcher: the embedding is the grid of block means (over all three
/// channels), compared by negative Euclidean distance. `grid = 1` reduces to
/// the mean pixel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DownsampledPixels {
    pub grid: usize,
}

impl Default for DownsampledPixels {
    fn default() -> Self {
        DownsampledPixels { grid: 8 }
    }
}

impl RecognitionBackend for DownsampledPixels {
    fn name(&self) -> &str {
        "toy-pixels"
    }

    fn embed(&self, image: &FaceImage) -> Result<Vec<f64>> {
        let (w, h) = image.size();
        let g = self.grid;
        if g == 0 || g > w || g > h {
            return Err(Error::Precondition(format!(
                "grid {g} does not fit a {w}x{h} image"
            )));
        }
        let mut sums = vec![0.0; g * g];
        let mut counts = vec![0usize; g * g];
        for y in 0..h {
            for x in 0..w {
                let cell = (y * g / h) * g + x * g / w;
                sums[cell] += image.pixel(x, y).iter().sum::<f64>();
                counts[cell] += 3;
            }
        }
        Ok(sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect())
    }

    fn compare(&self, a: &[f64], b: &[f64]) -> f64 {
        -euclidean(a, b)
    }
}

/// External matcher: embeddings come from the `features` op.
impl RecognitionBackend for ExternalBackend {
    fn name(&self) -> &str {
        "external"
    }

    fn embed(&self, image: &FaceImage) -> Result<Vec<f64>> {
        Ok(self.call(Op::Features, &Tensor::image(image))?.to_f64())
    }

    fn compare(&self, a: &[f64], b: &[f64]) -> f64 {
        -euclidean(a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub morph_id: String,
    pub subject_id: String,
    pub probe_id: String,
    pub score: f64,
}

/// Morph-vs-probe similarity scores. Each morph has rows for exactly two
/// subjects; subject order follows first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

/// One morph's scores, split by contributing subject.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphScores<'a> {
    pub morph_id: &'a str,
    pub subjects: [&'a str; 2],
    pub scores: [Vec<f64>; 2],
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut subjects: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for r in &rows {
            if !r.score.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite score for morph {}",
                    r.morph_id
                )));
            }
            if !seen.insert((&r.morph_id, &r.subject_id, &r.probe_id)) {
                return Err(Error::Validation(format!(
                    "duplicate row ({}, {}, {})",
                    r.morph_id, r.subject_id, r.probe_id
                )));
            }
            subjects
                .entry(&r.morph_id)
                .or_default()
                .insert(&r.subject_id);
        }
        if let Some((m, s)) = subjects.iter().find(|(_, s)| s.len() != 2) {
            return Err(Error::Validation(format!(
                "morph {m} has {} subjects, expected 2",
                s.len()
            )));
        }
        Ok(ScoreTable { rows })
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-morph grouping in first-appearance order.
    pub fn morphs(&self) -> Vec<MorphScores<'_>> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        // (morph, subjects, per-subject scores)
        #[allow(clippy::type_complexity)]
        let mut out: Vec<(&str, Vec<&str>, [Vec<f64>; 2])> = Vec::new();
        for r in &self.rows {
            let i = *index.entry(&r.morph_id).or_insert_with(|| {
                out.push((&r.morph_id, Vec::new(), [Vec::new(), Vec::new()]));
                out.len() - 1
            });
            let entry = &mut out[i];
            let k = match entry.1.iter().position(|s| *s == r.subject_id) {
                Some(k) => k,
                None => {
                    entry.1.push(&r.subject_id);
                    entry.1.len() - 1
                }
            };
            entry.2[k].push(r.score);
        }
        out.into_iter()
            .map(|(morph_id, s, scores)| MorphScores {
                morph_id,
                subjects: [s[0], s[1]],
                scores,
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["morph_id", "subject_id", "probe_id", "score"] {
            return Err(Error::Validation(format!(
                "unexpected score header {headers:?}"
            )));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ScoreRow>, _>>()?;
        ScoreTable::new(rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, &self.to_csv()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ScoreTable::from_csv(&fsio::read(path)?)
    }
}

/// A morph with its two contributing subjects and the source image ids.
#[derive(Debug, Clone)]
pub struct MorphSample {
    pub id: String,
    pub image: FaceImage,
    pub subjects: [String; 2],
    pub sources: [String; 2],
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub id: String,
    pub subject: String,
    pub image: FaceImage,
}

fn embed_all<'a>(
    images: impl IndexedParallelIterator<Item = &'a FaceImage>,
    backend: &dyn RecognitionBackend,
) -> Result<Vec<Vec<f64>>> {
    images.map(|img| backend.embed(img)).collect()
}

/// One row per (morph, subject, probe of that subject), in morph, subject
/// and probe-list order.
pub fn score_morphs(
    morphs: &[MorphSample],
    probes: &[Probe],
    backend: &dyn RecognitionBackend,
) -> Result<ScoreTable> {
    let sources: BTreeSet<&str> = morphs
        .iter()
        .flat_map(|m| m.sources.iter().map(String::as_str))
        .collect();
    if let Some(p) = probes.iter().find(|p| sources.contains(p.id.as_str())) {
        return Err(Error::ScoringProtocol(format!(
            "probe {} was used to create a morph",
            p.id
        )));
    }
    let mut by_subject: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, p) in probes.iter().enumerate() {
        by_subject.entry(&p.subject).or_default().push(i);
    }
    for m in morphs {
        if m.subjects[0] == m.subjects[1] {
            return Err(Error::ScoringProtocol(format!(
                "morph {} has a single subject",
                m.id
            )));
        }
        for s in &m.subjects {
            if !by_subject.contains_key(s.as_str()) {
                return Err(Error::ScoringProtocol(format!(
                    "no probes for subject {s} of morph {}",
                    m.id
                )));
            }
        }
    }
    let probe_emb = embed_all(probes.par_iter().map(|p| &p.image), backend)?;
    let morph_emb = embed_all(morphs.par_iter().map(|m| &m.image), backend)?;
    let mut rows = Vec::new();
    for (m, me) in morphs.iter().zip(&morph_emb) {
        for s in &m.subjects {
            for &i in &by_subject[s.as_str()] {
                rows.push(ScoreRow {
                    morph_id: m.id.clone(),
                    subject_id: s.clone(),
                    probe_id: probes[i].id.clone(),
                    score: backend.compare(me, &probe_emb[i]),
                });
            }
        }
    }
    ScoreTable::new(rows)
}

/// Scores of every pair of images from different subjects.
pub fn imposter_scores(images: &[Probe], backend: &dyn RecognitionBackend) -> Result<Vec<f64>> {
    let emb = embed_all(images.par_iter().map(|p| &p.image), backend)?;
    let mut out = Vec::new();
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            if images[i].subject != images[j].subject {
                out.push(backend.compare(&emb[i], &emb[j]));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub tau: f64,
    pub achieved_fmr: f64,
    pub target_fmr: f64,
}

/// Smallest `tau` with at most `target_fmr` of imposter scores strictly above it.
pub fn fmr_threshold(imposter: &[f64], target_fmr: f64) -> Result<Threshold> {
    if imposter.is_empty() {
        return Err(Error::EmptyInput("imposter scores"));
    }
    if !(target_fmr > 0.0 && target_fmr < 1.0) {
        return Err(Error::Precondition(format!(
            "target FMR {target_fmr} outside (0, 1)"
        )));
    }
    if imposter.iter().any(|s| !s.is_finite()) {
        return Err(Error::Validation("non-finite imposter score".into()));
    }
    let mut desc = imposter.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let n = desc.len();
    // largest k with k / n <= target
    let mut k = ((target_fmr * n as f64).floor() as usize).min(n - 1);
    while k + 1 < n && (k + 1) as f64 / n as f64 <= target_fmr {
        k += 1;
    }
    while k > 0 && k as f64 / n as f64 > target_fmr {
        k -= 1;
    }
    let tau = desc[k];
    let above = desc.iter().take_while(|&&s| s > tau).count();
    Ok(Threshold {
        tau,
        achieved_fmr: above as f64 / n as f64,
        target_fmr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

impl Aggregation {
    fn apply(self, scores: &[f64]) -> f64 {
        match self {
            Aggregation::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
        }
    }
}

/// Fraction of morphs whose aggregated score exceeds `tau` for both subjects.
pub fn mmpmr(table: &ScoreTable, tau: f64, agg: Aggregation) -> f64 {
    let morphs = table.morphs();
    if morphs.is_empty() {
        return 0.0;
    }
    let ok = morphs
        .iter()
        .filter(|m| {
            m.scores
                .iter()
                .map(|s| agg.apply(s))
                .fold(f64::INFINITY, f64::min)
                > tau
        })
        .count();
    ok as f64 / morphs.len() as f64
}

/// Pairs each morph's subject-1 and subject-2 scores by probe index,
/// truncating to the shorter list.
pub fn paired_attempts(table: &ScoreTable) -> Vec<Vec<(f64, f64)>> {
    table
        .morphs()
        .iter()
        .map(|m| {
            m.scores[0]
                .iter()
                .copied()
                .zip(m.scores[1].iter().copied())
                .collect()
        })
        .collect()
}

/// Fraction of paired attempts where both scores exceed `tau`.
pub fn fmmpmr(attempts: &[Vec<(f64, f64)>], tau: f64) -> Result<f64> {
    if attempts.is_empty() {
        return Err(Error::EmptyInput("paired attempts"));
    }
    if attempts.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput("a morph without paired attempts"));
    }
    let total: usize = attempts.iter().map(Vec::len).sum();
    let ok = attempts
        .iter()
        .flatten()
        .filter(|(a, b)| *a > tau && *b > tau)
        .count();
    Ok(ok as f64 / total as f64)
}

/// Vulnerability of one backend to one attack type. Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VulnReport {
    pub attack: String,
    pub backend: String,
    pub tau: f64,
    pub target_fmr: f64,
    pub achieved_fmr: f64,
    pub aggregation: Aggregation,
    pub morphs: usize,
    pub mmpmr: f64,
    pub fmmpmr: f64,
    /// Per morph: best score against subject 1 and subject 2.
    pub scatter: Vec<[f64; 2]>,
    pub morph_ids: Vec<String>,
    pub seed: u64,
    pub published_context: PublishedContext,
}

impl VulnReport {
    pub fn validate(&self) -> Result<()> {
        let pct = |v: f64| (0.0..=100.0).contains(&v);
        let bad = |m: &str| {
            Err(Error::Report(format!(
                "{}/{}: {m}",
                self.attack, self.backend
            )))
        };
        if self.attack.is_empty() || self.backend.is_empty() {
            return bad("empty attack or backend name");
        }
        if !self.tau.is_finite() || !pct(self.mmpmr) || !pct(self.fmmpmr) {
            return bad("rate outside [0, 100] or non-finite threshold");
        }
        if !(0.0..=1.0).contains(&self.achieved_fmr) || self.achieved_fmr > self.target_fmr {
            return bad("achieved FMR exceeds its target");
        }
        if self.scatter.len() != self.morphs || self.morph_ids.len() != self.morphs {
            return bad("scatter length differs from morph count");
        }
        if self.scatter.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite scatter point");
        }
        if !self.published_context.is_contextual() {
            return bad("published figures must be flagged as not reproduced");
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: VulnReport = serde_json::from_slice(bytes)?;
        r.validate()?;
        Ok(r)
    }

    /// Plot-ready scatter CSV.
    pub fn scatter_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["morph_id", "subject1_score", "subject2_score"])?;
        for (id, [a, b]) in self.morph_ids.iter().zip(&self.scatter) {
            w.write_record([id.clone(), a.to_string(), b.to_string()])?;
        }
        w.into_inner().map_err(|e| Error::Report(e.to_string()))
    }
}

/// A score table for one (attack type, backend) cell.
#[derive(Debug, Clone, Copy)]
pub struct AttackScores<'a> {
    pub attack: &'a str,
    pub backend: &'a str,
    pub table: &'a ScoreTable,
}

/// One report per table; `thresholds` is keyed by backend name.
pub fn vulnerability_report(
    tables: &[AttackScores<'_>],
    thresholds: &HashMap<String, Threshold>,
    agg: Aggregation,
    seed: u64,
) -> Result<Vec<VulnReport>> {
    tables
        .iter()
        .map(|t| {
            let th = thresholds
                .get(t.backend)
                .ok_or_else(|| Error::Report(format!("no threshold for backend {}", t.backend)))?;
            let morphs = t.table.morphs();
            let fm = if morphs.is_empty() {
                0.0
            } else {
                fmmpmr(&paired_attempts(t.table), th.tau)?
            };
            let report = VulnReport {
                attack: t.attack.to_string(),
                backend: t.backend.to_string(),
                tau: th.tau,
                target_fmr: th.target_fmr,
                achieved_fmr: th.achieved_fmr,
                aggregation: agg,
                morphs: morphs.len(),
                mmpmr: 100.0 * mmpmr(t.table, th.tau, agg),
                fmmpmr: 100.0 * fm,
                scatter: morphs
                    .iter()
                    .map(|m| m.scores.each_ref().map(|s| Aggregation::Max.apply(s)))
                    .collect(),
                morph_ids: morphs.iter().map(|m| m.morph_id.to_string()).collect(),
                seed,
                published_context: PublishedContext::new(),
            };
            report.validate()?;
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: &str, s: &str, p: &str, score: f64) -> ScoreRow {
        ScoreRow {
            morph_id: m.into(),
            subject_id: s.into(),
            probe_id: p.into(),
            score,
        }
    }

    fn gray(v: f64) -> FaceImage {
        FaceImage::filled(8, 8, [v; 3]).unwrap()
    }

    #[test]
    fn one_morph_two_subjects_two_probes_gives_four_rows() {
        let morphs = vec![MorphSample {
            id: "m".into(),
            image: gray(0.5),
            subjects: ["a".into(), "b".into()],
            sources: ["a0".into(), "b0".into()],
        }];
        let probes: Vec<Probe> = [
            ("a1", "a", 0.4),
            ("a2", "a", 0.7),
            ("b1", "b", 0.5),
            ("b2", "b", 0.1),
        ]
        .iter()
        .map(|&(id, s, v)| Probe {
            id: id.into(),
            subject: s.into(),
            image: gray(v),
        })
        .collect();
        let table = score_morphs(&morphs, &probes, &DownsampledPixels { grid: 1 }).unwrap();
        assert_eq!(table.rows().len(), 4);
        let expect = [-0.1, -0.2, 0.0, -0.4];
        for (r, e) in table.rows().iter().zip(expect) {
            assert!((r.score - e).abs() < 1e-12, "{r:?}");
        }

        let mut leaked = probes.clone();
        leaked[0].id = "a0".into();
        assert!(matches!(
            score_morphs(&morphs, &leaked, &DownsampledPixels { grid: 1 }),
            Err(Error::ScoringProtocol(_))
        ));
        assert!(matches!(
            score_morphs(&morphs, &probes[..2], &DownsampledPixels { grid: 1 }),
            Err(Error::ScoringProtocol(_))
        ));
    }

    #[test]
    fn fmr_threshold_examples() {
        let s: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let t = fmr_threshold(&s, 0.10).unwrap();
        assert_eq!(t.tau, 0.9);
        assert_eq!(t.achieved_fmr, 0.1);

        let t = fmr_threshold(&[0.5; 10], 0.1).unwrap();
        assert_eq!((t.tau, t.achieved_fmr), (0.5, 0.0));
        assert!(matches!(fmr_threshold(&[], 0.1), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn fmr_threshold_on_2000_scores_leaves_at_most_two_above() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let s: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let t = fmr_threshold(&s, 0.001).unwrap();
        assert!(s.iter().filter(|&&v| v > t.tau).count() <= 2);
    }

    #[test]
    fn mmpmr_and_fmmpmr_examples() {
        let table = ScoreTable::new(vec![
            row("m1", "a", "p1", 0.7),
            row("m1", "b", "p2", 0.6),
            row("m2", "a", "p1", 0.7),
            row("m2", "c", "p3", 0.4),
        ])
        .unwrap();
        assert_eq!(mmpmr(&table, 0.5, Aggregation::Max), 0.5);
        assert_eq!(mmpmr(&table, 0.0, Aggregation::Max), 1.0);
        assert_eq!(mmpmr(&table, 0.7, Aggregation::Max), 0.0);
        assert_eq!(fmmpmr(&[vec![(0.7, 0.6), (0.8, 0.4)]], 0.5).unwrap(), 0.5);
        assert_eq!(fmmpmr(&[vec![(0.7, 0.6)]], 0.5).unwrap(), 1.0);
        assert!(fmmpmr(&[], 0.5).is_err());
        assert!(fmmpmr(&[vec![]], 0.5).is_err());
    }

    #[test]
    fn table_invariants() {
        assert!(ScoreTable::new(vec![row("m", "a", "p", 0.1), row("m", "a", "p", 0.2)]).is_err());
        assert!(ScoreTable::new(vec![row("m", "a", "p", 0.1)]).is_err());
        let t = ScoreTable::new(vec![row("m", "a", "p", 0.1), row("m", "b", "q", 0.2)]).unwrap();
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with(b"morph_id,subject_id,probe_id,score\n"));
        assert_eq!(ScoreTable::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn report_for_single_morph_above_threshold() {
        let t = ScoreTable::new(vec![row("m", "a", "p", 0.9), row("m", "b", "q", 0.8)]).unwrap();
        let th = HashMap::from([(
            "toy".to_string(),
            Threshold {
                tau: 0.5,
                achieved_fmr: 0.0,
                target_fmr: 0.001,
            },
        )]);
        let cells = [AttackScores {
            attack: "lma",
            backend: "toy",
            table: &t,
        }];
        let r = vulnerability_report(&cells, &th, Aggregation::Max, 3).unwrap();
        assert_eq!((r[0].mmpmr, r[0].fmmpmr), (100.0, 100.0));
        assert_eq!(r[0].scatter, vec![[0.9, 0.8]]);
        let json = serde_json::to_vec(&r[0]).unwrap();
        assert_eq!(VulnReport::from_json(&json).unwrap(), r[0]);

        let missing = [AttackScores {
            attack: "lma",
            backend: "other",
            table: &t,
        }];
        assert!(matches!(
            vulnerability_report(&missing, &th, Aggregation::Max, 3),
            Err(Error::Report(_))
        ));
    }
}
