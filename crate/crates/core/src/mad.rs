//! Morphing-attack detection: LBP texture histograms over colour spaces and a
//! Gaussian scale space, one ridge-regularised linear scorer per feature
//! block, mean fusion, and ISO/IEC 30107-3 error rates.
//!
//! This is a re-interpretation of the Hybrid/Ensemble detectors with the same
//! protocol shape. It makes no claim of numeric fidelity to them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::imaging::{FaceImage, Plane};
use crate::reference::PublishedContext;

pub const LBP_BINS: usize = 256;
pub const LBP_NEIGHBORS: usize = 8;
pub const RIDGE_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    #[serde(rename = "ycbcr")]
    YCbCr,
    Hsv,
}

impl FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(ColorSpace::Rgb),
            "ycbcr" => Ok(ColorSpace::YCbCr),
            "hsv" => Ok(ColorSpace::Hsv),
            _ => Err(Error::UnknownColorSpace(s.to_string())),
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorSpace::Rgb => "rgb",
            ColorSpace::YCbCr => "ycbcr",
            ColorSpace::Hsv => "hsv",
        })
    }
}

fn rgb_to_ycbcr([r, g, b]: [f64; 3]) -> [f64; 3] {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    [y, 0.5 + (b - y) / 1.772, 0.5 + (r - y) / 1.402]
}

/// Hexcone HSV with hue scaled to [0, 1).
fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let h = if c == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        (b - r) / c + 2.0
    } else {
        (r - g) / c + 4.0
    };
    let s = if max == 0.0 { 0.0 } else { c / max };
    [(h / 6.0).rem_euclid(1.0), s, max]
}

/// Three channel planes of `image` in `space`, each in [0, 1].
pub fn color_transform(image: &FaceImage, space: ColorSpace) -> [Plane; 3] {
    let (w, h) = image.size();
    let convert: fn([f64; 3]) -> [f64; 3] = match space {
        ColorSpace::Rgb => |p| p,
        ColorSpace::YCbCr => rgb_to_ycbcr,
        ColorSpace::Hsv => rgb_to_hsv,
    };
    let px: Vec<[f64; 3]> = image
        .data()
        .chunks_exact(3)
        .map(|p| convert([p[0], p[1], p[2]]))
        .collect();
    std::array::from_fn(|c| Plane {
        width: w,
        height: h,
        data: px.iter().map(|p| p[c].clamp(0.0, 1.0)).collect(),
    })
}

fn gaussian_kernel() -> [f64; 7] {
    let mut k: [f64; 7] = std::array::from_fn(|i| (-((i as f64 - 3.0).powi(2)) / 2.0).exp());
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable sigma-1 blur (7 taps, clamp-to-edge) followed by keeping the
/// even rows and columns.
fn blur_decimate(p: &Plane) -> Plane {
    let k = gaussian_kernel();
    let (w, h) = (p.width, p.height);
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let rows = Plane::from_fn(w, h, |x, y| {
        (0..7)
            .map(|t| k[t] * p.at(clamp(x as isize + t as isize - 3, w), y))
            .sum()
    });
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    Plane::from_fn(ow, oh, |x, y| {
        (0..7)
            .map(|t| k[t] * rows.at(2 * x, clamp(2 * y as isize + t as isize - 3, h)))
            .sum()
    })
}

/// Level 0 is the input; each further level is blurred and halved.
pub fn gaussian_pyramid(plane: &Plane, levels: usize) -> Result<Vec<Plane>> {
    if levels == 0 {
        return Err(Error::Precondition(
            "pyramid needs at least one level".into(),
        ));
    }
    let need = 1usize << (levels - 1);
    if plane.width < need || plane.height < need {
        return Err(Error::TooSmall(format!(
            "{}x{} plane cannot hold {levels} pyramid levels",
            plane.width, plane.height
        )));
    }
    let mut out = vec![plane.clone()];
    for _ in 1..levels {
        let next = blur_decimate(out.last().expect("non-empty"));
        out.push(next);
    }
    Ok(out)
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Neighbour offsets on a circle of `radius`, counter-clockwise from +x with
/// image y pointing down.
pub fn lbp_offsets(radius: usize) -> [(f64, f64); LBP_NEIGHBORS] {
    std::array::from_fn(|k| {
        let a = std::f64::consts::TAU * k as f64 / LBP_NEIGHBORS as f64;
        (
            snap(radius as f64 * a.cos()),
            snap(-(radius as f64) * a.sin()),
        )
    })
}

/// Per-pixel LBP codes over the interior, row-major.
pub fn lbp_codes(plane: &Plane, radius: usize) -> Result<Vec<u8>> {
    if radius == 0 {
        return Err(Error::Precondition("LBP radius must be positive".into()));
    }
    if plane.width <= 2 * radius + 1 || plane.height <= 2 * radius + 1 {
        return Err(Error::TooSmall(format!(
            "{}x{} plane is too small for LBP radius {radius}",
            plane.width, plane.height
        )));
    }
    let offsets = lbp_offsets(radius);
    let mut codes = Vec::with_capacity((plane.width - 2 * radius) * (plane.height - 2 * radius));
    for y in radius..plane.height - radius {
        for x in radius..plane.width - radius {
            let c = plane.at(x, y);
            let mut code = 0u8;
            for (k, (dx, dy)) in offsets.iter().enumerate() {
                if plane.sample(x as f64 + dx, y as f64 + dy) >= c {
                    code |= 1 << k;
                }
            }
            codes.push(code);
        }
    }
    Ok(codes)
}

/// L1-normalised 256-bin histogram of interior LBP codes.
pub fn lbp_histogram(plane: &Plane, radius: usize) -> Result<Vec<f64>> {
    let codes = lbp_codes(plane, radius)?;
    let mut hist = vec![0.0; LBP_BINS];
    for &c in &codes {
        hist[c as usize] += 1.0;
    }
    let n = codes.len() as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub color_spaces: Vec<ColorSpace>,
    pub pyramid_levels: usize,
    pub lbp_radii: Vec<usize>,
    pub lbp_neighbors: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            color_spaces: vec![ColorSpace::Rgb, ColorSpace::YCbCr, ColorSpace::Hsv],
            pyramid_levels: 3,
            lbp_radii: vec![1, 2],
            lbp_neighbors: LBP_NEIGHBORS,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.color_spaces.is_empty() {
            return Err(Error::Validation(
                "feature config needs a colour space".into(),
            ));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::Validation(
                "pyramid_levels must be at least 1".into(),
            ));
        }
        if self.lbp_radii.is_empty() || self.lbp_radii.contains(&0) {
            return Err(Error::Validation(
                "lbp_radii must be a non-empty list of positive radii".into(),
            ));
        }
        if self.lbp_neighbors != LBP_NEIGHBORS {
            return Err(Error::Validation(format!(
                "lbp_neighbors is fixed at {LBP_NEIGHBORS}"
            )));
        }
        Ok(())
    }

    pub fn block_count(&self) -> usize {
        self.color_spaces.len() * 3 * self.pyramid_levels * self.lbp_radii.len()
    }
}

/// Source of per-image feature blocks. Alternative texture descriptors plug
/// in here and train through [`MadModel::fit_blocks`].
pub trait FeatureHook: Send + Sync {
    fn extract(&self, image: &FaceImage) -> Result<Vec<Vec<f64>>>;
}

impl FeatureHook for FeatureConfig {
    fn extract(&self, image: &FaceImage) -> Result<Vec<Vec<f64>>> {
        extract_features(image, self)
    }
}

/// Blocks ordered colour space, channel, pyramid level, radius.
pub fn extract_features(image: &FaceImage, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let mut blocks = Vec::with_capacity(config.block_count());
    for &space in &config.color_spaces {
        for channel in color_transform(image, space) {
            for level in gaussian_pyramid(&channel, config.pyramid_levels)? {
                for &r in &config.lbp_radii {
                    blocks.push(lbp_histogram(&level, r)?);
                }
            }
        }
    }
    Ok(blocks)
}

fn extract_all(images: &[FaceImage], hook: &dyn FeatureHook) -> Result<Vec<Vec<Vec<f64>>>> {
    images.par_iter().map(|img| hook.extract(img)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearClassifier {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    #[default]
    Mean,
}

/// One linear scorer per feature block; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MadModel {
    config: FeatureConfig,
    classifiers: Vec<LinearClassifier>,
    fusion: Fusion,
}

/// Ridge least squares with an unpenalised bias: targets 1 (attack), 0 (bona fide).
fn fit_ridge(xs: &[&[f64]], ys: &[f64], lambda: f64) -> Result<LinearClassifier> {
    let (n, d) = (xs.len(), xs[0].len());
    let mean: Vec<f64> = (0..d)
        .map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, d, |i, j| xs[i][j] - mean[j]);
    let yc = DVector::from_iterator(n, ys.iter().map(|y| y - y_mean));
    let mut gram = xc.tr_mul(&xc);
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let rhs = xc.tr_mul(&yc);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Training("ridge system is not positive definite".into()))?;
    // Weights are stored as f32 in model files; train at that precision so a
    // reloaded model scores identically.
    let weights: Vec<f64> = chol.solve(&rhs).iter().map(|&w| w as f32 as f64).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Training("non-finite classifier weights".into()));
    }
    let bias = y_mean - weights.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearClassifier { weights, bias })
}

impl MadModel {
    pub fn from_parts(config: FeatureConfig, classifiers: Vec<LinearClassifier>) -> Result<Self> {
        if classifiers.is_empty() {
            return Err(Error::Validation("model has no classifiers".into()));
        }
        if classifiers
            .iter()
            .any(|c| !c.bias.is_finite() || c.weights.iter().any(|w| !w.is_finite()))
        {
            return Err(Error::Validation(
                "classifier parameters must be finite".into(),
            ));
        }
        Ok(MadModel {
            config,
            classifiers,
            fusion: Fusion::Mean,
        })
    }

    /// Trains on precomputed blocks; every sample must have the same block layout.
    pub fn fit_blocks(
        config: FeatureConfig,
        attacks: &[Vec<Vec<f64>>],
        bonafide: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        if attacks.is_empty() || bonafide.is_empty() {
            return Err(Error::Precondition(
                "training needs attack and bona fide samples".into(),
            ));
        }
        let layout: Vec<usize> = attacks[0].iter().map(Vec::len).collect();
        if layout.is_empty() || layout.contains(&0) {
            return Err(Error::Precondition("empty feature block".into()));
        }
        for s in attacks.iter().chain(bonafide) {
            if s.len() != layout.len() || s.iter().map(Vec::len).ne(layout.iter().copied()) {
                return Err(Error::ConfigMismatch(
                    "samples have differing feature layouts".into(),
                ));
            }
        }
        let ys: Vec<f64> = attacks
            .iter()
            .map(|_| 1.0)
            .chain(bonafide.iter().map(|_| 0.0))
            .collect();
        let classifiers = (0..layout.len())
            .into_par_iter()
            .map(|b| {
                let xs: Vec<&[f64]> = attacks
                    .iter()
                    .chain(bonafide)
                    .map(|s| s[b].as_slice())
                    .collect();
                fit_ridge(&xs, &ys, RIDGE_LAMBDA)
            })
            .collect::<Result<Vec<_>>>()?;
        MadModel::from_parts(config, classifiers)
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn classifiers(&self) -> &[LinearClassifier] {
        &self.classifiers
    }

    pub fn fusion(&self) -> Fusion {
        self.fusion
    }

    /// Fused score of precomputed blocks.
    pub fn score_blocks(&self, blocks: &[Vec<f64>]) -> Result<f64> {
        if blocks.len() != self.classifiers.len() {
            return Err(Error::ConfigMismatch(format!(
                "{} feature blocks, model has {} classifiers",
                blocks.len(),
                self.classifiers.len()
            )));
        }
        let mut sum = 0.0;
        for (i, (b, c)) in blocks.iter().zip(&self.classifiers).enumerate() {
            if b.len() != c.weights.len() {
                return Err(Error::ConfigMismatch(format!(
                    "block {i} has {} values, classifier expects {}",
                    b.len(),
                    c.weights.len()
                )));
            }
            sum += c.score(b);
        }
        Ok(sum / blocks.len() as f64)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let file = ModelFile {
            config: self.config.clone(),
            fusion: self.fusion,
            classifiers: self
                .classifiers
                .iter()
                .map(|c| ClassifierFile {
                    weights: B64.encode(
                        c.weights
                            .iter()
                            .flat_map(|&w| (w as f32).to_le_bytes())
                            .collect::<Vec<u8>>(),
                    ),
                    bias: c.bias,
                })
                .collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: ModelFile = serde_json::from_slice(bytes)?;
        file.config.validate()?;
        let classifiers = file
            .classifiers
            .into_iter()
            .map(|c| {
                let raw = B64
                    .decode(&c.weights)
                    .map_err(|e| Error::Validation(format!("weights: {e}")))?;
                if raw.len() % 4 != 0 {
                    return Err(Error::Validation(
                        "weight payload is not a whole number of f32".into(),
                    ));
                }
                let weights = raw
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                    .collect();
                Ok(LinearClassifier {
                    weights,
                    bias: c.bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = MadModel::from_parts(file.config, classifiers)?;
        if model.classifiers.len() != model.config.block_count() {
            return Err(Error::ConfigMismatch(format!(
                "model has {} classifiers, config implies {}",
                model.classifiers.len(),
                model.config.block_count()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        MadModel::from_json(&fsio::read(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    config: FeatureConfig,
    fusion: Fusion,
    classifiers: Vec<ClassifierFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierFile {
    /// Base64 of little-endian f32 values.
    weights: String,
    bias: f64,
}

pub fn train_mad(
    attacks: &[FaceImage],
    bonafide: &[FaceImage],
    config: &FeatureConfig,
) -> Result<MadModel> {
    if attacks.is_empty() || bonafide.is_empty() {
        return Err(Error::Precondition(
            "training needs attack and bona fide images".into(),
        ));
    }
    config.validate()?;
    let a = extract_all(attacks, config)?;
    let b = extract_all(bonafide, config)?;
    MadModel::fit_blocks(config.clone(), &a, &b)
}

/// Higher means more attack-like.
pub fn mad_score(image: &FaceImage, model: &MadModel) -> Result<f64> {
    model.score_blocks(&extract_features(image, &model.config)?)
}

pub fn mad_scores(images: &[FaceImage], model: &MadModel) -> Result<Vec<f64>> {
    images.par_iter().map(|img| mad_score(img, model)).collect()
}

/// Detection error trade-off summary; rates are fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetReport {
    pub d_eer: f64,
    /// Keyed by APCER level ("0.05", "0.10").
    pub bpcer_at_apcer: BTreeMap<String, f64>,
    /// (tau, APCER, BPCER), tau ascending.
    pub roc_points: Vec<[f64; 3]>,
}

pub const APCER_LEVELS: [(f64, &str); 2] = [(0.05, "0.05"), (0.10, "0.10")];

impl DetReport {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.d_eer) || !self.bpcer_at_apcer.values().all(|&v| unit(v)) {
            return Err(Error::Report("rate outside [0, 1]".into()));
        }
        if APCER_LEVELS
            .iter()
            .any(|(_, k)| !self.bpcer_at_apcer.contains_key(*k))
        {
            return Err(Error::Report("missing BPCER@APCER level".into()));
        }
        if self.roc_points.is_empty() {
            return Err(Error::Report("empty ROC".into()));
        }
        for p in &self.roc_points {
            if !p[0].is_finite() || !unit(p[1]) || !unit(p[2]) {
                return Err(Error::Report("invalid ROC point".into()));
            }
        }
        for w in self.roc_points.windows(2) {
            if !(w[0][0] < w[1][0] && w[0][1] <= w[1][1] && w[0][2] >= w[1][2]) {
                return Err(Error::Report("ROC is not monotone in tau".into()));
            }
        }
        Ok(())
    }
}

/// APCER(tau) = share of attacks scored below tau; BPCER(tau) = share of
/// bona fide scored at or above tau. Thresholds are every distinct score
/// plus one just above the maximum.
pub fn det_metrics(attack: &[f64], bonafide: &[f64]) -> Result<DetReport> {
    if attack.is_empty() {
        return Err(Error::EmptyInput("attack scores"));
    }
    if bonafide.is_empty() {
        return Err(Error::EmptyInput("bona fide scores"));
    }
    if attack.iter().chain(bonafide).any(|s| !s.is_finite()) {
        return Err(Error::Validation("non-finite detection score".into()));
    }
    let mut a = attack.to_vec();
    let mut b = bonafide.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut taus: Vec<f64> = a.iter().chain(&b).copied().collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus.push(taus.last().expect("non-empty").next_up());

    let (na, nb) = (a.len() as f64, b.len() as f64);
    let roc: Vec<[f64; 3]> = taus
        .iter()
        .map(|&t| {
            let below_a = a.partition_point(|&s| s < t);
            let below_b = b.partition_point(|&s| s < t);
            [t, below_a as f64 / na, (b.len() - below_b) as f64 / nb]
        })
        .collect();

    // The first tau has APCER 0 and BPCER 1, the last APCER 1 and BPCER 0, so
    // a crossing always exists. Taking the first one favours the larger BPCER.
    let i = roc
        .iter()
        .position(|p| p[1] >= p[2])
        .expect("crossing exists");
    let d_eer = if roc[i][1] == roc[i][2] || i == 0 {
        roc[i][1]
    } else {
        let (p, q) = (roc[i - 1], roc[i]);
        let (d0, d1) = (p[1] - p[2], q[1] - q[2]);
        let f = -d0 / (d1 - d0);
        let apcer = p[1] + f * (q[1] - p[1]);
        let bpcer = p[2] + f * (q[2] - p[2]);
        apcer.max(bpcer)
    };

    let bpcer_at_apcer = APCER_LEVELS
        .iter()
        .map(|&(alpha, key)| {
            let best = roc
                .iter()
                .filter(|p| p[1] <= alpha)
                .map(|p| p[2])
                .fold(f64::INFINITY, f64::min);
            (key.to_string(), best)
        })
        .collect();
    Ok(DetReport {
        d_eer,
        bpcer_at_apcer,
        roc_points: roc,
    })
}

/// Test images of one attack type with their bona fide counterparts.
#[derive(Debug, Clone, Copy)]
pub struct TestSet<'a> {
    pub attack: &'a str,
    pub attacks: &'a [FaceImage],
    pub bonafide: &'a [FaceImage],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSetCell {
    pub trained_on: String,
    pub tested_on: String,
    pub report: DetReport,
    pub attack_scores: Vec<f64>,
    pub bonafide_scores: Vec<f64>,
}

/// Every (training attack type, test attack type) pair; cells where the two
/// agree are the known-attack results.
pub fn cross_set_evaluate(
    models: &[(&str, &MadModel)],
    tests: &[TestSet<'_>],
) -> Result<Vec<CrossSetCell>> {
    let mut out = Vec::with_capacity(models.len() * tests.len());
    for (trained_on, model) in models {
        for t in tests {
            let attack_scores = mad_scores(t.attacks, model)?;
            let bonafide_scores = mad_scores(t.bonafide, model)?;
            out.push(CrossSetCell {
                trained_on: trained_on.to_string(),
                tested_on: t.attack.to_string(),
                report: det_metrics(&attack_scores, &bonafide_scores)?,
                attack_scores,
                bonafide_scores,
            });
        }
    }
    Ok(out)
}

/// Detector evaluation report; the detection fields mirror [`DetReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MadReport {
    pub trained_on: String,
    pub tested_on: String,
    pub attack_count: usize,
    pub bonafide_count: usize,
    pub d_eer: f64,
    pub bpcer_at_apcer: BTreeMap<String, f64>,
    pub roc_points: Vec<[f64; 3]>,
    pub seed: u64,
    pub published_context: PublishedContext,
}

impl MadReport {
    pub fn new(
        trained_on: &str,
        tested_on: &str,
        counts: (usize, usize),
        det: DetReport,
        seed: u64,
    ) -> Self {
        MadReport {
            trained_on: trained_on.into(),
            tested_on: tested_on.into(),
            attack_count: counts.0,
            bonafide_count: counts.1,
            d_eer: det.d_eer,
            bpcer_at_apcer: det.bpcer_at_apcer,
            roc_points: det.roc_points,
            seed,
            published_context: PublishedContext::new(),
        }
    }

    pub fn det(&self) -> DetReport {
        DetReport {
            d_eer: self.d_eer,
            bpcer_at_apcer: self.bpcer_at_apcer.clone(),
            roc_points: self.roc_points.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.det().validate()?;
        if self.attack_count == 0 || self.bonafide_count == 0 {
            return Err(Error::Report("detector report without samples".into()));
        }
        if !self.published_context.is_contextual() {
            return Err(Error::Report(
                "published figures must be flagged as not reproduced".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: MadReport = serde_json::from_slice(bytes)?;
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub image_id: String,
    /// 1 = attack, 0 = bona fide.
    pub label: u8,
    pub score: f64,
}

pub fn scores_to_csv(entries: &[ScoreEntry]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in entries {
        w.serialize(e)?;
    }
    w.into_inner().map_err(|e| Error::Report(e.to_string()))
}

pub fn scores_from_csv(bytes: &[u8]) -> Result<Vec<ScoreEntry>> {
    let mut r = csv::Reader::from_reader(bytes);
    let entries = r
        .deserialize()
        .collect::<std::result::Result<Vec<ScoreEntry>, _>>()?;
    if let Some(e) = entries.iter().find(|e| e.label > 1 || !e.score.is_finite()) {
        return Err(Error::Validation(format!(
            "bad score entry for {}",
            e.image_id
        )));
    }
    Ok(entries)
}
