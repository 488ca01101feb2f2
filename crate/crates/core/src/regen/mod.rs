//! Latent-space regeneration of landmark morphs.
//!
//! A morph is encoded into a generator's latent space, optionally refined
//! by minimizing a perceptual loss with L-BFGS, and regenerated with the
//! frozen generator. No latent manipulation happens between encoding and
//! generation; [`latent_interpolation_morph`] is the interpolating baseline.

pub mod external;
mod lbfgs;
pub mod toy;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lbfgs::{lbfgs_minimize, FitOptions, LbfgsResult, StopReason};

use crate::error::{Error, Result};
use crate::imaging::{align_face, FaceImage, LandmarkSet, Point};
use crate::morph::{self, check_alpha};

/// Latent width of the full-size generator.
pub const LATENT_DIM: usize = 512;

/// Working image side of the full-size generator.
pub const FULL_RESOLUTION: usize = 1024;

/// Generator input; all components finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("empty latent vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "latent component {i} is not finite"
            )));
        }
        Ok(LatentVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// `(1 − alpha)·self + alpha·other`.
    pub fn lerp(&self, other: &LatentVector, alpha: f64) -> Result<LatentVector> {
        if self.len() != other.len() {
            return Err(Error::CardinalityMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        LatentVector::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                .collect(),
        )
    }
}

/// Maps latents to images. Implementations are deterministic and their
/// output size is fixed.
pub trait GeneratorBackend: Send + Sync {
    fn latent_dim(&self) -> usize;
    fn output_size(&self) -> (usize, usize);
    fn generate(&self, z: &LatentVector) -> Result<FaceImage>;
    /// Fingerprint of the generator weights.
    fn parameter_digest(&self) -> String;
    /// `Jᵀ·grad_pixels` for the generator Jacobian at `z`, when the backend
    /// can differentiate.
    fn vjp(&self, _z: &LatentVector, _grad_pixels: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }
}

pub trait EncoderBackend: Send + Sync {
    fn input_size(&self) -> (usize, usize);
    fn latent_dim(&self) -> usize;
    fn encode(&self, image: &FaceImage) -> Result<LatentVector>;
}

/// An encoder whose parameters can be optimized.
pub trait TrainableEncoder: EncoderBackend + Clone {
    fn parameters(&self) -> Vec<f64>;
    fn set_parameters(&mut self, params: &[f64]) -> Result<()>;
    /// Gradient w.r.t. the parameters of `grad_latent · encode(image)`.
    fn parameter_vjp(&self, image: &FaceImage, grad_latent: &[f64]) -> Result<Vec<f64>>;
}

/// Feature extractor for the perceptual loss.
pub trait PerceptualBackend: Send + Sync {
    fn features(&self, image: &FaceImage) -> Result<Vec<f64>>;
    /// `Jᵀ·grad_features` with respect to the interleaved pixel buffer.
    fn vjp(&self, _image: &FaceImage, _grad_features: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }
}

#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub encoder: &'a dyn EncoderBackend,
    pub generator: &'a dyn GeneratorBackend,
    pub perceptual: &'a dyn PerceptualBackend,
}

impl Backends<'_> {
    fn check(&self) -> Result<()> {
        if self.encoder.latent_dim() != self.generator.latent_dim() {
            return Err(Error::Backend(format!(
                "encoder emits {} latents, generator takes {}",
                self.encoder.latent_dim(),
                self.generator.latent_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegenOptions {
    pub fit: FitOptions,
    /// Refine the encoder's latent per image before generating.
    pub refine: bool,
}

impl Default for RegenOptions {
    fn default() -> Self {
        RegenOptions {
            fit: FitOptions::default(),
            refine: true,
        }
    }
}

fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Backend(format!(
            "feature lengths differ or are empty: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Mean squared difference of the two images' features.
pub fn perceptual_loss(x: &FaceImage, y: &FaceImage, phi: &dyn PerceptualBackend) -> Result<f64> {
    mse(&phi.features(x)?, &phi.features(y)?)
}

/// Central-difference step used when a backend cannot differentiate.
const FD_STEP: f64 = 1e-3;

/// Perceptual loss of `generator(z)` against a fixed target image.
pub struct LatentObjective<'a> {
    target: Vec<f64>,
    generator: &'a dyn GeneratorBackend,
    perceptual: &'a dyn PerceptualBackend,
}

impl<'a> LatentObjective<'a> {
    pub fn new(
        target: &FaceImage,
        generator: &'a dyn GeneratorBackend,
        perceptual: &'a dyn PerceptualBackend,
    ) -> Result<Self> {
        Ok(LatentObjective {
            target: perceptual.features(target)?,
            generator,
            perceptual,
        })
    }

    pub fn loss(&self, z: &[f64]) -> Result<f64> {
        let image = self.generator.generate(&LatentVector::new(z.to_vec())?)?;
        mse(&self.perceptual.features(&image)?, &self.target)
    }

    /// Loss and gradient; analytic when both backends differentiate,
    /// central differences otherwise.
    pub fn loss_and_gradient(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let latent = LatentVector::new(z.to_vec())?;
        let image = self.generator.generate(&latent)?;
        let features = self.perceptual.features(&image)?;
        let loss = mse(&features, &self.target)?;
        let scale = 2.0 / features.len() as f64;
        let grad_features: Vec<f64> = features
            .iter()
            .zip(&self.target)
            .map(|(f, t)| scale * (f - t))
            .collect();
        if let Some(grad_pixels) = self.perceptual.vjp(&image, &grad_features) {
            if let Some(grad) = self.generator.vjp(&latent, &grad_pixels?) {
                return Ok((loss, grad?));
            }
        }
        Ok((loss, self.finite_difference_gradient(z)?))
    }

    pub fn finite_difference_gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut probe = z.to_vec();
        (0..z.len())
            .map(|i| {
                probe[i] = z[i] + FD_STEP;
                let up = self.loss(&probe)?;
                probe[i] = z[i] - FD_STEP;
                let down = self.loss(&probe)?;
                probe[i] = z[i];
                Ok((up - down) / (2.0 * FD_STEP))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LatentFit {
    pub latent: LatentVector,
    pub loss: f64,
    pub initial_loss: f64,
    pub trace: Vec<f64>,
}

/// Fits a latent whose generated image matches `image` perceptually,
/// starting from the encoder's estimate. The returned loss never exceeds
/// the loss at initialization.
pub fn fit_latent(
    image: &FaceImage,
    backends: Backends<'_>,
    opts: &FitOptions,
) -> Result<LatentFit> {
    backends.check()?;
    let z0 = backends.encoder.encode(image)?;
    let objective = LatentObjective::new(image, backends.generator, backends.perceptual)?;
    let out = lbfgs_minimize(|z| objective.loss_and_gradient(z), z0.values(), opts)?;
    Ok(LatentFit {
        latent: LatentVector::new(out.x)?,
        loss: out.loss,
        initial_loss: out.trace[0],
        trace: out.trace,
    })
}

#[derive(Debug, Clone)]
pub struct FinetuneOutput<E> {
    pub encoder: E,
    pub loss_before: f64,
    pub loss_after: f64,
    pub trace: Vec<f64>,
}

/// Optimizes the encoder parameters on `images` against the frozen
/// generator, minimizing the mean perceptual reconstruction loss.
pub fn finetune_encoder<E: TrainableEncoder>(
    encoder: &E,
    generator: &dyn GeneratorBackend,
    perceptual: &dyn PerceptualBackend,
    images: &[FaceImage],
    opts: &FitOptions,
) -> Result<FinetuneOutput<E>> {
    if images.is_empty() {
        return Err(Error::Precondition(
            "fine-tuning needs at least one image".into(),
        ));
    }
    if encoder.latent_dim() != generator.latent_dim() {
        return Err(Error::Backend(
            "encoder and generator latent widths differ".into(),
        ));
    }
    let objectives: Vec<LatentObjective<'_>> = images
        .iter()
        .map(|im| LatentObjective::new(im, generator, perceptual))
        .collect::<Result<_>>()?;
    let n = images.len() as f64;

    let evaluate = |params: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut enc = encoder.clone();
        enc.set_parameters(params)?;
        let per_image: Vec<(f64, Vec<f64>)> = images
            .par_iter()
            .zip(&objectives)
            .map(|(im, obj)| {
                let z = enc.encode(im)?;
                let (loss, grad_z) = obj.loss_and_gradient(z.values())?;
                Ok((loss, enc.parameter_vjp(im, &grad_z)?))
            })
            .collect::<Result<_>>()?;
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (l, g) in per_image {
            loss += l / n;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b / n);
        }
        Ok((loss, grad))
    };
    let out = lbfgs_minimize(evaluate, &encoder.parameters(), opts)?;
    let mut tuned = encoder.clone();
    tuned.set_parameters(&out.x)?;
    Ok(FinetuneOutput {
        encoder: tuned,
        loss_before: out.trace[0],
        loss_after: out.loss,
        trace: out.trace,
    })
}

/// Output of [`regenerate_detailed`].
#[derive(Debug, Clone)]
pub struct Regenerated {
    pub image: FaceImage,
    pub latent: LatentVector,
    /// Perceptual loss of the regenerated image against the input.
    pub loss: f64,
}

/// Encoder latent for `image`, refined per image when `opts.refine` is set,
/// with its perceptual loss.
pub fn infer_latent(
    image: &FaceImage,
    backends: Backends<'_>,
    opts: &RegenOptions,
) -> Result<(LatentVector, f64)> {
    backends.check()?;
    let expected = backends.encoder.input_size();
    if image.size() != expected {
        return Err(Error::ResizeRequired {
            expected,
            actual: image.size(),
        });
    }
    if opts.refine {
        let fit = fit_latent(image, backends, &opts.fit)?;
        Ok((fit.latent, fit.loss))
    } else {
        let z = backends.encoder.encode(image)?;
        let loss = LatentObjective::new(image, backends.generator, backends.perceptual)?
            .loss(z.values())?;
        Ok((z, loss))
    }
}

/// Re-generates `image` through the generator without touching the latent.
pub fn regenerate(
    image: &FaceImage,
    backends: Backends<'_>,
    opts: &RegenOptions,
) -> Result<FaceImage> {
    Ok(regenerate_detailed(image, backends, opts)?.image)
}

pub fn regenerate_detailed(
    image: &FaceImage,
    backends: Backends<'_>,
    opts: &RegenOptions,
) -> Result<Regenerated> {
    let (latent, loss) = infer_latent(image, backends, opts)?;
    let out = backends.generator.generate(&latent)?;
    if out.size() != backends.generator.output_size() {
        return Err(Error::Backend(format!(
            "generator returned {:?}, declared {:?}",
            out.size(),
            backends.generator.output_size()
        )));
    }
    Ok(Regenerated {
        image: out,
        latent,
        loss,
    })
}

/// Output of [`regen_morph`].
#[derive(Debug, Clone)]
pub struct RegenMorph {
    pub image: FaceImage,
    /// Landmark morph before alignment.
    pub lma: FaceImage,
    /// Landmark morph aligned to the encoder input.
    pub aligned: FaceImage,
    pub latent: LatentVector,
    pub loss: f64,
}

/// Landmark morph, aligned onto `template` at the encoder's input size,
/// then regenerated.
///
/// `template` holds target positions for the leading `template.len()`
/// landmarks (the facial points; border anchors are not used to align).
#[allow(clippy::too_many_arguments)]
pub fn regen_morph(
    img_a: &FaceImage,
    la: &LandmarkSet,
    img_b: &FaceImage,
    lb: &LandmarkSet,
    alpha: f64,
    backends: Backends<'_>,
    template: &[Point],
    opts: &RegenOptions,
) -> Result<RegenMorph> {
    let lma = morph::morph_pair_detailed(img_a, la, img_b, lb, alpha)?;
    if template.len() > lma.landmarks.len() {
        return Err(Error::CardinalityMismatch {
            left: lma.landmarks.len(),
            right: template.len(),
        });
    }
    let facial = &lma.landmarks.points()[..template.len()];
    let (aligned, _) = align_face(&lma.image, facial, template, backends.encoder.input_size())?;
    let regen = regenerate_detailed(&aligned, backends, opts)?;
    Ok(RegenMorph {
        image: regen.image,
        lma: lma.image,
        aligned,
        latent: regen.latent,
        loss: regen.loss,
    })
}

/// Baseline: fit both sources and generate from the blended latent.
pub fn latent_interpolation_morph(
    img_a: &FaceImage,
    img_b: &FaceImage,
    alpha: f64,
    backends: Backends<'_>,
    opts: &RegenOptions,
) -> Result<FaceImage> {
    check_alpha(alpha)?;
    let (za, _) = infer_latent(img_a, backends, opts)?;
    let (zb, _) = infer_latent(img_b, backends, opts)?;
    let z = if alpha == 0.0 {
        za
    } else if alpha == 1.0 {
        zb
    } else {
        za.lerp(&zb, alpha)?
    };
    backends.generator.generate(&z)
}
