//! Desk-scale reference backends.
//!
//! [`ToyGenerator`] is a two-layer decoder (tanh hidden layer, sigmoid
//! output) trained jointly with its mirror [`ToyEncoder`] as an autoencoder
//! on synthetic face sprites. [`ConvPerceptual`] is a fixed random
//! three-layer convolution stack. All of them are deterministic and
//! differentiable, so every regeneration contract can be exercised without
//! pretrained weights.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EncoderBackend, GeneratorBackend, LatentVector, PerceptualBackend, TrainableEncoder};
use crate::error::{Error, Result};
use crate::fsio;
use crate::imaging::FaceImage;
use crate::synth;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Dense {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Dense {
    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Dense {
        let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).expect("valid std");
        Dense {
            rows,
            cols,
            w: (0..rows * cols).map(|_| normal.sample(rng)).collect(),
            b: vec![0.0; rows],
        }
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .chunks_exact(self.cols)
            .zip(&self.b)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    /// `Wᵀ·g`.
    fn backward_input(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, gi) in self.w.chunks_exact(self.cols).zip(g) {
            if *gi != 0.0 {
                out.iter_mut().zip(row).for_each(|(o, w)| *o += gi * w);
            }
        }
        out
    }

    /// Appends `[g·xᵀ, g]` in parameter order.
    fn push_grad(&self, x: &[f64], g: &[f64], out: &mut Vec<f64>) {
        for gi in g {
            out.extend(x.iter().map(|xj| gi * xj));
        }
        out.extend_from_slice(g);
    }

    fn push_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w);
        out.extend_from_slice(&self.b);
    }

    fn load_params(&mut self, p: &[f64]) -> usize {
        let (nw, nb) = (self.w.len(), self.b.len());
        self.w.copy_from_slice(&p[..nw]);
        self.b.copy_from_slice(&p[nw..nw + nb]);
        nw + nb
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn digest_f64s(chunks: &[&[f64]]) -> String {
    let bytes: Vec<u8> = chunks
        .iter()
        .flat_map(|c| c.iter().flat_map(|v| v.to_le_bytes()))
        .collect();
    fsio::sha256_hex(&bytes)
}

fn check_latent(z: &LatentVector, dim: usize) -> Result<()> {
    if z.len() != dim {
        return Err(Error::Backend(format!(
            "latent has {} components, expected {dim}",
            z.len()
        )));
    }
    Ok(())
}

fn check_size(image: &FaceImage, size: (usize, usize)) -> Result<()> {
    if image.size() != size {
        return Err(Error::ResizeRequired {
            expected: size,
            actual: image.size(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyGenerator {
    width: usize,
    height: usize,
    hidden: Dense,
    output: Dense,
}

impl ToyGenerator {
    fn random(latent_dim: usize, hidden: usize, size: usize, rng: &mut ChaCha8Rng) -> Self {
        ToyGenerator {
            width: size,
            height: size,
            hidden: Dense::random(hidden, latent_dim, rng),
            output: Dense::random(size * size * 3, hidden, rng),
        }
    }

    fn forward(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = self.hidden.forward(z).into_iter().map(f64::tanh).collect();
        let out = self.output.forward(&h).into_iter().map(sigmoid).collect();
        (h, out)
    }

    /// Returns (parameter gradient, latent gradient).
    fn backward(&self, z: &[f64], h: &[f64], out: &[f64], g_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d2: Vec<f64> = g_out
            .iter()
            .zip(out)
            .map(|(g, o)| g * o * (1.0 - o))
            .collect();
        let gh = self.output.backward_input(&d2);
        let d1: Vec<f64> = gh.iter().zip(h).map(|(g, h)| g * (1.0 - h * h)).collect();
        let gz = self.hidden.backward_input(&d1);
        let mut params = Vec::with_capacity(self.hidden.param_count() + self.output.param_count());
        self.hidden.push_grad(z, &d1, &mut params);
        self.output.push_grad(h, &d2, &mut params);
        (params, gz)
    }

    fn latent_grad(&self, z: &[f64], g_out: &[f64]) -> Vec<f64> {
        let (h, out) = self.forward(z);
        let d2: Vec<f64> = g_out
            .iter()
            .zip(&out)
            .map(|(g, o)| g * o * (1.0 - o))
            .collect();
        let gh = self.output.backward_input(&d2);
        let d1: Vec<f64> = gh.iter().zip(&h).map(|(g, h)| g * (1.0 - h * h)).collect();
        self.hidden.backward_input(&d1)
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::new();
        self.hidden.push_params(&mut p);
        self.output.push_params(&mut p);
        p
    }

    fn set_parameters(&mut self, p: &[f64]) {
        let used = self.hidden.load_params(p);
        self.output.load_params(&p[used..]);
    }
}

impl GeneratorBackend for ToyGenerator {
    fn latent_dim(&self) -> usize {
        self.hidden.cols
    }

    fn output_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn generate(&self, z: &LatentVector) -> Result<FaceImage> {
        check_latent(z, self.latent_dim())?;
        FaceImage::from_clamped(self.width, self.height, self.forward(z.values()).1)
    }

    fn parameter_digest(&self) -> String {
        digest_f64s(&[
            &self.hidden.w,
            &self.hidden.b,
            &self.output.w,
            &self.output.b,
        ])
    }

    fn vjp(&self, z: &LatentVector, grad_pixels: &[f64]) -> Option<Result<Vec<f64>>> {
        Some(check_latent(z, self.latent_dim()).map(|_| self.latent_grad(z.values(), grad_pixels)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyEncoder {
    width: usize,
    height: usize,
    hidden: Dense,
    output: Dense,
}

impl ToyEncoder {
    fn random(latent_dim: usize, hidden: usize, size: usize, rng: &mut ChaCha8Rng) -> Self {
        ToyEncoder {
            width: size,
            height: size,
            hidden: Dense::random(hidden, size * size * 3, rng),
            output: Dense::random(latent_dim, hidden, rng),
        }
    }

    fn centered(image: &FaceImage) -> Vec<f64> {
        image.data().iter().map(|v| v - 0.5).collect()
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let e: Vec<f64> = self.hidden.forward(x).into_iter().map(f64::tanh).collect();
        let z = self.output.forward(&e);
        (e, z)
    }

    fn backward(&self, x: &[f64], e: &[f64], g_z: &[f64]) -> Vec<f64> {
        let ge = self.output.backward_input(g_z);
        let d1: Vec<f64> = ge.iter().zip(e).map(|(g, e)| g * (1.0 - e * e)).collect();
        let mut params = Vec::with_capacity(self.hidden.param_count() + self.output.param_count());
        self.hidden.push_grad(x, &d1, &mut params);
        self.output.push_grad(e, g_z, &mut params);
        params
    }
}

impl EncoderBackend for ToyEncoder {
    fn input_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn latent_dim(&self) -> usize {
        self.output.rows
    }

    fn encode(&self, image: &FaceImage) -> Result<LatentVector> {
        check_size(image, self.input_size())?;
        LatentVector::new(self.forward(&Self::centered(image)).1)
    }
}

impl TrainableEncoder for ToyEncoder {
    fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::new();
        self.hidden.push_params(&mut p);
        self.output.push_params(&mut p);
        p
    }

    fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.hidden.param_count() + self.output.param_count();
        if params.len() != expected {
            return Err(Error::Backend(format!(
                "encoder takes {expected} parameters, got {}",
                params.len()
            )));
        }
        let used = self.hidden.load_params(params);
        self.output.load_params(&params[used..]);
        Ok(())
    }

    fn parameter_vjp(&self, image: &FaceImage, grad_latent: &[f64]) -> Result<Vec<f64>> {
        check_size(image, self.input_size())?;
        let x = Self::centered(image);
        let (e, _) = self.forward(&x);
        Ok(self.backward(&x, &e, grad_latent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Activation {
    Tanh,
    Linear,
}

/// 3×3 convolution, stride 2, zero padding 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Conv {
    in_c: usize,
    out_c: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

const K: usize = 3;

impl Conv {
    fn random(in_c: usize, out_c: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Conv {
        let normal = Normal::new(0.0, 1.0 / ((in_c * K * K) as f64).sqrt()).expect("valid std");
        Conv {
            in_c,
            out_c,
            weights: (0..out_c * in_c * K * K)
                .map(|_| normal.sample(rng))
                .collect(),
            bias: (0..out_c).map(|_| 0.1 * normal.sample(rng)).collect(),
            activation,
        }
    }

    fn out_dim(n: usize) -> usize {
        n.div_ceil(2)
    }

    #[inline]
    fn w(&self, co: usize, ci: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((co * self.in_c + ci) * K + ky) * K + kx]
    }

    /// Returns the activated output (channel-major).
    fn forward(&self, input: &[f64], w: usize, h: usize) -> Vec<f64> {
        let (ow, oh) = (Self::out_dim(w), Self::out_dim(h));
        let mut out = vec![0.0; self.out_c * ow * oh];
        for co in 0..self.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = self.bias[co];
                    for ci in 0..self.in_c {
                        let plane = &input[ci * w * h..(ci + 1) * w * h];
                        for ky in 0..K {
                            let iy = (2 * oy + ky) as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..K {
                                let ix = (2 * ox + kx) as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc +=
                                    self.w(co, ci, ky, kx) * plane[iy as usize * w + ix as usize];
                            }
                        }
                    }
                    out[(co * oh + oy) * ow + ox] = match self.activation {
                        Activation::Tanh => acc.tanh(),
                        Activation::Linear => acc,
                    };
                }
            }
        }
        out
    }

    /// Input gradient given the activated output and its gradient.
    fn backward(&self, output: &[f64], grad_out: &[f64], w: usize, h: usize) -> Vec<f64> {
        let (ow, oh) = (Self::out_dim(w), Self::out_dim(h));
        let mut grad_in = vec![0.0; self.in_c * w * h];
        for co in 0..self.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = (co * oh + oy) * ow + ox;
                    let g = match self.activation {
                        Activation::Tanh => grad_out[o] * (1.0 - output[o] * output[o]),
                        Activation::Linear => grad_out[o],
                    };
                    if g == 0.0 {
                        continue;
                    }
                    for ci in 0..self.in_c {
                        for ky in 0..K {
                            let iy = (2 * oy + ky) as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..K {
                                let ix = (2 * ox + kx) as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                grad_in[ci * w * h + iy as usize * w + ix as usize] +=
                                    g * self.w(co, ci, ky, kx);
                            }
                        }
                    }
                }
            }
        }
        grad_in
    }
}

/// Fixed-seed random convolution stack used as perceptual feature extractor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvPerceptual {
    layers: Vec<Conv>,
    /// Output gain, putting feature MSE between distinct faces on the order of one.
    gain: f64,
}

const PERCEPTUAL_SEED: u64 = 0x5EED_F00D;

impl Default for ConvPerceptual {
    fn default() -> Self {
        ConvPerceptual::new(PERCEPTUAL_SEED)
    }
}

impl ConvPerceptual {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ConvPerceptual {
            layers: vec![
                Conv::random(3, 8, Activation::Tanh, &mut rng),
                Conv::random(8, 16, Activation::Tanh, &mut rng),
                Conv::random(16, 16, Activation::Linear, &mut rng),
            ],
            gain: 8.0,
        }
    }

    fn to_planes(image: &FaceImage) -> Vec<f64> {
        let (w, h) = image.size();
        let mut planes = vec![0.0; 3 * w * h];
        for (i, px) in image.data().chunks_exact(3).enumerate() {
            for c in 0..3 {
                planes[c * w * h + i] = px[c] - 0.5;
            }
        }
        planes
    }

    /// Activations of every layer, input first.
    fn activations(&self, image: &FaceImage) -> Vec<(Vec<f64>, usize, usize)> {
        let (mut w, mut h) = image.size();
        let mut acts = vec![(Self::to_planes(image), w, h)];
        for layer in &self.layers {
            let out = layer.forward(&acts.last().unwrap().0, w, h);
            w = Conv::out_dim(w);
            h = Conv::out_dim(h);
            acts.push((out, w, h));
        }
        acts
    }
}

impl PerceptualBackend for ConvPerceptual {
    fn features(&self, image: &FaceImage) -> Result<Vec<f64>> {
        let acts = self.activations(image);
        Ok(acts
            .last()
            .unwrap()
            .0
            .iter()
            .map(|v| v * self.gain)
            .collect())
    }

    fn vjp(&self, image: &FaceImage, grad_features: &[f64]) -> Option<Result<Vec<f64>>> {
        let acts = self.activations(image);
        if grad_features.len() != acts.last().unwrap().0.len() {
            return Some(Err(Error::Backend(
                "feature gradient has the wrong length".into(),
            )));
        }
        let mut grad: Vec<f64> = grad_features.iter().map(|g| g * self.gain).collect();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (_, w, h) = acts[i];
            grad = layer.backward(&acts[i + 1].0, &grad, w, h);
        }
        let (w, h) = image.size();
        let mut interleaved = vec![0.0; 3 * w * h];
        for i in 0..w * h {
            for c in 0..3 {
                interleaved[i * 3 + c] = grad[c * w * h + i];
            }
        }
        Some(Ok(interleaved))
    }
}

/// Raw pixels as features; makes the perceptual loss a plain pixel MSE.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelPerceptual;

impl PerceptualBackend for PixelPerceptual {
    fn features(&self, image: &FaceImage) -> Result<Vec<f64>> {
        Ok(image.data().to_vec())
    }

    fn vjp(&self, _image: &FaceImage, grad_features: &[f64]) -> Option<Result<Vec<f64>>> {
        Some(Ok(grad_features.to_vec()))
    }
}

/// `clamp(bias + A·z, 0, 1)`; used for planted-latent experiments.
#[derive(Debug, Clone)]
pub struct LinearGenerator {
    width: usize,
    height: usize,
    latent_dim: usize,
    matrix: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearGenerator {
    /// Gaussian matrix entries with standard deviation `scale`, bias 0.5.
    pub fn random(latent_dim: usize, size: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).expect("valid std");
        let pixels = size * size * 3;
        LinearGenerator {
            width: size,
            height: size,
            latent_dim,
            matrix: (0..pixels * latent_dim)
                .map(|_| normal.sample(&mut rng))
                .collect(),
            bias: vec![0.5; pixels],
        }
    }

    fn raw(&self, z: &[f64]) -> Vec<f64> {
        self.matrix
            .chunks_exact(self.latent_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(z).map(|(a, z)| a * z).sum::<f64>())
            .collect()
    }
}

impl GeneratorBackend for LinearGenerator {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn output_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn generate(&self, z: &LatentVector) -> Result<FaceImage> {
        check_latent(z, self.latent_dim)?;
        FaceImage::from_clamped(self.width, self.height, self.raw(z.values()))
    }

    fn parameter_digest(&self) -> String {
        digest_f64s(&[&self.matrix, &self.bias])
    }

    fn vjp(&self, z: &LatentVector, grad_pixels: &[f64]) -> Option<Result<Vec<f64>>> {
        if let Err(e) = check_latent(z, self.latent_dim) {
            return Some(Err(e));
        }
        let raw = self.raw(z.values());
        let mut g = vec![0.0; self.latent_dim];
        for ((row, r), gp) in self
            .matrix
            .chunks_exact(self.latent_dim)
            .zip(&raw)
            .zip(grad_pixels)
        {
            // Clamped pixels do not respond to z.
            if *r > 0.0 && *r < 1.0 {
                g.iter_mut().zip(row).for_each(|(gi, a)| *gi += gp * a);
            }
        }
        Some(Ok(g))
    }
}

/// Encoder that ignores its input and returns a fixed latent.
#[derive(Debug, Clone)]
pub struct FixedEncoder {
    pub latent: LatentVector,
    pub size: (usize, usize),
}

impl EncoderBackend for FixedEncoder {
    fn input_size(&self) -> (usize, usize) {
        self.size
    }

    fn latent_dim(&self) -> usize {
        self.latent.len()
    }

    fn encode(&self, image: &FaceImage) -> Result<LatentVector> {
        check_size(image, self.size)?;
        Ok(self.latent.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    /// Square working size in pixels.
    pub size: usize,
    pub latent_dim: usize,
    pub hidden: usize,
    /// Number of synthetic sprites in the training set.
    pub sprites: usize,
    pub train_steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            size: 64,
            latent_dim: super::LATENT_DIM,
            hidden: 16,
            sprites: 32,
            train_steps: 150,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// Trained toy encoder/generator pair plus the perceptual stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyBackends {
    pub config: ToyConfig,
    pub encoder: ToyEncoder,
    pub generator: ToyGenerator,
    pub perceptual: ConvPerceptual,
    /// Final autoencoder pixel MSE on the sprite set.
    pub reconstruction_mse: f64,
}

impl ToyBackends {
    /// Trains encoder and generator jointly (Adam on pixel MSE) over a
    /// synthetic sprite set drawn from `config.seed`.
    pub fn train(config: &ToyConfig) -> Result<Self> {
        if config.size < crate::imaging::MIN_SIDE
            || config.latent_dim == 0
            || config.hidden == 0
            || config.sprites == 0
        {
            return Err(Error::Precondition(format!(
                "invalid toy config {config:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut encoder =
            ToyEncoder::random(config.latent_dim, config.hidden, config.size, &mut rng);
        let mut generator =
            ToyGenerator::random(config.latent_dim, config.hidden, config.size, &mut rng);
        let sprites = synth::sprite_set(config.size, config.sprites, config.seed)?;
        let inputs: Vec<Vec<f64>> = sprites.iter().map(ToyEncoder::centered).collect();

        // Start the output bias at the mean sprite so training begins near the data.
        let n = sprites.len() as f64;
        for (i, b) in generator.output.b.iter_mut().enumerate() {
            let mean = sprites.iter().map(|s| s.data()[i]).sum::<f64>() / n;
            let m = mean.clamp(0.02, 0.98);
            *b = (m / (1.0 - m)).ln();
        }

        let n_enc = encoder.parameters().len();
        let mut params = encoder.parameters();
        params.extend(generator.parameters());
        let mut adam = Adam::new(params.len(), config.learning_rate);
        let mut mse = f64::INFINITY;
        for _ in 0..config.train_steps {
            let per_image: Vec<(f64, Vec<f64>)> = sprites
                .par_iter()
                .zip(&inputs)
                .map(|(sprite, x)| {
                    let (e, z) = encoder.forward(x);
                    let (h, out) = generator.forward(&z);
                    let p = out.len() as f64;
                    let g_out: Vec<f64> = out
                        .iter()
                        .zip(sprite.data())
                        .map(|(o, t)| 2.0 * (o - t) / p)
                        .collect();
                    let loss = out
                        .iter()
                        .zip(sprite.data())
                        .map(|(o, t)| (o - t) * (o - t))
                        .sum::<f64>()
                        / p;
                    let (g_gen, g_z) = generator.backward(&z, &h, &out, &g_out);
                    let mut grad = encoder.backward(x, &e, &g_z);
                    grad.extend(g_gen);
                    (loss, grad)
                })
                .collect();
            let mut grad = vec![0.0; params.len()];
            mse = 0.0;
            for (l, g) in per_image {
                mse += l / n;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b / n);
            }
            adam.step(&mut params, &grad);
            encoder.set_parameters(&params[..n_enc])?;
            generator.set_parameters(&params[n_enc..]);
        }
        Ok(ToyBackends {
            config: *config,
            encoder,
            generator,
            perceptual: ConvPerceptual::default(),
            reconstruction_mse: mse,
        })
    }

    pub fn backends(&self) -> super::Backends<'_> {
        super::Backends {
            encoder: &self.encoder,
            generator: &self.generator,
            perceptual: &self.perceptual,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ToyBackends::from_json(&fsio::read(path)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let (c1, c2) = (1.0 - B1.powi(self.t), 1.0 - B2.powi(self.t));
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}
