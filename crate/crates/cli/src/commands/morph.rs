use std::collections::BTreeMap;
use std::path::PathBuf;

use morphforge_core::imaging::{align_face, encode_png, LandmarkFile};
use morphforge_core::morph::morph_pair;
use morphforge_core::protocol::{BonafidePolicy, MorphPair, Split};
use morphforge_core::regen::toy::{ToyBackends, ToyConfig};
use morphforge_core::regen::{
    finetune_encoder, latent_interpolation_morph, regen_morph, Backends, FitOptions, RegenOptions,
};
use morphforge_core::synth::canonical_template;
use morphforge_core::{fsio, Error, FaceImage, MorphMethod, MorphSpec, Point, Result};
use rayon::prelude::*;
use serde::Serialize;

use super::{external_backend, load_landmarks, Dataset};
use crate::args::{BackendKind, MethodArg, MorphArgs};
use crate::index::{MorphEntry, MorphIndex, MORPH_INDEX};
use crate::provenance::Recorder;

struct Source {
    image: FaceImage,
    landmarks: LandmarkFile,
}

impl Source {
    fn aligned(&self, template: &[Point], side: usize) -> Result<FaceImage> {
        Ok(align_face(&self.image, &self.landmarks.points, template, (side, side))?.0)
    }
}

#[derive(Serialize)]
struct FinetuneSummary {
    images: usize,
    loss_before: f64,
    loss_after: f64,
    iterations: usize,
}

fn load_sources<'a>(
    rec: &mut Recorder,
    data: &Dataset,
    landmarks: &std::path::Path,
    ids: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, Source>> {
    let mut out = BTreeMap::new();
    for id in ids {
        if !out.contains_key(id) {
            let image = data.image(rec, id)?;
            let lf = load_landmarks(rec, landmarks, id)?;
            out.insert(
                id.to_string(),
                Source {
                    image,
                    landmarks: lf,
                },
            );
        }
    }
    Ok(out)
}

pub(super) fn run(a: &MorphArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let method = match a.method {
        MethodArg::Lma => MorphMethod::Lma,
        MethodArg::Regen => MorphMethod::Regen,
        MethodArg::LatentInterp => MorphMethod::LatentInterp,
    };
    let data = Dataset::load(rec, &a.manifest, &a.pairs)?;
    let pairs: Vec<&MorphPair> = data
        .protocol
        .pairs
        .iter()
        .filter(|p| a.split.includes(p.split))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyInput("morph pairs in the selected split"));
    }
    let specs: Vec<MorphSpec> = pairs
        .iter()
        .map(|p| MorphSpec::new(&p.a_img, &p.b_img, a.alpha, method))
        .collect::<Result<_>>()?;
    let sources = load_sources(
        rec,
        &data,
        &a.landmarks,
        pairs
            .iter()
            .flat_map(|p| [p.a_img.as_str(), p.b_img.as_str()]),
    )?;

    let results: Vec<(FaceImage, Option<f64>)> = match method {
        MorphMethod::Lma => specs
            .par_iter()
            .map(|s| {
                let (sa, sb) = (&sources[&s.image_a], &sources[&s.image_b]);
                let (w, h) = sa.image.size();
                let la = sa.landmarks.morph_landmarks(w, h)?;
                let lb = sb.landmarks.morph_landmarks(w, h)?;
                Ok((morph_pair(&sa.image, &la, &sb.image, &lb, s.alpha)?, None))
            })
            .collect::<Result<_>>()?,
        MorphMethod::Regen | MorphMethod::LatentInterp => {
            generate(a, rec, &data, &sources, &specs)?
        }
    };

    let mut entries = Vec::with_capacity(pairs.len());
    for (pair, (image, loss)) in pairs.iter().zip(results) {
        let id = format!("{}_{}", pair.stem(), method.suffix());
        let file = format!("{id}.png");
        let png = encode_png(&image)?;
        rec.write(&a.out.join(&file), &png)?;
        entries.push(MorphEntry {
            id,
            file,
            split: pair.split,
            a_id: pair.a_id.clone(),
            a_img: pair.a_img.clone(),
            b_id: pair.b_id.clone(),
            b_img: pair.b_img.clone(),
            sha256: fsio::sha256_hex(&png),
            loss,
        });
    }
    let index = MorphIndex {
        attack: method.suffix().into(),
        method,
        alpha: a.alpha,
        seed: a.seed,
        morphs: entries,
    };
    index.validate()?;
    rec.write_json(&a.out.join(MORPH_INDEX), &index)?;
    Ok(a.out.clone())
}

fn generate(
    a: &MorphArgs,
    rec: &mut Recorder,
    data: &Dataset,
    sources: &BTreeMap<String, Source>,
    specs: &[MorphSpec],
) -> Result<Vec<(FaceImage, Option<f64>)>> {
    let side = a.backend.backend_size;
    let template = canonical_template(side);
    let opts = RegenOptions {
        fit: a.fit.apply(FitOptions::default()),
        refine: !a.no_refine,
    };
    opts.fit.validate()?;

    let toy;
    let external;
    let backends: Backends<'_> = match a.backend.backend {
        BackendKind::Toy => {
            let mut model = match &a.toy_model {
                Some(path) => ToyBackends::from_json(&rec.read(path)?)?,
                None => ToyBackends::train(&ToyConfig {
                    size: side,
                    latent_dim: a.latent_dim,
                    train_steps: a.toy_steps,
                    seed: a.seed,
                    ..ToyConfig::default()
                })?,
            };
            if model.config.size != side {
                return Err(Error::Validation(format!(
                    "toy model works at {}px, --backend-size is {side}",
                    model.config.size
                )));
            }
            if a.finetune {
                let train = data.protocol.bonafide_images(
                    &data.manifest,
                    Split::Train,
                    BonafidePolicy::default(),
                );
                let train_sources = load_sources(
                    rec,
                    data,
                    &a.landmarks,
                    train.iter().map(|(_, im)| im.id.as_str()),
                )?;
                let images: Vec<FaceImage> = train_sources
                    .values()
                    .map(|s| s.aligned(&template, side))
                    .collect::<Result<_>>()?;
                let tuned = finetune_encoder(
                    &model.encoder,
                    &model.generator,
                    &model.perceptual,
                    &images,
                    &opts.fit,
                )?;
                rec.write_json(
                    &a.out.join("finetune.json"),
                    &FinetuneSummary {
                        images: images.len(),
                        loss_before: tuned.loss_before,
                        loss_after: tuned.loss_after,
                        iterations: tuned.trace.len().saturating_sub(1),
                    },
                )?;
                model.encoder = tuned.encoder;
            }
            toy = model;
            toy.backends()
        }
        BackendKind::External => {
            if a.finetune {
                return Err(Error::Precondition(
                    "fine-tuning needs the toy backend".into(),
                ));
            }
            external = external_backend(&a.backend, a.latent_dim)?;
            Backends {
                encoder: &external,
                generator: &external,
                perceptual: &external,
            }
        }
    };

    specs
        .par_iter()
        .map(|s| {
            let (sa, sb) = (&sources[&s.image_a], &sources[&s.image_b]);
            match s.method {
                MorphMethod::Regen => {
                    let (w, h) = sa.image.size();
                    let la = sa.landmarks.morph_landmarks(w, h)?;
                    let lb = sb.landmarks.morph_landmarks(w, h)?;
                    let out = regen_morph(
                        &sa.image, &la, &sb.image, &lb, s.alpha, backends, &template, &opts,
                    )?;
                    Ok((out.image, Some(out.loss)))
                }
                _ => {
                    let (xa, xb) = (sa.aligned(&template, side)?, sb.aligned(&template, side)?);
                    Ok((
                        latent_interpolation_morph(&xa, &xb, s.alpha, backends, &opts)?,
                        None,
                    ))
                }
            }
        })
        .collect()
}
