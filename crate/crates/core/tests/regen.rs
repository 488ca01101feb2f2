use morphforge_core::imaging::LandmarkFile;
use morphforge_core::regen::toy::{
    FixedEncoder, LinearGenerator, PixelPerceptual, ToyBackends, ToyConfig,
};
use morphforge_core::regen::{
    finetune_encoder, fit_latent, infer_latent, latent_interpolation_morph, regen_morph,
    regenerate, regenerate_detailed, Backends, EncoderBackend, FitOptions, GeneratorBackend,
    LatentObjective, LatentVector, RegenOptions,
};
use morphforge_core::synth::{self, FaceParams};
use morphforge_core::{Error, FaceImage, LandmarkSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn small_toy() -> ToyBackends {
    ToyBackends::train(&ToyConfig {
        size: 16,
        sprites: 6,
        train_steps: 20,
        ..ToyConfig::default()
    })
    .unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn perceptual_gradient_matches_central_differences() {
    let toy = small_toy();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 0.5).unwrap();
    for sample in 0..20 {
        let target = synth::sprite_set(16, 1, 100 + sample).unwrap().remove(0);
        let obj = LatentObjective::new(&target, &toy.generator, &toy.perceptual).unwrap();
        let z: Vec<f64> = (0..toy.config.latent_dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        let (_, analytic) = obj.loss_and_gradient(&z).unwrap();
        let h = 1e-4;
        let fd: Vec<f64> = (0..z.len())
            .map(|i| {
                let (mut up, mut down) = (z.clone(), z.clone());
                up[i] += h;
                down[i] -= h;
                (obj.loss(&up).unwrap() - obj.loss(&down).unwrap()) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = analytic.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&fd);
        assert!(rel < 1e-4, "sample {sample}: relative error {rel}");
    }
}

#[test]
fn fit_latent_recovers_planted_latent() {
    let size = 32;
    let generator = LinearGenerator::random(512, size, 0.004, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let planted: Vec<f64> = (0..512).map(|_| unit.sample(&mut rng)).collect();
    let target = generator
        .generate(&LatentVector::new(planted.clone()).unwrap())
        .unwrap();
    assert!(
        target.data().iter().all(|&v| v > 0.0 && v < 1.0),
        "planted image must not clip"
    );
    let start: Vec<f64> = planted.iter().map(|v| v + noise.sample(&mut rng)).collect();
    let encoder = FixedEncoder {
        latent: LatentVector::new(start).unwrap(),
        size: (size, size),
    };
    let backends = Backends {
        encoder: &encoder,
        generator: &generator,
        perceptual: &PixelPerceptual,
    };
    let opts = FitOptions {
        early_stop_threshold: 0.0,
        max_iterations: 2000,
        patience: 20,
        ..FitOptions::default()
    };
    let fit = fit_latent(&target, backends, &opts).unwrap();
    let err = fit
        .latent
        .values()
        .iter()
        .zip(&planted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(
        err < 1e-3,
        "max latent error {err} after {} accepted steps",
        fit.trace.len()
    );
    assert!(fit.loss <= fit.initial_loss);
}

#[test]
fn finetuning_freezes_generator_and_does_not_raise_loss() {
    let toy = small_toy();
    let images = synth::sprite_set(16, 6, toy.config.seed).unwrap();
    let digest = toy.generator.parameter_digest();
    let mean_loss = |enc: &dyn EncoderBackend| {
        images
            .iter()
            .map(|im| {
                let obj = LatentObjective::new(im, &toy.generator, &toy.perceptual).unwrap();
                obj.loss(enc.encode(im).unwrap().values()).unwrap()
            })
            .sum::<f64>()
            / images.len() as f64
    };
    let before = mean_loss(&toy.encoder);
    let opts = FitOptions {
        early_stop_threshold: 0.0,
        max_iterations: 15,
        ..FitOptions::default()
    };
    let out = finetune_encoder(
        &toy.encoder,
        &toy.generator,
        &toy.perceptual,
        &images,
        &opts,
    )
    .unwrap();
    assert_eq!(toy.generator.parameter_digest(), digest);
    let after = mean_loss(&out.encoder);
    assert!((out.loss_before - before).abs() < 1e-12);
    assert!(after <= before, "{after} > {before}");
    assert!((out.loss_after - after).abs() < 1e-12);
}

#[test]
fn regenerate_contracts() {
    let toy = small_toy();
    let b = toy.backends();
    let img = synth::sprite_set(16, 1, 3).unwrap().remove(0);
    let wrong = FaceImage::filled(20, 16, [0.5; 3]).unwrap();
    assert!(matches!(
        regenerate(&wrong, b, &RegenOptions::default()),
        Err(Error::ResizeRequired { .. })
    ));

    let plain = RegenOptions {
        refine: false,
        ..RegenOptions::default()
    };
    let out = regenerate_detailed(&img, b, &plain).unwrap();
    let z = toy.encoder.encode(&img).unwrap();
    assert_eq!(out.latent, z);
    assert_eq!(out.image, toy.generator.generate(&z).unwrap());

    let refined = regenerate_detailed(&img, b, &RegenOptions::default()).unwrap();
    assert!(refined.loss <= out.loss);
    assert_eq!(refined.image.size(), toy.generator.output_size());
    assert_eq!(
        regenerate(&img, b, &RegenOptions::default()).unwrap(),
        refined.image
    );
}

#[test]
fn regen_morph_generates_from_the_fitted_latent_unchanged() {
    let toy = small_toy();
    let b = toy.backends();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pa = FaceParams::random(&mut rng);
    let pb = FaceParams::random(&mut rng);
    let (ia, ib) = (pa.render(24, None).unwrap(), pb.render(24, None).unwrap());
    let la = LandmarkFile {
        image_id: "a".into(),
        points: pa.landmarks(24),
    }
    .morph_landmarks(24, 24)
    .unwrap();
    let lb = LandmarkFile {
        image_id: "b".into(),
        points: pb.landmarks(24),
    }
    .morph_landmarks(24, 24)
    .unwrap();
    let template = synth::canonical_template(16);
    let opts = RegenOptions::default();
    let m = regen_morph(&ia, &la, &ib, &lb, 0.5, b, &template, &opts).unwrap();
    assert_eq!(m.lma.size(), (24, 24));
    assert_eq!(m.aligned.size(), (16, 16));
    let (z, loss) = infer_latent(&m.aligned, b, &opts).unwrap();
    assert_eq!(z, m.latent);
    assert_eq!(loss, m.loss);
    assert_eq!(m.image, toy.generator.generate(&m.latent).unwrap());

    let short = LandmarkSet::new(la.points()[..10].to_vec()).unwrap();
    assert!(regen_morph(&ia, &short, &ib, &lb, 0.5, b, &template, &opts).is_err());
}

#[test]
fn latent_interpolation_endpoints() {
    let toy = small_toy();
    let b = toy.backends();
    let s = synth::sprite_set(16, 2, 4).unwrap();
    let plain = RegenOptions {
        refine: false,
        ..RegenOptions::default()
    };
    let za = toy.encoder.encode(&s[0]).unwrap();
    let zb = toy.encoder.encode(&s[1]).unwrap();
    assert_eq!(
        latent_interpolation_morph(&s[0], &s[1], 0.0, b, &plain).unwrap(),
        toy.generator.generate(&za).unwrap()
    );
    assert_eq!(
        latent_interpolation_morph(&s[0], &s[1], 1.0, b, &plain).unwrap(),
        toy.generator.generate(&zb).unwrap()
    );
    let mid = za.lerp(&zb, 0.5).unwrap();
    assert_eq!(
        latent_interpolation_morph(&s[0], &s[1], 0.5, b, &plain).unwrap(),
        toy.generator.generate(&mid).unwrap()
    );
    assert!(latent_interpolation_morph(&s[0], &s[1], 1.5, b, &plain).is_err());
}

#[test]
fn toy_backends_round_trip_through_json() {
    let toy = small_toy();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.json");
    toy.save(&path).unwrap();
    let back = ToyBackends::load(&path).unwrap();
    assert_eq!(
        back.generator.parameter_digest(),
        toy.generator.parameter_digest()
    );
    let img = synth::sprite_set(16, 1, 1).unwrap().remove(0);
    assert_eq!(
        back.encoder.encode(&img).unwrap(),
        toy.encoder.encode(&img).unwrap()
    );
}
