//! Fixtures shared by the benchmarks.

use morphforge_core::imaging::LandmarkFile;
use morphforge_core::synth::FaceParams;
use morphforge_core::{FaceImage, LandmarkSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A synthetic face with its morph landmarks (facial points plus border anchors).
pub struct Face {
    pub image: FaceImage,
    pub landmarks: LandmarkSet,
}

pub fn face(size: usize, seed: u64) -> Face {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = FaceParams::random(&mut rng);
    let image = params
        .render(size, Some((0.01, seed)))
        .expect("renderable face");
    let landmarks = LandmarkFile {
        image_id: String::new(),
        points: params.landmarks(size),
    }
    .morph_landmarks(size, size)
    .expect("valid landmarks");
    Face { image, landmarks }
}

/// `n` scores on a coarse grid so ties occur, as in real matcher output.
pub fn scores(n: usize, offset: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| offset + rng.random_range(0..1000) as f64 / 1000.0)
        .collect()
}
