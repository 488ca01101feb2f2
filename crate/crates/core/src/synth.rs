//! Synthetic face sprites with 68-point landmarks.
//!
//! Faces are drawn from a handful of smooth ellipses (head, hair, eyes,
//! brows, nose, mouth) whose geometry also defines the landmarks, so every
//! image ships with exact landmarks. Used to train the toy backends and to
//! build the desk-scale dataset.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::fsio;
use crate::imaging::{save_image, FaceImage, LandmarkFile, Point};
use crate::protocol::{DatasetManifest, IdentityRecord, ImageRecord, Role};

/// Face geometry and colours in units of the image side.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceParams {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub eye_dx: f64,
    pub eye_dy: f64,
    pub eye_rx: f64,
    pub eye_ry: f64,
    pub brow_dy: f64,
    pub nose_len: f64,
    pub nose_w: f64,
    pub mouth_dy: f64,
    pub mouth_w: f64,
    pub mouth_h: f64,
    pub skin: [f64; 3],
    pub hair: [f64; 3],
    pub iris: [f64; 3],
    pub lip: [f64; 3],
    pub background: [f64; 3],
    /// Skin texture frequency and phase.
    pub texture: (f64, f64, f64),
}

impl FaceParams {
    /// The average face; its landmarks form the canonical alignment template.
    pub fn mean() -> Self {
        FaceParams {
            cx: 0.5,
            cy: 0.52,
            rx: 0.31,
            ry: 0.39,
            eye_dx: 0.125,
            eye_dy: 0.08,
            eye_rx: 0.052,
            eye_ry: 0.025,
            brow_dy: 0.14,
            nose_len: 0.10,
            nose_w: 0.05,
            mouth_dy: 0.20,
            mouth_w: 0.11,
            mouth_h: 0.037,
            skin: [0.78, 0.6, 0.5],
            hair: [0.25, 0.18, 0.12],
            iris: [0.3, 0.4, 0.5],
            lip: [0.7, 0.35, 0.35],
            background: [0.55, 0.6, 0.65],
            texture: (20.0, 0.0, 0.0),
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let skin_tone = u(0.35, 0.9);
        FaceParams {
            cx: u(0.48, 0.52),
            cy: u(0.50, 0.54),
            rx: u(0.28, 0.34),
            ry: u(0.36, 0.42),
            eye_dx: u(0.11, 0.14),
            eye_dy: u(0.06, 0.10),
            eye_rx: u(0.045, 0.06),
            eye_ry: u(0.02, 0.03),
            brow_dy: u(0.12, 0.16),
            nose_len: u(0.08, 0.12),
            nose_w: u(0.04, 0.06),
            mouth_dy: u(0.18, 0.22),
            mouth_w: u(0.09, 0.13),
            mouth_h: u(0.03, 0.045),
            skin: [skin_tone, skin_tone * u(0.7, 0.8), skin_tone * u(0.55, 0.7)],
            hair: [u(0.05, 0.6), u(0.05, 0.4), u(0.03, 0.3)],
            iris: [u(0.1, 0.5), u(0.2, 0.6), u(0.2, 0.7)],
            lip: [u(0.55, 0.85), u(0.25, 0.4), u(0.25, 0.4)],
            background: [u(0.3, 0.8), u(0.3, 0.8), u(0.3, 0.8)],
            texture: (u(14.0, 30.0), u(0.0, TAU), u(0.0, TAU)),
        }
    }

    /// Same identity under a different capture: small pose, scale and
    /// illumination changes.
    pub fn recapture(&self, rng: &mut impl Rng) -> Self {
        let mut p = self.clone();
        let scale = rng.random_range(0.97..1.03);
        p.cx += rng.random_range(-0.012..0.012);
        p.cy += rng.random_range(-0.012..0.012);
        p.rx *= scale;
        p.ry *= scale;
        p.eye_dx *= scale;
        p.eye_dy *= scale;
        p.brow_dy *= scale;
        p.mouth_dy *= scale;
        p.nose_len *= scale;
        let light = rng.random_range(0.94..1.06);
        for c in [&mut p.skin, &mut p.hair, &mut p.lip] {
            c.iter_mut().for_each(|v| *v = (*v * light).min(1.0));
        }
        p.background = [
            rng.random_range(0.3..0.8),
            rng.random_range(0.3..0.8),
            rng.random_range(0.3..0.8),
        ];
        p
    }

    /// 68 landmarks in pixel coordinates for an image of side `size`.
    pub fn landmarks(&self, size: usize) -> Vec<Point> {
        use std::f64::consts::PI;
        let s = size as f64;
        let pt = |x: f64, y: f64| Point::new(x * s, y * s);
        let mut out = Vec::with_capacity(68);
        // jaw 0-16
        for i in 0..17 {
            let t = PI * i as f64 / 16.0;
            out.push(pt(
                self.cx - self.rx * t.cos(),
                self.cy + 0.15 * self.ry + 0.85 * self.ry * t.sin(),
            ));
        }
        let ey = self.cy - self.eye_dy;
        let brow_y = self.cy - self.brow_dy;
        // brows 17-21, 22-26
        for side in [-1.0, 1.0] {
            let bx = self.cx + side * self.eye_dx;
            for k in 0..5 {
                let f = k as f64 / 4.0 * 2.0 - 1.0;
                let x = bx + f * 1.3 * self.eye_rx;
                out.push(pt(x, brow_y - 0.02 * (1.0 - f * f)));
            }
        }
        // nose bridge 27-30
        for k in 0..4 {
            out.push(pt(
                self.cx,
                ey + (k as f64 + 0.5) / 4.0 * (self.nose_len + self.eye_dy - 0.02),
            ));
        }
        // nose base 31-35
        for k in 0..5 {
            let f = k as f64 / 4.0 * 2.0 - 1.0;
            out.push(pt(
                self.cx + f * self.nose_w,
                self.cy + self.nose_len + 0.012 * (1.0 - f * f),
            ));
        }
        // eyes 36-41 (image left), 42-47 (image right)
        for side in [-1.0, 1.0] {
            let ex = self.cx + side * self.eye_dx;
            let (rx, ry) = (self.eye_rx, self.eye_ry);
            let ring = [
                (-rx, 0.0),
                (-0.4 * rx, -ry),
                (0.4 * rx, -ry),
                (rx, 0.0),
                (0.4 * rx, ry),
                (-0.4 * rx, ry),
            ];
            for (dx, dy) in ring {
                out.push(pt(ex + dx, ey + dy));
            }
        }
        let my = self.cy + self.mouth_dy;
        // outer lip 48-59
        for k in 0..12 {
            let phi = if k <= 6 {
                PI - k as f64 * PI / 6.0
            } else {
                -(k as f64 - 6.0) * PI / 6.0
            };
            out.push(pt(
                self.cx + self.mouth_w * phi.cos(),
                my - self.mouth_h * phi.sin(),
            ));
        }
        // inner lip 60-67
        for k in 0..8 {
            let phi = if k <= 4 {
                PI - k as f64 * PI / 4.0
            } else {
                -(k as f64 - 4.0) * PI / 4.0
            };
            out.push(pt(
                self.cx + 0.75 * self.mouth_w * phi.cos(),
                my - 0.35 * self.mouth_h * phi.sin(),
            ));
        }
        out
    }

    /// Renders the face; `noise` adds per-pixel Gaussian sensor noise.
    pub fn render(&self, size: usize, noise: Option<(f64, u64)>) -> Result<FaceImage> {
        let s = size as f64;
        let soft = 0.6 / s;
        let blob = |u: f64, v: f64, cx: f64, cy: f64, rx: f64, ry: f64| {
            let d = (((u - cx) / rx).powi(2) + ((v - cy) / ry).powi(2)).sqrt() - 1.0;
            1.0 / (1.0 + (d * rx.min(ry) / soft).exp())
        };
        let mix = |base: [f64; 3], top: [f64; 3], a: f64| -> [f64; 3] {
            std::array::from_fn(|c| base[c] * (1.0 - a) + top[c] * a)
        };
        let mut noise_rng = noise.map(|(sigma, seed)| {
            (
                Normal::new(0.0, sigma).expect("valid sigma"),
                ChaCha8Rng::seed_from_u64(seed),
            )
        });
        let ey = self.cy - self.eye_dy;
        let my = self.cy + self.mouth_dy;
        let (tf, tp1, tp2) = self.texture;
        FaceImage::from_fn(size, size, |x, y| {
            let (u, v) = (x as f64 / s, y as f64 / s);
            let shade = 0.85 + 0.15 * (1.0 - v);
            let mut px = self.background.map(|c| c * shade);
            px = mix(
                px,
                self.hair,
                blob(
                    u,
                    v,
                    self.cx,
                    self.cy - 0.06,
                    self.rx * 1.12,
                    self.ry * 1.02,
                ),
            );
            let grain = 1.0 + 0.035 * (tf * u + tp1).sin() * (tf * 1.3 * v + tp2).sin();
            let skin = self.skin.map(|c| c * grain);
            px = mix(px, skin, blob(u, v, self.cx, self.cy, self.rx, self.ry));
            for side in [-1.0, 1.0] {
                let ex = self.cx + side * self.eye_dx;
                px = mix(
                    px,
                    self.hair,
                    blob(u, v, ex, self.cy - self.brow_dy, 1.3 * self.eye_rx, 0.012),
                );
                px = mix(
                    px,
                    [0.95, 0.95, 0.93],
                    blob(u, v, ex, ey, self.eye_rx, self.eye_ry),
                );
                px = mix(
                    px,
                    self.iris,
                    blob(u, v, ex, ey, 0.45 * self.eye_rx, 0.9 * self.eye_ry),
                );
                px = mix(
                    px,
                    [0.05; 3],
                    blob(u, v, ex, ey, 0.18 * self.eye_rx, 0.45 * self.eye_ry),
                );
            }
            let nose_shadow = self.skin.map(|c| c * 0.8);
            px = mix(
                px,
                nose_shadow,
                0.6 * blob(u, v, self.cx, self.cy + self.nose_len, self.nose_w, 0.018),
            );
            px = mix(
                px,
                self.lip,
                blob(u, v, self.cx, my, self.mouth_w, self.mouth_h),
            );
            px = mix(
                px,
                [0.2, 0.05, 0.05],
                blob(u, v, self.cx, my, 0.7 * self.mouth_w, 0.3 * self.mouth_h),
            );
            if let Some((dist, rng)) = noise_rng.as_mut() {
                px.iter_mut().for_each(|c| *c += dist.sample(rng));
            }
            px
        })
    }
}

/// Canonical landmark template at side `size`.
pub fn canonical_template(size: usize) -> Vec<Point> {
    FaceParams::mean().landmarks(size)
}

/// `count` sprites of distinct random identities, each in a random capture.
pub fn sprite_set(size: usize, count: usize, seed: u64) -> Result<Vec<FaceImage>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5_9817E);
    (0..count)
        .map(|_| {
            let p = FaceParams::random(&mut rng).recapture(&mut rng);
            p.render(size, None)
        })
        .collect()
}

/// Options for [`write_dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetOptions {
    pub identities: usize,
    pub size: usize,
    pub probes_per_identity: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            identities: 32,
            size: 64,
            probes_per_identity: 2,
            noise: 0.01,
            seed: 0,
        }
    }
}

/// Writes `manifest.json`, `images/<id>.png` and `landmarks/<id>.json`
/// under `dir`; returns the manifest path.
pub fn write_dataset(dir: &Path, opts: &DatasetOptions) -> Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut identities = Vec::with_capacity(opts.identities);
    for i in 0..opts.identities {
        let id = format!("s{i:03}");
        let face = FaceParams::random(&mut rng);
        let mut images = Vec::new();
        let captures = std::iter::once(Role::Reference)
            .chain(std::iter::repeat_n(Role::Probe, opts.probes_per_identity));
        for (k, role) in captures.enumerate() {
            let image_id = match role {
                Role::Reference => format!("{id}_ref"),
                Role::Probe => format!("{id}_probe{k}"),
            };
            let capture = face.recapture(&mut rng);
            let noise_seed = rng.random();
            let image = capture.render(
                opts.size,
                (opts.noise > 0.0).then_some((opts.noise, noise_seed)),
            )?;
            let rel = format!("images/{image_id}.png");
            save_image(&image, &dir.join(&rel))?;
            LandmarkFile {
                image_id: image_id.clone(),
                points: capture.landmarks(opts.size),
            }
            .save(&dir.join("landmarks").join(format!("{image_id}.json")))?;
            images.push(ImageRecord {
                id: image_id,
                path: rel,
                role,
            });
        }
        identities.push(IdentityRecord { id, images });
    }
    let manifest = DatasetManifest { identities };
    let path = dir.join("manifest.json");
    fsio::write_atomic(&path, &manifest.to_json()?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::LandmarkSet;
    use crate::morph::delaunay_triangulate;

    #[test]
    fn landmarks_are_valid_and_triangulable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = FaceParams::random(&mut rng).recapture(&mut rng);
            let lm = p.landmarks(64);
            assert_eq!(lm.len(), 68);
            assert!(lm
                .iter()
                .all(|q| q.x > 0.0 && q.x < 63.0 && q.y > 0.0 && q.y < 63.0));
            let framed = crate::imaging::with_border_anchors(&lm, 64, 64);
            LandmarkSet::new(framed.clone()).unwrap();
            delaunay_triangulate(&framed).unwrap();
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let p = FaceParams::mean();
        assert_eq!(
            p.render(32, Some((0.01, 3))).unwrap(),
            p.render(32, Some((0.01, 3))).unwrap()
        );
        assert_eq!(sprite_set(16, 3, 9).unwrap(), sprite_set(16, 3, 9).unwrap());
    }

    #[test]
    fn dataset_manifest_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let opts = DatasetOptions {
            identities: 4,
            size: 32,
            ..Default::default()
        };
        let path = write_dataset(dir.path(), &opts).unwrap();
        let m = crate::protocol::load_manifest(&path).unwrap();
        assert_eq!(m.identities.len(), 4);
        assert_eq!(m.image_count(), 12);
        let lf = LandmarkFile::load(&dir.path().join("landmarks/s000_ref.json")).unwrap();
        assert_eq!(lf.points.len(), 68);
    }
}
