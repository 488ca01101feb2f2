//! Brute-force reference implementations shared by the property tests and
//! the acceptance suite. Deliberately naive: plain loops, no sorting tricks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use morphforge_core::imaging::bilinear_sample;
use morphforge_core::morph::{affine_from_triangles, TriangleMesh};
use morphforge_core::vuln::ScoreRow;
use morphforge_core::{FaceImage, LandmarkSet, Point};
use rand::Rng;

/// MinMax MMPMR straight from the rows.
pub fn mmpmr(rows: &[ScoreRow], tau: f64) -> f64 {
    let mut best: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in rows {
        let slot = best
            .entry(&r.morph_id)
            .or_default()
            .entry(&r.subject_id)
            .or_insert(f64::NEG_INFINITY);
        if r.score > *slot {
            *slot = r.score;
        }
    }
    if best.is_empty() {
        return 0.0;
    }
    let mut ok = 0;
    for subjects in best.values() {
        if subjects.values().all(|&s| s > tau) {
            ok += 1;
        }
    }
    ok as f64 / best.len() as f64
}

pub fn fmmpmr(attempts: &[Vec<(f64, f64)>], tau: f64) -> f64 {
    let mut ok = 0;
    let mut total = 0;
    for morph in attempts {
        for &(a, b) in morph {
            total += 1;
            if a > tau && b > tau {
                ok += 1;
            }
        }
    }
    ok as f64 / total as f64
}

/// Smallest score `c` such that the share of scores above `c` is within target.
pub fn fmr_threshold(scores: &[f64], target: f64) -> (f64, f64) {
    let n = scores.len() as f64;
    let mut best: Option<(f64, f64)> = None;
    for &c in scores {
        let above = scores.iter().filter(|&&s| s > c).count() as f64 / n;
        if above <= target && best.is_none_or(|(t, _)| c < t) {
            best = Some((c, above));
        }
    }
    best.expect("the maximum score always qualifies")
}

pub struct Det {
    pub roc: Vec<[f64; 3]>,
    pub d_eer: f64,
    pub bpcer_5: f64,
    pub bpcer_10: f64,
}

pub fn det(attack: &[f64], bonafide: &[f64]) -> Det {
    let mut taus: Vec<f64> = Vec::new();
    for &s in attack.iter().chain(bonafide) {
        if !taus.contains(&s) {
            taus.push(s);
        }
    }
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let top = *taus.last().unwrap();
    taus.push(top.next_up());
    let mut roc = Vec::new();
    for &t in &taus {
        let apcer = attack.iter().filter(|&&s| s < t).count() as f64 / attack.len() as f64;
        let bpcer = bonafide.iter().filter(|&&s| s >= t).count() as f64 / bonafide.len() as f64;
        roc.push([t, apcer, bpcer]);
    }
    let mut d_eer = f64::NAN;
    for i in 0..roc.len() {
        let (a, b) = (roc[i][1], roc[i][2]);
        if a >= b {
            d_eer = if a == b || i == 0 {
                a
            } else {
                let (p, q) = (roc[i - 1], roc[i]);
                let (d0, d1) = (p[1] - p[2], q[1] - q[2]);
                let f = -d0 / (d1 - d0);
                (p[1] + f * (q[1] - p[1])).max(p[2] + f * (q[2] - p[2]))
            };
            break;
        }
    }
    let at = |alpha: f64| {
        let mut best = f64::INFINITY;
        for p in &roc {
            if p[1] <= alpha && p[2] < best {
                best = p[2];
            }
        }
        best
    };
    Det {
        d_eer,
        bpcer_5: at(0.05),
        bpcer_10: at(0.10),
        roc,
    }
}

/// True if no mesh vertex lies strictly inside any triangle's circumcircle.
pub fn empty_circumcircles(mesh: &TriangleMesh) -> bool {
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i]);
        let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
        let sq = |p: Point| p.x * p.x + p.y * p.y;
        let ux = (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d;
        let uy = (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d;
        let r2 = (a.x - ux).powi(2) + (a.y - uy).powi(2);
        for (i, q) in mesh.vertices.iter().enumerate() {
            if t.contains(&i) {
                continue;
            }
            let d2 = (q.x - ux).powi(2) + (q.y - uy).powi(2);
            if d2 < r2 * (1.0 - 1e-9) {
                return false;
            }
        }
    }
    true
}

fn barycentric_inside(tri: [Point; 3], p: Point) -> bool {
    let [a, b, c] = tri;
    let det = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
    let l1 = ((b.y - c.y) * (p.x - c.x) + (c.x - b.x) * (p.y - c.y)) / det;
    let l2 = ((c.y - a.y) * (p.x - c.x) + (a.x - c.x) * (p.y - c.y)) / det;
    let l3 = 1.0 - l1 - l2;
    l1 >= -1e-9 && l2 >= -1e-9 && l3 >= -1e-9
}

fn sample_or_black(img: &FaceImage, p: Point) -> [f64; 3] {
    let (mx, my) = ((img.width() - 1) as f64, (img.height() - 1) as f64);
    let snap = |v: f64, hi: f64| {
        if v < 0.0 && v > -1e-6 {
            0.0
        } else if v > hi && v < hi + 1e-6 {
            hi
        } else {
            v
        }
    };
    bilinear_sample(img, snap(p.x, mx), snap(p.y, my)).unwrap_or([0.0; 3])
}

/// Per-pixel warp: locate the pixel's triangle in `mesh` (built on the
/// blended landmarks `lm`), map it into each source, sample, blend.
pub fn warp(
    img_a: &FaceImage,
    la: &LandmarkSet,
    img_b: &FaceImage,
    lb: &LandmarkSet,
    lm: &LandmarkSet,
    mesh: &TriangleMesh,
    alpha: f64,
) -> Vec<f64> {
    let (w, h) = img_a.size();
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let p = Point::new(x as f64, y as f64);
            let owner = mesh
                .triangles
                .iter()
                .find(|t| barycentric_inside(t.map(|i| lm.points()[i]), p));
            let (pa, pb) = match owner {
                Some(t) => {
                    let dst = t.map(|i| lm.points()[i]);
                    let ma = affine_from_triangles(dst, t.map(|i| la.points()[i])).unwrap();
                    let mb = affine_from_triangles(dst, t.map(|i| lb.points()[i])).unwrap();
                    (
                        sample_or_black(img_a, ma.apply(p)),
                        sample_or_black(img_b, mb.apply(p)),
                    )
                }
                None => (img_a.pixel(x, y), img_b.pixel(x, y)),
            };
            for c in 0..3 {
                out.push(((1.0 - alpha) * pa[c] + alpha * pb[c]).clamp(0.0, 1.0));
            }
        }
    }
    out
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> FaceImage {
    FaceImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap()
}

/// A random score table with two subjects per morph and scores on a coarse
/// grid so ties occur. With `equal_probes` every subject of every morph has
/// the same probe count.
pub fn random_rows(rng: &mut impl Rng, max_morphs: usize, equal_probes: bool) -> Vec<ScoreRow> {
    let morphs = rng.random_range(1..=max_morphs);
    let k = rng.random_range(1..=3);
    let mut rows = Vec::new();
    for m in 0..morphs {
        for s in 0..2 {
            let probes = if equal_probes {
                k
            } else {
                rng.random_range(1..=3)
            };
            for p in 0..probes {
                rows.push(ScoreRow {
                    morph_id: format!("m{m}"),
                    subject_id: format!("m{m}s{s}"),
                    probe_id: format!("p{p}"),
                    score: rng.random_range(0..20) as f64 / 20.0,
                });
            }
        }
    }
    rows
}

pub fn random_scores(rng: &mut impl Rng, max: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max);
    (0..n)
        .map(|_| rng.random_range(0..40) as f64 / 40.0)
        .collect()
}
