//! Landmark-based morphing: landmark interpolation, Delaunay triangulation,
//! piecewise-affine warping and texture blending.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{self, orient, FaceImage, LandmarkSet, Point};

/// How a morph is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MorphMethod {
    Lma,
    Regen,
    LatentInterp,
}

impl MorphMethod {
    pub fn suffix(self) -> &'static str {
        match self {
            MorphMethod::Lma => "lma",
            MorphMethod::Regen => "regen",
            MorphMethod::LatentInterp => "latent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphSpec {
    pub image_a: String,
    pub image_b: String,
    pub alpha: f64,
    pub method: MorphMethod,
}

impl MorphSpec {
    pub fn new(image_a: &str, image_b: &str, alpha: f64, method: MorphMethod) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(MorphSpec {
            image_a: image_a.into(),
            image_b: image_b.into(),
            alpha,
            method,
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("alpha {alpha} not in [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise (y-up orientation) vertex index triples.
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }
}

/// `(1 − alpha)·la + alpha·lb`, point by point.
pub fn interpolate_landmarks(
    la: &LandmarkSet,
    lb: &LandmarkSet,
    alpha: f64,
) -> Result<LandmarkSet> {
    if la.len() != lb.len() {
        return Err(Error::CardinalityMismatch {
            left: la.len(),
            right: lb.len(),
        });
    }
    check_alpha(alpha)?;
    let points = la
        .points()
        .iter()
        .zip(lb.points())
        .map(|(&a, &b)| {
            // Exact endpoints regardless of rounding in the blend.
            if alpha == 0.0 {
                a
            } else if alpha == 1.0 {
                b
            } else {
                a.lerp(b, alpha)
            }
        })
        .collect();
    LandmarkSet::new(points)
}

/// Lexicographic order (x, then y, then index) used for insertion and ties.
fn lex_order(points: &[Point]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .x
            .total_cmp(&points[j].x)
            .then(points[i].y.total_cmp(&points[j].y))
            .then(i.cmp(&j))
    });
    order
}

/// Sign of the in-circle determinant with a relative tolerance: positive
/// when `d` is strictly inside the circumcircle of counter-clockwise
/// `(a, b, c)`, zero when cocircular within tolerance.
fn incircle(a: Point, b: Point, c: Point, d: Point) -> i8 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let (al, bl, cl) = (
        adx * adx + ady * ady,
        bdx * bdx + bdy * bdy,
        cdx * cdx + cdy * cdy,
    );
    let t1 = al * (bdx * cdy - bdy * cdx);
    let t2 = bl * (cdx * ady - cdy * adx);
    let t3 = cl * (adx * bdy - ady * bdx);
    let det = t1 + t2 + t3;
    let mag = al * (bdx * cdy).abs().max((bdy * cdx).abs())
        + bl * (cdx * ady).abs().max((cdy * adx).abs())
        + cl * (adx * bdy).abs().max((ady * bdx).abs());
    if det.abs() <= 1e-10 * mag {
        0
    } else if det > 0.0 {
        1
    } else {
        -1
    }
}

fn ccw(points: &[Point], t: [usize; 3]) -> [usize; 3] {
    if orient(points[t[0]], points[t[1]], points[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

/// Delaunay triangulation of `points`.
///
/// A sweep in lexicographic order builds an initial triangulation of the
/// convex hull; Lawson flips then restore the empty-circumcircle property.
/// For cocircular quadrilaterals the diagonal touching the lowest vertex
/// index is kept, so the output is a deterministic function of the input.
pub fn delaunay_triangulate(points: &[Point]) -> Result<TriangleMesh> {
    if points.len() < 3 {
        return Err(Error::Triangulation(format!(
            "{} points cannot form a triangle",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::Triangulation("non-finite point".into()));
    }
    if imaging::all_collinear(points) {
        return Err(Error::Triangulation("all points are collinear".into()));
    }
    let order = lex_order(points);
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::Triangulation(format!(
                "points {} and {} coincide",
                w[0], w[1]
            )));
        }
    }
    let mut triangles = sweep(points, &order)?;
    legalize(points, &mut triangles);
    triangles.sort_unstable_by_key(|t| {
        let mut k = *t;
        k.sort_unstable();
        k
    });
    Ok(TriangleMesh {
        vertices: points.to_vec(),
        triangles,
    })
}

fn sweep(points: &[Point], order: &[usize]) -> Result<Vec<[usize; 3]>> {
    let p = |i: usize| points[i];
    // Leading run of collinear points, then the first point off that line.
    let mut first_off = 2;
    while first_off < order.len() && orient(p(order[0]), p(order[1]), p(order[first_off])) == 0.0 {
        first_off += 1;
    }
    if first_off == order.len() {
        return Err(Error::Triangulation("all points are collinear".into()));
    }
    let apex = order[first_off];
    let mut triangles: Vec<[usize; 3]> = order[..first_off]
        .windows(2)
        .map(|w| ccw(points, [w[0], w[1], apex]))
        .collect();

    // Hull as a counter-clockwise cycle.
    let chain = &order[..first_off];
    let mut hull: Vec<usize> = if orient(p(chain[0]), p(chain[1]), p(apex)) > 0.0 {
        chain.iter().copied().chain([apex]).collect()
    } else {
        [apex]
            .into_iter()
            .chain(chain.iter().rev().copied())
            .collect()
    };

    for &q in &order[first_off + 1..] {
        let n = hull.len();
        let visible: Vec<bool> = (0..n)
            .map(|i| orient(p(hull[i]), p(hull[(i + 1) % n]), p(q)) < 0.0)
            .collect();
        let Some(start) = (0..n).find(|&i| visible[i] && !visible[(i + n - 1) % n]) else {
            return Err(Error::Triangulation(
                "sweep found no visible hull edge".into(),
            ));
        };
        hull.rotate_left(start);
        let visible_count = visible[start..]
            .iter()
            .chain(&visible[..start])
            .take_while(|&&v| v)
            .count();
        for i in 0..visible_count {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            triangles.push([b, a, q]);
        }
        // Vertices strictly between the ends of the visible chain leave the hull.
        let mut next = vec![hull[0], q];
        next.extend_from_slice(&hull[visible_count..]);
        hull = next;
    }
    Ok(triangles)
}

fn legalize(points: &[Point], triangles: &mut [[usize; 3]]) {
    let max_passes = 64 * triangles.len().max(1);
    for _ in 0..max_passes {
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                edges.entry((u.min(v), u.max(v))).or_default().push(t);
            }
        }
        let mut keys: Vec<_> = edges.keys().copied().collect();
        keys.sort_unstable();
        let mut flipped = false;
        for key in keys {
            let ts = &edges[&key];
            if ts.len() != 2 {
                continue;
            }
            let (t1, t2) = (ts[0], ts[1]);
            let (u, v) = key;
            let opposite = |t: [usize; 3]| *t.iter().find(|&&i| i != u && i != v).unwrap();
            let (tri1, tri2) = (triangles[t1], triangles[t2]);
            // Another flip in this pass may have touched these triangles.
            if !tri1.contains(&u) || !tri1.contains(&v) || !tri2.contains(&u) || !tri2.contains(&v)
            {
                continue;
            }
            let (w1, w2) = (opposite(tri1), opposite(tri2));
            let s = incircle(
                points[tri1[0]],
                points[tri1[1]],
                points[tri1[2]],
                points[w2],
            );
            let flip = match s {
                1 => true,
                0 => u.min(v) > w1.min(w2),
                _ => false,
            };
            if !flip {
                continue;
            }
            // Only a convex quadrilateral can be flipped.
            let (pu, pv, pw1, pw2) = (points[u], points[v], points[w1], points[w2]);
            let side_u = orient(pw1, pw2, pu);
            let side_v = orient(pw1, pw2, pv);
            if side_u == 0.0 || side_v == 0.0 || (side_u > 0.0) == (side_v > 0.0) {
                continue;
            }
            triangles[t1] = ccw(points, [w1, w2, u]);
            triangles[t2] = ccw(points, [w1, w2, v]);
            flipped = true;
        }
        if !flipped {
            return;
        }
    }
}

/// A 2×3 affine matrix `[[a, b, c], [d, e, f]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2(pub [[f64; 3]; 2]);

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        let m = &self.0;
        Point::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2],
        )
    }
}

/// Exact affine map taking the three `src` corners onto `dst`.
pub fn affine_from_triangles(src: [Point; 3], dst: [Point; 3]) -> Result<Affine2> {
    let (s0, s1, s2) = (src[0], src[1], src[2]);
    let (e1x, e1y, e2x, e2y) = (s1.x - s0.x, s1.y - s0.y, s2.x - s0.x, s2.y - s0.y);
    let det = e1x * e2y - e2x * e1y;
    let scale = (e1x * e1x + e1y * e1y).max(e2x * e2x + e2y * e2y);
    if det.abs() <= 1e-12 * scale.max(1.0) || !det.is_finite() {
        return Err(Error::SingularSystem);
    }
    // Inverse of the source edge matrix [[e1x, e2x], [e1y, e2y]].
    let (i00, i01, i10, i11) = (e2y / det, -e2x / det, -e1y / det, e1x / det);
    let row = |d0: f64, d1: f64, d2: f64, s0x: f64, s0y: f64| {
        let (f1, f2) = (d1 - d0, d2 - d0);
        let a = f1 * i00 + f2 * i10;
        let b = f1 * i01 + f2 * i11;
        [a, b, d0 - a * s0x - b * s0y]
    };
    Ok(Affine2([
        row(dst[0].x, dst[1].x, dst[2].x, s0.x, s0.y),
        row(dst[0].y, dst[1].y, dst[2].y, s0.x, s0.y),
    ]))
}

const EDGE_TOL: f64 = 1e-9;

fn contains(tri: [Point; 3], p: Point) -> bool {
    let area = orient(tri[0], tri[1], tri[2]).abs();
    let tol = EDGE_TOL * area.max(1.0);
    let d0 = orient(tri[0], tri[1], p);
    let d1 = orient(tri[1], tri[2], p);
    let d2 = orient(tri[2], tri[0], p);
    (d0 >= -tol && d1 >= -tol && d2 >= -tol) || (d0 <= tol && d1 <= tol && d2 <= tol)
}

/// Assigns every pixel centre to the first mesh triangle containing it.
fn pixel_owners(mesh: &TriangleMesh, width: usize, height: usize) -> Vec<Option<u32>> {
    let mut owners = vec![None; width * height];
    for t in 0..mesh.triangles.len() {
        let tri = mesh.corners(t);
        let (min_x, max_x) = min_max(tri.map(|p| p.x));
        let (min_y, max_y) = min_max(tri.map(|p| p.y));
        let x_lo = (min_x - 1e-6).ceil().max(0.0) as usize;
        let y_lo = (min_y - 1e-6).ceil().max(0.0) as usize;
        let x_hi = ((max_x + 1e-6).floor().min(width as f64 - 1.0)).max(-1.0);
        let y_hi = ((max_y + 1e-6).floor().min(height as f64 - 1.0)).max(-1.0);
        if x_hi < 0.0 || y_hi < 0.0 {
            continue;
        }
        for y in y_lo..=y_hi as usize {
            for x in x_lo..=x_hi as usize {
                let slot = &mut owners[y * width + x];
                if slot.is_none() && contains(tri, Point::new(x as f64, y as f64)) {
                    *slot = Some(t as u32);
                }
            }
        }
    }
    owners
}

fn min_max(v: [f64; 3]) -> (f64, f64) {
    (v[0].min(v[1]).min(v[2]), v[0].max(v[1]).max(v[2]))
}

/// Tolerance for samples that land a hair outside the source frame.
const SAMPLE_TOL: f64 = 1e-6;

/// Landmark-based morph of two equally sized images.
///
/// Pixels inside the mesh hull are inverse-warped into each source through
/// the matching triangle and blended; pixels outside the hull blend the
/// sources directly. Samples falling outside a source frame read as black.
pub fn morph_pair(
    img_a: &FaceImage,
    la: &LandmarkSet,
    img_b: &FaceImage,
    lb: &LandmarkSet,
    alpha: f64,
) -> Result<FaceImage> {
    Ok(morph_pair_detailed(img_a, la, img_b, lb, alpha)?.image)
}

/// Output of [`morph_pair_detailed`].
#[derive(Debug, Clone)]
pub struct MorphOutput {
    pub image: FaceImage,
    pub landmarks: LandmarkSet,
    pub mesh: TriangleMesh,
}

pub fn morph_pair_detailed(
    img_a: &FaceImage,
    la: &LandmarkSet,
    img_b: &FaceImage,
    lb: &LandmarkSet,
    alpha: f64,
) -> Result<MorphOutput> {
    if img_a.size() != img_b.size() {
        return Err(Error::Precondition(format!(
            "image sizes differ: {:?} vs {:?}",
            img_a.size(),
            img_b.size()
        )));
    }
    let landmarks = interpolate_landmarks(la, lb, alpha)?;
    let mesh = delaunay_triangulate(landmarks.points())?;
    let maps: Vec<(Affine2, Affine2)> = mesh
        .triangles
        .iter()
        .map(|t| {
            let dst = t.map(|i| landmarks.points()[i]);
            let to_a = affine_from_triangles(dst, t.map(|i| la.points()[i]))?;
            let to_b = affine_from_triangles(dst, t.map(|i| lb.points()[i]))?;
            Ok((to_a, to_b))
        })
        .collect::<Result<_>>()?;

    let (w, h) = img_a.size();
    let owners = pixel_owners(&mesh, w, h);
    let mut data = vec![0.0; w * h * 3];
    data.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let out = &mut row[x * 3..x * 3 + 3];
            let (pa, pb) = match owners[y * w + x] {
                Some(t) => {
                    let (to_a, to_b) = maps[t as usize];
                    let p = Point::new(x as f64, y as f64);
                    let sa = to_a.apply(p);
                    let sb = to_b.apply(p);
                    (
                        imaging::sample_or_none(img_a, sa.x, sa.y, SAMPLE_TOL).unwrap_or([0.0; 3]),
                        imaging::sample_or_none(img_b, sb.x, sb.y, SAMPLE_TOL).unwrap_or([0.0; 3]),
                    )
                }
                None => (img_a.pixel(x, y), img_b.pixel(x, y)),
            };
            for c in 0..3 {
                out[c] = ((1.0 - alpha) * pa[c] + alpha * pb[c]).clamp(0.0, 1.0);
            }
        }
    });
    Ok(MorphOutput {
        image: FaceImage::new(w, h, data)?,
        landmarks,
        mesh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    fn set(v: &[(f64, f64)]) -> LandmarkSet {
        LandmarkSet::new(pts(v)).unwrap()
    }

    /// Strictly-inside test via the explicit circumcentre.
    fn strictly_inside_circumcircle(tri: [Point; 3], q: Point) -> bool {
        let [a, b, c] = tri;
        let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
        let a2 = a.x * a.x + a.y * a.y;
        let b2 = b.x * b.x + b.y * b.y;
        let c2 = c.x * c.x + c.y * c.y;
        let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
        let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
        let r2 = (a.x - ux).powi(2) + (a.y - uy).powi(2);
        let q2 = (q.x - ux).powi(2) + (q.y - uy).powi(2);
        q2 < r2 * (1.0 - 1e-9)
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let la = set(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]);
        let lb = set(&[(2.0, 2.0), (4.0, 2.0), (2.0, 4.0)]);
        assert_eq!(interpolate_landmarks(&la, &lb, 0.0).unwrap(), la);
        assert_eq!(interpolate_landmarks(&la, &lb, 1.0).unwrap(), lb);
        let mid = interpolate_landmarks(&la, &lb, 0.5).unwrap();
        assert_eq!(
            mid.points(),
            pts(&[(1.0, 1.0), (3.0, 1.0), (1.0, 3.0)]).as_slice()
        );
    }

    #[test]
    fn interpolation_rejects_mismatch() {
        let la = set(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]);
        let lb = set(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (3.0, 3.0)]);
        assert!(matches!(
            interpolate_landmarks(&la, &lb, 0.5),
            Err(Error::CardinalityMismatch { left: 3, right: 4 })
        ));
        assert!(interpolate_landmarks(&la, &la, 1.5).is_err());
    }

    #[test]
    fn three_points_one_triangle() {
        let mesh = delaunay_triangulate(&pts(&[(0.0, 0.0), (3.0, 1.0), (1.0, 4.0)])).unwrap();
        assert_eq!(mesh.triangles.len(), 1);
    }

    #[test]
    fn four_points_two_delaunay_triangles() {
        let p = pts(&[(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (5.0, 5.0)]);
        let mesh = delaunay_triangulate(&p).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        for t in 0..2 {
            let tri = mesh.corners(t);
            for (i, &q) in p.iter().enumerate() {
                if !mesh.triangles[t].contains(&i) {
                    assert!(!strictly_inside_circumcircle(tri, q));
                }
            }
        }
    }

    #[test]
    fn collinear_points_fail() {
        let p = pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)]);
        assert!(matches!(
            delaunay_triangulate(&p),
            Err(Error::Triangulation(_))
        ));
    }

    #[test]
    fn cocircular_grid_is_deterministic_and_complete() {
        // 4x4 lattice: every unit square is cocircular
        let p: Vec<Point> = (0..16)
            .map(|i| Point::new((i % 4) as f64, (i / 4) as f64))
            .collect();
        let m1 = delaunay_triangulate(&p).unwrap();
        let m2 = delaunay_triangulate(&p).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.triangles.len(), 18);
        let area: f64 = (0..m1.triangles.len())
            .map(|t| {
                let [a, b, c] = m1.corners(t);
                orient(a, b, c) / 2.0
            })
            .sum();
        assert!((area - 9.0).abs() < 1e-12);
    }

    #[test]
    fn affine_examples() {
        let src = pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let src = [src[0], src[1], src[2]];
        assert_eq!(affine_from_triangles(src, src).unwrap(), Affine2::IDENTITY);

        let moved = src.map(|p| Point::new(p.x + 3.0, p.y - 1.0));
        let m = affine_from_triangles(src, moved).unwrap();
        assert_eq!(m.0, [[1.0, 0.0, 3.0], [0.0, 1.0, -1.0]]);

        let dst = [
            Point::new(1.0, 2.0),
            Point::new(3.0, 2.0),
            Point::new(1.0, 5.0),
        ];
        let m = affine_from_triangles(src, dst).unwrap();
        assert_eq!(m.0, [[2.0, 0.0, 1.0], [0.0, 3.0, 2.0]]);
    }

    #[test]
    fn affine_reproduces_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let r = |rng: &mut ChaCha8Rng| {
                Point::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0))
            };
            let src = [r(&mut rng), r(&mut rng), r(&mut rng)];
            let dst = [r(&mut rng), r(&mut rng), r(&mut rng)];
            if orient(src[0], src[1], src[2]).abs() < 1.0 {
                continue;
            }
            let m = affine_from_triangles(src, dst).unwrap();
            for i in 0..3 {
                let p = m.apply(src[i]);
                assert!((p.x - dst[i].x).abs() < 1e-9 && (p.y - dst[i].y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_source_triangle_is_singular() {
        let src = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
        ];
        assert!(matches!(
            affine_from_triangles(src, src),
            Err(Error::SingularSystem)
        ));
    }

    fn random_image(w: usize, h: usize, seed: u64) -> FaceImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FaceImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap()
    }

    fn framed(points: &[(f64, f64)], w: usize, h: usize) -> LandmarkSet {
        LandmarkSet::new(imaging::with_border_anchors(&pts(points), w, h)).unwrap()
    }

    #[test]
    fn identity_morph_reproduces_input() {
        let img = random_image(20, 16, 1);
        let lm = framed(&[(5.3, 4.1), (13.7, 5.2), (9.1, 11.6), (7.0, 8.0)], 20, 16);
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            let out = morph_pair(&img, &lm, &img, &lm, alpha).unwrap();
            for (a, b) in out.data().iter().zip(img.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
    }

    #[test]
    fn alpha_zero_with_shared_landmarks_returns_first_image() {
        let a = random_image(16, 16, 2);
        let b = random_image(16, 16, 3);
        let lm = framed(&[(5.5, 4.5), (10.2, 6.1), (7.7, 11.3)], 16, 16);
        let out = morph_pair(&a, &lm, &b, &lm, 0.0).unwrap();
        for (x, y) in out.data().iter().zip(a.data()) {
            assert!((x - y).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn morph_is_symmetric() {
        let a = random_image(24, 24, 4);
        let b = random_image(24, 24, 5);
        let la = framed(
            &[
                (6.2, 7.1),
                (17.3, 6.8),
                (11.9, 12.2),
                (8.4, 18.1),
                (15.6, 17.7),
            ],
            24,
            24,
        );
        let lb = framed(
            &[
                (7.0, 6.3),
                (16.1, 7.9),
                (12.6, 13.0),
                (9.1, 17.2),
                (14.8, 18.6),
            ],
            24,
            24,
        );
        for alpha in [0.2, 0.5, 0.9] {
            let ab = morph_pair(&a, &la, &b, &lb, alpha).unwrap();
            let ba = morph_pair(&b, &lb, &a, &la, 1.0 - alpha).unwrap();
            for (x, y) in ab.data().iter().zip(ba.data()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let a = random_image(16, 16, 4);
        let b = random_image(16, 12, 5);
        let lm = set(&[(1.0, 1.0), (5.0, 1.0), (3.0, 6.0)]);
        assert!(morph_pair(&a, &lm, &b, &lm, 0.5).is_err());
    }
}
