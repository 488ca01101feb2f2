//! Canonical image representation, PNG I/O, bilinear sampling and
//! similarity alignment.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

/// Minimum side length accepted by [`FaceImage`].
pub const MIN_SIDE: usize = 8;

/// Number of facial landmarks in a landmark file.
pub const FACIAL_LANDMARKS: usize = 68;

/// Border anchors appended to the facial landmarks before triangulation.
pub const BORDER_ANCHORS: usize = 8;

const COINCIDENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            (1.0 - t) * self.x + t * other.x,
            (1.0 - t) * self.y + t * other.y,
        )
    }

    pub fn dist2(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Twice the signed area of (a, b, c); positive when counter-clockwise in a
/// y-up frame.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Ordered facial control points.
///
/// At least three points, pairwise distinct, and not all on one line.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LandmarkSet {
    points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Validation(format!(
                "landmark set needs at least 3 points, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Validation(format!("non-finite landmark {p:?}")));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i].dist2(points[j]) <= COINCIDENT_TOL * COINCIDENT_TOL {
                    return Err(Error::Validation(format!(
                        "landmarks {i} and {j} coincide at ({}, {})",
                        points[i].x, points[i].y
                    )));
                }
            }
        }
        if all_collinear(&points) {
            return Err(Error::Validation("landmarks are collinear".into()));
        }
        Ok(LandmarkSet { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

impl<'de> Deserialize<'de> for LandmarkSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<Point>::deserialize(d)?;
        LandmarkSet::new(points).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn all_collinear(points: &[Point]) -> bool {
    let Some(&p0) = points.first() else {
        return true;
    };
    let Some(&far) = points
        .iter()
        .max_by(|a, b| p0.dist2(**a).total_cmp(&p0.dist2(**b)))
    else {
        return true;
    };
    let scale = p0.dist2(far);
    if scale == 0.0 {
        return true;
    }
    points
        .iter()
        .all(|&p| orient(p0, far, p).abs() <= 1e-12 * scale)
}

/// Three-channel raster with values in [0, 1], row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FaceImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::Validation(format!(
                "image {width}x{height} is below the {MIN_SIDE}x{MIN_SIDE} minimum"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Validation(format!(
                "pixel buffer has {} values, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation(format!(
                "pixel value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(FaceImage {
            width,
            height,
            data,
        })
    }

    /// Builds an image from a per-pixel function; values are clamped into [0, 1].
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                for v in f(x, y) {
                    if !v.is_finite() {
                        return Err(Error::Validation(format!("non-finite pixel at ({x}, {y})")));
                    }
                    data.push(v.clamp(0.0, 1.0));
                }
            }
        }
        FaceImage::new(width, height, data)
    }

    /// Clamps `data` into [0, 1]; fails only on non-finite values or bad shape.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            if !v.is_finite() {
                return Err(Error::Validation("non-finite pixel value".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        FaceImage::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        FaceImage::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Rounds every value to the nearest 8-bit level.
    pub fn quantized(&self) -> FaceImage {
        FaceImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| quantize(v) as f64 / 255.0)
                .collect(),
        }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        FaceImage::new(
            width,
            height,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Single-channel plane of reals, row-major. No range constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Validation(format!(
                "plane buffer has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample; the caller keeps (x, y) inside the plane.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (x0, x1, fx) = cell(x, self.width);
        let (y0, y1, fy) = cell(y, self.height);
        lerp2(
            self.at(x0, y0),
            self.at(x1, y0),
            self.at(x0, y1),
            self.at(x1, y1),
            fx,
            fy,
        )
    }
}

/// Splits a coordinate into the two neighbouring indices and the fraction.
#[inline]
fn cell(c: f64, len: usize) -> (usize, usize, f64) {
    if len < 2 {
        return (0, 0, 0.0);
    }
    let i0 = (c.floor() as usize).min(len - 2);
    (i0, i0 + 1, c - i0 as f64)
}

#[inline]
fn lerp2(v00: f64, v10: f64, v01: f64, v11: f64, fx: f64, fy: f64) -> f64 {
    let top = v00 + fx * (v10 - v00);
    let bottom = v01 + fx * (v11 - v01);
    top + fy * (bottom - top)
}

/// Bilinear interpolation of the four pixels around (x, y).
///
/// Out-of-range coordinates are an error; callers clamp explicitly.
pub fn bilinear_sample(image: &FaceImage, x: f64, y: f64) -> Result<[f64; 3]> {
    let (max_x, max_y) = ((image.width - 1) as f64, (image.height - 1) as f64);
    if !(x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y) {
        return Err(Error::OutOfBounds { x, y, max_x, max_y });
    }
    Ok(sample_unchecked(image, x, y))
}

pub(crate) fn sample_unchecked(image: &FaceImage, x: f64, y: f64) -> [f64; 3] {
    let (x0, x1, fx) = cell(x, image.width);
    let (y0, y1, fy) = cell(y, image.height);
    let (p00, p10, p01, p11) = (
        image.pixel(x0, y0),
        image.pixel(x1, y0),
        image.pixel(x0, y1),
        image.pixel(x1, y1),
    );
    std::array::from_fn(|c| lerp2(p00[c], p10[c], p01[c], p11[c], fx, fy))
}

/// Samples with coordinates snapped onto the border when they overshoot by
/// less than `tol`; returns `None` beyond that.
pub(crate) fn sample_or_none(image: &FaceImage, x: f64, y: f64, tol: f64) -> Option<[f64; 3]> {
    let (max_x, max_y) = ((image.width - 1) as f64, (image.height - 1) as f64);
    if x < -tol || y < -tol || x > max_x + tol || y > max_y + tol {
        return None;
    }
    Some(sample_unchecked(
        image,
        x.clamp(0.0, max_x),
        y.clamp(0.0, max_y),
    ))
}

pub fn load_image(path: &Path) -> Result<FaceImage> {
    let bytes = fsio::read(path)?;
    decode_png(&bytes)
}

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

pub fn decode_png(bytes: &[u8]) -> Result<FaceImage> {
    if !bytes.starts_with(&PNG_MAGIC) {
        return Err(Error::UnsupportedFormat("not a PNG stream".into()));
    }
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let buf = &buf[..info.buffer_size()];
    let (w, h) = (info.width as usize, info.height as usize);
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => buf.to_vec(),
        png::ColorType::Rgba => buf
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0]; 3]).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {other:?}"
            )))
        }
    };
    FaceImage::from_rgb8(w, h, &rgb)
}

pub fn encode_png(image: &FaceImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Decode(format!("encode: {e}")))?;
        writer
            .write_image_data(&image.to_rgb8())
            .map_err(|e| Error::Decode(format!("encode: {e}")))?;
    }
    Ok(out)
}

/// Writes an 8-bit RGB PNG atomically.
pub fn save_image(image: &FaceImage, path: &Path) -> Result<()> {
    fsio::write_atomic(path, &encode_png(image)?)
}

/// Landmark file: `{"image_id": str, "points": [[x, y], ...]}` holding the
/// 68 facial points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFile {
    pub image_id: String,
    pub points: Vec<Point>,
}

impl LandmarkFile {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let lf: LandmarkFile = serde_json::from_reader(BufReader::new(file))?;
        lf.check()
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        Ok(lf)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let lf: LandmarkFile = serde_json::from_slice(bytes)?;
        lf.check().map_err(Error::Validation)?;
        Ok(lf)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.points.len() != FACIAL_LANDMARKS {
            return Err(format!(
                "expected {FACIAL_LANDMARKS} landmarks, found {}",
                self.points.len()
            ));
        }
        if self
            .points
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err("non-finite landmark".into());
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_json_atomic(path, self)
    }

    /// Facial points plus the eight border anchors for an image of this size.
    pub fn morph_landmarks(&self, width: usize, height: usize) -> Result<LandmarkSet> {
        LandmarkSet::new(with_border_anchors(&self.points, width, height))
    }
}

/// Appends the four image corners and four edge midpoints.
pub fn with_border_anchors(points: &[Point], width: usize, height: usize) -> Vec<Point> {
    let (r, b) = ((width - 1) as f64, (height - 1) as f64);
    let mut out = points.to_vec();
    out.extend([
        Point::new(0.0, 0.0),
        Point::new(r, 0.0),
        Point::new(r, b),
        Point::new(0.0, b),
        Point::new(r / 2.0, 0.0),
        Point::new(r, b / 2.0),
        Point::new(r / 2.0, b),
        Point::new(0.0, b / 2.0),
    ]);
    out
}

/// Rotation + uniform scale + translation:
/// `x' = a·x − b·y + tx`, `y' = b·x + a·y + ty`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        a: 1.0,
        b: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.a * p.x - self.b * p.y + self.tx,
            self.b * p.x + self.a * p.y + self.ty,
        )
    }

    pub fn inverse(&self) -> Similarity {
        let n = self.a * self.a + self.b * self.b;
        let (a, b) = (self.a / n, -self.b / n);
        Similarity {
            a,
            b,
            tx: -(a * self.tx - b * self.ty),
            ty: -(b * self.tx + a * self.ty),
        }
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

/// Closed-form least-squares similarity mapping `src` onto `dst`.
pub fn fit_similarity(src: &[Point], dst: &[Point]) -> Result<Similarity> {
    if src.len() != dst.len() {
        return Err(Error::CardinalityMismatch {
            left: src.len(),
            right: dst.len(),
        });
    }
    if src.len() < 2 {
        return Err(Error::Alignment("need at least two point pairs".into()));
    }
    let n = src.len() as f64;
    let mean = |ps: &[Point]| {
        let (sx, sy) = ps
            .iter()
            .fold((0.0, 0.0), |(ax, ay), p| (ax + p.x, ay + p.y));
        Point::new(sx / n, sy / n)
    };
    let (ms, md) = (mean(src), mean(dst));
    let (mut ss, mut num_a, mut num_b, mut mag) = (0.0, 0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (sx, sy) = (s.x - ms.x, s.y - ms.y);
        let (dx, dy) = (d.x - md.x, d.y - md.y);
        ss += sx * sx + sy * sy;
        num_a += sx * dx + sy * dy;
        num_b += sx * dy - sy * dx;
        mag += s.x * s.x + s.y * s.y;
    }
    if ss <= 1e-18 * mag.max(1.0) {
        return Err(Error::Alignment("source landmarks are coincident".into()));
    }
    let (a, b) = (num_a / ss, num_b / ss);
    if a == 0.0 && b == 0.0 {
        return Err(Error::Alignment("template landmarks are coincident".into()));
    }
    Ok(Similarity {
        a,
        b,
        tx: md.x - (a * ms.x - b * ms.y),
        ty: md.y - (b * ms.x + a * ms.y),
    })
}

/// Warps `image` so that `landmarks` land (in the least-squares sense) on
/// `template`, producing an `out_size` image. Pixels that map outside the
/// source are black.
pub fn align_face(
    image: &FaceImage,
    landmarks: &[Point],
    template: &[Point],
    out_size: (usize, usize),
) -> Result<(FaceImage, Vec<Point>)> {
    let fwd = fit_similarity(landmarks, template)?;
    let inv = fwd.inverse();
    let (w, h) = out_size;
    let aligned = FaceImage::from_fn(w, h, |x, y| {
        let s = inv.apply(Point::new(x as f64, y as f64));
        sample_or_none(image, s.x, s.y, 1e-9).unwrap_or([0.0; 3])
    })?;
    Ok((aligned, landmarks.iter().map(|&p| fwd.apply(p)).collect()))
}
