//! Procedural flat-shaded faces with exact landmarks and parsing labels.
//!
//! These stand in for "no-makeup" photos in tests and in the synthetic
//! transfer benchmark: every pixel's class is known, and the skin is a single
//! flat color unless `shading` is set.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AffineTransform, CanonicalLayout, LandmarkSet, Point};
use crate::image::{write_rgb, Image, ImageRgb, Rgb};
use crate::parsing::{write_parsing, ParsingLabels, ParsingMask};
use crate::raster::{chaikin, point_in_polygon};

/// Light to deep skin tones (sRGB).
pub const SKIN_PALETTE: [Rgb; 8] = [
    [0.96, 0.84, 0.75],
    [0.93, 0.78, 0.67],
    [0.87, 0.70, 0.58],
    [0.80, 0.60, 0.47],
    [0.69, 0.50, 0.38],
    [0.55, 0.38, 0.28],
    [0.45, 0.31, 0.23],
    [0.36, 0.24, 0.18],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFaceParams {
    /// Square frame side in pixels.
    pub size: usize,
    /// Face scale relative to the frame, as `(min, max)` of canonical-width fractions.
    pub scale: (f64, f64),
    pub max_rotation_deg: f64,
    /// Max center offset as a fraction of `size`.
    pub max_shift: f64,
    /// Per-landmark uniform jitter amplitude in pixels.
    pub jitter_px: f64,
    /// Amplitude of a low-frequency multiplicative skin shading (0 = flat).
    pub shading: f64,
}

impl Default for SyntheticFaceParams {
    fn default() -> Self {
        SyntheticFaceParams {
            size: 256,
            scale: (0.85, 0.95),
            max_rotation_deg: 6.0,
            max_shift: 0.03,
            jitter_px: 0.3,
            shading: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticFace {
    pub image: ImageRgb,
    pub landmarks: LandmarkSet,
    pub parsing: ParsingMask,
    pub skin: Rgb,
}

fn jitter(rng: &mut ChaCha8Rng, c: Rgb, amount: f64) -> Rgb {
    c.map(|v| (v + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

/// Renders one face. Deterministic in `seed`.
pub fn synthetic_face(
    params: &SyntheticFaceParams,
    seed: u64,
    labels: &ParsingLabels,
) -> Result<SyntheticFace> {
    if params.size < 32 {
        return Err(Error::InvalidParameter(
            "synthetic face size must be >= 32".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let canon = CanonicalLayout::builtin();
    let n = params.size as f64;

    let scale = rng.random_range(params.scale.0..=params.scale.1) * n / canon.width as f64;
    let theta = rng
        .random_range(-params.max_rotation_deg..=params.max_rotation_deg)
        .to_radians();
    let shift = [
        rng.random_range(-params.max_shift..=params.max_shift) * n,
        rng.random_range(-params.max_shift..=params.max_shift) * n,
    ];
    let (a, b) = (scale * theta.cos(), scale * theta.sin());
    let center = [canon.width as f64 * 0.5, canon.height as f64 * 0.6];
    let rot = AffineTransform::similarity(a, b, 0.0, 0.0);
    let rc = rot.apply(center);
    let t = AffineTransform::similarity(
        a,
        b,
        n * 0.5 + shift[0] - rc[0],
        n * 0.55 + shift[1] - rc[1],
    );
    let mut landmarks = canon.reference.map(|p| t.apply(p));
    if params.jitter_px > 0.0 {
        for p in &mut landmarks.points {
            p[0] += rng.random_range(-params.jitter_px..=params.jitter_px);
            p[1] += rng.random_range(-params.jitter_px..=params.jitter_px);
        }
    }

    let base = SKIN_PALETTE[rng.random_range(0..SKIN_PALETTE.len())];
    let skin = jitter(&mut rng, base, 0.02);
    let background = jitter(&mut rng, [0.45, 0.5, 0.58], 0.12);
    let brow = jitter(&mut rng, [0.22, 0.15, 0.11], 0.05);
    let iris = [[0.30, 0.20, 0.12], [0.25, 0.40, 0.55], [0.30, 0.42, 0.28]][rng.random_range(0..3)];
    let iris = jitter(&mut rng, iris, 0.04);
    let lip = [
        (skin[0] * 0.55 + 0.75 * 0.45).min(1.0),
        skin[1] * 0.55 + 0.32 * 0.45,
        skin[2] * 0.55 + 0.34 * 0.45,
    ]
    .map(|v| v * 0.9);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);

    let shapes = FaceShapes::new(&landmarks);
    let id = |name: &str| {
        labels
            .id(name)
            .ok_or_else(|| Error::InvalidParameter(format!("parsing labels lack `{name}`")))
    };
    let ids = [
        id("background")?,
        id("skin")?,
        id("nose")?,
        id("r_brow")?,
        id("l_brow")?,
        id("r_eye")?,
        id("l_eye")?,
        id("u_lip")?,
        id("l_lip")?,
        id("mouth")?,
    ];

    let size = params.size;
    let mut parsing = Image::filled(size, size, ids[0]);
    let mut image = Image::filled(size, size, background);
    for y in 0..size {
        for x in 0..size {
            let p = [x as f64, y as f64];
            let (label, color) = match shapes.classify(p) {
                Part::Background => continue,
                Part::Skin => (ids[1], skin),
                Part::Nose => (ids[2], skin),
                Part::Brow(side) => (ids[3 + side], brow),
                Part::Eye(side, e) => (
                    ids[5 + side],
                    match e {
                        EyePart::Sclera => [0.93, 0.91, 0.88],
                        EyePart::Iris => iris,
                        EyePart::Pupil => [0.05, 0.04, 0.04],
                    },
                ),
                Part::UpperLip => (ids[7], lip),
                Part::LowerLip => (ids[8], lip),
                Part::Mouth => (ids[9], [0.32, 0.1, 0.1]),
            };
            let color = if params.shading > 0.0 && matches!(label, l if l == ids[1] || l == ids[2])
            {
                let s = 1.0
                    + params.shading * (x as f64 / 40.0 + phase).sin() * (y as f64 / 55.0).cos();
                color.map(|c| (c * s).clamp(0.0, 1.0))
            } else {
                color
            };
            parsing.set(x, y, label);
            image.set(x, y, color);
        }
    }

    Ok(SyntheticFace {
        image,
        landmarks,
        parsing,
        skin,
    })
}

enum EyePart {
    Sclera,
    Iris,
    Pupil,
}

enum Part {
    Background,
    Skin,
    Nose,
    /// 0 = image-left.
    Brow(usize),
    Eye(usize, EyePart),
    UpperLip,
    LowerLip,
    Mouth,
}

struct FaceShapes {
    outline: Vec<Point>,
    nose: Vec<Point>,
    brows: [Vec<Point>; 2],
    eyes: [Vec<Point>; 2],
    irises: [(Point, f64); 2],
    lips_outer: Vec<Point>,
    lips_inner: Vec<Point>,
    mouth_line: Vec<Point>,
}

impl FaceShapes {
    fn new(lm: &LandmarkSet) -> Self {
        let p = &lm.points;
        let io = dist(centroid(&p[36..42]), centroid(&p[42..48]));

        let mut outline: Vec<Point> = p[0..17].to_vec();
        let c = mid(p[0], p[16]);
        let u = [(p[16][0] - p[0][0]) * 0.5, (p[16][1] - p[0][1]) * 0.5];
        let v = [u[1] * 0.8, -u[0] * 0.8];
        for i in 1..16 {
            let th = std::f64::consts::PI * i as f64 / 16.0;
            outline.push([
                c[0] + u[0] * th.cos() + v[0] * th.sin(),
                c[1] + u[1] * th.cos() + v[1] * th.sin(),
            ]);
        }

        let nw = 0.04 * io;
        let nose = vec![
            [p[27][0] - nw, p[27][1]],
            p[31],
            p[32],
            p[33],
            p[34],
            p[35],
            [p[27][0] + nw, p[27][1]],
        ];

        let brow = |r: std::ops::Range<usize>| {
            let line = &p[r];
            let t = 0.022 * io;
            let mut poly: Vec<Point> = line.iter().map(|q| [q[0], q[1] - t]).collect();
            poly.extend(line.iter().rev().map(|q| [q[0], q[1] + t]));
            poly
        };

        let eye = |r: std::ops::Range<usize>| chaikin(&p[r], 2, true);
        let iris = |r: std::ops::Range<usize>| {
            let pts = &p[r];
            let h = dist(mid(pts[1], pts[2]), mid(pts[4], pts[5]));
            (centroid(pts), 0.45 * h)
        };

        let mouth_line = vec![
            p[60],
            mid(p[61], p[67]),
            mid(p[62], p[66]),
            mid(p[63], p[65]),
            p[64],
        ];

        FaceShapes {
            outline,
            nose,
            brows: [brow(17..22), brow(22..27)],
            eyes: [eye(36..42), eye(42..48)],
            irises: [iris(36..42), iris(42..48)],
            lips_outer: chaikin(&p[48..60], 2, true),
            lips_inner: chaikin(&p[60..68], 1, true),
            mouth_line,
        }
    }

    fn classify(&self, q: Point) -> Part {
        if !point_in_polygon(q, &self.outline) {
            return Part::Background;
        }
        for side in 0..2 {
            if point_in_polygon(q, &self.eyes[side]) {
                let (c, r) = self.irises[side];
                let d = dist(q, c);
                let part = if d <= 0.45 * r {
                    EyePart::Pupil
                } else if d <= r {
                    EyePart::Iris
                } else {
                    EyePart::Sclera
                };
                return Part::Eye(side, part);
            }
            if point_in_polygon(q, &self.brows[side]) {
                return Part::Brow(side);
            }
        }
        if point_in_polygon(q, &self.lips_outer) {
            if point_in_polygon(q, &self.lips_inner) {
                return Part::Mouth;
            }
            return if q[1] < polyline_y(&self.mouth_line, q[0]) {
                Part::UpperLip
            } else {
                Part::LowerLip
            };
        }
        if point_in_polygon(q, &self.nose) {
            return Part::Nose;
        }
        Part::Skin
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn mid(a: Point, b: Point) -> Point {
    [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5]
}

fn centroid(pts: &[Point]) -> Point {
    crate::geometry::landmarks::centroid(pts)
}

/// `y` of a left-to-right polyline at `x`, extended flat past its ends.
fn polyline_y(line: &[Point], x: f64) -> f64 {
    if x <= line[0][0] {
        return line[0][1];
    }
    for w in line.windows(2) {
        if x <= w[1][0] {
            let t = (x - w[0][0]) / (w[1][0] - w[0][0]).max(1e-12);
            return w[0][1] + t * (w[1][1] - w[0][1]);
        }
    }
    line[line.len() - 1][1]
}

/// One row of a face manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceEntry {
    pub face: PathBuf,
    pub landmarks: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsing: Option<PathBuf>,
}

/// Writes `count` faces as `face_NNN.png`, `face_NNN.json` and
/// `face_NNN_parsing.png` plus a `faces.jsonl` manifest with relative paths.
/// Face `i` uses seed `seed + i`.
pub fn write_face_set(
    dir: impl AsRef<Path>,
    count: usize,
    seed: u64,
    params: &SyntheticFaceParams,
    labels: &ParsingLabels,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut lines = String::new();
    for i in 0..count {
        let face = synthetic_face(params, seed.wrapping_add(i as u64), labels)?;
        let stem = format!("face_{i:03}");
        write_rgb(&face.image, dir.join(format!("{stem}.png")))?;
        face.landmarks.save(dir.join(format!("{stem}.json")))?;
        write_parsing(&face.parsing, dir.join(format!("{stem}_parsing.png")))?;
        let entry = FaceEntry {
            face: format!("{stem}.png").into(),
            landmarks: format!("{stem}.json").into(),
            parsing: Some(format!("{stem}_parsing.png").into()),
        };
        lines.push_str(&serde_json::to_string(&entry).expect("entry serialize"));
        lines.push('\n');
    }
    let manifest = dir.join("faces.jsonl");
    std::fs::write(&manifest, lines).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_landmarks_agree() {
        let labels = ParsingLabels::default();
        let f = synthetic_face(&SyntheticFaceParams::default(), 3, &labels).unwrap();
        assert!(f.landmarks.within(256, 256));
        let eyes = labels.eyes();
        for r in [36..42, 42..48] {
            let c = centroid(&f.landmarks.points[r]);
            assert!(eyes.contains(*f.parsing.get(c[0].round() as usize, c[1].round() as usize)));
        }
        let lips = f.landmarks.points[51];
        let below = *f
            .parsing
            .get(lips[0].round() as usize, lips[1].round() as usize + 1);
        assert_eq!(below, labels.id("u_lip").unwrap());
        let skin_id = labels.id("skin").unwrap();
        let skin_px: Vec<_> = f
            .image
            .pixels()
            .iter()
            .zip(f.parsing.pixels())
            .filter(|(_, &l)| l == skin_id)
            .map(|(p, _)| *p)
            .collect();
        assert!(skin_px.len() > 5000);
        assert!(skin_px.iter().all(|p| *p == f.skin));
    }

    #[test]
    fn deterministic_in_seed() {
        let labels = ParsingLabels::default();
        let p = SyntheticFaceParams::default();
        let a = synthetic_face(&p, 11, &labels).unwrap();
        let b = synthetic_face(&p, 11, &labels).unwrap();
        let c = synthetic_face(&p, 12, &labels).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.landmarks, b.landmarks);
        assert_ne!(a.image, c.image);
    }
}
