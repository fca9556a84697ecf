//! Image and mask metrics plus the paired-face transfer evaluation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::composite_mask;
use crate::error::{Error, Result};
use crate::extract::{extract_eye_mask, eye_region_support, ExtractOptions};
use crate::geometry::{apply_affine, fit_canonical_affine, CanonicalLayout, LandmarkSet};
use crate::image::{read_rgb, ImageRgb, RgbaMask};
use crate::parsing::{read_parsing, ParsingLabels, ParsingMask};
use crate::synth::{
    generate_pair, render_style_mask, sample_style_for, splitmix64, MakeupRegion, StyleLibrary,
};
use crate::synthetic::FaceEntry;
use crate::video::{warp_mask_to_frame, ApplyOptions, FrameInput};

pub const IOU_THRESHOLD: f64 = 0.1;

/// PSNR in dB, `None` when the images are identical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psnr {
    pub db: Option<f64>,
    pub mse: f64,
}

impl Psnr {
    pub fn from_mse(mse: f64) -> Psnr {
        Psnr {
            db: (mse > 0.0).then(|| 10.0 * (1.0 / mse).log10()),
            mse,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.db.is_none()
    }
}

pub fn mse(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    a.check_same_dims(b)?;
    if a.is_empty() {
        return Err(Error::InvalidImage("empty image".into()));
    }
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>())
        .sum();
    Ok(sum / (3 * a.len()) as f64)
}

/// `10 log10(1 / MSE)` on `[0, 1]` channels.
pub fn psnr(a: &ImageRgb, b: &ImageRgb) -> Result<Psnr> {
    Ok(Psnr::from_mse(mse(a, b)?))
}

/// Mean absolute alpha difference.
pub fn alpha_mae(a: &RgbaMask, b: &RgbaMask) -> Result<f64> {
    a.check_same_dims(b)?;
    if a.is_empty() {
        return Err(Error::InvalidImage("empty mask".into()));
    }
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(p, q)| (p[3] - q[3]).abs())
        .sum();
    Ok(sum / a.len() as f64)
}

/// IoU of `alpha > threshold`. Two empty masks score 1.
pub fn mask_iou(a: &RgbaMask, b: &RgbaMask, threshold: f64) -> Result<f64> {
    a.check_same_dims(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (p, q) in a.pixels().iter().zip(b.pixels()) {
        let (x, y) = (p[3] > threshold, q[3] > threshold);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Extraction fidelity on one made-up face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionScore {
    /// Pearson correlation of extracted and true alpha over the eye region.
    pub correlation: Option<f64>,
    pub region_pixels: usize,
    pub seconds: f64,
}

/// Extracts from `photo` and correlates its alpha with `gt_mask` (the mask
/// that made `photo`, in the photo's frame) after the same canonical alignment.
pub fn extraction_score(
    photo: &ImageRgb,
    lm: &LandmarkSet,
    parsing: &ParsingMask,
    gt_mask: &RgbaMask,
    labels: &ParsingLabels,
    canon: &CanonicalLayout,
    opts: &ExtractOptions,
) -> Result<ExtractionScore> {
    photo.check_same_dims(gt_mask)?;
    let start = std::time::Instant::now();
    let got = extract_eye_mask(photo, lm, parsing, labels, canon, opts)?.mask;
    let seconds = start.elapsed().as_secs_f64();
    let (w, h) = canon.dims();
    let gt = apply_affine(gt_mask, &fit_canonical_affine(lm, canon)?, w, h)?;
    let region = eye_region_support(lm, parsing, labels, canon, opts)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for ((&inside, p), q) in region.pixels().iter().zip(got.pixels()).zip(gt.pixels()) {
        if inside {
            a.push(p[3]);
            b.push(q[3]);
        }
    }
    Ok(ExtractionScore {
        correlation: pearson(&a, &b),
        region_pixels: a.len(),
        seconds,
    })
}

/// A no-makeup face with what extraction and application need.
#[derive(Clone, Debug)]
pub struct EvalFace {
    pub name: String,
    pub image: ImageRgb,
    pub landmarks: LandmarkSet,
    pub parsing: ParsingMask,
}

impl EvalFace {
    pub fn load(entry: &FaceEntry) -> Result<EvalFace> {
        let parsing = entry.parsing.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("{} has no parsing map", entry.face.display()))
        })?;
        Ok(EvalFace {
            name: entry
                .face
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("face")
                .to_string(),
            image: read_rgb(&entry.face)?,
            landmarks: LandmarkSet::load(&entry.landmarks)?,
            parsing: read_parsing(parsing)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub n_pairs: usize,
    pub seed: u64,
    pub regions: Vec<MakeupRegion>,
    pub extract: ExtractOptions,
    /// Transfer the ground-truth canonical mask instead of extracting one.
    pub oracle_gt: bool,
    /// Gate the transferred mask with face2's parsing map.
    pub gate_application: bool,
    /// 0 uses every core.
    pub workers: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_pairs: 200,
            seed: 0,
            regions: vec![MakeupRegion::Eyeshadow],
            extract: ExtractOptions::default(),
            oracle_gt: false,
            gate_application: false,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub index: usize,
    pub source: String,
    pub target: String,
    pub style_seed: u64,
    pub mse: f64,
    pub psnr_db: Option<f64>,
    pub alpha_mae: f64,
    pub mask_iou: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub index: usize,
    pub source: String,
    pub target: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// PSNR of the pooled MSE; `None` with `psnr_infinite` set when it is zero.
    pub psnr_db: Option<f64>,
    pub psnr_infinite: bool,
    pub alpha_mae: f64,
    pub mask_iou: f64,
    pub n_pairs: usize,
    pub skipped: Vec<SkippedPair>,
    pub pairs: Vec<PairResult>,
}

impl EvalReport {
    /// Writes one CSV row per evaluated pair.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        w.write_record([
            "index",
            "source",
            "target",
            "style_seed",
            "mse",
            "psnr_db",
            "alpha_mae",
            "mask_iou",
        ])
        .and_then(|_| {
            for p in &self.pairs {
                w.write_record([
                    p.index.to_string(),
                    p.source.clone(),
                    p.target.clone(),
                    p.style_seed.to_string(),
                    p.mse.to_string(),
                    p.psnr_db.map_or("inf".to_string(), |d| d.to_string()),
                    p.alpha_mae.to_string(),
                    p.mask_iou.to_string(),
                ])?;
            }
            w.flush().map_err(Into::into)
        })
        .map_err(|e| Error::io(path, e.into()))
    }
}

/// Picks `(source, target, style seed)` for pair `index`.
fn draw_pair(seed: u64, index: usize, n_faces: usize) -> (usize, usize, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index as u64)));
    let i = rng.random_range(0..n_faces);
    let j = (i + rng.random_range(1..n_faces)) % n_faces;
    (i, j, rng.random())
}

fn eval_pair(
    index: usize,
    faces: &[EvalFace],
    lib: &StyleLibrary,
    canon: &CanonicalLayout,
    labels: &ParsingLabels,
    opts: &EvalOptions,
) -> std::result::Result<PairResult, SkippedPair> {
    let (i, j, style_seed) = draw_pair(opts.seed, index, faces.len());
    let (src, dst) = (&faces[i], &faces[j]);
    let run = || -> Result<PairResult> {
        let style = sample_style_for(lib, style_seed, &opts.regions)?;
        let gt = render_style_mask(&style, lib, canon)?;
        let before = generate_pair(&src.image, &src.landmarks, &gt, canon)?;
        let expected = generate_pair(&dst.image, &dst.landmarks, &gt, canon)?;
        let mask = if opts.oracle_gt {
            gt.clone()
        } else {
            extract_eye_mask(
                &before.after,
                &src.landmarks,
                &src.parsing,
                labels,
                canon,
                &opts.extract,
            )?
            .mask
        };
        let frame = FrameInput {
            image: dst.image.clone(),
            landmarks: dst.landmarks.clone(),
            parsing: opts.gate_application.then(|| dst.parsing.clone()),
            timestamp_ms: 0.0,
        };
        let warped = warp_mask_to_frame(&mask, &frame, canon, &ApplyOptions::default())?;
        let got = composite_mask(&warped, &dst.image)?;
        let err = psnr(&got, &expected.after)?;
        Ok(PairResult {
            index,
            source: src.name.clone(),
            target: dst.name.clone(),
            style_seed,
            mse: err.mse,
            psnr_db: err.db,
            alpha_mae: alpha_mae(&mask, &gt)?,
            mask_iou: mask_iou(&mask, &gt, IOU_THRESHOLD)?,
        })
    };
    run().map_err(|e| SkippedPair {
        index,
        source: src.name.clone(),
        target: dst.name.clone(),
        reason: e.to_string(),
    })
}

/// Paired-face transfer: the same style goes on two faces, a mask is
/// extracted from the first and applied to the second, and the result is
/// compared with the second face's rendered ground truth.
///
/// Pairs whose extraction or warp fails are skipped and listed in the report.
pub fn synthetic_transfer_eval(
    faces: &[EvalFace],
    lib: &StyleLibrary,
    canon: &CanonicalLayout,
    labels: &ParsingLabels,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if faces.len() < 2 {
        return Err(Error::InvalidParameter(
            "the transfer protocol needs at least two faces".into(),
        ));
    }
    if opts.n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be > 0".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        (0..opts.n_pairs)
            .into_par_iter()
            .map(|k| eval_pair(k, faces, lib, canon, labels, opts))
            .collect()
    });
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(p) => pairs.push(p),
            Err(s) => {
                log::warn!(
                    "pair {} ({} -> {}) skipped: {}",
                    s.index,
                    s.source,
                    s.target,
                    s.reason
                );
                skipped.push(s);
            }
        }
    }
    let n = pairs.len();
    let mean = |f: fn(&PairResult) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            pairs.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let pooled = Psnr::from_mse(mean(|p| p.mse));
    Ok(EvalReport {
        psnr_db: if n == 0 { None } else { pooled.db },
        psnr_infinite: n > 0 && pooled.is_infinite(),
        alpha_mae: mean(|p| p.alpha_mae),
        mask_iou: mean(|p| p.mask_iou),
        n_pairs: n,
        skipped,
        pairs,
    })
}

/// Loads every face of a manifest; entries need a parsing map.
pub fn load_eval_faces(entries: &[FaceEntry]) -> Result<Vec<EvalFace>> {
    entries.iter().map(EvalFace::load).collect()
}

/// Reads a face manifest and loads its faces.
pub fn load_eval_manifest(path: impl AsRef<Path>) -> Result<Vec<EvalFace>> {
    load_eval_faces(&crate::synth::read_face_manifest(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    fn gray(v: f64) -> ImageRgb {
        Image::filled(6, 5, [v, v, v])
    }

    #[test]
    fn psnr_examples() {
        assert!(psnr(&gray(0.3), &gray(0.3)).unwrap().is_infinite());
        let d = psnr(&gray(0.5), &gray(0.5 + 10.0 / 255.0))
            .unwrap()
            .db
            .unwrap();
        assert!((d - 28.130_803_608_679_1).abs() < 1e-9, "{d}");
        assert!(psnr(&gray(0.5), &Image::filled(5, 5, [0.5; 3])).is_err());
    }

    #[test]
    fn psnr_is_symmetric_and_falls_with_noise() {
        let a: ImageRgb = Image::from_fn(9, 7, |x, y| [x as f64 / 9.0, y as f64 / 7.0, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<[f64; 3]> = (0..a.len())
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let noisy = |amp: f64| {
            Image::new(
                9,
                7,
                a.pixels()
                    .iter()
                    .zip(&noise)
                    .map(|(p, n)| std::array::from_fn(|c| p[c] + amp * n[c]))
                    .collect(),
            )
            .unwrap()
        };
        let b = noisy(0.05);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let mut last = f64::INFINITY;
        for amp in [0.001, 0.01, 0.02, 0.05, 0.1, 0.3] {
            let d = psnr(&a, &noisy(amp)).unwrap().db.unwrap();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn mask_metrics() {
        let m: RgbaMask = Image::from_fn(8, 8, |x, _| [0.1, 0.2, 0.3, x as f64 / 8.0]);
        assert_eq!(alpha_mae(&m, &m).unwrap(), 0.0);
        assert_eq!(mask_iou(&m, &m, IOU_THRESHOLD).unwrap(), 1.0);
        let empty = RgbaMask::transparent(8, 8);
        assert_eq!(mask_iou(&empty, &empty, IOU_THRESHOLD).unwrap(), 1.0);
        assert_eq!(mask_iou(&m, &empty, IOU_THRESHOLD).unwrap(), 0.0);
        // above threshold: x >= 1 before halving, x >= 2 after
        let half = m.map(|p| [p[0], p[1], p[2], p[3] / 2.0]);
        assert!((mask_iou(&m, &half, IOU_THRESHOLD).unwrap() - 6.0 / 7.0).abs() < 1e-12);
        assert!((alpha_mae(&m, &half).unwrap() - 3.5 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]), None);
        assert_eq!(pearson(&[1.0], &[1.0]), None);
    }

    #[test]
    fn pair_draw_never_repeats_a_face() {
        for k in 0..500 {
            let (i, j, _) = draw_pair(7, k, 3);
            assert!(i != j && i < 3 && j < 3);
        }
    }
}
