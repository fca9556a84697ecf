//! Applying one fixed canonical mask to a stream of frames.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::composite_mask;
use crate::error::{Error, Result};
use crate::geometry::{
    tps_fit, warp_mask_with_inverse, AlphaSupport, CanonicalLayout, FaceRegion, LandmarkSet, Point,
    DEFAULT_GRID_STEP,
};
use crate::image::{read_rgb, write_rgb, ImageRgb, RgbaMask};
use crate::parsing::{read_parsing, LabelSet, ParsingLabels, ParsingMask};

const SUPPORT_BLOCK: usize = 16;

/// Nominal spacing of frames read from a directory.
pub const DEFAULT_FRAME_INTERVAL_MS: f64 = 1000.0 / 30.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameInput {
    pub image: ImageRgb,
    pub landmarks: LandmarkSet,
    pub parsing: Option<ParsingMask>,
    pub timestamp_ms: f64,
}

/// Exponential moving average over landmark positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SmootherState {
    pub ema: Option<LandmarkSet>,
    beta: f64,
}

impl SmootherState {
    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0,1), got {beta}"
            )));
        }
        Ok(SmootherState { ema: None, beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `beta * previous + (1 - beta) * lm`; the first call returns `lm`.
    pub fn smooth(&mut self, lm: &LandmarkSet) -> Result<LandmarkSet> {
        let out = match &self.ema {
            Some(prev) => {
                if prev.layout_id != lm.layout_id || prev.points.len() != lm.points.len() {
                    return Err(Error::InvalidLandmarks(format!(
                        "smoother holds `{}` ({} points), got `{}` ({} points)",
                        prev.layout_id,
                        prev.points.len(),
                        lm.layout_id,
                        lm.points.len()
                    )));
                }
                if self.beta == 0.0 {
                    lm.clone()
                } else {
                    let b = self.beta;
                    LandmarkSet {
                        layout_id: lm.layout_id.clone(),
                        points: prev
                            .points
                            .iter()
                            .zip(&lm.points)
                            .map(|(p, q)| {
                                [
                                    p[0] + (1.0 - b) * (q[0] - p[0]),
                                    p[1] + (1.0 - b) * (q[1] - p[1]),
                                ]
                            })
                            .collect(),
                    }
                }
            }
            None => lm.clone(),
        };
        self.ema = Some(out.clone());
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct ApplyOptions {
    /// Parsing labels where makeup may appear.
    pub gate: LabelSet,
    /// Multiplier on the warped alpha, clamped to 1.
    pub alpha_scale: f64,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions {
            gate: ParsingLabels::default().face_region(),
            alpha_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Applied {
    pub image: ImageRgb,
    /// Set when the frame was passed through untouched.
    pub warning: Option<String>,
}

/// The mask warped into `frame`'s pixel grid and gated by its parsing.
pub fn warp_mask_to_frame(
    mask: &RgbaMask,
    frame: &FrameInput,
    canon: &CanonicalLayout,
    opts: &ApplyOptions,
) -> Result<RgbaMask> {
    let support = AlphaSupport::from_mask(mask, SUPPORT_BLOCK);
    warp_gated(
        mask,
        &support,
        &frame.image,
        &frame.landmarks,
        frame.parsing.as_ref(),
        canon,
        opts,
    )
}

fn warp_gated(
    mask: &RgbaMask,
    support: &AlphaSupport,
    image: &ImageRgb,
    landmarks: &LandmarkSet,
    parsing: Option<&ParsingMask>,
    canon: &CanonicalLayout,
    opts: &ApplyOptions,
) -> Result<RgbaMask> {
    let (fw, fh) = image.dims();
    if let Some(p) = parsing {
        image.check_same_dims(p)?;
    }
    if !(opts.alpha_scale >= 0.0 && opts.alpha_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha_scale {}",
            opts.alpha_scale
        )));
    }
    landmarks.validate()?;
    let canon = canon.resized(mask.width(), mask.height());
    let pull = tps_fit(&landmarks.points, &canon.reference.points, 0.0)?;
    let mut warped = warp_mask_with_inverse(mask, &pull, fw, fh, DEFAULT_GRID_STEP, support);
    for (i, px) in warped.pixels_mut().iter_mut().enumerate() {
        if px[3] == 0.0 {
            continue;
        }
        if parsing.is_some_and(|g| !opts.gate.contains(g.pixels()[i])) {
            *px = [0.0; 4];
        } else if opts.alpha_scale != 1.0 {
            px[3] = (px[3] * opts.alpha_scale).min(1.0);
        }
    }
    Ok(warped)
}

/// Which facial areas of a canonical mask are kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionToggles {
    pub eyes: bool,
    pub lips: bool,
    pub cheeks: bool,
}

impl Default for RegionToggles {
    fn default() -> Self {
        RegionToggles {
            eyes: true,
            lips: true,
            cheeks: true,
        }
    }
}

impl RegionToggles {
    pub fn all_on(self) -> bool {
        self.eyes && self.lips && self.cheeks
    }

    pub fn allows(self, region: FaceRegion) -> bool {
        match region {
            FaceRegion::EyeLeft | FaceRegion::EyeRight => self.eyes,
            FaceRegion::Lips => self.lips,
            FaceRegion::CheekLeft | FaceRegion::CheekRight => self.cheeks,
        }
    }
}

/// The face region whose anchor is closest to `p`. Ties go to the earlier
/// entry of [`FaceRegion::ALL`].
pub fn nearest_region(anchors: &[(FaceRegion, Point); 5], p: Point) -> FaceRegion {
    let d2 = |a: Point| (a[0] - p[0]).powi(2) + (a[1] - p[1]).powi(2);
    let mut best = anchors[0];
    for &a in &anchors[1..] {
        if d2(a.1) < d2(best.1) {
            best = a;
        }
    }
    best.0
}

/// Clears the canonical `mask` wherever the nearest region anchor belongs to
/// a disabled region.
pub fn restrict_to_regions(
    mut mask: RgbaMask,
    canon: &CanonicalLayout,
    toggles: RegionToggles,
) -> RgbaMask {
    if toggles.all_on() {
        return mask;
    }
    let canon = canon.resized(mask.width(), mask.height());
    let anchors = FaceRegion::ALL.map(|r| (r, canon.anchor(r)));
    let w = mask.width();
    for (i, px) in mask.pixels_mut().iter_mut().enumerate() {
        if px[3] == 0.0 {
            continue;
        }
        let p = [(i % w) as f64, (i / w) as f64];
        if !toggles.allows(nearest_region(&anchors, p)) {
            *px = [0.0; 4];
        }
    }
    mask
}

/// Warps the canonical `mask` onto `frame`, gates it and composites.
///
/// Landmarks that cannot carry a spline (non-finite, coincident, collinear)
/// leave the frame untouched and set a warning.
pub fn apply_to_frame(
    mask: &RgbaMask,
    frame: &FrameInput,
    canon: &CanonicalLayout,
    opts: &ApplyOptions,
) -> Result<Applied> {
    let support = AlphaSupport::from_mask(mask, SUPPORT_BLOCK);
    apply_with(mask, &support, frame, &frame.landmarks, canon, opts)
}

fn apply_with(
    mask: &RgbaMask,
    support: &AlphaSupport,
    frame: &FrameInput,
    landmarks: &LandmarkSet,
    canon: &CanonicalLayout,
    opts: &ApplyOptions,
) -> Result<Applied> {
    if !landmarks.within(frame.image.width(), frame.image.height()) {
        log::warn!(
            "landmarks at t={}ms fall outside the frame",
            frame.timestamp_ms
        );
    }
    match warp_gated(
        mask,
        support,
        &frame.image,
        landmarks,
        frame.parsing.as_ref(),
        canon,
        opts,
    ) {
        Ok(warped) => Ok(Applied {
            image: composite_mask(&warped, &frame.image)?,
            warning: None,
        }),
        Err(e @ (Error::InvalidLandmarks(_) | Error::Tps(_))) => {
            let msg = format!("degenerate landmarks, frame passed through: {e}");
            log::warn!("{msg}");
            Ok(Applied {
                image: frame.image.clone(),
                warning: Some(msg),
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug)]
pub struct VideoConfig {
    pub beta: f64,
    /// 0 uses all cores; 1 runs inline on the calling thread.
    pub workers: usize,
    pub apply: ApplyOptions,
}

impl Default for VideoConfig {
    fn default() -> Self {
        VideoConfig {
            beta: 0.0,
            workers: 1,
            apply: ApplyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub fps: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub frames: usize,
    /// Frames passed through because of an error or degenerate landmarks.
    pub passed_through: usize,
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn run_one(
    mask: &RgbaMask,
    support: &AlphaSupport,
    frame: &FrameInput,
    lm: Result<LandmarkSet>,
    canon: &CanonicalLayout,
    opts: &ApplyOptions,
) -> (ImageRgb, bool, f64) {
    let t0 = Instant::now();
    let result = lm.and_then(|lm| apply_with(mask, support, frame, &lm, canon, opts));
    let (img, passed) = match result {
        Ok(a) => {
            let passed = a.warning.is_some();
            (a.image, passed)
        }
        Err(e) => {
            log::warn!("frame at t={}ms passed through: {e}", frame.timestamp_ms);
            (frame.image.clone(), true)
        }
    };
    (img, passed, t0.elapsed().as_secs_f64() * 1e3)
}

/// Smooths landmarks in order, applies the mask to every frame and reports
/// per-frame latency. Output order matches input order.
pub fn run_video(
    mask: &RgbaMask,
    frames: &[FrameInput],
    canon: &CanonicalLayout,
    cfg: &VideoConfig,
) -> Result<(Vec<ImageRgb>, TimingReport)> {
    if frames.is_empty() {
        return Err(Error::InvalidParameter("no frames".into()));
    }
    let mut smoother = SmootherState::new(cfg.beta)?;
    let support = AlphaSupport::from_mask(mask, SUPPORT_BLOCK);
    let start = Instant::now();
    let results: Vec<(ImageRgb, bool, f64)> = if cfg.workers == 1 {
        frames
            .iter()
            .map(|f| {
                let lm = smoother.smooth(&f.landmarks);
                run_one(mask, &support, f, lm, canon, &cfg.apply)
            })
            .collect()
    } else {
        let smoothed: Vec<Result<LandmarkSet>> = frames
            .iter()
            .map(|f| smoother.smooth(&f.landmarks))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| {
            frames
                .par_iter()
                .zip(smoothed)
                .map(|(f, lm)| run_one(mask, &support, f, lm, canon, &cfg.apply))
                .collect()
        })
    };
    let wall = start.elapsed().as_secs_f64();
    let mut lat: Vec<f64> = results.iter().map(|r| r.2).collect();
    lat.sort_by(f64::total_cmp);
    let report = TimingReport {
        fps: frames.len() as f64 / wall.max(1e-9),
        p50_ms: percentile(&lat, 0.5),
        p95_ms: percentile(&lat, 0.95),
        frames: frames.len(),
        passed_through: results.iter().filter(|r| r.1).count(),
    };
    Ok((results.into_iter().map(|r| r.0).collect(), report))
}

/// Frame stems in `dir`: every `*.png` except `*_parsing.png`, sorted by name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let mut stems: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().map(str::to_owned))
        .filter(|n| n.ends_with(".png") && !n.ends_with("_parsing.png"))
        .map(|n| n.trim_end_matches(".png").to_owned())
        .collect();
    stems.sort();
    Ok(stems)
}

/// Reads `<stem>.png`, `<stem>.json` and the optional `<stem>_parsing.png`
/// for every frame in `dir`.
pub fn read_frame_dir(dir: impl AsRef<Path>) -> Result<Vec<FrameInput>> {
    let dir = dir.as_ref();
    let stems = list_frames(dir)?;
    let mut frames = Vec::with_capacity(stems.len());
    for (i, stem) in stems.iter().enumerate() {
        let parsing_path = dir.join(format!("{stem}_parsing.png"));
        frames.push(FrameInput {
            image: read_rgb(dir.join(format!("{stem}.png")))?,
            landmarks: LandmarkSet::load(dir.join(format!("{stem}.json")))?,
            parsing: if parsing_path.exists() {
                Some(read_parsing(&parsing_path)?)
            } else {
                None
            },
            timestamp_ms: i as f64 * DEFAULT_FRAME_INTERVAL_MS,
        });
    }
    Ok(frames)
}

/// Writes frames as `<stem>.png`; returns the written paths.
pub fn write_frame_dir(
    frames: &[ImageRgb],
    stems: &[String],
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if frames.len() != stems.len() {
        return Err(Error::InvalidParameter(format!(
            "{} frames but {} names",
            frames.len(),
            stems.len()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .zip(stems)
        .map(|(f, s)| {
            let p = dir.join(format!("{s}.png"));
            write_rgb(f, &p)?;
            Ok(p)
        })
        .collect()
}
