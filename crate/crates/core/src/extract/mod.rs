//! Unsupervised eye-makeup mask extraction.
//!
//! The photo is aligned to the canonical frame, the periocular skin is
//! clustered in LAB, the dominant clusters give a skin tone, and each pixel's
//! opacity is its cosine dissimilarity to that tone.

mod kmeans;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans_lab, kmeans_points, ClusterModel, ClusterParams};

use crate::color::{lab_similarity, rgb_to_lab, Lab, SimilarityChannels};
use crate::error::{Error, Result};
use crate::geometry::{
    apply_affine, apply_affine_labels, fit_canonical_affine, AffineTransform, CanonicalLayout,
    LandmarkSet,
};
use crate::image::{AlphaMap, BoolMask, Image, ImageLab, ImageRgb, RgbaMask};
use crate::parsing::{LabelSet, ParsingLabels, ParsingMask};

/// Default periocular ROI size relative to the eye landmark bounding box.
pub const DEFAULT_ROI_MARGIN: f64 = 2.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkinTone {
    pub lab: Lab,
}

/// Count-weighted mean of the `s` most populated centroids.
///
/// Equal counts are ordered darker (lower L) first.
pub fn estimate_skin_tone(model: &ClusterModel, s: usize) -> Result<SkinTone> {
    let k = model.centroids.len();
    if s == 0 || s > k {
        return Err(Error::InvalidParameter(format!(
            "s must lie in 1..={k}, got {s}"
        )));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        model.counts[j]
            .cmp(&model.counts[i])
            .then(model.centroids[i].l.total_cmp(&model.centroids[j].l))
    });
    let top = &order[..s];
    if s == 1 {
        return Ok(SkinTone {
            lab: model.centroids[top[0]],
        });
    }
    let total: usize = top.iter().map(|&i| model.counts[i]).sum();
    let lab = if total == 0 {
        let n = s as f64;
        top.iter().fold(Lab::default(), |acc, &i| {
            let c = model.centroids[i];
            Lab::new(acc.l + c.l / n, acc.a + c.a / n, acc.b + c.b / n)
        })
    } else {
        let mut sum = [0.0; 3];
        for &i in top {
            let w = model.counts[i] as f64;
            let c = model.centroids[i];
            sum[0] += w * c.l;
            sum[1] += w * c.a;
            sum[2] += w * c.b;
        }
        let t = total as f64;
        Lab::new(sum[0] / t, sum[1] / t, sum[2] / t)
    };
    Ok(SkinTone { lab })
}

/// `clamp(1 - cos(pixel, tone), 0, 1)` for a single LAB value.
#[inline]
pub fn alpha_from_similarity(pixel: Lab, tone: Lab, channels: SimilarityChannels) -> f64 {
    (1.0 - lab_similarity(pixel, tone, channels)).clamp(0.0, 1.0)
}

pub fn compute_alpha_map(
    img: &ImageLab,
    tone: &SkinTone,
    channels: SimilarityChannels,
) -> AlphaMap {
    img.map(|&p| alpha_from_similarity(p, tone.lab, channels))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub params: ClusterParams,
    /// Periocular rectangle size relative to the eye landmark box.
    pub roi_margin: f64,
    pub channels: SimilarityChannels,
    /// Cluster both eyes' ROIs together instead of each eye on its own.
    pub shared_clustering: bool,
    /// Extra source pixels around each bilinear footprint that must carry
    /// gate labels.
    pub boundary_guard: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            params: ClusterParams::default(),
            roi_margin: DEFAULT_ROI_MARGIN,
            channels: SimilarityChannels::Full,
            shared_clustering: false,
            boundary_guard: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EyeStats {
    pub skin_tone_lab: [f64; 3],
    pub cluster_counts: Vec<usize>,
    pub roi_pixels: usize,
    pub gate_pixels: usize,
}

#[derive(Clone, Debug)]
pub struct EyeExtraction {
    /// Canonical-frame RGBA mask.
    pub mask: RgbaMask,
    /// `[image-left eye, image-right eye]`.
    pub eyes: [EyeStats; 2],
}

/// Axis-aligned pixel rectangle, inclusive bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn around(
        lm: &LandmarkSet,
        range: Range<usize>,
        margin: f64,
        width: usize,
        height: usize,
    ) -> Rect {
        let pts = &lm.points[range];
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in pts {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let (cx, cy) = ((x0 + x1) * 0.5, (y0 + y1) * 0.5);
        let (hw, hh) = ((x1 - x0) * 0.5 * margin, (y1 - y0) * 0.5 * margin);
        let clampi = |v: f64, hi: usize| v.clamp(0.0, hi as f64 - 1.0);
        Rect {
            x0: clampi((cx - hw).ceil(), width) as usize,
            y0: clampi((cy - hh).ceil(), height) as usize,
            x1: clampi((cx + hw).floor(), width) as usize,
            y1: clampi((cy + hh).floor(), height) as usize,
        }
    }

    fn pixels(self) -> impl Iterator<Item = (usize, usize)> {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| (x, y)))
    }
}

/// Extracts an eye-makeup mask in the canonical frame.
///
/// The mask's RGB is the aligned photo itself; its alpha is the per-pixel
/// dissimilarity to the estimated skin tone, kept only on eye-region labels
/// inside each periocular rectangle.
pub fn extract_eye_mask(
    photo: &ImageRgb,
    lm: &LandmarkSet,
    parsing: &ParsingMask,
    labels: &ParsingLabels,
    canon: &CanonicalLayout,
    opts: &ExtractOptions,
) -> Result<EyeExtraction> {
    opts.params.validate()?;
    if !(opts.roi_margin > 0.0) {
        return Err(Error::InvalidParameter("roi_margin must be > 0".into()));
    }
    if !(opts.boundary_guard >= 0.0 && opts.boundary_guard.is_finite()) {
        return Err(Error::InvalidParameter(
            "boundary_guard must be finite and >= 0".into(),
        ));
    }
    photo.check_same_dims(parsing)?;
    if !lm.within(photo.width(), photo.height()) {
        return Err(Error::InvalidLandmarks(
            "landmarks fall outside the photo".into(),
        ));
    }
    let (w, h) = canon.dims();
    let t = fit_canonical_affine(lm, canon)?;
    let warped = apply_affine(photo, &t, w, h)?;
    let warped_labels =
        apply_affine_labels(parsing, &t, w, h, labels.id("background").unwrap_or(0))?;
    let schema = canon.schema();
    let aligned = lm.map(|p| t.apply(p));

    let (eyes_set, brows_set) = (labels.eyes(), labels.brows());
    let gate = footprint_gate(parsing, &t, w, h, &labels.eye_region(), opts.boundary_guard)?;
    let rects = [schema.eye_left.clone(), schema.eye_right.clone()]
        .map(|r| Rect::around(&aligned, r, opts.roi_margin, w, h));
    for rect in rects {
        if !rect
            .pixels()
            .any(|(x, y)| eyes_set.contains(*warped_labels.get(x, y)))
        {
            return Err(Error::MissingEyeRegion);
        }
    }

    let lab_at = |x: usize, y: usize| rgb_to_lab(*warped.get(x, y));
    let roi_points = |rect: Rect| -> Vec<Lab> {
        rect.pixels()
            .filter(|&(x, y)| {
                let l = *warped_labels.get(x, y);
                !eyes_set.contains(l) && !brows_set.contains(l)
            })
            .map(|(x, y)| lab_at(x, y))
            .collect()
    };

    let models: [(ClusterModel, usize); 2] = if opts.shared_clustering {
        let mut pts = roi_points(rects[0]);
        pts.extend(roi_points(rects[1]));
        let n = pts.len();
        let m = kmeans_points(&pts, &opts.params)?;
        [(m.clone(), n), (m, n)]
    } else {
        let fit = |rect| -> Result<(ClusterModel, usize)> {
            let pts = roi_points(rect);
            Ok((kmeans_points(&pts, &opts.params)?, pts.len()))
        };
        [fit(rects[0])?, fit(rects[1])?]
    };

    let mut alpha = Image::filled(w, h, 0.0f64);
    let mut stats = Vec::with_capacity(2);
    for (rect, (model, roi_pixels)) in rects.into_iter().zip(models) {
        let tone = estimate_skin_tone(&model, opts.params.s)?;
        let mut gate_pixels = 0;
        for (x, y) in rect.pixels() {
            if !*gate.get(x, y) {
                continue;
            }
            gate_pixels += 1;
            let a = alpha_from_similarity(lab_at(x, y), tone.lab, opts.channels);
            let idx = alpha.index_of(x, y);
            let cur = &mut alpha.pixels_mut()[idx];
            *cur = cur.max(a);
        }
        stats.push(EyeStats {
            skin_tone_lab: tone.lab.to_array(),
            cluster_counts: model.counts,
            roi_pixels,
            gate_pixels,
        });
    }

    let data = warped
        .pixels()
        .iter()
        .zip(alpha.pixels())
        .map(|(c, &a)| [c[0], c[1], c[2], a])
        .collect();
    let mask = RgbaMask::new(w, h, data)?;
    let [left, right]: [EyeStats; 2] = stats.try_into().expect("two eyes");
    Ok(EyeExtraction {
        mask,
        eyes: [left, right],
    })
}

/// Canonical pixels whose bilinear source footprint, grown by `guard`
/// pixels, lies entirely on `gate` labels.
fn footprint_gate(
    parsing: &ParsingMask,
    t: &AffineTransform,
    w: usize,
    h: usize,
    gate: &LabelSet,
    guard: f64,
) -> Result<BoolMask> {
    let inv = t.inverse()?;
    let (pw, ph) = (parsing.width() as f64, parsing.height() as f64);
    Ok(Image::from_fn(w, h, |x, y| {
        let [sx, sy] = inv.apply([x as f64, y as f64]);
        let (x0, x1) = ((sx - guard).floor(), (sx + guard).ceil());
        let (y0, y1) = ((sy - guard).floor(), (sy + guard).ceil());
        if x0 < 0.0 || y0 < 0.0 || x1 >= pw || y1 >= ph {
            return false;
        }
        (y0 as usize..=y1 as usize)
            .all(|yy| (x0 as usize..=x1 as usize).all(|xx| gate.contains(*parsing.get(xx, yy))))
    }))
}

/// Canonical pixels [`extract_eye_mask`] can give non-zero alpha.
pub fn eye_region_support(
    lm: &LandmarkSet,
    parsing: &ParsingMask,
    labels: &ParsingLabels,
    canon: &CanonicalLayout,
    opts: &ExtractOptions,
) -> Result<BoolMask> {
    let (w, h) = canon.dims();
    let t = fit_canonical_affine(lm, canon)?;
    let gate = footprint_gate(parsing, &t, w, h, &labels.eye_region(), opts.boundary_guard)?;
    let aligned = lm.map(|p| t.apply(p));
    let schema = canon.schema();
    let mut out = Image::filled(w, h, false);
    for r in [schema.eye_left.clone(), schema.eye_right.clone()] {
        for (x, y) in Rect::around(&aligned, r, opts.roi_margin, w, h).pixels() {
            if *gate.get(x, y) {
                out.set(x, y, true);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::srgb_to_lab;
    use proptest::prelude::*;

    fn model(centroids: &[[f64; 3]], counts: &[usize]) -> ClusterModel {
        ClusterModel {
            centroids: centroids.iter().map(|&c| Lab::from_array(c)).collect(),
            counts: counts.to_vec(),
            iterations: 1,
            sse: 0.0,
        }
    }

    #[test]
    fn skin_tone_top_one_is_verbatim() {
        let m = model(&[[40.0, 10.0, 10.0], [70.0, 12.0, 15.0]], &[3, 9]);
        assert_eq!(
            estimate_skin_tone(&m, 1).unwrap().lab,
            Lab::new(70.0, 12.0, 15.0)
        );
    }

    #[test]
    fn skin_tone_weighted_by_counts() {
        let (a, b, c) = ([60.0, 15.0, 20.0], [50.0, 25.0, 10.0], [20.0, 5.0, 0.0]);
        let m = model(&[c, a, b], &[10, 70, 20]);
        let tone = estimate_skin_tone(&m, 2).unwrap().lab.to_array();
        for i in 0..3 {
            let want = (70.0 * a[i] + 20.0 * b[i]) / 90.0;
            assert!((tone[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn skin_tone_equal_counts_plain_mean_and_dark_ties() {
        let cs = [[30.0, 1.0, 2.0], [60.0, 3.0, 4.0], [90.0, 5.0, 9.0]];
        let m = model(&cs, &[5, 5, 5]);
        let tone = estimate_skin_tone(&m, 3).unwrap().lab;
        assert!(
            (tone.l - 60.0).abs() < 1e-12
                && (tone.a - 3.0).abs() < 1e-12
                && (tone.b - 5.0).abs() < 1e-12
        );
        // Tie on count: the darker centroid wins the single slot.
        assert_eq!(estimate_skin_tone(&m, 1).unwrap().lab.l, 30.0);
    }

    #[test]
    fn alpha_examples() {
        let tone = SkinTone {
            lab: Lab::new(60.0, 10.0, 15.0),
        };
        assert_eq!(
            alpha_from_similarity(tone.lab, tone.lab, SimilarityChannels::Full),
            0.0
        );
        let orth = Lab::new(0.0, 15.0, -10.0);
        assert!(
            (alpha_from_similarity(orth, Lab::new(0.0, 10.0, 15.0), SimilarityChannels::Full)
                - 1.0)
                .abs()
                < 1e-12
        );
        let a = alpha_from_similarity(
            Lab::new(50.0, 30.0, 0.0),
            tone.lab,
            SimilarityChannels::Full,
        );
        let want = 1.0 - 3300.0 / (3400f64.sqrt() * 3925f64.sqrt());
        assert!((a - want).abs() < 1e-12 && (a - 0.0967).abs() < 1e-4);
        // Opposed vectors would give 2; opacity is clamped.
        let opposed = Lab::new(-60.0, -10.0, -15.0);
        assert_eq!(
            alpha_from_similarity(opposed, tone.lab, SimilarityChannels::Full),
            1.0
        );
    }

    #[test]
    fn alpha_map_matches_per_pixel_rule() {
        let img = ImageRgb::from_fn(6, 4, |x, y| [x as f64 / 6.0, y as f64 / 4.0, 0.3]);
        let lab = srgb_to_lab(&img);
        let tone = SkinTone {
            lab: Lab::new(65.0, 12.0, 18.0),
        };
        let map = compute_alpha_map(&lab, &tone, SimilarityChannels::Full);
        for (a, p) in map.pixels().iter().zip(lab.pixels()) {
            assert_eq!(
                *a,
                alpha_from_similarity(*p, tone.lab, SimilarityChannels::Full)
            );
            assert!((0.0..=1.0).contains(a));
        }
    }

    proptest! {
        #[test]
        fn alpha_is_monotone_along_a_ray(
            tl in 20.0f64..90.0, ta in -20.0f64..30.0, tb in -10.0f64..40.0,
            dl in -1.0f64..1.0, da in -1.0f64..1.0, db in -1.0f64..1.0,
        ) {
            let tone = Lab::new(tl, ta, tb);
            let d = Lab::new(dl, da, db);
            let cross = [ta * db - tb * da, tb * dl - tl * db, tl * da - ta * dl];
            prop_assume!(d.norm() > 1e-3 && cross.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3 * tone.norm() * d.norm());
            let mut prev = 0.0;
            for i in 0..200 {
                let t = i as f64 * 0.5;
                let p = Lab::new(tl + t * dl, ta + t * da, tb + t * db);
                let a = alpha_from_similarity(p, tone, SimilarityChannels::Full);
                prop_assert!(a >= prev - 1e-12, "t={t}: {a} < {prev}");
                prev = a;
            }
        }

        #[test]
        fn alpha_invariant_to_tone_scale(l in 0.0f64..100.0, a in -80.0f64..80.0, b in -80.0f64..80.0, s in 0.01f64..50.0) {
            let tone = Lab::new(55.0, 14.0, 17.0);
            let p = Lab::new(l, a, b);
            let x = alpha_from_similarity(p, tone, SimilarityChannels::Full);
            let y = alpha_from_similarity(p, tone.scaled(s), SimilarityChannels::Full);
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
