//! Rendering a sampled style into a canonical RGBA mask.

use super::library::StyleLibrary;
use super::style::MakeupStyle;
use super::{splitmix64, unit_from_hash, Finish};
use crate::color::{lab_to_rgb, over_rgba, rgb_to_lab, Lab};
use crate::error::{Error, Result};
use crate::geometry::{CanonicalLayout, Point};
use crate::image::{Image, RgbaMask};
use crate::raster::polyline_distance;

fn coverage_centroid(cov: &Image<f64>) -> Option<Point> {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in 0..cov.height() {
        for x in 0..cov.width() {
            let v = *cov.get(x, y);
            sx += v * x as f64;
            sy += v * y as f64;
            sw += v;
        }
    }
    (sw > 0.0).then(|| [sx / sw, sy / sw])
}

/// Renders `style` into `canon`'s frame, layering regions back to front.
///
/// Each layer is the template coverage times the region opacity, colored with
/// the region color; gloss brightens along the template highlight and shimmer
/// scatters seeded sparkles.
pub fn render_style_mask(
    style: &MakeupStyle,
    lib: &StyleLibrary,
    canon: &CanonicalLayout,
) -> Result<RgbaMask> {
    style.validate()?;
    let (w, h) = canon.dims();
    let to_frame = lib.frame_scale(w, h);
    let scale = (to_frame.m[0][0] * to_frame.m[1][1]).abs().sqrt();
    let fp = &lib.finish_params;

    let mut regions: Vec<_> = style.regions.iter().collect();
    regions.sort_by_key(|r| r.region);
    let mut out = RgbaMask::transparent(w, h);
    for r in regions {
        let t = lib.template(&r.template)?;
        if t.region != r.region {
            return Err(Error::InvalidParameter(format!(
                "template `{}` is a {} template, not {}",
                t.id,
                t.region.name(),
                r.region.name()
            )));
        }
        let cov = lib.coverage_in(t, w, h)?;
        let base = rgb_to_lab(r.color);
        let sigma = fp.gloss_width * scale;
        let ridge: Vec<Point> = t.highlight.iter().map(|&p| to_frame.apply(p)).collect();
        let centroid_y = if ridge.is_empty() {
            coverage_centroid(&cov).map(|c| c[1])
        } else {
            None
        };
        let region_hash = splitmix64(style.seed ^ splitmix64(r.region as u64 + 1));

        for y in 0..h {
            for x in 0..w {
                let c = *cov.get(x, y);
                if c <= 0.0 {
                    continue;
                }
                let a = (c * r.opacity).clamp(0.0, 1.0);
                let rgb = match r.finish {
                    Finish::Matte => r.color,
                    Finish::Gloss => {
                        let d = if !ridge.is_empty() {
                            polyline_distance([x as f64, y as f64], &ridge, false)
                        } else {
                            centroid_y.map_or(f64::INFINITY, |cy| (y as f64 - cy).abs())
                        };
                        let boost =
                            100.0 * fp.gloss_lightness * (-d * d / (2.0 * sigma * sigma)).exp();
                        lab_to_rgb(Lab::new((base.l + boost).min(100.0), base.a, base.b))
                    }
                    Finish::Shimmer => {
                        let hsh = splitmix64(region_hash ^ ((y as u64) << 32 | x as u64));
                        if unit_from_hash(hsh) < fp.shimmer_density {
                            let s = fp.shimmer_strength;
                            [0, 1, 2].map(|i| r.color[i] + s * (1.0 - r.color[i]))
                        } else {
                            r.color
                        }
                    }
                };
                let px = [
                    rgb[0].clamp(0.0, 1.0),
                    rgb[1].clamp(0.0, 1.0),
                    rgb[2].clamp(0.0, 1.0),
                    a,
                ];
                let cur = *out.get(x, y);
                out.set(x, y, over_rgba(px, cur));
            }
        }
    }
    Ok(out)
}
