//! Landmark-bounded region crops with paste-back.

use serde::{Deserialize, Serialize};

use super::affine::{apply_affine, AffineTransform};
use super::landmarks::{FaceRegion, LandmarkSet};
use super::sampling::{bilinear, WarpPixel};
use crate::error::Result;
use crate::image::Image;

pub const DEFAULT_CROP_SIZE: usize = 256;
pub const DEFAULT_CROP_MARGIN: f64 = 1.4;

/// Where a crop came from. The source box corners `(x0, y0)` and `(x1, y1)`
/// map onto the centers of the crop's first and last pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub crop_width: usize,
    pub crop_height: usize,
}

impl Placement {
    /// Source frame -> crop frame.
    pub fn to_crop(&self) -> AffineTransform {
        let sx = (self.crop_width as f64 - 1.0) / (self.x1 - self.x0);
        let sy = (self.crop_height as f64 - 1.0) / (self.y1 - self.y0);
        AffineTransform {
            m: [[sx, 0.0, -self.x0 * sx], [0.0, sy, -self.y0 * sy]],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Crop<P> {
    pub image: Image<P>,
    pub placement: Placement,
    /// Set when the margin-expanded box had to be clamped to the image.
    pub clamped: bool,
}

/// Crops the bounding box of `region`'s landmarks, expanded about its center
/// by `margin` on each axis, and resamples it to `out_width x out_height`.
pub fn crop_region<P: WarpPixel>(
    img: &Image<P>,
    lm: &LandmarkSet,
    region: FaceRegion,
    margin: f64,
    out_width: usize,
    out_height: usize,
) -> Result<Crop<P>> {
    let pts = region.points(lm)?;
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in &pts {
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(p[1]);
        max_y = max_y.max(p[1]);
    }
    let (cx, cy) = ((min_x + max_x) * 0.5, (min_y + max_y) * 0.5);
    let hw = ((max_x - min_x) * 0.5 * margin).max(0.5);
    let hh = ((max_y - min_y) * 0.5 * margin).max(0.5);
    let (mut x0, mut x1, mut y0, mut y1) = (cx - hw, cx + hw, cy - hh, cy + hh);

    let (w_max, h_max) = (img.width() as f64 - 1.0, img.height() as f64 - 1.0);
    let clamped = x0 < 0.0 || y0 < 0.0 || x1 > w_max || y1 > h_max;
    if clamped {
        x0 = x0.clamp(0.0, w_max);
        x1 = x1.clamp(0.0, w_max);
        y0 = y0.clamp(0.0, h_max);
        y1 = y1.clamp(0.0, h_max);
        if x1 - x0 < 1.0 {
            x1 = (x0 + 1.0).min(w_max.max(1.0));
            x0 = x1 - 1.0;
        }
        if y1 - y0 < 1.0 {
            y1 = (y0 + 1.0).min(h_max.max(1.0));
            y0 = y1 - 1.0;
        }
        log::warn!("{} crop box exceeds the image; clamped", region.name());
    }

    let placement = Placement {
        x0,
        y0,
        x1,
        y1,
        crop_width: out_width,
        crop_height: out_height,
    };
    let image = apply_affine(img, &placement.to_crop(), out_width, out_height)?;
    Ok(Crop {
        image,
        placement,
        clamped,
    })
}

/// Writes `crop` back into a copy of `target` over its placement box.
pub fn paste_back<P: WarpPixel>(
    crop: &Image<P>,
    placement: &Placement,
    target: &Image<P>,
) -> Image<P> {
    let t = placement.to_crop();
    let mut out = target.clone();
    let xs = placement.x0.ceil().max(0.0) as usize
        ..=(placement.x1.floor() as usize).min(target.width() - 1);
    let ys = placement.y0.ceil().max(0.0) as usize
        ..=(placement.y1.floor() as usize).min(target.height() - 1);
    for y in ys {
        for x in xs.clone() {
            let [u, v] = t.apply([x as f64, y as f64]);
            out.set(x, y, bilinear(crop, u, v));
        }
    }
    out
}
