//! Warping canonical style masks onto faces.

use crate::color::composite_mask;
use crate::error::{Error, Result};
use crate::geometry::{
    tps_fit, warp_mask_with_inverse, AlphaSupport, CanonicalLayout, LandmarkSet, DEFAULT_GRID_STEP,
};
use crate::image::{AlphaMap, ImageRgb, RgbaMask};

#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub after: ImageRgb,
    /// The style mask in the face's pixel frame.
    pub mask: RgbaMask,
}

/// Warps `style_mask` from the canonical frame onto `face` and blends it.
///
/// `canon` is rescaled to the mask size when the two differ.
pub fn generate_pair(
    face: &ImageRgb,
    face_lm: &LandmarkSet,
    style_mask: &RgbaMask,
    canon: &CanonicalLayout,
) -> Result<Pair> {
    face_lm.validate()?;
    let (mw, mh) = style_mask.dims();
    let canon = canon.resized(mw, mh);
    if face_lm.layout_id != canon.reference.layout_id {
        return Err(Error::InvalidLandmarks(format!(
            "face uses layout `{}`, canonical layout is `{}`",
            face_lm.layout_id, canon.reference.layout_id
        )));
    }
    // Pull-back spline: face pixel -> canonical position.
    let pull = tps_fit(&face_lm.points, &canon.reference.points, 0.0)?;
    let support = AlphaSupport::from_mask(style_mask, 16);
    let mask = warp_mask_with_inverse(
        style_mask,
        &pull,
        face.width(),
        face.height(),
        DEFAULT_GRID_STEP,
        &support,
    );
    let after = composite_mask(&mask, face)?;
    Ok(Pair { after, mask })
}

/// Per-pixel mean of the masks' alpha channels.
pub fn build_average_alpha(masks: &[RgbaMask]) -> Result<AlphaMap> {
    let first = masks
        .first()
        .ok_or_else(|| Error::InvalidParameter("no masks to average".into()))?;
    let mut mean = first.alpha();
    for (i, m) in masks.iter().enumerate().skip(1) {
        first.check_same_dims(m)?;
        let n = (i + 1) as f64;
        for (acc, p) in mean.pixels_mut().iter_mut().zip(m.pixels()) {
            *acc += (p[3] - *acc) / n;
        }
    }
    Ok(mean)
}
