//! Landmark layouts, affine canonicalization, thin-plate-spline warping and
//! region cropping.

pub mod affine;
pub mod crop;
pub mod landmarks;
pub mod sampling;
pub mod tps;

pub use affine::{
    apply_affine, apply_affine_labels, fit_canonical_affine, fit_similarity, AffineTransform,
};
pub use crop::{crop_region, paste_back, Crop, Placement, DEFAULT_CROP_MARGIN, DEFAULT_CROP_SIZE};
pub use landmarks::{CanonicalLayout, FaceRegion, LandmarkFile, LandmarkSet, LayoutSchema, Point};
pub use sampling::{bilinear, WarpPixel};
pub use tps::{
    tps_fit, tps_fit_or_similarity, tps_kernel, tps_warp_image, warp_fitted_inverse,
    warp_mask_with_inverse, warp_with_inverse, AlphaSupport, CoordinateMap, FittedWarp, TpsWarp,
    DEFAULT_GRID_STEP,
};
