//! Procedural makeup masks and paired training data.
//!
//! Styles are sampled from a library of shape templates, rendered into the
//! canonical frame as identity-free RGBA masks, then warped onto real faces
//! with a thin-plate spline and alpha-blended to produce (after, mask) pairs.

mod dataset;
mod library;
mod pair;
mod render;
mod style;
mod templates;

use serde::{Deserialize, Serialize};

pub use dataset::{
    derive_seed, generate_dataset, read_face_manifest, DatasetOptions, DatasetSummary, PairRecord,
};
pub use library::{FinishParams, ShapeTemplate, StyleLibrary, TemplateInfo};
pub use pair::{build_average_alpha, generate_pair, Pair};
pub use render::render_style_mask;
pub use style::{sample_style, sample_style_for, MakeupStyle, RegionStyle};

/// Makeup regions, in back-to-front compositing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MakeupRegion {
    Blush,
    Eyeshadow,
    Eyeliner,
    Lipstick,
}

impl MakeupRegion {
    pub const ALL: [MakeupRegion; 4] = [
        MakeupRegion::Blush,
        MakeupRegion::Eyeshadow,
        MakeupRegion::Eyeliner,
        MakeupRegion::Lipstick,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MakeupRegion::Blush => "blush",
            MakeupRegion::Eyeshadow => "eyeshadow",
            MakeupRegion::Eyeliner => "eyeliner",
            MakeupRegion::Lipstick => "lipstick",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finish {
    Matte,
    Gloss,
    Shimmer,
}

impl Finish {
    pub const ALL: [Finish; 3] = [Finish::Matte, Finish::Gloss, Finish::Shimmer];
}

/// SplitMix64 finalizer; used to derive independent seeds and hashes.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` from a hash.
#[inline]
pub(crate) fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}
