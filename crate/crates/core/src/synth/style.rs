//! Random style sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::library::StyleLibrary;
use super::{splitmix64, Finish, MakeupRegion};
use crate::error::{Error, Result};
use crate::image::Rgb;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionStyle {
    pub region: MakeupRegion,
    pub template: String,
    pub color: Rgb,
    pub opacity: f64,
    pub finish: Finish,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MakeupStyle {
    pub seed: u64,
    pub regions: Vec<RegionStyle>,
}

impl MakeupStyle {
    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::InvalidParameter("style has no regions".into()));
        }
        for r in &self.regions {
            if !(r.opacity > 0.0 && r.opacity <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{} opacity {} outside (0,1]",
                    r.region.name(),
                    r.opacity
                )));
            }
            if r.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidParameter(format!(
                    "{} color outside [0,1]",
                    r.region.name()
                )));
            }
        }
        let mut seen: Vec<MakeupRegion> = self.regions.iter().map(|r| r.region).collect();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "region listed twice in style".into(),
            ));
        }
        Ok(())
    }
}

/// A style with every region of the library.
pub fn sample_style(lib: &StyleLibrary, seed: u64) -> Result<MakeupStyle> {
    sample_style_for(lib, seed, &MakeupRegion::ALL)
}

/// Draws template, color, opacity and finish independently and uniformly for
/// each requested region.
pub fn sample_style_for(
    lib: &StyleLibrary,
    seed: u64,
    regions: &[MakeupRegion],
) -> Result<MakeupStyle> {
    let mut regions = regions.to_vec();
    regions.sort();
    regions.dedup();
    if regions.is_empty() {
        return Err(Error::InvalidParameter("no regions requested".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(lib.seed) ^ seed);
    let (lo, hi) = lib.opacity_range;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "opacity range ({lo}, {hi})"
        )));
    }
    let mut out = Vec::with_capacity(regions.len());
    for region in regions {
        let templates = lib.templates_for(region);
        let palette = lib.palette(region);
        if templates.is_empty() || palette.is_empty() || lib.finishes.is_empty() {
            return Err(Error::EmptyLibrary(format!(
                "nothing to sample for {}",
                region.name()
            )));
        }
        let template = templates[rng.random_range(0..templates.len())].id.clone();
        let color = palette[rng.random_range(0..palette.len())];
        let opacity = if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        };
        let finish = lib.finishes[rng.random_range(0..lib.finishes.len())];
        out.push(RegionStyle {
            region,
            template,
            color,
            opacity,
            finish,
        });
    }
    Ok(MakeupStyle { seed, regions: out })
}
