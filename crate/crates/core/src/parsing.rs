//! Face parsing label maps and the label groups used for gating.

use std::collections::BTreeMap;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// One integer class id per pixel.
pub type ParsingMask = Image<u8>;

const DEFAULT_LABELS_JSON: &str = include_str!("../assets/parsing_labels.json");

/// Label-name mapping plus the named groups the pipeline gates on.
///
/// Loaded from a sidecar JSON; [`ParsingLabels::default`] is the
/// CelebAMask-HQ class order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsingLabels {
    pub labels: BTreeMap<String, u8>,
    /// Eyeballs, removed from the clustering ROI.
    pub eyes: Vec<String>,
    /// Eyebrows, removed from the clustering ROI.
    pub brows: Vec<String>,
    /// Where extracted eye makeup may have non-zero alpha.
    pub eye_region: Vec<String>,
    /// Where applied makeup may land on a target face.
    pub face_region: Vec<String>,
}

impl Default for ParsingLabels {
    fn default() -> Self {
        Self::from_json(DEFAULT_LABELS_JSON).expect("bundled parsing labels are valid")
    }
}

/// Lookup table over all 256 label values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet([bool; 256]);

impl LabelSet {
    pub fn from_ids(ids: impl IntoIterator<Item = u8>) -> Self {
        let mut lut = [false; 256];
        for id in ids {
            lut[id as usize] = true;
        }
        LabelSet(lut)
    }

    #[inline]
    pub fn contains(&self, label: u8) -> bool {
        self.0[label as usize]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }
}

impl ParsingLabels {
    pub fn from_json(text: &str) -> Result<Self> {
        let labels: ParsingLabels =
            serde_json::from_str(text).map_err(|e| Error::json("<parsing labels>", e))?;
        labels.validate()?;
        Ok(labels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let labels: ParsingLabels =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        labels.validate()?;
        Ok(labels)
    }

    fn validate(&self) -> Result<()> {
        for name in self
            .eyes
            .iter()
            .chain(&self.brows)
            .chain(&self.eye_region)
            .chain(&self.face_region)
        {
            if !self.labels.contains_key(name) {
                return Err(Error::InvalidParameter(format!(
                    "parsing group names unknown label `{name}`"
                )));
            }
        }
        if self.eyes.is_empty() || self.eye_region.is_empty() || self.face_region.is_empty() {
            return Err(Error::InvalidParameter(
                "parsing labels need non-empty eyes, eye_region and face_region groups".into(),
            ));
        }
        Ok(())
    }

    pub fn id(&self, name: &str) -> Option<u8> {
        self.labels.get(name).copied()
    }

    fn set(&self, names: &[String]) -> LabelSet {
        LabelSet::from_ids(names.iter().filter_map(|n| self.id(n)))
    }

    pub fn eyes(&self) -> LabelSet {
        self.set(&self.eyes)
    }

    pub fn brows(&self) -> LabelSet {
        self.set(&self.brows)
    }

    pub fn eye_region(&self) -> LabelSet {
        self.set(&self.eye_region)
    }

    pub fn face_region(&self) -> LabelSet {
        self.set(&self.face_region)
    }
}

/// Reads an 8-bit single-channel PNG; pixel values are the label ids.
pub fn read_parsing(path: impl AsRef<Path>) -> Result<ParsingMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_parsing(&bytes).map_err(|e| match e {
        Error::Codec(source) => Error::Decode {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn decode_parsing(bytes: &[u8]) -> Result<ParsingMask> {
    let img = image::load_from_memory(bytes)?;
    if img.color().has_color() {
        return Err(Error::InvalidImage(
            "parsing mask must be single-channel".into(),
        ));
    }
    let g = img.to_luma8();
    let (w, h) = g.dimensions();
    Image::new(w as usize, h as usize, g.into_raw())
}

pub fn encode_parsing(mask: &ParsingMask) -> Result<Vec<u8>> {
    let buf = GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([*mask.get(x as usize, y as usize)])
    });
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn write_parsing(mask: &ParsingMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_parsing(mask)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_groups() {
        let l = ParsingLabels::default();
        assert_eq!(l.id("skin"), Some(1));
        assert!(l.eyes().contains(4) && l.eyes().contains(5));
        assert!(!l.eye_region().contains(4));
        let face = l.face_region();
        for name in ["skin", "nose", "u_lip", "l_lip", "l_brow", "r_brow"] {
            assert!(face.contains(l.id(name).unwrap()), "{name}");
        }
        assert!(!face.contains(0) && !face.contains(l.id("hair").unwrap()));
    }

    #[test]
    fn unknown_group_member_is_rejected() {
        let mut l = ParsingLabels::default();
        l.eyes.push("third_eye".into());
        let text = serde_json::to_string(&l).unwrap();
        assert!(ParsingLabels::from_json(&text).is_err());
    }

    #[test]
    fn png_round_trip_keeps_ids() {
        let m = Image::from_fn(7, 5, |x, y| (x * 3 + y) as u8);
        assert_eq!(decode_parsing(&encode_parsing(&m).unwrap()).unwrap(), m);
    }
}
