use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Finish, MakeupRegion};
use crate::error::{Error, Result};
use crate::geometry::{apply_affine, AffineTransform, CanonicalLayout, Point};
use crate::image::{encode_gray, from_u8, gray_from_dynamic, to_u8, AlphaMap, Rgb};

/// A region's shape: per-pixel native opacity in the library's canonical frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeTemplate {
    pub id: String,
    pub region: MakeupRegion,
    pub coverage: AlphaMap,
    /// Ridge the gloss highlight follows. Empty: a horizontal line through
    /// the coverage centroid is used.
    pub highlight: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinishParams {
    /// Lightness added on the gloss ridge, as a fraction of the L range.
    pub gloss_lightness: f64,
    /// Gaussian width of the gloss ridge, in library-frame pixels.
    pub gloss_width: f64,
    /// Fraction of covered pixels that sparkle.
    pub shimmer_density: f64,
    /// How far a sparkle moves the color toward white.
    pub shimmer_strength: f64,
}

impl Default for FinishParams {
    fn default() -> Self {
        FinishParams {
            gloss_lightness: 0.25,
            gloss_width: 6.0,
            shimmer_density: 0.02,
            shimmer_strength: 0.6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StyleLibrary {
    /// Canonical frame the templates are drawn in.
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub templates: Vec<ShapeTemplate>,
    /// Colors per region name.
    pub palettes: BTreeMap<String, Vec<Rgb>>,
    pub finishes: Vec<Finish>,
    pub opacity_range: (f64, f64),
    pub finish_params: FinishParams,
}

/// Template listing without pixel data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateInfo {
    pub id: String,
    pub region: MakeupRegion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub highlight: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    version: u32,
    width: usize,
    height: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_opacity")]
    opacity_range: (f64, f64),
    #[serde(default = "default_finishes")]
    finishes: Vec<Finish>,
    #[serde(default)]
    finish_params: FinishParams,
    palettes: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    templates: Vec<TemplateInfo>,
}

fn default_opacity() -> (f64, f64) {
    (0.2, 0.95)
}

fn default_finishes() -> Vec<Finish> {
    Finish::ALL.to_vec()
}

pub(crate) fn parse_hex(s: &str) -> Option<Rgb> {
    let h = s.strip_prefix('#').unwrap_or(s);
    if h.len() != 6 || !h.is_ascii() {
        return None;
    }
    let byte = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).ok().map(from_u8);
    Some([byte(0)?, byte(2)?, byte(4)?])
}

pub(crate) fn to_hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", to_u8(c[0]), to_u8(c[1]), to_u8(c[2]))
}

fn default_palettes() -> BTreeMap<String, Vec<Rgb>> {
    let table: [(MakeupRegion, &[&str]); 4] = [
        (
            MakeupRegion::Blush,
            &["#e8838f", "#d9776a", "#c96f7a", "#f19a8a", "#b8615f"],
        ),
        (
            MakeupRegion::Eyeshadow,
            &[
                "#7b4f9d", "#4a6fa5", "#b5651d", "#3f7f5f", "#c98e7a", "#6b4f3f", "#d4a373",
                "#8c3b5e",
            ],
        ),
        (
            MakeupRegion::Eyeliner,
            &["#1a1a1a", "#2b1d14", "#1f2f4f", "#2e3b2a"],
        ),
        (
            MakeupRegion::Lipstick,
            &[
                "#b3122e", "#c2185b", "#8e2a3a", "#d9534f", "#a0522d", "#e0707f", "#6d1a36",
            ],
        ),
    ];
    table
        .into_iter()
        .map(|(r, cs)| {
            (
                r.name().to_string(),
                cs.iter()
                    .map(|c| parse_hex(c).expect("palette literal"))
                    .collect(),
            )
        })
        .collect()
}

impl StyleLibrary {
    /// The shipped procedural library (four templates per region) drawn in
    /// `canon`'s frame.
    pub fn builtin(canon: &CanonicalLayout) -> Self {
        StyleLibrary {
            width: canon.width,
            height: canon.height,
            seed: 0,
            templates: super::templates::builtin_templates(canon),
            palettes: default_palettes(),
            finishes: Finish::ALL.to_vec(),
            opacity_range: default_opacity(),
            finish_params: FinishParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for region in MakeupRegion::ALL {
            if !self.templates.iter().any(|t| t.region == region) {
                return Err(Error::EmptyLibrary(format!(
                    "no {} template",
                    region.name()
                )));
            }
            if self.palette(region).is_empty() {
                return Err(Error::EmptyLibrary(format!("no {} colors", region.name())));
            }
        }
        if self.finishes.is_empty() {
            return Err(Error::EmptyLibrary("no finishes".into()));
        }
        let (lo, hi) = self.opacity_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "opacity range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
            )));
        }
        let mut ids: Vec<&str> = self.templates.iter().map(|t| t.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "duplicate template id `{}`",
                w[0]
            )));
        }
        for t in &self.templates {
            if t.coverage.dims() != (self.width, self.height) {
                return Err(Error::dims(t.coverage.dims(), (self.width, self.height)));
            }
            if t.coverage.pixels().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter(format!(
                    "template `{}` coverage outside [0,1]",
                    t.id
                )));
            }
        }
        Ok(())
    }

    pub fn palette(&self, region: MakeupRegion) -> &[Rgb] {
        self.palettes
            .get(region.name())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Templates of `region`, in library order.
    pub fn templates_for(&self, region: MakeupRegion) -> Vec<&ShapeTemplate> {
        self.templates
            .iter()
            .filter(|t| t.region == region)
            .collect()
    }

    pub fn template(&self, id: &str) -> Result<&ShapeTemplate> {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
    }

    pub fn infos(&self) -> Vec<TemplateInfo> {
        self.templates
            .iter()
            .map(|t| TemplateInfo {
                id: t.id.clone(),
                region: t.region,
                file: Some(format!("{}.png", t.id)),
                highlight: t.highlight.clone(),
            })
            .collect()
    }

    /// Template coverage resampled into a `width x height` canonical frame.
    pub(crate) fn coverage_in(
        &self,
        t: &ShapeTemplate,
        width: usize,
        height: usize,
    ) -> Result<AlphaMap> {
        if (width, height) == (self.width, self.height) {
            return Ok(t.coverage.clone());
        }
        apply_affine(&t.coverage, &self.frame_scale(width, height), width, height)
    }

    pub(crate) fn frame_scale(&self, width: usize, height: usize) -> AffineTransform {
        AffineTransform::scale(
            (width as f64 - 1.0) / (self.width as f64 - 1.0),
            (height as f64 - 1.0) / (self.height as f64 - 1.0),
        )
    }

    /// Loads `dir/library.json` and its template PNGs.
    ///
    /// PNGs in `dir` that are not listed but are named `<region>_*.png` are
    /// added as extra templates of that region.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("library.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: LibraryFile = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;

        let mut palettes = BTreeMap::new();
        for (name, colors) in file.palettes {
            let parsed = colors
                .iter()
                .map(|c| {
                    parse_hex(c).ok_or_else(|| {
                        Error::InvalidParameter(format!("bad color `{c}` in {name}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            palettes.insert(name, parsed);
        }

        let mut infos = file.templates;
        let mut listed: Vec<String> = infos
            .iter()
            .map(|i| i.file.clone().unwrap_or_else(|| format!("{}.png", i.id)))
            .collect();
        let mut extra = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix(".png") else {
                continue;
            };
            if listed.contains(&name) {
                continue;
            }
            let region = MakeupRegion::ALL
                .into_iter()
                .find(|r| stem.starts_with(&format!("{}_", r.name())));
            if let Some(region) = region {
                extra.push(TemplateInfo {
                    id: stem.to_string(),
                    region,
                    file: Some(name.clone()),
                    highlight: Vec::new(),
                });
            }
        }
        extra.sort_by(|a, b| a.id.cmp(&b.id));
        listed.extend(extra.iter().filter_map(|i| i.file.clone()));
        infos.extend(extra);

        let mut templates = Vec::with_capacity(infos.len());
        for info in infos {
            let file = info
                .file
                .clone()
                .unwrap_or_else(|| format!("{}.png", info.id));
            let png = dir.join(&file);
            let bytes = std::fs::read(&png).map_err(|e| Error::io(&png, e))?;
            let img = image::load_from_memory(&bytes).map_err(|source| Error::Decode {
                path: png.clone(),
                source,
            })?;
            templates.push(ShapeTemplate {
                id: info.id,
                region: info.region,
                coverage: gray_from_dynamic(&img),
                highlight: info.highlight,
            });
        }

        let lib = StyleLibrary {
            width: file.width,
            height: file.height,
            seed: file.seed,
            templates,
            palettes,
            finishes: file.finishes,
            opacity_range: file.opacity_range,
            finish_params: file.finish_params,
        };
        lib.validate()?;
        Ok(lib)
    }

    /// Writes `library.json` plus one 8-bit PNG per template into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let file = LibraryFile {
            version: 1,
            width: self.width,
            height: self.height,
            seed: self.seed,
            opacity_range: self.opacity_range,
            finishes: self.finishes.clone(),
            finish_params: self.finish_params.clone(),
            palettes: self
                .palettes
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|&c| to_hex(c)).collect()))
                .collect(),
            templates: self.infos(),
        };
        let path = dir.join("library.json");
        let text = serde_json::to_string_pretty(&file).expect("library serialize");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        for t in &self.templates {
            let png = dir.join(format!("{}.png", t.id));
            std::fs::write(&png, encode_gray(&t.coverage)?).map_err(|e| Error::io(&png, e))?;
        }
        Ok(())
    }
}
