//! Batch generation of (after, mask) pairs from a face manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::library::StyleLibrary;
use super::pair::generate_pair;
use super::render::render_style_mask;
use super::style::{sample_style_for, MakeupStyle};
use super::{splitmix64, MakeupRegion};
use crate::color::composite_mask;
use crate::error::{Error, Result};
use crate::geometry::{CanonicalLayout, LandmarkSet};
use crate::image::{quantize, read_rgb, write_rgb, write_rgba};
use crate::synthetic::FaceEntry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetOptions {
    pub n_styles: usize,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// Regions to sample; all when `None`.
    pub regions: Option<Vec<MakeupRegion>>,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            n_styles: 3,
            seed: 0,
            workers: 0,
            regions: None,
        }
    }
}

/// One manifest row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub face: PathBuf,
    pub landmarks: PathBuf,
    pub seed: u64,
    pub after_png: PathBuf,
    pub mask_png: PathBuf,
    pub style: MakeupStyle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub records: Vec<PairRecord>,
    /// Manifest entries that could not be processed.
    pub failed: Vec<(PathBuf, String)>,
}

pub fn derive_seed(base: u64, face_idx: usize, k: usize) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(face_idx as u64)) ^ k as u64)
}

/// Reads a JSON-lines face manifest, resolving paths against its directory.
pub fn read_face_manifest(path: impl AsRef<Path>) -> Result<Vec<FaceEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut e: FaceEntry = serde_json::from_str(line).map_err(|e| Error::json(path, e))?;
        e.face = base.join(&e.face);
        e.landmarks = base.join(&e.landmarks);
        e.parsing = e.parsing.map(|p| base.join(p));
        out.push(e);
    }
    Ok(out)
}

fn process_face(
    idx: usize,
    entry: &FaceEntry,
    lib: &StyleLibrary,
    canon: &CanonicalLayout,
    opts: &DatasetOptions,
    out_dir: &Path,
) -> Result<Vec<PairRecord>> {
    let face = read_rgb(&entry.face)?;
    let lm = LandmarkSet::load(&entry.landmarks)?;
    let regions = opts
        .regions
        .clone()
        .unwrap_or_else(|| MakeupRegion::ALL.to_vec());
    let stem = entry
        .face
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("face");
    let mut records = Vec::with_capacity(opts.n_styles);
    for k in 0..opts.n_styles {
        let seed = derive_seed(opts.seed, idx, k);
        let style = sample_style_for(lib, seed, &regions)?;
        let mask = render_style_mask(&style, lib, canon)?;
        // The after-image is blended from the mask exactly as stored.
        let stored = quantize(&generate_pair(&face, &lm, &mask, canon)?.mask);
        let after = composite_mask(&stored, &face)?;
        let after_png = PathBuf::from(format!("{idx:05}_{stem}_{k}_after.png"));
        let mask_png = PathBuf::from(format!("{idx:05}_{stem}_{k}_mask.png"));
        write_rgb(&after, out_dir.join(&after_png))?;
        write_rgba(&stored, out_dir.join(&mask_png))?;
        records.push(PairRecord {
            face: entry.face.clone(),
            landmarks: entry.landmarks.clone(),
            seed,
            after_png,
            mask_png,
            style,
        });
    }
    Ok(records)
}

/// Renders `n_styles` styles per face and writes the pairs plus
/// `manifest.jsonl` into `out_dir`.
///
/// Faces that fail are skipped with a warning; more than 10% failures aborts
/// before the manifest is written.
pub fn generate_dataset(
    faces: &[FaceEntry],
    lib: &StyleLibrary,
    canon: &CanonicalLayout,
    opts: &DatasetOptions,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetSummary> {
    let out_dir = out_dir.as_ref();
    lib.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<PairRecord>>> = pool.install(|| {
        faces
            .par_iter()
            .enumerate()
            .map(|(i, e)| process_face(i, e, lib, canon, opts, out_dir))
            .collect()
    });

    let mut summary = DatasetSummary {
        records: Vec::new(),
        failed: Vec::new(),
    };
    for (entry, r) in faces.iter().zip(results) {
        match r {
            Ok(recs) => summary.records.extend(recs),
            Err(e) => {
                log::warn!("skipping {}: {e}", entry.face.display());
                summary.failed.push((entry.face.clone(), e.to_string()));
            }
        }
    }
    if summary.failed.len() * 10 > faces.len() {
        return Err(Error::TooManyFailures {
            failed: summary.failed.len(),
            total: faces.len(),
        });
    }
    let mut text = String::new();
    for r in &summary.records {
        text.push_str(&serde_json::to_string(r).expect("record serialize"));
        text.push('\n');
    }
    let path = out_dir.join("manifest.jsonl");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
