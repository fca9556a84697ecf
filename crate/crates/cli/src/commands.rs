use std::path::{Path, PathBuf};

use maskforge::color::SimilarityChannels;
use maskforge::extract::{extract_eye_mask, ClusterParams, ExtractOptions};
use maskforge::geometry::{CanonicalLayout, LandmarkSet};
use maskforge::image::{
    encode_rgb, encode_rgba, read_rgb, read_rgba, sha256_hex, ImageRgb, RgbaMask,
};
use maskforge::losses::loss_vectors;
use maskforge::metrics::{load_eval_manifest, synthetic_transfer_eval, EvalOptions};
use maskforge::parsing::{read_parsing, ParsingLabels};
use maskforge::synth::{
    generate_dataset, read_face_manifest, render_style_mask, sample_style_for, DatasetOptions,
    MakeupRegion, StyleLibrary,
};
use maskforge::synthetic::{write_face_set, SyntheticFaceParams};
use maskforge::video::{
    apply_to_frame, list_frames, read_frame_dir, restrict_to_regions, run_video, ApplyOptions,
    FrameInput, RegionToggles, VideoConfig,
};
use serde_json::{json, Value};

use crate::{
    ApplyArgs, ApplyOpts, CliError, CliResult, ClusterArgs, Command, EvalArgs, ExtractArgs,
    FacesArgs, LayoutArgs, LossesArgs, PairArgs, SynthArgs, VideoArgs,
};

pub(crate) fn dispatch(cmd: Command) -> CliResult<Value> {
    match cmd {
        Command::Extract(a) => extract(a),
        Command::Synth(a) => synth(a),
        Command::Pair(a) => pair(a),
        Command::Apply(a) => apply(a),
        Command::Video(a) => video(a),
        Command::Eval(a) => eval(a),
        Command::LossesCheck(a) => losses_check(a),
        Command::Faces(a) => faces(a),
    }
}

fn require_file(p: &Path) -> CliResult<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{}: no such file", p.display())))
    }
}

fn require_dir(p: &Path) -> CliResult<()> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{}: no such directory",
            p.display()
        )))
    }
}

/// Creates the parent directory of an output file.
fn prepare_out_file(p: &Path) -> CliResult<()> {
    if p.as_os_str().is_empty() || p.is_dir() {
        return Err(CliError::Usage(format!(
            "{}: output must be a file path",
            p.display()
        )));
    }
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => {
            std::fs::create_dir_all(d).map_err(|e| CliError::Data(format!("{}: {e}", d.display())))
        }
        _ => Ok(()),
    }
}

fn prepare_out_dir(p: &Path) -> CliResult<()> {
    if p.is_file() {
        return Err(CliError::Usage(format!(
            "{}: output must be a directory",
            p.display()
        )));
    }
    std::fs::create_dir_all(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

/// Writes `bytes` and returns `{path, sha256}`.
fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<Value> {
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(json!({ "path": path, "sha256": sha256_hex(bytes) }))
}

fn write_png_rgba(path: &Path, m: &RgbaMask) -> CliResult<Value> {
    write_bytes(path, &encode_rgba(m)?)
}

fn write_png_rgb(path: &Path, img: &ImageRgb) -> CliResult<Value> {
    write_bytes(path, &encode_rgb(img)?)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> CliResult<Value> {
    let text =
        serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    write_bytes(path, text.as_bytes())
}

fn layout(a: &LayoutArgs) -> CliResult<(CanonicalLayout, ParsingLabels)> {
    for p in a.canonical.iter().chain(&a.labels) {
        require_file(p)?;
    }
    let canon = match &a.canonical {
        Some(p) => CanonicalLayout::load(p)?,
        None => CanonicalLayout::builtin(),
    };
    let labels = match &a.labels {
        Some(p) => ParsingLabels::load(p)?,
        None => ParsingLabels::default(),
    };
    Ok((canon, labels))
}

fn library(path: Option<&PathBuf>, canon: &CanonicalLayout) -> CliResult<StyleLibrary> {
    match path {
        Some(p) => {
            require_dir(p)?;
            Ok(StyleLibrary::load(p)?)
        }
        None => Ok(StyleLibrary::builtin(canon)),
    }
}

fn extract_options(c: &ClusterArgs, seed: u64) -> ExtractOptions {
    ExtractOptions {
        params: ClusterParams {
            k: c.k,
            s: c.s,
            seed,
            ..Default::default()
        },
        roi_margin: c.roi_margin,
        channels: if c.chroma_only {
            SimilarityChannels::ChromaOnly
        } else {
            SimilarityChannels::Full
        },
        ..Default::default()
    }
}

fn regions_or_all(r: &[MakeupRegion]) -> Vec<MakeupRegion> {
    if r.is_empty() {
        MakeupRegion::ALL.to_vec()
    } else {
        r.to_vec()
    }
}

fn toggles(names: &[String]) -> CliResult<RegionToggles> {
    let mut t = RegionToggles {
        eyes: false,
        lips: false,
        cheeks: false,
    };
    for n in names {
        match n.trim() {
            "eyes" => t.eyes = true,
            "lips" => t.lips = true,
            "cheeks" => t.cheeks = true,
            "" => {}
            other => {
                return Err(CliError::Usage(format!(
                    "unknown facial area `{other}` (eyes, lips, cheeks)"
                )))
            }
        }
    }
    Ok(t)
}

/// Validates the apply flags and trims the mask to the selected areas.
fn apply_setup(
    o: &ApplyOpts,
    mask: RgbaMask,
    canon: &CanonicalLayout,
    labels: &ParsingLabels,
) -> CliResult<(RgbaMask, ApplyOptions)> {
    if !(0.0..=2.0).contains(&o.alpha_scale) {
        return Err(CliError::Usage(format!(
            "--alpha-scale must lie in [0, 2], got {}",
            o.alpha_scale
        )));
    }
    let mask = restrict_to_regions(mask, canon, toggles(&o.regions)?);
    let opts = ApplyOptions {
        gate: labels.face_region(),
        alpha_scale: o.alpha_scale,
    };
    Ok((mask, opts))
}

fn extract(a: ExtractArgs) -> CliResult<Value> {
    for p in [&a.photo, &a.landmarks, &a.parsing] {
        require_file(p)?;
    }
    prepare_out_file(&a.out)?;
    if let Some(s) = &a.stats {
        prepare_out_file(s)?;
    }
    let (canon, labels) = layout(&a.layout)?;
    let photo = read_rgb(&a.photo)?;
    let lm = LandmarkSet::load(&a.landmarks)?;
    let parsing = read_parsing(&a.parsing)?;
    let ex = extract_eye_mask(
        &photo,
        &lm,
        &parsing,
        &labels,
        &canon,
        &extract_options(&a.cluster, a.seed),
    )?;
    let mut outputs = vec![write_png_rgba(&a.out, &ex.mask)?];
    if let Some(s) = &a.stats {
        outputs.push(write_json(s, &ex.eyes)?);
    }
    Ok(json!({
        "command": "extract",
        "message": format!("wrote {}", a.out.display()),
        "eyes": ex.eyes,
        "outputs": outputs,
    }))
}

fn synth(a: SynthArgs) -> CliResult<Value> {
    prepare_out_file(&a.out)?;
    if let Some(s) = &a.style {
        prepare_out_file(s)?;
    }
    let (canon, _) = layout(&a.layout)?;
    let lib = library(a.lib.as_ref(), &canon)?;
    let style = sample_style_for(&lib, a.seed, &regions_or_all(&a.regions))?;
    let mask = render_style_mask(&style, &lib, &canon)?;
    let mut outputs = vec![write_png_rgba(&a.out, &mask)?];
    if let Some(s) = &a.style {
        outputs.push(write_json(s, &style)?);
    }
    Ok(json!({
        "command": "synth",
        "message": format!("wrote {}", a.out.display()),
        "style": style,
        "outputs": outputs,
    }))
}

fn pair(a: PairArgs) -> CliResult<Value> {
    require_file(&a.faces)?;
    prepare_out_dir(&a.out)?;
    let (canon, _) = layout(&a.layout)?;
    let lib = library(a.lib.as_ref(), &canon)?;
    let faces = read_face_manifest(&a.faces)?;
    let opts = DatasetOptions {
        n_styles: a.n_styles,
        seed: a.seed,
        workers: a.workers,
        regions: (!a.regions.is_empty()).then(|| a.regions.clone()),
    };
    let summary = generate_dataset(&faces, &lib, &canon, &opts, &a.out)?;
    let mut outputs = Vec::new();
    for r in &summary.records {
        for f in [&r.after_png, &r.mask_png] {
            let p = a.out.join(f);
            let bytes =
                std::fs::read(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            outputs.push(json!({ "path": p, "sha256": sha256_hex(&bytes) }));
        }
    }
    let failed: Vec<Value> = summary
        .failed
        .iter()
        .map(|(p, e)| json!({ "face": p, "error": e }))
        .collect();
    Ok(json!({
        "command": "pair",
        "message": format!("{} pairs in {} ({} faces skipped)", summary.records.len(), a.out.display(), failed.len()),
        "pairs": summary.records.len(),
        "failed": failed,
        "outputs": outputs,
    }))
}

fn apply(a: ApplyArgs) -> CliResult<Value> {
    for p in [&a.mask, &a.frame, &a.landmarks]
        .into_iter()
        .chain(&a.parsing)
    {
        require_file(p)?;
    }
    prepare_out_file(&a.out)?;
    let (canon, labels) = layout(&a.layout)?;
    let mask = read_rgba(&a.mask)?;
    let (mask, opts) = apply_setup(&a.apply, mask, &canon, &labels)?;
    let frame = FrameInput {
        image: read_rgb(&a.frame)?,
        landmarks: LandmarkSet::load(&a.landmarks)?,
        parsing: match (&a.parsing, a.apply.no_gate) {
            (Some(p), false) => Some(read_parsing(p)?),
            _ => None,
        },
        timestamp_ms: 0.0,
    };
    let out = apply_to_frame(&mask, &frame, &canon, &opts)?;
    if let Some(w) = &out.warning {
        log::warn!("{w}");
    }
    Ok(json!({
        "command": "apply",
        "message": format!("wrote {}", a.out.display()),
        "warning": out.warning,
        "outputs": [write_png_rgb(&a.out, &out.image)?],
    }))
}

fn video(a: VideoArgs) -> CliResult<Value> {
    require_file(&a.mask)?;
    require_dir(&a.frames)?;
    prepare_out_dir(&a.out)?;
    let timing_path = a
        .timing
        .clone()
        .unwrap_or_else(|| a.out.join("timing.json"));
    prepare_out_file(&timing_path)?;
    let (canon, labels) = layout(&a.layout)?;
    let mask = read_rgba(&a.mask)?;
    let (mask, apply) = apply_setup(&a.apply, mask, &canon, &labels)?;
    let stems = list_frames(&a.frames)?;
    let mut frames = read_frame_dir(&a.frames)?;
    if a.apply.no_gate {
        for f in &mut frames {
            f.parsing = None;
        }
    }
    let cfg = VideoConfig {
        beta: a.beta,
        workers: a.workers,
        apply,
    };
    let (images, report) = run_video(&mask, &frames, &canon, &cfg)?;
    let mut outputs = Vec::with_capacity(images.len() + 1);
    for (img, stem) in images.iter().zip(&stems) {
        outputs.push(write_png_rgb(&a.out.join(format!("{stem}.png")), img)?);
    }
    let timing = write_json(&timing_path, &report)?;
    Ok(json!({
        "command": "video",
        "message": format!("{} frames at {:.1} fps (p95 {:.2} ms)", report.frames, report.fps, report.p95_ms),
        "timing": report,
        "timing_file": timing,
        "outputs": outputs,
    }))
}

fn eval(a: EvalArgs) -> CliResult<Value> {
    require_file(&a.faces)?;
    prepare_out_file(&a.out)?;
    if let Some(c) = &a.csv {
        prepare_out_file(c)?;
    }
    let (canon, labels) = layout(&a.layout)?;
    let lib = library(a.lib.as_ref(), &canon)?;
    let faces = load_eval_manifest(&a.faces)?;
    let opts = EvalOptions {
        n_pairs: a.n_pairs,
        seed: a.seed,
        regions: a.regions.clone(),
        extract: extract_options(&a.cluster, 0),
        oracle_gt: a.oracle_gt,
        gate_application: a.gate,
        workers: a.workers,
    };
    let report = synthetic_transfer_eval(&faces, &lib, &canon, &labels, &opts)?;
    let mut outputs = vec![write_json(&a.out, &report)?];
    if let Some(c) = &a.csv {
        report.write_csv(c)?;
        let bytes =
            std::fs::read(c).map_err(|e| CliError::Data(format!("{}: {e}", c.display())))?;
        outputs.push(json!({ "path": c, "sha256": sha256_hex(&bytes) }));
    }
    let psnr = match report.psnr_db {
        Some(d) => format!("{d:.2} dB"),
        None if report.psnr_infinite => "inf dB".into(),
        None => "n/a".into(),
    };
    Ok(json!({
        "command": "eval",
        "message": format!(
            "{} pairs: PSNR {psnr}, alpha MAE {:.4}, IoU {:.3}, {} skipped",
            report.n_pairs, report.alpha_mae, report.mask_iou, report.skipped.len()
        ),
        "psnr_db": report.psnr_db,
        "psnr_infinite": report.psnr_infinite,
        "alpha_mae": report.alpha_mae,
        "mask_iou": report.mask_iou,
        "n_pairs": report.n_pairs,
        "skipped": report.skipped.len(),
        "outputs": outputs,
    }))
}

fn losses_check(a: LossesArgs) -> CliResult<Value> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be > 0".into()));
    }
    if let Some(o) = &a.out {
        prepare_out_file(o)?;
    }
    let v = loss_vectors(a.seeds, a.normalized);
    let outputs = match &a.out {
        Some(o) => vec![write_json(o, &v)?],
        None => Vec::new(),
    };
    let failed: Vec<Value> = v
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| json!({ "loss": c.loss, "seed": c.seed, "max_rel_error": c.max_rel_error }))
        .collect();
    let worst = v.checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    if !failed.is_empty() {
        return Err(CliError::Internal(format!(
            "{} gradient checks failed: {}",
            failed.len(),
            Value::from(failed)
        )));
    }
    Ok(json!({
        "command": "losses-check",
        "message": format!("{} checks passed, worst relative error {worst:.2e}", v.checks.len()),
        "checks": v.checks.len(),
        "worst_rel_error": worst,
        "outputs": outputs,
    }))
}

fn faces(a: FacesArgs) -> CliResult<Value> {
    prepare_out_dir(&a.out)?;
    let (_, labels) = layout(&a.layout)?;
    let params = SyntheticFaceParams {
        size: a.size,
        ..Default::default()
    };
    let manifest = write_face_set(&a.out, a.count, a.seed, &params, &labels)?;
    Ok(json!({
        "command": "faces",
        "message": format!("{} faces, manifest {}", a.count, manifest.display()),
        "manifest": manifest,
    }))
}
