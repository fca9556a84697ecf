mod common;

use maskforge::extract::{extract_eye_mask, eye_region_support, ExtractOptions};
use maskforge::geometry::{apply_affine_labels, fit_canonical_affine, CanonicalLayout};
use maskforge::metrics::extraction_score;
use maskforge::parsing::ParsingLabels;
use maskforge::synth::{
    generate_pair, render_style_mask, sample_style_for, MakeupRegion, StyleLibrary,
};
use maskforge::synthetic::{synthetic_face, SyntheticFaceParams};

#[test]
fn extracted_alpha_tracks_the_true_eyeshadow() {
    let canon = CanonicalLayout::builtin();
    let lib = StyleLibrary::builtin(&canon);
    let labels = ParsingLabels::default();
    let mut corr = Vec::new();
    for seed in 0..20 {
        let (face, pair) = common::eyeshadow_face(&lib, &canon, seed);
        let s = extraction_score(
            &pair.after,
            &face.landmarks,
            &face.parsing,
            &pair.mask,
            &labels,
            &canon,
            &ExtractOptions::default(),
        )
        .unwrap();
        assert!(s.seconds < 1.0, "seed {seed}: {}s", s.seconds);
        corr.push(s.correlation.unwrap());
    }
    let mean = corr.iter().sum::<f64>() / corr.len() as f64;
    assert!(mean > 0.95, "{corr:?}");
}

#[test]
fn bare_faces_give_near_zero_alpha() {
    let canon = CanonicalLayout::builtin();
    let labels = ParsingLabels::default();
    for seed in 0..5 {
        let face = synthetic_face(&SyntheticFaceParams::default(), 50 + seed, &labels).unwrap();
        let opts = ExtractOptions::default();
        let m = extract_eye_mask(
            &face.image,
            &face.landmarks,
            &face.parsing,
            &labels,
            &canon,
            &opts,
        )
        .unwrap()
        .mask;
        let region =
            eye_region_support(&face.landmarks, &face.parsing, &labels, &canon, &opts).unwrap();
        let inside: Vec<f64> = m
            .pixels()
            .iter()
            .zip(region.pixels())
            .filter(|(_, &r)| r)
            .map(|(p, _)| p[3])
            .collect();
        let mean = inside.iter().sum::<f64>() / inside.len() as f64;
        assert!(mean < 0.02, "seed {seed}: {mean}");
        assert!(m
            .pixels()
            .iter()
            .zip(region.pixels())
            .all(|(p, &r)| r || p[3] == 0.0));
    }
}

#[test]
fn brow_pixels_stay_clear() {
    let canon = CanonicalLayout::builtin();
    let lib = StyleLibrary::builtin(&canon);
    let labels = ParsingLabels::default();
    let face = synthetic_face(&SyntheticFaceParams::default(), 77, &labels).unwrap();
    let style = sample_style_for(&lib, 3, &[MakeupRegion::Eyeshadow]).unwrap();
    let pair = generate_pair(
        &face.image,
        &face.landmarks,
        &render_style_mask(&style, &lib, &canon).unwrap(),
        &canon,
    )
    .unwrap();
    let opts = ExtractOptions::default();
    let m = extract_eye_mask(
        &pair.after,
        &face.landmarks,
        &face.parsing,
        &labels,
        &canon,
        &opts,
    )
    .unwrap()
    .mask;

    let (w, h) = canon.dims();
    let t = fit_canonical_affine(&face.landmarks, &canon).unwrap();
    let warped = apply_affine_labels(&face.parsing, &t, w, h, 0).unwrap();
    let brows = labels.brows();
    let mut brow_px = 0;
    for (l, p) in warped.pixels().iter().zip(m.pixels()) {
        if brows.contains(*l) {
            brow_px += 1;
            assert_eq!(p[3], 0.0);
        }
    }
    assert!(brow_px > 0);

    let bg = labels.id("background").unwrap();
    let occluded = face
        .parsing
        .map(|&l| if brows.contains(l) { bg } else { l });
    let m2 = extract_eye_mask(
        &pair.after,
        &face.landmarks,
        &occluded,
        &labels,
        &canon,
        &opts,
    )
    .unwrap()
    .mask;
    assert!(
        m.pixels() == m2.pixels(),
        "hiding the brows changed the mask"
    );
}

#[test]
fn missing_eye_labels_are_an_error() {
    let canon = CanonicalLayout::builtin();
    let labels = ParsingLabels::default();
    let face = synthetic_face(&SyntheticFaceParams::default(), 8, &labels).unwrap();
    let skin = labels.id("skin").unwrap();
    let eyes = labels.eyes();
    let no_eyes = face
        .parsing
        .map(|&l| if eyes.contains(l) { skin } else { l });
    let err = extract_eye_mask(
        &face.image,
        &face.landmarks,
        &no_eyes,
        &labels,
        &canon,
        &ExtractOptions::default(),
    );
    assert!(matches!(
        err,
        Err(maskforge::error::Error::MissingEyeRegion)
    ));
}

#[test]
fn extraction_is_deterministic() {
    let canon = CanonicalLayout::builtin();
    let labels = ParsingLabels::default();
    let face = synthetic_face(&SyntheticFaceParams::default(), 9, &labels).unwrap();
    let run = || {
        extract_eye_mask(
            &face.image,
            &face.landmarks,
            &face.parsing,
            &labels,
            &canon,
            &ExtractOptions::default(),
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert!(a.mask.pixels() == b.mask.pixels());
    assert_eq!(a.eyes, b.eyes);
}
