mod common;

use maskforge::color::composite_mask;
use maskforge::geometry::CanonicalLayout;
use maskforge::image::ContentHash;
use maskforge::image::{read_rgb, read_rgba};
use maskforge::parsing::ParsingLabels;
use maskforge::synth::{
    build_average_alpha, generate_dataset, generate_pair, read_face_manifest, render_style_mask,
    sample_style, DatasetOptions, MakeupRegion, StyleLibrary,
};
use maskforge::synthetic::synthetic_face;
use maskforge::synthetic::{write_face_set, SyntheticFaceParams};

fn max_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn written_pairs_recompose_within_one_level() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_face_set(
        dir.path().join("faces"),
        34,
        11,
        &SyntheticFaceParams::default(),
        &ParsingLabels::default(),
    )
    .unwrap();
    let faces = read_face_manifest(&manifest).unwrap();
    let canon = CanonicalLayout::builtin();
    let lib = StyleLibrary::builtin(&canon);
    let out = dir.path().join("pairs");
    let s = generate_dataset(
        &faces,
        &lib,
        &canon,
        &DatasetOptions {
            seed: 4,
            ..Default::default()
        },
        &out,
    )
    .unwrap();
    assert_eq!(s.records.len(), 102);
    let mut worst = 0.0f64;
    for r in s.records.iter().take(100) {
        let face = read_rgb(&r.face).unwrap();
        let after = read_rgb(out.join(&r.after_png)).unwrap();
        let mask = read_rgba(out.join(&r.mask_png)).unwrap();
        worst = worst.max(max_diff(
            composite_mask(&mask, &face).unwrap().pixels(),
            after.pixels(),
        ));
    }
    assert!(worst <= 1.0 / 255.0 + 1e-12, "{}", worst * 255.0);
}

#[test]
fn in_memory_pairs_are_exact_blends() {
    let canon = CanonicalLayout::builtin();
    let lib = StyleLibrary::builtin(&canon);
    for seed in 0..5 {
        let face = synthetic_face(
            &SyntheticFaceParams::default(),
            seed,
            &ParsingLabels::default(),
        )
        .unwrap();
        let mask = render_style_mask(&sample_style(&lib, seed).unwrap(), &lib, &canon).unwrap();
        let pair = generate_pair(&face.image, &face.landmarks, &mask, &canon).unwrap();
        assert_eq!(composite_mask(&pair.mask, &face.image).unwrap(), pair.after);
    }
}

#[test]
fn shipped_library_matches_the_builtin() {
    let canon = CanonicalLayout::builtin();
    let builtin = StyleLibrary::builtin(&canon);
    let shipped =
        StyleLibrary::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/styles")).unwrap();
    assert_eq!(
        (shipped.width, shipped.height),
        (builtin.width, builtin.height)
    );
    assert_eq!(shipped.palettes, builtin.palettes);
    assert_eq!(shipped.finishes, builtin.finishes);
    assert_eq!(shipped.opacity_range, builtin.opacity_range);
    assert_eq!(shipped.templates.len(), builtin.templates.len());
    for region in MakeupRegion::ALL {
        assert!(
            shipped.templates_for(region).len() >= 4,
            "{}",
            region.name()
        );
    }
    for (a, b) in shipped.templates.iter().zip(&builtin.templates) {
        assert_eq!((&a.id, a.region), (&b.id, b.region));
        let worst = a
            .coverage
            .pixels()
            .iter()
            .zip(b.coverage.pixels())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.5 / 255.0 + 1e-12, "{}: {worst}", a.id);
    }
}

#[test]
fn rendering_is_deterministic_and_seed_sensitive() {
    let canon = CanonicalLayout::builtin().resized(256, 256);
    let lib = StyleLibrary::builtin(&canon);
    let render = |seed| {
        render_style_mask(&sample_style(&lib, seed).unwrap(), &lib, &canon)
            .unwrap()
            .content_hash()
    };
    assert_eq!(render(7), render(7));
    let distinct: std::collections::BTreeSet<String> = (0..10).map(render).collect();
    assert!(distinct.len() >= 9);
}

#[test]
fn average_alpha_of_rendered_styles_is_bounded() {
    let canon = CanonicalLayout::builtin().resized(128, 128);
    let lib = StyleLibrary::builtin(&canon);
    let masks: Vec<_> = (0..30)
        .map(|s| render_style_mask(&sample_style(&lib, s).unwrap(), &lib, &canon).unwrap())
        .collect();
    let avg = build_average_alpha(&masks).unwrap();
    for (i, &v) in avg.pixels().iter().enumerate() {
        let lo = masks
            .iter()
            .map(|m| m.pixels()[i][3])
            .fold(f64::INFINITY, f64::min);
        let hi = masks.iter().map(|m| m.pixels()[i][3]).fold(0.0, f64::max);
        assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }
    assert!(avg.pixels().iter().any(|&v| v > 0.0));
}
