#![allow(dead_code)]

use maskforge::color::{lab_cosine_similarity, rgb_to_lab};
use maskforge::geometry::CanonicalLayout;
use maskforge::image::Rgb;
use maskforge::parsing::ParsingLabels;
use maskforge::synth::{
    generate_pair, render_style_mask, sample_style_for, MakeupRegion, Pair, StyleLibrary,
};
use maskforge::synthetic::{synthetic_face, SyntheticFace, SyntheticFaceParams};

/// Cosine similarity to the skin below which a palette colour counts as visible.
pub const VISIBLE_SIMILARITY: f64 = 0.9;

/// Eyeshadow palette entries whose LAB direction differs from `skin`.
pub fn visible_eyeshadows(lib: &StyleLibrary, skin: Rgb) -> Vec<Rgb> {
    let s = rgb_to_lab(skin);
    lib.palette(MakeupRegion::Eyeshadow)
        .iter()
        .copied()
        .filter(|&c| lab_cosine_similarity(rgb_to_lab(c), s) < VISIBLE_SIMILARITY)
        .collect()
}

/// A flat-skin face wearing a sampled eyeshadow in a colour that differs
/// from its skin.
pub fn eyeshadow_face(
    lib: &StyleLibrary,
    canon: &CanonicalLayout,
    seed: u64,
) -> (SyntheticFace, Pair) {
    let face = synthetic_face(
        &SyntheticFaceParams::default(),
        1000 + seed,
        &ParsingLabels::default(),
    )
    .unwrap();
    let mut style = sample_style_for(lib, seed, &[MakeupRegion::Eyeshadow]).unwrap();
    let colors = visible_eyeshadows(lib, face.skin);
    style.regions[0].color = colors[seed as usize % colors.len()];
    let mask = render_style_mask(&style, lib, canon).unwrap();
    let pair = generate_pair(&face.image, &face.landmarks, &mask, canon).unwrap();
    (face, pair)
}

/// Control points for random TPS configuration `seed`: 6 to 68 points in a
/// 256 px square, at least 3 px apart, and a smooth displacement of them.
pub fn tps_config(seed: u64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(6..=68);
    let mut src: Vec<[f64; 2]> = Vec::with_capacity(n);
    while src.len() < n {
        let p = [rng.random_range(0.0..256.0), rng.random_range(0.0..256.0)];
        if src.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= 3.0) {
            src.push(p);
        }
    }
    let amp = rng.random_range(0.0..12.0);
    let dst = src
        .iter()
        .map(|p| {
            [
                p[0] + rng.random_range(-amp..=amp),
                p[1] + rng.random_range(-amp..=amp),
            ]
        })
        .collect();
    (src, dst)
}

/// A random well-conditioned affine map `[[a, b, tx], [c, d, ty]]`.
pub fn random_affine(seed: u64) -> [[f64; 3]; 2] {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xaff1_e000);
    loop {
        let m: [[f64; 3]; 2] = [
            [
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-50.0..50.0),
            ],
            [
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-50.0..50.0),
            ],
        ];
        if (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs() > 0.2 {
            return m;
        }
    }
}

pub fn apply_affine_point(m: &[[f64; 3]; 2], p: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2],
    ]
}
