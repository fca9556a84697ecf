//! sRGB / CIELAB conversion (D65, 2° observer), LAB cosine similarity, and
//! straight-alpha compositing.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::{ImageLab, ImageRgb, Rgb, Rgba, RgbaMask};

/// Linear sRGB -> XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Exact inverse of `RGB_TO_XYZ`.
const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [
        3.240_454_836_021_408_5,
        -1.537_138_850_102_575,
        -0.498_531_546_868_480_9,
    ],
    [
        -0.969_266_389_875_653_8,
        1.876_010_928_842_491_2,
        0.041_556_082_346_673_53,
    ],
    [
        0.055_643_419_604_213_66,
        -0.204_025_854_267_698_14,
        1.057_225_162_457_928_8,
    ],
];

const WHITE_D65: [f64; 3] = [0.95047, 1.0, 1.08883];

const DELTA: f64 = 6.0 / 29.0;

/// Vectors shorter than this are treated as degenerate by [`lab_cosine_similarity`].
pub const DEGENERATE_NORM: f64 = 1e-9;

/// A CIELAB color.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Lab { l, a, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    pub fn from_array([l, a, b]: [f64; 3]) -> Self {
        Lab { l, a, b }
    }

    pub fn dot(self, other: Lab) -> f64 {
        self.l * other.l + self.a * other.a + self.b * other.b
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance_sq(self, other: Lab) -> f64 {
        let (dl, da, db) = (self.l - other.l, self.a - other.a, self.b - other.b);
        dl * dl + da * da + db * db
    }

    pub fn scaled(self, s: f64) -> Lab {
        Lab::new(self.l * s, self.a * s, self.b * s)
    }
}

#[inline]
fn decode_gamma(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn encode_gamma(l: f64) -> f64 {
    if l <= 0.003_130_8 {
        12.92 * l
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(u: f64) -> f64 {
    if u > DELTA {
        u * u * u
    } else {
        3.0 * DELTA * DELTA * (u - 4.0 / 29.0)
    }
}

fn mul3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn rgb_to_lab(rgb: Rgb) -> Lab {
    let xyz = mul3(&RGB_TO_XYZ, rgb.map(decode_gamma));
    let fx = lab_f(xyz[0] / WHITE_D65[0]);
    let fy = lab_f(xyz[1] / WHITE_D65[1]);
    let fz = lab_f(xyz[2] / WHITE_D65[2]);
    Lab::new(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Inverse of [`rgb_to_lab`]; out-of-gamut results are clamped to `[0, 1]`.
pub fn lab_to_rgb(lab: Lab) -> Rgb {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let xyz = [
        WHITE_D65[0] * lab_f_inv(fx),
        WHITE_D65[1] * lab_f_inv(fy),
        WHITE_D65[2] * lab_f_inv(fz),
    ];
    mul3(&XYZ_TO_RGB, xyz).map(|c| encode_gamma(c.max(0.0)).clamp(0.0, 1.0))
}

pub fn srgb_to_lab(img: &ImageRgb) -> ImageLab {
    img.map(|&p| rgb_to_lab(p))
}

pub fn lab_to_srgb(img: &ImageLab) -> ImageRgb {
    img.map(|&p| lab_to_rgb(p))
}

/// Which LAB components enter the cosine similarity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityChannels {
    /// Full (L, a, b) vector.
    #[default]
    Full,
    /// Chroma plane (a, b) only.
    ChromaOnly,
}

/// `dot(p, q) / (|p| |q|)`; returns 1 if either vector is (near) zero.
pub fn lab_cosine_similarity(p: Lab, q: Lab) -> f64 {
    cosine(p.to_array(), q.to_array())
}

pub fn lab_similarity(p: Lab, q: Lab, channels: SimilarityChannels) -> f64 {
    match channels {
        SimilarityChannels::Full => lab_cosine_similarity(p, q),
        SimilarityChannels::ChromaOnly => cosine([0.0, p.a, p.b], [0.0, q.a, q.b]),
    }
}

fn cosine(p: [f64; 3], q: [f64; 3]) -> f64 {
    let np = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let nq = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    if np < DEGENERATE_NORM || nq < DEGENERATE_NORM {
        return 1.0;
    }
    let dot = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    (dot / (np * nq)).clamp(-1.0, 1.0)
}

/// Straight-alpha "over": `A * fg + (1 - A) * bg`.
#[inline]
pub fn blend_over(fg: Rgba, bg: Rgb) -> Rgb {
    let a = fg[3];
    [
        a * fg[0] + (1.0 - a) * bg[0],
        a * fg[1] + (1.0 - a) * bg[1],
        a * fg[2] + (1.0 - a) * bg[2],
    ]
}

/// Composites `mask` over `base` pixel by pixel.
///
/// Pixels with zero alpha return the base pixel untouched, so the result does
/// not depend on the RGB stored under fully transparent mask pixels.
pub fn composite_mask(mask: &RgbaMask, base: &ImageRgb) -> Result<ImageRgb> {
    mask.check_same_dims(base)?;
    let data = mask
        .pixels()
        .iter()
        .zip(base.pixels())
        .map(|(&fg, &bg)| if fg[3] == 0.0 { bg } else { blend_over(fg, bg) })
        .collect();
    ImageRgb::new(base.width(), base.height(), data)
}

/// Porter-Duff "over" of two straight-alpha pixels (`src` on top).
#[inline]
pub fn over_rgba(src: Rgba, dst: Rgba) -> Rgba {
    if dst[3] == 0.0 {
        return src;
    }
    if src[3] == 0.0 {
        return dst;
    }
    let sa = src[3];
    let da = dst[3] * (1.0 - sa);
    let out_a = sa + da;
    if out_a <= 0.0 {
        return [0.0; 4];
    }
    let mix = |c: usize| ((src[c] * sa + dst[c] * da) / out_a).clamp(0.0, 1.0);
    [mix(0), mix(1), mix(2), out_a.min(1.0)]
}
