//! Affine transforms and landmark-driven canonical alignment.

use serde::{Deserialize, Serialize};

use super::landmarks::{CanonicalLayout, LandmarkSet, Point};
use super::sampling::{bilinear, nearest, WarpPixel};
use crate::error::{Error, Result};
use crate::image::Image;

const MIN_DET: f64 = 1e-9;

/// Row-major 2x3 matrix: `x' = m[0][0] x + m[0][1] y + m[0][2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub m: [[f64; 3]; 2],
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    pub fn new(m: [[f64; 3]; 2]) -> Result<Self> {
        let t = AffineTransform { m };
        if t.det().abs() <= MIN_DET || !m.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::SingularTransform { det: t.det() });
        }
        Ok(t)
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        AffineTransform {
            m: [[1.0, 0.0, dx], [0.0, 1.0, dy]],
        }
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        AffineTransform {
            m: [[sx, 0.0, 0.0], [0.0, sy, 0.0]],
        }
    }

    /// `z -> (a + ib) z + (tx + i ty)` in complex notation.
    pub fn similarity(a: f64, b: f64, tx: f64, ty: f64) -> Self {
        AffineTransform {
            m: [[a, -b, tx], [b, a, ty]],
        }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    #[inline]
    pub fn apply(&self, [x, y]: Point) -> Point {
        [
            self.m[0][0] * x + self.m[0][1] * y + self.m[0][2],
            self.m[1][0] * x + self.m[1][1] * y + self.m[1][2],
        ]
    }

    /// `self ∘ other`: applies `other` first.
    pub fn then_after(&self, other: &AffineTransform) -> AffineTransform {
        let a = &self.m;
        let b = &other.m;
        AffineTransform {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                    a[0][0] * b[0][2] + a[0][1] * b[1][2] + a[0][2],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                    a[1][0] * b[0][2] + a[1][1] * b[1][2] + a[1][2],
                ],
            ],
        }
    }

    pub fn inverse(&self) -> Result<AffineTransform> {
        let det = self.det();
        if det.abs() <= MIN_DET || !det.is_finite() {
            return Err(Error::SingularTransform { det });
        }
        let [[a, b, tx], [c, d, ty]] = self.m;
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Ok(AffineTransform {
            m: [
                [ia, ib, -(ia * tx + ib * ty)],
                [ic, id, -(ic * tx + id * ty)],
            ],
        })
    }

    pub fn max_abs_diff(&self, other: &AffineTransform) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Centroids of (image-left eye, image-right eye, outer lips).
pub fn alignment_anchors(lm: &LandmarkSet) -> Result<[Point; 3]> {
    let s = lm.schema()?;
    Ok([
        lm.centroid_of(s.eye_left.clone()),
        lm.centroid_of(s.eye_right.clone()),
        lm.centroid_of(s.lips_outer.clone()),
    ])
}

fn check_triangle(p: &[Point; 3]) -> Result<()> {
    let (u, v) = (
        [p[1][0] - p[0][0], p[1][1] - p[0][1]],
        [p[2][0] - p[0][0], p[2][1] - p[0][1]],
    );
    let cross = (u[0] * v[1] - u[1] * v[0]).abs();
    let longest = [
        u[0] * u[0] + u[1] * u[1],
        v[0] * v[0] + v[1] * v[1],
        (v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if !(longest > 1e-12) || cross < 1e-6 * longest {
        return Err(Error::DegenerateTriangle);
    }
    Ok(())
}

/// Least-squares similarity mapping `src` points onto `dst` points.
///
/// In complex form `w ≈ a z + b`; with centered points the optimum is
/// `a = Σ conj(z_i) w_i / Σ |z_i|^2`.
pub fn fit_similarity(src: &[Point], dst: &[Point]) -> Result<AffineTransform> {
    assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    let cs = super::landmarks::centroid(src);
    let cd = super::landmarks::centroid(dst);
    let (mut num_re, mut num_im, mut den) = (0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (zx, zy) = (s[0] - cs[0], s[1] - cs[1]);
        let (wx, wy) = (d[0] - cd[0], d[1] - cd[1]);
        num_re += zx * wx + zy * wy;
        num_im += zx * wy - zy * wx;
        den += zx * zx + zy * zy;
    }
    if den <= 1e-12 * n {
        return Err(Error::DegenerateTriangle);
    }
    let (a, b) = (num_re / den, num_im / den);
    let tx = cd[0] - (a * cs[0] - b * cs[1]);
    let ty = cd[1] - (b * cs[0] + a * cs[1]);
    AffineTransform::new(AffineTransform::similarity(a, b, tx, ty).m)
}

/// Transform taking `lm`'s frame onto the canonical frame, fitted on the
/// eye and lip centroids.
pub fn fit_canonical_affine(lm: &LandmarkSet, canon: &CanonicalLayout) -> Result<AffineTransform> {
    if lm.layout_id != canon.reference.layout_id {
        return Err(Error::InvalidLandmarks(format!(
            "layout `{}` does not match canonical layout `{}`",
            lm.layout_id, canon.reference.layout_id
        )));
    }
    let src = alignment_anchors(lm)?;
    let dst = alignment_anchors(&canon.reference)?;
    check_triangle(&src)?;
    check_triangle(&dst)?;
    fit_similarity(&src, &dst)
}

/// Resamples `img` into a `width x height` frame through `t` (source -> output).
///
/// Each output pixel is bilinearly sampled at `t⁻¹(p)`; outside samples follow
/// the pixel kind's border rule (transparent masks, edge-clamped RGB).
pub fn apply_affine<P: WarpPixel>(
    img: &Image<P>,
    t: &AffineTransform,
    width: usize,
    height: usize,
) -> Result<Image<P>> {
    let inv = t.inverse()?;
    Ok(Image::from_fn(width, height, |x, y| {
        let [sx, sy] = inv.apply([x as f64, y as f64]);
        bilinear(img, sx, sy)
    }))
}

/// Nearest-neighbour variant of [`apply_affine`] for label maps.
pub fn apply_affine_labels(
    labels: &Image<u8>,
    t: &AffineTransform,
    width: usize,
    height: usize,
    fill: u8,
) -> Result<Image<u8>> {
    let inv = t.inverse()?;
    Ok(Image::from_fn(width, height, |x, y| {
        let [sx, sy] = inv.apply([x as f64, y as f64]);
        nearest(labels, sx, sy, fill)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{ImageRgb, RgbaMask};

    #[test]
    fn identity_at_canonical_positions() {
        let canon = CanonicalLayout::builtin();
        let t = fit_canonical_affine(&canon.reference, &canon).unwrap();
        assert!(t.max_abs_diff(&AffineTransform::IDENTITY) < 1e-9, "{t:?}");
    }

    #[test]
    fn shifted_landmarks_give_inverse_translation() {
        let canon = CanonicalLayout::builtin();
        let t = fit_canonical_affine(&canon.reference.translated(10.0, 5.0), &canon).unwrap();
        assert!(
            t.max_abs_diff(&AffineTransform::translation(-10.0, -5.0)) < 1e-9,
            "{t:?}"
        );
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let canon = CanonicalLayout::builtin();
        let flat = canon.reference.map(|[x, _]| [x, 100.0]);
        assert!(matches!(
            fit_canonical_affine(&flat, &canon),
            Err(Error::DegenerateTriangle)
        ));
        let point = canon.reference.map(|_| [3.0, 3.0]);
        assert!(matches!(
            fit_canonical_affine(&point, &canon),
            Err(Error::DegenerateTriangle)
        ));
    }

    #[test]
    fn inverse_and_composition() {
        let t = AffineTransform::new([[1.2, -0.3, 5.0], [0.4, 0.9, -2.0]]).unwrap();
        let id = t.then_after(&t.inverse().unwrap());
        assert!(id.max_abs_diff(&AffineTransform::IDENTITY) < 1e-12);
        assert!(AffineTransform::scale(0.0, 1.0).inverse().is_err());
    }

    #[test]
    fn identity_warp_is_bit_exact() {
        let img = ImageRgb::from_fn(9, 7, |x, y| [x as f64 / 9.0, y as f64 / 7.0, 0.25]);
        let out = apply_affine(&img, &AffineTransform::IDENTITY, 9, 7).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn integer_translation_shifts_pixels() {
        let img = RgbaMask::from_fn(8, 8, |x, y| [x as f64 / 8.0, y as f64 / 8.0, 0.5, 1.0]);
        let out = apply_affine(&img, &AffineTransform::translation(2.0, -1.0), 8, 8).unwrap();
        for y in 0..7 {
            for x in 2..8 {
                assert_eq!(out.get(x, y), img.get(x - 2, y + 1));
            }
        }
        // Vacated columns are transparent for masks.
        assert_eq!(out.get(0, 3)[3], 0.0);
    }

    #[test]
    fn scale_round_trip_on_gradient() {
        let img = ImageRgb::from_fn(32, 24, |x, y| {
            [
                x as f64 / 31.0,
                y as f64 / 23.0,
                ((x + y) as f64 / 54.0).powi(2),
            ]
        });
        let up = apply_affine(&img, &AffineTransform::scale(2.0, 2.0), 64, 48).unwrap();
        let back = apply_affine(&up, &AffineTransform::scale(0.5, 0.5), 32, 24).unwrap();
        let mut worst = 0.0f64;
        for y in 1..23 {
            for x in 1..31 {
                for c in 0..3 {
                    worst = worst.max((back.get(x, y)[c] - img.get(x, y)[c]).abs());
                }
            }
        }
        assert!(worst < 2.0 / 255.0, "max error {worst}");
    }
}
