//! Bilinear resampling with per-pixel-kind border handling.

use crate::image::{Image, Rgb, Rgba};

/// Sample coordinates this close to an integer are snapped onto it, so that
/// identity and integer-translation warps copy pixels bit-exactly.
pub const SNAP_EPS: f64 = 1e-6;

/// Pixel kinds that can be bilinearly resampled.
pub trait WarpPixel: Copy + Send + Sync {
    /// Value returned for samples outside the image, or `None` to clamp to the
    /// nearest edge pixel.
    fn outside() -> Option<Self>;

    fn lerp(self, other: Self, t: f64) -> Self;
}

impl WarpPixel for f64 {
    fn outside() -> Option<Self> {
        Some(0.0)
    }

    #[inline]
    fn lerp(self, other: Self, t: f64) -> Self {
        self * (1.0 - t) + other * t
    }
}

/// RGB images are edge-clamped.
impl WarpPixel for Rgb {
    fn outside() -> Option<Self> {
        None
    }

    #[inline]
    fn lerp(self, other: Self, t: f64) -> Self {
        let s = 1.0 - t;
        [
            self[0] * s + other[0] * t,
            self[1] * s + other[1] * t,
            self[2] * s + other[2] * t,
        ]
    }
}

/// Masks are transparent outside.
impl WarpPixel for Rgba {
    fn outside() -> Option<Self> {
        Some([0.0; 4])
    }

    #[inline]
    fn lerp(self, other: Self, t: f64) -> Self {
        let s = 1.0 - t;
        [
            self[0] * s + other[0] * t,
            self[1] * s + other[1] * t,
            self[2] * s + other[2] * t,
            self[3] * s + other[3] * t,
        ]
    }
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

#[inline]
fn fetch<P: WarpPixel>(img: &Image<P>, x: i64, y: i64) -> P {
    let (w, h) = (img.width() as i64, img.height() as i64);
    if x >= 0 && y >= 0 && x < w && y < h {
        return *img.get(x as usize, y as usize);
    }
    match P::outside() {
        Some(p) => p,
        None => *img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize),
    }
}

/// Bilinear sample at continuous pixel coordinates (pixel centers on integers).
#[inline]
pub fn bilinear<P: WarpPixel>(img: &Image<P>, x: f64, y: f64) -> P {
    let (x, y) = (snap(x), snap(y));
    if let Some(out) = P::outside() {
        if !(x > -1.0 && y > -1.0 && x < img.width() as f64 && y < img.height() as f64) {
            return out;
        }
    }
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    if fx == 0.0 && fy == 0.0 {
        return fetch(img, ix, iy);
    }
    if fy == 0.0 {
        return fetch(img, ix, iy).lerp(fetch(img, ix + 1, iy), fx);
    }
    if fx == 0.0 {
        return fetch(img, ix, iy).lerp(fetch(img, ix, iy + 1), fy);
    }
    let top = fetch(img, ix, iy).lerp(fetch(img, ix + 1, iy), fx);
    let bottom = fetch(img, ix, iy + 1).lerp(fetch(img, ix + 1, iy + 1), fx);
    top.lerp(bottom, fy)
}

/// Nearest-neighbour sample for label images; `fill` outside.
#[inline]
pub fn nearest<T: Copy>(img: &Image<T>, x: f64, y: f64, fill: T) -> T {
    let (ix, iy) = (x.round(), y.round());
    if ix < 0.0 || iy < 0.0 || ix >= img.width() as f64 || iy >= img.height() as f64 {
        return fill;
    }
    *img.get(ix as usize, iy as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_samples_are_exact() {
        let img = Image::from_fn(4, 3, |x, y| (x * 10 + y) as f64 / 7.0);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(
                    bilinear(&img, x as f64 + 1e-9, y as f64 - 1e-9),
                    *img.get(x, y)
                );
            }
        }
    }

    #[test]
    fn border_modes() {
        let rgb: Image<Rgb> = Image::filled(2, 2, [0.5, 0.5, 0.5]);
        assert_eq!(bilinear(&rgb, -3.0, 7.5), [0.5, 0.5, 0.5]);
        let mask: Image<Rgba> = Image::filled(2, 2, [1.0; 4]);
        assert_eq!(bilinear(&mask, -3.0, 0.0), [0.0; 4]);
        assert_eq!(bilinear(&mask, -0.5, 0.0)[3], 0.5);
    }

    #[test]
    fn midpoint_interpolation() {
        let img = Image::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!((bilinear(&img, 0.25, 0.0) - 0.25).abs() < 1e-15);
        assert_eq!(nearest(&img, 0.6, 0.0, 9.0), 1.0);
        assert_eq!(nearest(&img, 5.0, 0.0, 9.0), 9.0);
    }
}
