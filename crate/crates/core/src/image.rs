//! Floating-point raster containers and 8-bit PNG I/O.
//!
//! All color images hold straight (non-premultiplied) channels in `[0, 1]`.
//! 8-bit values are converted by `v / 255` on read and `floor(v * 255 + 0.5)`
//! on write.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma, Rgb as Rgb8, RgbImage, Rgba as Rgba8, RgbaImage};
use sha2::{Digest, Sha256};

use crate::color::Lab;
use crate::error::{Error, Result};

/// sRGB-encoded color, channels in `[0, 1]`.
pub type Rgb = [f64; 3];
/// Straight-alpha color, channels in `[0, 1]`.
pub type Rgba = [f64; 4];

pub type ImageRgb = Image<Rgb>;
pub type ImageLab = Image<Lab>;
pub type RgbaMask = Image<Rgba>;
/// Single-channel opacity map in `[0, 1]`.
pub type AlphaMap = Image<f64>;
/// Per-pixel boolean selection.
pub type BoolMask = Image<bool>;

/// Row-major raster of `width * height` pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<P> {
    width: usize,
    height: usize,
    data: Vec<P>,
}

impl<P> Image<P> {
    pub fn new(width: usize, height: usize, data: Vec<P>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[P] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [P] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<P> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &P {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, p: P) {
        let i = self.index_of(x, y);
        self.data[i] = p;
    }

    pub fn map<Q>(&self, f: impl FnMut(&P) -> Q) -> Image<Q> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Errors unless `other` has the same width and height.
    pub fn check_same_dims<Q>(&self, other: &Image<Q>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }
}

impl<P: Clone> Image<P> {
    pub fn filled(width: usize, height: usize, p: P) -> Self {
        Image {
            width,
            height,
            data: vec![p; width * height],
        }
    }
}

fn channels_in_unit(values: &[f64]) -> bool {
    values.iter().all(|v| (0.0..=1.0).contains(v))
}

impl Image<Rgb> {
    /// Builds an RGB image, rejecting channels outside `[0, 1]`.
    pub fn from_rgb(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        let img = Image::new(width, height, data)?;
        if !img.data.iter().all(|p| channels_in_unit(p)) {
            return Err(Error::InvalidImage("RGB channel outside [0, 1]".into()));
        }
        Ok(img)
    }
}

impl Image<Rgba> {
    /// Builds an RGBA mask, rejecting channels outside `[0, 1]`.
    pub fn from_rgba(width: usize, height: usize, data: Vec<Rgba>) -> Result<Self> {
        let img = Image::new(width, height, data)?;
        if !img.data.iter().all(|p| channels_in_unit(p)) {
            return Err(Error::InvalidImage("RGBA channel outside [0, 1]".into()));
        }
        Ok(img)
    }

    pub fn transparent(width: usize, height: usize) -> Self {
        Image::filled(width, height, [0.0; 4])
    }

    pub fn alpha(&self) -> AlphaMap {
        self.map(|p| p[3])
    }

    /// Scales every alpha by `factor`, clamping to `[0, 1]`.
    pub fn scale_alpha(&mut self, factor: f64) {
        for p in &mut self.data {
            p[3] = (p[3] * factor).clamp(0.0, 1.0);
        }
    }
}

/// Hex SHA-256 over the exact bit patterns of the pixel data plus dimensions.
pub trait ContentHash {
    fn content_hash(&self) -> String;
}

fn hash_f64s<'a>(width: usize, height: usize, values: impl Iterator<Item = &'a f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((width as u64).to_le_bytes());
    hasher.update((height as u64).to_le_bytes());
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
    to_hex(&hasher.finalize())
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    to_hex(&Sha256::digest(bytes))
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl ContentHash for Image<f64> {
    fn content_hash(&self) -> String {
        hash_f64s(self.width, self.height, self.data.iter())
    }
}

impl<const N: usize> ContentHash for Image<[f64; N]> {
    fn content_hash(&self) -> String {
        hash_f64s(self.width, self.height, self.data.iter().flatten())
    }
}

#[inline]
pub fn to_u8(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn from_u8(v: u8) -> f64 {
    v as f64 / 255.0
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })
}

fn save(path: &Path, bytes: Vec<u8>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn rgb_from_dynamic(img: &image::DynamicImage) -> ImageRgb {
    let owned;
    let rgb = match img.as_rgb8() {
        Some(b) => b,
        None => {
            owned = img.to_rgb8();
            &owned
        }
    };
    let lut = u8_table();
    Image {
        width: rgb.width() as usize,
        height: rgb.height() as usize,
        data: rgb
            .as_raw()
            .chunks_exact(3)
            .map(|p| [lut[p[0] as usize], lut[p[1] as usize], lut[p[2] as usize]])
            .collect(),
    }
}

pub fn rgba_from_dynamic(img: &image::DynamicImage) -> RgbaMask {
    let owned;
    let rgba = match img.as_rgba8() {
        Some(b) => b,
        None => {
            owned = img.to_rgba8();
            &owned
        }
    };
    let lut = u8_table();
    Image {
        width: rgba.width() as usize,
        height: rgba.height() as usize,
        data: rgba
            .as_raw()
            .chunks_exact(4)
            .map(|p| {
                [
                    lut[p[0] as usize],
                    lut[p[1] as usize],
                    lut[p[2] as usize],
                    lut[p[3] as usize],
                ]
            })
            .collect(),
    }
}

/// `from_u8` for every byte value.
fn u8_table() -> [f64; 256] {
    std::array::from_fn(|v| from_u8(v as u8))
}

pub fn gray_from_dynamic(img: &image::DynamicImage) -> AlphaMap {
    let g = img.to_luma8();
    let (w, h) = g.dimensions();
    Image {
        width: w as usize,
        height: h as usize,
        data: g.pixels().map(|p| from_u8(p.0[0])).collect(),
    }
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<ImageRgb> {
    Ok(rgb_from_dynamic(&open(path.as_ref())?))
}

pub fn read_rgba(path: impl AsRef<Path>) -> Result<RgbaMask> {
    Ok(rgba_from_dynamic(&open(path.as_ref())?))
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<AlphaMap> {
    Ok(gray_from_dynamic(&open(path.as_ref())?))
}

pub fn decode_rgb(bytes: &[u8]) -> Result<ImageRgb> {
    Ok(rgb_from_dynamic(&image::load_from_memory(bytes)?))
}

pub fn decode_rgba(bytes: &[u8]) -> Result<RgbaMask> {
    Ok(rgba_from_dynamic(&image::load_from_memory(bytes)?))
}

fn encode(img: image::DynamicImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn encode_rgb(img: &ImageRgb) -> Result<Vec<u8>> {
    let buf = RgbImage::from_fn(img.width as u32, img.height as u32, |x, y| {
        Rgb8(img.get(x as usize, y as usize).map(to_u8))
    });
    encode(buf.into())
}

pub fn encode_rgba(mask: &RgbaMask) -> Result<Vec<u8>> {
    let buf = RgbaImage::from_fn(mask.width as u32, mask.height as u32, |x, y| {
        Rgba8(mask.get(x as usize, y as usize).map(to_u8))
    });
    encode(buf.into())
}

pub fn encode_gray(map: &AlphaMap) -> Result<Vec<u8>> {
    let buf = GrayImage::from_fn(map.width as u32, map.height as u32, |x, y| {
        Luma([to_u8(*map.get(x as usize, y as usize))])
    });
    encode(buf.into())
}

pub fn write_rgb(img: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    save(path.as_ref(), encode_rgb(img)?)
}

pub fn write_rgba(mask: &RgbaMask, path: impl AsRef<Path>) -> Result<()> {
    save(path.as_ref(), encode_rgba(mask)?)
}

pub fn write_gray(map: &AlphaMap, path: impl AsRef<Path>) -> Result<()> {
    save(path.as_ref(), encode_gray(map)?)
}

/// Rounds every channel to the nearest 8-bit level, as a PNG round trip would.
pub fn quantize<const N: usize>(img: &Image<[f64; N]>) -> Image<[f64; N]> {
    img.map(|p| p.map(|v| from_u8(to_u8(v))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(Image::new(2, 2, vec![0.0f64; 3]).is_err());
        assert!(ImageRgb::from_rgb(1, 1, vec![[0.0, 1.2, 0.0]]).is_err());
        assert!(RgbaMask::from_rgba(1, 1, vec![[0.0, 0.0, 0.0, -0.1]]).is_err());
    }

    #[test]
    fn quantization_rounds_half_up() {
        assert_eq!(to_u8(0.5 / 255.0), 1);
        assert_eq!(to_u8(0.49 / 255.0), 0);
        assert_eq!(to_u8(1.0), 255);
        assert_eq!(to_u8(-0.2), 0);
        for v in 0..=255u8 {
            assert_eq!(to_u8(from_u8(v)), v);
        }
    }

    #[test]
    fn png_round_trip_is_lossless_on_8bit_levels() {
        let img = ImageRgb::from_fn(5, 3, |x, y| {
            [
                from_u8((x * 40) as u8),
                from_u8((y * 70) as u8),
                from_u8(17),
            ]
        });
        let back = decode_rgb(&encode_rgb(&img).unwrap()).unwrap();
        assert_eq!(back, img);

        let mask = RgbaMask::from_fn(4, 4, |x, y| {
            [from_u8(x as u8), 0.0, 1.0, from_u8((y * 60) as u8)]
        });
        let back = decode_rgba(&encode_rgba(&mask).unwrap()).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn hash_sees_single_bit_changes() {
        let a = RgbaMask::transparent(3, 3);
        let mut b = a.clone();
        b.pixels_mut()[4][2] = f64::from_bits(1);
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), a.clone().content_hash());
    }
}
