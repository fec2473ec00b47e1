//! Image container, file I/O and the row-major vectorization used throughout
//! the crate.
//!
//! Intensities live on the 8-bit scale `[0, 255]` as `f64`. Multi-channel
//! images are stored planar (all of channel 0, then channel 1, ...), each
//! plane in row-major order. The same row-major scan is used for dictionary
//! columns and for every frequency-domain index, so a vectorized image can be
//! moved between modules without reordering.

use std::path::Path;

use ::image::{DynamicImage, GrayImage, ImageReader, RgbImage};
use nalgebra::DVector;

use crate::error::{Error, Result};

/// Height and width of a 2D grid, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub const fn new(height: usize, width: usize) -> Self {
        Dims { height, width }
    }

    /// Number of pixels in one plane.
    pub const fn len(&self) -> usize {
        self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.height == 0 || self.width == 0
    }

    /// Row-major linear index of `(row, col)`.
    #[inline]
    pub const fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    dims: Dims,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::DimensionMismatch("image size overflows usize".into()))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width}x{channels} image needs {expected} samples, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "image intensities must be finite, found {bad}"
            )));
        }
        Ok(Image {
            dims: Dims::new(height, width),
            channels,
            data,
        })
    }

    /// Single-channel image from a row-major plane.
    pub fn from_plane(dims: Dims, data: Vec<f64>) -> Result<Self> {
        Image::new(dims.height, dims.width, 1, data)
    }

    pub fn zeros(dims: Dims, channels: usize) -> Self {
        Image {
            dims,
            channels,
            data: vec![0.0; dims.len() * channels],
        }
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Image {
            dims,
            channels: 1,
            data: vec![value; dims.len()],
        }
    }

    /// Single-channel image with `f(row, col)` at every pixel.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for r in 0..dims.height {
            for c in 0..dims.width {
                data.push(f(r, c));
            }
        }
        Image {
            dims,
            channels: 1,
            data,
        }
    }

    /// Stack single-channel planes into one image.
    pub fn from_channels(planes: &[Image]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Empty("no channel planes".into()))?;
        let mut data = Vec::with_capacity(first.dims.len() * planes.len());
        for p in planes {
            if p.dims != first.dims || p.channels != 1 {
                return Err(Error::DimensionMismatch(
                    "channel planes must be single-channel with equal dims".into(),
                ));
            }
            data.extend_from_slice(&p.data);
        }
        Image::new(first.dims.height, first.dims.width, planes.len(), data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// All samples, planar.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.dims.len();
        &self.data[channel * n..(channel + 1) * n]
    }

    /// Sample at `(row, col)` of channel 0.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.dims.index(row, col)]
    }

    /// Extract one channel as a single-channel image.
    pub fn channel(&self, channel: usize) -> Image {
        Image {
            dims: self.dims,
            channels: 1,
            data: self.plane(channel).to_vec(),
        }
    }

    /// Channel average; a no-op copy for single-channel images.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.dims.len();
        let mut data = vec![0.0; n];
        for c in 0..self.channels {
            for (acc, v) in data.iter_mut().zip(self.plane(c)) {
                *acc += v;
            }
        }
        let k = self.channels as f64;
        data.iter_mut().for_each(|v| *v /= k);
        Image {
            dims: self.dims,
            channels: 1,
            data,
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            dims: self.dims,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamped(&self) -> Image {
        self.map(|v| v.clamp(0.0, 255.0))
    }

    pub(crate) fn require_single_channel(&self, what: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::InvalidParameter(format!(
                "{what} expects a single-channel image, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        load_image(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_image(self, path.as_ref())
    }
}

/// One row-major column vector per channel; channels are never interleaved.
pub fn vectorize(image: &Image) -> Vec<DVector<f64>> {
    (0..image.channels)
        .map(|c| DVector::from_column_slice(image.plane(c)))
        .collect()
}

/// Inverse of [`vectorize`] for one channel.
pub fn devectorize(vector: &[f64], dims: Dims) -> Result<Image> {
    if vector.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot be reshaped to {dims}",
            vector.len()
        )));
    }
    Image::from_plane(dims, vector.to_vec())
}

/// Binary pixel mask; `true` marks a pixel that is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    keep: Vec<bool>,
}

impl Mask {
    pub fn new(dims: Dims, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask of {} entries for {dims}",
                keep.len()
            )));
        }
        Ok(Mask { dims, keep })
    }

    pub fn full(dims: Dims) -> Self {
        Mask {
            dims,
            keep: vec![true; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Zeroes masked-out pixels in every channel.
    pub fn apply(&self, image: &Image) -> Result<Image> {
        if image.dims != self.dims {
            return Err(Error::DimensionMismatch(format!(
                "mask is {} but image is {}",
                self.dims,
                image.dims
            )));
        }
        let n = self.dims.len();
        let mut data = image.data.clone();
        for (i, v) in data.iter_mut().enumerate() {
            if !self.keep[i % n] {
                *v = 0.0;
            }
        }
        Ok(Image { data, ..image.clone() })
    }

    /// 255 for kept pixels, 0 elsewhere.
    pub fn to_image(&self) -> Image {
        Image {
            dims: self.dims,
            channels: 1,
            data: self.keep.iter().map(|&k| if k { 255.0 } else { 0.0 }).collect(),
        }
    }

    /// Pixels at or above 128 (channel average) are kept.
    pub fn from_image(image: &Image) -> Mask {
        let gray = image.to_gray();
        Mask {
            dims: gray.dims,
            keep: gray.data.iter().map(|&v| v >= 128.0).collect(),
        }
    }
}

fn load_image(path: &Path) -> Result<Image> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, raw) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        other => {
            return Err(Error::UnsupportedImage(format!(
                "{}: only 8-bit grayscale or RGB is supported, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::DimensionMismatch(format!("{}: dimensions overflow", path.display())))?;

    let n = height * width;
    let mut data = vec![0.0; n * channels];
    for (i, px) in raw.chunks_exact(channels).enumerate() {
        for (c, &b) in px.iter().enumerate() {
            data[c * n + i] = f64::from(b);
        }
    }
    Image::new(height, width, channels, data)
}

fn to_byte(v: f64) -> u8 {
    // f64::round rounds half away from zero
    v.clamp(0.0, 255.0).round() as u8
}

fn save_image(image: &Image, path: &Path) -> Result<()> {
    let (h, w) = (image.height() as u32, image.width() as u32);
    let n = image.dims.len();
    let result = match image.channels {
        1 => {
            let bytes = image.data.iter().map(|&v| to_byte(v)).collect();
            GrayImage::from_raw(w, h, bytes)
                .expect("buffer sized from dims")
                .save(path)
        }
        _ => {
            let mut bytes = Vec::with_capacity(n * 3);
            for i in 0..n {
                for c in 0..3 {
                    bytes.push(to_byte(image.data[c * n + i]));
                }
            }
            RgbImage::from_raw(w, h, bytes)
                .expect("buffer sized from dims")
                .save(path)
        }
    };
    result.map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })
}

fn cubic_weight(t: f64) -> f64 {
    // Keys kernel, a = -0.5
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Bicubic upscaling by an integer factor.
///
/// `phase` is the high-resolution coordinate of low-resolution sample
/// `(0, 0)`; sample `(i, j)` sits at `(d*i + phase.0, d*j + phase.1)`.
/// Borders are replicated.
pub fn upscale_bicubic(image: &Image, d: usize, phase: (f64, f64)) -> Image {
    let src = image.dims;
    let dst = Dims::new(src.height * d, src.width * d);
    let scale = d as f64;
    let taps = |pos: f64, n: usize| -> [(usize, f64); 4] {
        let base = pos.floor();
        let frac = pos - base;
        let mut out = [(0, 0.0); 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let offset = k as isize - 1;
            let idx = (base as isize + offset).clamp(0, n as isize - 1) as usize;
            *slot = (idx, cubic_weight(frac - offset as f64));
        }
        out
    };
    let row_taps: Vec<_> = (0..dst.height)
        .map(|r| taps((r as f64 - phase.0) / scale, src.height))
        .collect();
    let col_taps: Vec<_> = (0..dst.width)
        .map(|c| taps((c as f64 - phase.1) / scale, src.width))
        .collect();

    let planes: Vec<Image> = (0..image.channels)
        .map(|ch| {
            let plane = image.plane(ch);
            Image::from_fn(dst, |r, c| {
                let mut acc = 0.0;
                for &(ri, rw) in &row_taps[r] {
                    for &(ci, cw) in &col_taps[c] {
                        acc += rw * cw * plane[src.index(ri, ci)];
                    }
                }
                acc
            })
        })
        .collect();
    Image::from_channels(&planes).expect("planes share dims")
}
