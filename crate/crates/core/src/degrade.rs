//! Forward degradation model: cyclic blur, decimation and additive noise.
//!
//! A low-resolution observation is `y = S H x + n`, where `H` is a cyclic
//! convolution with a point spread function, `S` keeps every `d`-th sample in
//! both directions starting at phase `(0, 0)`, and `n` is white Gaussian noise.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imagecore::{Dims, Image};

/// Point spread function: a small normalized kernel and its anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    kernel: Vec<f64>,
    dims: Dims,
    anchor: (usize, usize),
}

impl Psf {
    /// Kernel must already sum to one (within 1e-12).
    pub fn new(kernel: Vec<f64>, dims: Dims, anchor: (usize, usize)) -> Result<Self> {
        if dims.is_empty() || kernel.len() != dims.len() {
            return Err(Error::InvalidParameter(format!(
                "psf of dims {dims} needs {} weights, got {}",
                dims.len(),
                kernel.len()
            )));
        }
        if anchor.0 >= dims.height || anchor.1 >= dims.width {
            return Err(Error::InvalidParameter(format!(
                "psf anchor {anchor:?} outside kernel {dims}"
            )));
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("psf weights must be finite".into()));
        }
        let sum: f64 = kernel.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "psf weights must sum to 1, got {sum}"
            )));
        }
        Ok(Psf {
            kernel,
            dims,
            anchor,
        })
    }

    /// Normalizes arbitrary non-negative-sum weights and uses the centered
    /// anchor.
    pub fn from_weights(weights: Vec<f64>, dims: Dims) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "psf weights must have a positive finite sum, got {sum}"
            )));
        }
        let kernel = weights.into_iter().map(|w| w / sum).collect();
        Psf::new(kernel, dims, default_anchor(dims))
    }

    pub fn delta() -> Self {
        Psf {
            kernel: vec![1.0],
            dims: Dims::new(1, 1),
            anchor: (0, 0),
        }
    }

    /// `k x k` box filter.
    pub fn average(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("average psf size must be >= 1".into()));
        }
        let dims = Dims::new(k, k);
        let w = 1.0 / (k * k) as f64;
        Psf::new(vec![w; k * k], dims, default_anchor(dims))
    }

    /// `k x k` sampled isotropic Gaussian, normalized.
    pub fn gaussian(k: usize, sigma: f64) -> Result<Self> {
        if k == 0 || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian psf needs k >= 1 and sigma > 0, got k={k} sigma={sigma}"
            )));
        }
        let center = (k as f64 - 1.0) / 2.0;
        let mut weights = Vec::with_capacity(k * k);
        for r in 0..k {
            for c in 0..k {
                let dr = r as f64 - center;
                let dc = c as f64 - center;
                weights.push((-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp());
            }
        }
        Psf::from_weights(weights, Dims::new(k, k))
    }

    /// Whitespace-separated weights, one kernel row per line, normalized to
    /// sum to one. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(format!("psf line {}", i + 1), e.to_string()))?;
            if rows.first().is_some_and(|r| r.len() != row.len()) {
                return Err(Error::parse(format!("psf line {}", i + 1), "ragged kernel rows"));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Empty("psf file has no weights".into()));
        }
        let dims = Dims::new(rows.len(), rows[0].len());
        Psf::from_weights(rows.concat(), dims)
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.kernel[self.dims.index(row, col)]
    }

    pub fn fits(&self, image: Dims) -> bool {
        self.dims.height <= image.height && self.dims.width <= image.width
    }

    fn check_fits(&self, image: Dims) -> Result<()> {
        if !self.fits(image) {
            return Err(Error::DimensionMismatch(format!(
                "psf {} larger than image {image}",
                self.dims
            )));
        }
        Ok(())
    }
}

fn default_anchor(dims: Dims) -> (usize, usize) {
    ((dims.height - 1) / 2, (dims.width - 1) / 2)
}

impl FromStr for Psf {
    type Err = Error;

    /// `delta`, `avg:K` or `gauss:K:SIGMA`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse(s, "expected delta, avg:K or gauss:K:SIGMA");
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["delta"] => Ok(Psf::delta()),
            ["avg", k] => Psf::average(k.parse().map_err(|_| bad())?),
            ["gauss", k, sigma] => Psf::gaussian(
                k.parse().map_err(|_| bad())?,
                sigma.parse().map_err(|_| bad())?,
            ),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationParams {
    pub psf: Psf,
    pub d: usize,
    pub noise_sigma: f64,
}

impl DegradationParams {
    pub fn new(psf: Psf, d: usize, noise_sigma: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("scaling factor must be >= 1".into()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        Ok(DegradationParams { psf, d, noise_sigma })
    }

    /// Noise-free copy, as used for dictionary construction.
    pub fn noiseless(&self) -> Self {
        DegradationParams {
            noise_sigma: 0.0,
            ..self.clone()
        }
    }

    /// Copy with a different noise level.
    pub fn with_noise(&self, noise_sigma: f64) -> Self {
        DegradationParams {
            noise_sigma: noise_sigma.max(0.0),
            ..self.clone()
        }
    }

    pub fn validate_for(&self, hr: Dims) -> Result<()> {
        check_divisible(hr, self.d)?;
        self.psf.check_fits(hr)
    }

    pub fn lr_dims(&self, hr: Dims) -> Result<Dims> {
        check_divisible(hr, self.d)?;
        Ok(Dims::new(hr.height / self.d, hr.width / self.d))
    }
}

fn check_divisible(dims: Dims, d: usize) -> Result<()> {
    if d == 0 || !dims.height.is_multiple_of(d) || !dims.width.is_multiple_of(d) {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims} not divisible by scaling factor {d}"
        )));
    }
    Ok(())
}

/// Cyclic convolution: `out(p) = sum_k psf(k) * image((p - k + anchor) mod dims)`.
pub fn blur_cyclic(image: &Image, psf: &Psf) -> Result<Image> {
    image.require_single_channel("blur_cyclic")?;
    psf.check_fits(image.dims())?;
    Ok(convolve(image, psf, false))
}

/// Adjoint of [`blur_cyclic`]: cyclic correlation with the same kernel.
pub fn blur_adjoint(image: &Image, psf: &Psf) -> Result<Image> {
    image.require_single_channel("blur_adjoint")?;
    psf.check_fits(image.dims())?;
    Ok(convolve(image, psf, true))
}

fn convolve(image: &Image, psf: &Psf, adjoint: bool) -> Image {
    let dims = image.dims();
    let (h, w) = (dims.height as isize, dims.width as isize);
    let (ar, ac) = (psf.anchor.0 as isize, psf.anchor.1 as isize);
    let src = image.data();
    let mut out = vec![0.0; dims.len()];
    for kr in 0..psf.dims.height {
        for kc in 0..psf.dims.width {
            let wgt = psf.weight(kr, kc);
            if wgt == 0.0 {
                continue;
            }
            // forward reads at p - k + anchor, adjoint at p + k - anchor
            let (dr, dc) = if adjoint {
                (kr as isize - ar, kc as isize - ac)
            } else {
                (ar - kr as isize, ac - kc as isize)
            };
            for r in 0..h {
                let sr = (r + dr).rem_euclid(h) as usize;
                let row_out = &mut out[(r as usize) * dims.width..(r as usize + 1) * dims.width];
                let row_in = &src[sr * dims.width..(sr + 1) * dims.width];
                for c in 0..w {
                    let sc = (c + dc).rem_euclid(w) as usize;
                    row_out[c as usize] += wgt * row_in[sc];
                }
            }
        }
    }
    Image::from_plane(dims, out).expect("sized from input")
}

/// Keep samples at rows and columns congruent to 0 mod `d`.
pub fn decimate(image: &Image, d: usize) -> Result<Image> {
    image.require_single_channel("decimate")?;
    let dims = image.dims();
    check_divisible(dims, d)?;
    let lr = Dims::new(dims.height / d, dims.width / d);
    Ok(Image::from_fn(lr, |r, c| image.get(r * d, c * d)))
}

/// Adjoint of [`decimate`]: place samples on the phase-(0,0) lattice of a
/// `d`-times larger grid, zeros elsewhere.
pub fn zero_interpolate(image: &Image, d: usize) -> Result<Image> {
    image.require_single_channel("zero_interpolate")?;
    if d == 0 {
        return Err(Error::InvalidParameter("scaling factor must be >= 1".into()));
    }
    let lr = image.dims();
    let hr = Dims::new(lr.height * d, lr.width * d);
    Ok(Image::from_fn(hr, |r, c| {
        if r % d == 0 && c % d == 0 {
            image.get(r / d, c / d)
        } else {
            0.0
        }
    }))
}

/// `S H x + n` applied to every channel. `seed` drives the noise generator
/// and is ignored when `noise_sigma == 0`.
pub fn degrade(image: &Image, params: &DegradationParams, seed: u64) -> Result<Image> {
    params.validate_for(image.dims())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if params.noise_sigma > 0.0 {
        Some(Normal::new(0.0, params.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let planes = (0..image.channels())
        .map(|c| {
            let blurred = convolve(&image.channel(c), &params.psf, false);
            let lr = decimate(&blurred, params.d)?;
            Ok(match &noise {
                Some(dist) => lr.map(|v| v + dist.sample(&mut rng)),
                None => lr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Image::from_channels(&planes)
}

/// Position, in high-resolution pixel units, of low-resolution sample
/// `(0, 0)` relative to high-resolution pixel `(0, 0)`: the anchor minus the
/// kernel centroid. Bicubic baselines use it to register the upscaled grid.
pub fn sampling_phase(psf: &Psf) -> (f64, f64) {
    let (mut cr, mut cc) = (0.0, 0.0);
    for r in 0..psf.dims.height {
        for c in 0..psf.dims.width {
            let w = psf.weight(r, c);
            cr += w * r as f64;
            cc += w * c as f64;
        }
    }
    (psf.anchor.0 as f64 - cr, psf.anchor.1 as f64 - cc)
}

/// Explicit dense matrices for the operators above. Test-scale only.
pub mod dense {
    use nalgebra::DMatrix;
    use rustfft::num_complex::Complex64;

    use super::*;

    pub const MAX_DENSE_PIXELS: usize = 4096;

    fn guard(m: usize) -> Result<()> {
        if m > MAX_DENSE_PIXELS {
            return Err(Error::InvalidParameter(format!(
                "dense operators limited to {MAX_DENSE_PIXELS} pixels, got {m}"
            )));
        }
        Ok(())
    }

    /// `(H, S)` with `H` column `j` = vec(blur(e_j)) and `S` selecting the
    /// kept samples in row-major order.
    pub fn dense_operators(psf: &Psf, hr: Dims, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let m_h = hr.len();
        guard(m_h)?;
        check_divisible(hr, d)?;
        psf.check_fits(hr)?;
        let lr = Dims::new(hr.height / d, hr.width / d);

        let mut h = DMatrix::zeros(m_h, m_h);
        for j in 0..m_h {
            let mut e = vec![0.0; m_h];
            e[j] = 1.0;
            let col = convolve(&Image::from_plane(hr, e)?, psf, false);
            h.set_column(j, &nalgebra::DVector::from_column_slice(col.data()));
        }

        let mut s = DMatrix::zeros(lr.len(), m_h);
        for r in 0..lr.height {
            for c in 0..lr.width {
                s[(lr.index(r, c), hr.index(r * d, c * d))] = 1.0;
            }
        }
        Ok((h, s))
    }

    /// Unitary 2D DFT matrix acting on row-major vectorized images.
    pub fn dft_matrix(dims: Dims) -> Result<DMatrix<Complex64>> {
        let m = dims.len();
        guard(m)?;
        let norm = 1.0 / (m as f64).sqrt();
        let (h, w) = (dims.height as f64, dims.width as f64);
        Ok(DMatrix::from_fn(m, m, |k, p| {
            let (u, v) = ((k / dims.width) as f64, (k % dims.width) as f64);
            let (i, j) = ((p / dims.width) as f64, (p % dims.width) as f64);
            let phase = -2.0 * std::f64::consts::PI * (u * i / h + v * j / w);
            Complex64::from_polar(norm, phase)
        }))
    }
}
