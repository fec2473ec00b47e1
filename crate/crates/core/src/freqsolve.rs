//! Closed-form frequency-domain solution of the data-fit subproblem
//!
//! ```text
//! x = argmin ||y - S H x||^2 + 2 mu ||x - p||^2
//!   = (H^T S^T S H + 2 mu I)^-1 (H^T S^T y + 2 mu p)
//! ```
//!
//! With `H` cyclic, `H = F^H L F` for a diagonal `L` (the OTF), and decimation
//! folds the high-resolution spectrum onto the low-resolution grid: frequency
//! `(u, v)` aliases onto `(u mod h_l, v mod w_l)`. Writing `B` for that
//! folding sum, `F S^T S F^H = B^T B / d^2` and `B L L^H B^T` is diagonal with
//! entries `g = sum over each alias coset of |otf|^2`. The Woodbury identity
//! then reduces the `m_h x m_h` inverse to an elementwise division by
//! `2 mu d^2 + g` on the low-resolution grid.
//!
//! The solver evaluates the Woodbury expression in the equivalent form
//! `x = p + F^H L^H B^T [d * F(y - S H p) / (2 mu d^2 + g)]`, which never
//! divides by `mu` and stays accurate for the tiny `mu` used in practice.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::degrade::{self, dense, Psf};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::imagecore::{Dims, Image};

const IMAG_RESIDUE_LIMIT: f64 = 1e-6;

/// Diagonal of the blur operator in the (unitary) 2D DFT basis: the DFT of
/// the zero-padded PSF, circularly shifted so the anchor sits at `(0, 0)`.
pub fn psf_to_otf(psf: &Psf, hr: Dims) -> Result<Vec<Complex64>> {
    if !psf.fits(hr) {
        return Err(Error::DimensionMismatch(format!(
            "psf {} does not fit in {hr}",
            psf.dims()
        )));
    }
    let (ar, ac) = psf.anchor();
    let mut padded = vec![0.0; hr.len()];
    for r in 0..psf.dims().height {
        for c in 0..psf.dims().width {
            let pr = (r as isize - ar as isize).rem_euclid(hr.height as isize) as usize;
            let pc = (c as isize - ac as isize).rem_euclid(hr.width as isize) as usize;
            padded[hr.index(pr, pc)] += psf.weight(r, c);
        }
    }
    // unitary DFT scaled back by sqrt(N) is the plain DFT
    let scale = (hr.len() as f64).sqrt();
    let mut otf = Fft2::new(hr).forward_real(&padded);
    otf.iter_mut().for_each(|v| *v *= scale);
    Ok(otf)
}

/// Cached spectral quantities for one `(psf, hr_dims, d)` triple.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    hr_dims: Dims,
    lr_dims: Dims,
    d: usize,
    otf: Vec<Complex64>,
    block_gram: Vec<f64>,
    fft_hr: Fft2,
    fft_lr: Fft2,
}

impl SpectralOperator {
    pub fn hr_dims(&self) -> Dims {
        self.hr_dims
    }

    pub fn lr_dims(&self) -> Dims {
        self.lr_dims
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// OTF on the high-resolution frequency grid, row-major.
    pub fn otf(&self) -> &[Complex64] {
        &self.otf
    }

    /// `diag(L_ L_^H)` on the low-resolution frequency grid, row-major.
    pub fn block_gram(&self) -> &[f64] {
        &self.block_gram
    }

    /// Low-resolution frequency index that HR frequency `k` folds onto.
    #[inline]
    fn alias_of(&self, k: usize) -> usize {
        let (u, v) = (k / self.hr_dims.width, k % self.hr_dims.width);
        self.lr_dims
            .index(u % self.lr_dims.height, v % self.lr_dims.width)
    }

    fn forward_model(&self, x_hat: &[Complex64]) -> Result<Image> {
        // S H x from the spectrum of x
        let mut hx: Vec<Complex64> = x_hat.iter().zip(&self.otf).map(|(a, b)| a * b).collect();
        self.fft_hr.inverse(&mut hx);
        let blurred = real_part(hx, self.hr_dims)?;
        degrade::decimate(&blurred, self.d)
    }
}

/// Builds the OTF and its folded energy `g(u, v) = sum_{a,b} |otf(u + a h_l, v + b w_l)|^2`.
pub fn build_spectral(psf: &Psf, hr: Dims, d: usize) -> Result<SpectralOperator> {
    if d == 0 || !hr.height.is_multiple_of(d) || !hr.width.is_multiple_of(d) {
        return Err(Error::DimensionMismatch(format!(
            "dims {hr} not divisible by scaling factor {d}"
        )));
    }
    let lr = Dims::new(hr.height / d, hr.width / d);
    let otf = psf_to_otf(psf, hr)?;
    let mut op = SpectralOperator {
        hr_dims: hr,
        lr_dims: lr,
        d,
        otf,
        block_gram: vec![0.0; lr.len()],
        fft_hr: Fft2::new(hr),
        fft_lr: Fft2::new(lr),
    };
    for k in 0..hr.len() {
        let a = op.alias_of(k);
        op.block_gram[a] += op.otf[k].norm_sqr();
    }
    Ok(op)
}

fn real_part(buf: Vec<Complex64>, dims: Dims) -> Result<Image> {
    let worst = buf.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    if worst > IMAG_RESIDUE_LIMIT {
        return Err(Error::Internal(format!(
            "spectral result has imaginary residue {worst:e}"
        )));
    }
    Image::from_plane(dims, buf.into_iter().map(|v| v.re).collect())
}

fn check_inputs(y: &Image, prior: &Image, op: &SpectralOperator, mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive and finite, got {mu} (mu = 0 leaves the system singular)"
        )));
    }
    y.require_single_channel("x_update")?;
    prior.require_single_channel("x_update")?;
    if y.dims() != op.lr_dims || prior.dims() != op.hr_dims {
        return Err(Error::DimensionMismatch(format!(
            "x_update expects y {} and prior {}, got {} and {}",
            op.lr_dims,
            op.hr_dims,
            y.dims(),
            prior.dims()
        )));
    }
    Ok(())
}

/// Closed-form minimizer of `||y - S H x||^2 + 2 mu ||x - prior||^2`.
pub fn x_update(y: &Image, prior: &Image, op: &SpectralOperator, mu: f64) -> Result<Image> {
    check_inputs(y, prior, op, mu)?;
    let d = op.d as f64;
    let p_hat = op.fft_hr.forward_real(prior.data());

    let shp = op.forward_model(&p_hat)?;
    let resid: Vec<f64> = y.data().iter().zip(shp.data()).map(|(a, b)| a - b).collect();
    let mut folded = op.fft_lr.forward_real(&resid);
    let shift = 2.0 * mu * d * d;
    for (z, g) in folded.iter_mut().zip(&op.block_gram) {
        *z *= d / (shift + g);
    }

    let mut x_hat = p_hat;
    for (k, xk) in x_hat.iter_mut().enumerate() {
        *xk += op.otf[k].conj() * folded[op.alias_of(k)];
    }
    op.fft_hr.inverse(&mut x_hat);
    real_part(x_hat, op.hr_dims)
}

/// Direct evaluation of `(r - F^H L_^H (2 mu d^2 I + L_ L_^H)^-1 L_ F r) / 2mu`
/// with `r = H^T S^T y + 2 mu p`. Loses about `eps / mu` of relative accuracy;
/// kept to cross-check the rearranged form.
#[cfg(test)]
pub(crate) fn x_update_woodbury_literal(
    y: &Image,
    prior: &Image,
    op: &SpectralOperator,
    mu: f64,
) -> Result<Image> {
    check_inputs(y, prior, op, mu)?;
    let d = op.d as f64;
    let up = degrade::zero_interpolate(y, op.d)?;
    let up_hat = op.fft_hr.forward_real(up.data());
    let p_hat = op.fft_hr.forward_real(prior.data());
    let r_hat: Vec<Complex64> = (0..op.hr_dims.len())
        .map(|k| op.otf[k].conj() * up_hat[k] + 2.0 * mu * p_hat[k])
        .collect();
    let mut folded = vec![Complex64::default(); op.lr_dims.len()];
    for k in 0..r_hat.len() {
        folded[op.alias_of(k)] += op.otf[k] * r_hat[k];
    }
    for (z, g) in folded.iter_mut().zip(&op.block_gram) {
        *z /= 2.0 * mu * d * d + g;
    }
    let mut x_hat: Vec<Complex64> = (0..r_hat.len())
        .map(|k| (r_hat[k] - op.otf[k].conj() * folded[op.alias_of(k)]) / (2.0 * mu))
        .collect();
    op.fft_hr.inverse(&mut x_hat);
    real_part(x_hat, op.hr_dims)
}

/// Dense reference solve of `(H^T S^T S H + 2 mu I) x = H^T S^T y + 2 mu p`.
///
/// LU factorization followed by iterative refinement whose residual is
/// evaluated against the exact operator in compensated arithmetic, so the
/// result stays accurate even when `mu` makes the system badly conditioned.
/// Limited to `m_h <= 4096`.
pub fn x_update_dense_oracle(y: &Image, prior: &Image, psf: &Psf, d: usize, mu: f64) -> Result<Image> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let hr = prior.dims();
    let (h, s) = dense::dense_operators(psf, hr, d)?;
    if y.dims() != Dims::new(hr.height / d, hr.width / d) {
        return Err(Error::DimensionMismatch(format!(
            "y is {} but prior {hr} with d={d} implies {}x{}",
            y.dims(),
            hr.height / d,
            hr.width / d
        )));
    }
    let k = &s * &h;
    let kt = k.transpose();
    let m = hr.len();
    let two_mu = 2.0 * mu;
    let a = &kt * &k + DMatrix::identity(m, m) * two_mu;
    let yv = DVector::from_column_slice(y.data());
    let pv = DVector::from_column_slice(prior.data());
    let b = &kt * &yv + &pv * two_mu;

    let lu = a.lu();
    let mut x = lu
        .solve(&b)
        .ok_or_else(|| Error::Internal("dense system is singular".into()))?;

    for _ in 0..8 {
        let r = compensated::normal_residual(&k, &kt, &yv, &pv, two_mu, &x);
        let dx = lu
            .solve(&r)
            .ok_or_else(|| Error::Internal("dense system is singular".into()))?;
        x += &dx;
        if dx.norm() <= f64::EPSILON * x.norm() {
            break;
        }
    }
    Image::from_plane(hr, x.as_slice().to_vec())
}

mod compensated {
    use nalgebra::{DMatrix, DVector};

    #[inline]
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    #[inline]
    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        (p, a.mul_add(b, -p))
    }

    /// Sum of products in roughly twice the working precision, returned as
    /// an unevaluated `(hi, lo)` pair.
    fn dot2(terms: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
        let (mut s, mut c) = (0.0, 0.0);
        for (a, b) in terms {
            let (p, ep) = two_prod(a, b);
            let (ns, es) = two_sum(s, p);
            s = ns;
            c += ep + es;
        }
        two_sum(s, c)
    }

    /// `K^T (y - K x) + 2mu (p - x)` with every intermediate kept in
    /// double-double.
    pub(super) fn normal_residual(
        k: &DMatrix<f64>,
        kt: &DMatrix<f64>,
        y: &DVector<f64>,
        p: &DVector<f64>,
        two_mu: f64,
        x: &DVector<f64>,
    ) -> DVector<f64> {
        let (rows, cols) = k.shape();
        let e: Vec<(f64, f64)> = (0..rows)
            .map(|i| {
                let terms = std::iter::once((y[i], 1.0)).chain((0..cols).map(|j| (-k[(i, j)], x[j])));
                dot2(terms)
            })
            .collect();
        DVector::from_fn(cols, |j, _| {
            let terms = (0..rows)
                .flat_map(|i| [(kt[(j, i)], e[i].0), (kt[(j, i)], e[i].1)])
                .chain([(two_mu, p[j]), (-two_mu, x[j])]);
            let (hi, lo) = dot2(terms);
            hi + lo
        })
    }
}
