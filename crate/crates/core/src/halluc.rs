//! Alternating hallucination solver and sparse-representation classification.
//!
//! The solver alternates
//!
//! ```text
//! x     <- argmin_x ||y - S H x||^2 + 2 mu ||x - D_h a||^2      (closed form)
//! alpha <- argmin_a ||x - D_h a||^2 + lambda ||a||_1           (warm-started)
//! ```
//!
//! starting from `alpha_0 = argmin_a ||y - D_l a||^2 + lambda ||a||_1`. Both
//! steps are exact block minimizers of
//!
//! ```text
//! G(x, a) = ||y - S H x||^2 + 2 mu ||x - D_h a||^2 + 2 mu lambda ||a||_1
//! ```
//!
//! so `G` is what the objective trace records (see [`ObjectiveWeights`]).
//! The weighting `||y - SHx||^2 + mu ||x - D_h a||^2 + lambda ||a||_1` is
//! available through [`ObjectiveWeights::nominal`].
//!
//! The degradation that produced `y` cannot be checked against the
//! dictionary's; a mismatch silently degrades the result.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::degrade::{self, sampling_phase};
use crate::dictionary::DictionaryPair;
use crate::error::{Error, Result};
use crate::freqsolve::{build_spectral, x_update, SpectralOperator};
use crate::imagecore::{devectorize, upscale_bicubic, Image, Mask};
use crate::metrics::psnr;
use crate::sparse::{L1Options, SparseCode, SparseCoder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HallucinationParams {
    pub mu: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub sparse_opts: L1Options,
    /// Clip the returned image to `[0, 255]`. Iterates are never clipped.
    pub clip_output: bool,
}

impl Default for HallucinationParams {
    fn default() -> Self {
        HallucinationParams {
            mu: 1e-8,
            lambda: 2700.0,
            iterations: 30,
            sparse_opts: L1Options::default(),
            clip_output: true,
        }
    }
}

impl HallucinationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Weights of `||y - SHx||^2 + prior ||x - D_h a||^2 + l1 ||a||_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub prior: f64,
    pub l1: f64,
}

impl ObjectiveWeights {
    /// `(mu, lambda)`.
    pub fn nominal(params: &HallucinationParams) -> Self {
        ObjectiveWeights {
            prior: params.mu,
            l1: params.lambda,
        }
    }

    /// `(2 mu, 2 mu lambda)`: the function the alternation actually descends.
    pub fn effective(params: &HallucinationParams) -> Self {
        ObjectiveWeights {
            prior: 2.0 * params.mu,
            l1: 2.0 * params.mu * params.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HallucinationResult {
    pub x_hat: Image,
    pub alpha_hat: SparseCode,
    /// Effective objective after each of the `T` rounds, before clipping.
    pub objective_trace: Vec<f64>,
    /// PSNR of each round's (clipped) estimate against the ground truth.
    pub per_iteration_psnr: Option<Vec<f64>>,
}

fn prior_image(pair: &DictionaryPair, alpha: &DVector<f64>) -> Image {
    devectorize((pair.d_h() * alpha).as_slice(), pair.hr_dims()).expect("sized from dictionary")
}

/// Objective value evaluated with the spatial forward model.
pub fn objective(
    x: &Image,
    alpha: &DVector<f64>,
    y: &Image,
    pair: &DictionaryPair,
    weights: ObjectiveWeights,
) -> Result<f64> {
    if x.dims() != pair.hr_dims() || y.dims() != pair.lr_dims() || alpha.len() != pair.n_atoms() {
        return Err(Error::DimensionMismatch(format!(
            "objective expects x {}, y {}, alpha {}; got {}, {}, {}",
            pair.hr_dims(),
            pair.lr_dims(),
            pair.n_atoms(),
            x.dims(),
            y.dims(),
            alpha.len()
        )));
    }
    let degradation = pair.degradation();
    let shx = degrade::decimate(&degrade::blur_cyclic(x, &degradation.psf)?, degradation.d)?;
    let data: f64 = y.data().iter().zip(shx.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    let prior = (DVector::from_column_slice(x.data()) - pair.d_h() * alpha).norm_squared();
    Ok(data + weights.prior * prior + weights.l1 * alpha.lp_norm(1))
}

/// Reusable solver state for one dictionary: the spectral operator and the
/// Gram matrices of `D_h` and `D_l`. Safe to share across threads.
pub struct Hallucinator<'a> {
    pair: &'a DictionaryPair,
    op: SpectralOperator,
    coder_h: SparseCoder<'a>,
    coder_l: SparseCoder<'a>,
}

/// Optional inputs of [`Hallucinator::run`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'r> {
    /// LR pixels to trust; others are zeroed in `y` and in the rows of `D_l`
    /// used for the initial code.
    pub mask: Option<&'r Mask>,
    pub ground_truth: Option<&'r Image>,
}

impl<'a> Hallucinator<'a> {
    pub fn new(pair: &'a DictionaryPair) -> Result<Self> {
        let degradation = pair.degradation();
        Ok(Hallucinator {
            pair,
            op: build_spectral(&degradation.psf, pair.hr_dims(), degradation.d)?,
            coder_h: SparseCoder::new(pair.d_h())?,
            coder_l: SparseCoder::new(pair.d_l())?,
        })
    }

    pub fn pair(&self) -> &DictionaryPair {
        self.pair
    }

    pub fn spectral(&self) -> &SpectralOperator {
        &self.op
    }

    pub fn run(
        &self,
        y: &Image,
        params: &HallucinationParams,
        opts: RunOptions<'_>,
    ) -> Result<HallucinationResult> {
        params.validate()?;
        y.require_single_channel("hallucinate")?;
        if y.dims() != self.pair.lr_dims() {
            return Err(Error::DimensionMismatch(format!(
                "input is {} but the dictionary expects {}",
                y.dims(),
                self.pair.lr_dims()
            )));
        }
        if let Some(gt) = opts.ground_truth {
            if gt.dims() != self.pair.hr_dims() || gt.channels() != 1 {
                return Err(Error::DimensionMismatch(format!(
                    "ground truth must be single-channel {}",
                    self.pair.hr_dims()
                )));
            }
        }
        let labels = self.pair.labels();

        let (y, mut alpha) = match opts.mask {
            None => {
                let target = DVector::from_column_slice(y.data());
                let code = self.coder_l.solve(&target, params.lambda, &params.sparse_opts, None)?;
                (y.clone(), code.alpha)
            }
            Some(mask) => {
                let y = mask.apply(y)?;
                let mut d_l: DMatrix<f64> = self.pair.d_l().clone();
                for (row, &keep) in mask.keep().iter().enumerate() {
                    if !keep {
                        d_l.row_mut(row).fill(0.0);
                    }
                }
                let coder = SparseCoder::new(&d_l)?;
                let target = DVector::from_column_slice(y.data());
                let code = coder.solve(&target, params.lambda, &params.sparse_opts, None)?;
                (y, code.alpha)
            }
        };

        let weights = ObjectiveWeights::effective(params);
        let mut trace = Vec::with_capacity(params.iterations);
        let mut psnrs = opts.ground_truth.map(|_| Vec::with_capacity(params.iterations));
        let mut x = prior_image(self.pair, &alpha);
        let mut code = None;
        for _ in 0..params.iterations {
            x = x_update(&y, &prior_image(self.pair, &alpha), &self.op, params.mu)?;
            let target = DVector::from_column_slice(x.data());
            let c = self
                .coder_h
                .solve(&target, params.lambda, &params.sparse_opts, Some(&alpha))?;
            alpha = c.alpha.clone();
            code = Some(c);
            trace.push(objective(&x, &alpha, &y, self.pair, weights)?);
            if let (Some(p), Some(gt)) = (psnrs.as_mut(), opts.ground_truth) {
                p.push(psnr(&x.clamped(), gt, 255.0)?);
            }
        }
        if trace.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("objective became non-finite".into()));
        }
        let x_hat = if params.clip_output { x.clamped() } else { x };
        Ok(HallucinationResult {
            x_hat,
            alpha_hat: code.expect("at least one iteration").with_labels(labels),
            objective_trace: trace,
            per_iteration_psnr: psnrs,
        })
    }
}

/// One-shot hallucination of a single-channel LR face.
pub fn hallucinate(
    y: &Image,
    pair: &DictionaryPair,
    params: &HallucinationParams,
) -> Result<HallucinationResult> {
    Hallucinator::new(pair)?.run(y, params, RunOptions::default())
}

/// Phase-aware bicubic upscaling of `y` to the dictionary's HR grid.
pub fn bicubic_baseline(y: &Image, pair: &DictionaryPair) -> Image {
    let degradation = pair.degradation();
    upscale_bicubic(y, degradation.d, sampling_phase(&degradation.psf))
}

/// Space in which SRC class residuals are measured.
#[derive(Debug, Clone, Copy)]
pub enum ResidualSpace<'y> {
    /// `||D_h a - D_h delta_c(a)||`.
    HighRes,
    /// `||y - D_l delta_c(a)||` against the LR observation.
    LowRes(&'y Image),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrcDecision {
    pub subject: u32,
    /// `(class id, residual)` in ascending class id order.
    pub residuals: Vec<(u32, f64)>,
}

impl SrcDecision {
    /// Class ids by ascending residual, ties by lower id.
    pub fn ranking(&self) -> Vec<u32> {
        let mut r = self.residuals.clone();
        r.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        r.into_iter().map(|(c, _)| c).collect()
    }

    /// Zero-based rank of `subject`, if it is a known class.
    pub fn rank_of(&self, subject: u32) -> Option<usize> {
        self.ranking().iter().position(|&c| c == subject)
    }
}

/// Sparse-representation classification from a final code. The class with
/// the smallest residual wins; ties go to the lowest class id.
pub fn classify_src(
    alpha: &DVector<f64>,
    pair: &DictionaryPair,
    space: ResidualSpace<'_>,
) -> Result<SrcDecision> {
    let labels = pair.labels();
    if alpha.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "code of length {} for {} atoms",
            alpha.len(),
            labels.len()
        )));
    }
    let classes: BTreeMap<u32, ()> = labels.iter().map(|&l| (l, ())).collect();
    if classes.is_empty() {
        return Err(Error::Empty("dictionary has no classes".into()));
    }
    let keep_class = |c: u32| {
        DVector::from_iterator(
            alpha.len(),
            alpha.iter().zip(labels).map(|(&a, &l)| if l == c { a } else { 0.0 }),
        )
    };
    let residuals: Vec<(u32, f64)> = match space {
        ResidualSpace::HighRes => classes
            .keys()
            .map(|&c| {
                let others = alpha - keep_class(c);
                (c, (pair.d_h() * others).norm())
            })
            .collect(),
        ResidualSpace::LowRes(y) => {
            if y.dims() != pair.lr_dims() || y.channels() != 1 {
                return Err(Error::DimensionMismatch(format!(
                    "LR residuals need a single-channel {} observation",
                    pair.lr_dims()
                )));
            }
            let y = DVector::from_column_slice(y.data());
            classes
                .keys()
                .map(|&c| (c, (&y - pair.d_l() * keep_class(c)).norm()))
                .collect()
        }
    };
    let mut best = residuals[0];
    for &r in &residuals[1..] {
        if r.1 < best.1 {
            best = r;
        }
    }
    Ok(SrcDecision {
        subject: best.0,
        residuals,
    })
}
