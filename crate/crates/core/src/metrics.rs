//! Image quality metrics and the neighborhood preservation rate.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::imagecore::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RANGE: f64 = 255.0;

fn same_shape(a: &Image, b: &Image, op: &str) -> Result<()> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch(format!(
            "{op}: {}x{} vs {}x{}",
            a.dims(),
            a.channels(),
            b.dims(),
            b.channels()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over all pixels and channels.
/// Identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    same_shape(a, b, "psnr")?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - r;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable weighted mean over every fully contained window.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..k).map(|t| taps[t] * plane[r * w + c + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..k).map(|t| taps[t] * rows[(r + t) * ow + c]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, taps: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    };
    let mu_a = filter_valid(a, h, w, taps);
    let mu_b = filter_valid(b, h, w, taps);
    let aa = filter_valid(&prod(&|x, _| x * x), h, w, taps);
    let bb = filter_valid(&prod(&|_, y| y * y), h, w, taps);
    let ab = filter_valid(&prod(&|x, y| x * y), h, w, taps);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / mu_a.len() as f64
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) and dynamic
/// range 255, averaged over valid window positions and then over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    same_shape(a, b, "ssim")?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}",
            a.dims()
        )));
    }
    let taps = gaussian_taps();
    let sum: f64 = (0..a.channels())
        .map(|c| ssim_plane(a.plane(c), b.plane(c), h, w, &taps))
        .sum();
    Ok(sum / a.channels() as f64)
}

#[derive(PartialEq)]
struct Neighbor {
    dist: f64,
    index: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Indices of the `k` nearest items to `items[query]` (excluding itself),
/// ties broken by lower index.
pub fn nearest_neighbors(items: &[DVector<f64>], query: usize, k: usize) -> Vec<usize> {
    let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
    let q = &items[query];
    for (index, item) in items.iter().enumerate() {
        if index == query {
            continue;
        }
        let cand = Neighbor {
            dist: (item - q).norm_squared(),
            index,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if heap.peek().is_some_and(|worst| cand < *worst) {
            heap.pop();
            heap.push(cand);
        }
    }
    heap.into_sorted_vec().into_iter().map(|n| n.index).collect()
}

/// Mean over items of the fraction of an item's `k` nearest LR neighbors that
/// are also among its `k` nearest HR neighbors. Distances are Euclidean and
/// an item is never its own neighbor.
pub fn npr(lr_items: &[DVector<f64>], hr_items: &[DVector<f64>], k: usize) -> Result<f64> {
    if lr_items.len() != hr_items.len() {
        return Err(Error::DimensionMismatch(format!(
            "npr: {} LR items vs {} HR items",
            lr_items.len(),
            hr_items.len()
        )));
    }
    let n = lr_items.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "npr: K must be in 1..{n}, got {k}"
        )));
    }
    let total: f64 = (0..n)
        .map(|i| {
            let hr: HashSet<usize> = nearest_neighbors(hr_items, i, k).into_iter().collect();
            let shared = nearest_neighbors(lr_items, i, k)
                .into_iter()
                .filter(|j| hr.contains(j))
                .count();
            shared as f64 / k as f64
        })
        .sum();
    Ok(total / n as f64)
}
