//! l1-regularized least squares:
//!
//! ```text
//! min_a ||target - D a||^2 + lambda ||a||_1
//! ```
//!
//! solved with monotone FISTA (fixed step `1 / 2L`, momentum restart whenever
//! the objective would increase). Note the unweighted square: the optimality
//! conditions read `|D^T (D a - target)|_i <= lambda / 2`.
//!
//! Near the optimum the objective is flat to second order, so an
//! objective-based stopping rule leaves the iterate accurate only to about
//! the square root of machine precision, and its support may still be off.
//! Once FISTA stops, a feature-sign active-set pass starts from its point:
//! it solves the restricted equations `D_S^T D_S a_S = D_S^T target -
//! lambda/2 sign(a_S)`, line-searches over sign changes, and admits the most
//! violating zero coordinate, until the optimality conditions hold. The
//! result is kept only if the objective does not go up.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Options {
    pub max_iters: usize,
    /// Stop once the relative objective decrease of one step falls below this.
    pub tol: f64,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options {
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub alpha: DVector<f64>,
    /// Subject id of each coefficient; empty when the dictionary is unlabeled.
    pub labels: Vec<u32>,
    pub objective_value: f64,
    pub iterations_used: usize,
}

impl SparseCode {
    pub fn with_labels(mut self, labels: &[u32]) -> Self {
        self.labels = labels.to_vec();
        self
    }
}

/// Elementwise shrinkage `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: &DVector<f64>, t: f64) -> DVector<f64> {
    debug_assert!(t >= 0.0);
    v.map(|x| shrink(x, t))
}

#[inline]
fn shrink(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

const POWER_ITERS: usize = 100;
const POWER_TOL: f64 = 1e-6;
const LIPSCHITZ_INFLATION: f64 = 1.01;

fn start_vector(n: usize) -> DVector<f64> {
    // fixed, non-symmetric start so results are reproducible
    let v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    let norm = v.norm();
    v / norm
}

fn power_iteration(apply: impl Fn(&DVector<f64>) -> DVector<f64>, n: usize) -> f64 {
    let mut v = start_vector(n);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERS {
        let w = apply(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let done = (next - estimate).abs() <= POWER_TOL * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Upper estimate of the largest eigenvalue of `D^T D`, inflated by 1%.
pub fn lipschitz_estimate(dict: &DMatrix<f64>) -> Result<f64> {
    if dict.ncols() == 0 || dict.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter(
            "lipschitz estimate of a zero dictionary".into(),
        ));
    }
    let est = power_iteration(|v| dict.tr_mul(&(dict * v)), dict.ncols());
    Ok(est * LIPSCHITZ_INFLATION)
}

/// Precomputed Gram matrix and step size for repeated solves against one
/// dictionary.
#[derive(Debug, Clone)]
pub struct SparseCoder<'a> {
    dict: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
    lipschitz: f64,
}

impl<'a> SparseCoder<'a> {
    pub fn new(dict: &'a DMatrix<f64>) -> Result<Self> {
        if dict.ncols() == 0 || dict.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter(
                "sparse coding needs a nonzero dictionary".into(),
            ));
        }
        let gram = dict.tr_mul(dict);
        let lipschitz = power_iteration(|v| &gram * v, gram.ncols()) * LIPSCHITZ_INFLATION;
        Ok(SparseCoder {
            dict,
            gram,
            lipschitz,
        })
    }

    pub fn dict(&self) -> &DMatrix<f64> {
        self.dict
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Direct evaluation of `||target - D a||^2 + lambda ||a||_1`.
    pub fn objective(&self, target: &DVector<f64>, alpha: &DVector<f64>, lambda: f64) -> f64 {
        (target - self.dict * alpha).norm_squared() + lambda * alpha.lp_norm(1)
    }

    pub fn solve(
        &self,
        target: &DVector<f64>,
        lambda: f64,
        opts: &L1Options,
        seed_alpha: Option<&DVector<f64>>,
    ) -> Result<SparseCode> {
        let n = self.dict.ncols();
        if target.len() != self.dict.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "target of length {} against dictionary with {} rows",
                target.len(),
                self.dict.nrows()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        let mut alpha = match seed_alpha {
            Some(s) if s.len() != n => {
                return Err(Error::DimensionMismatch(format!(
                    "seed of length {} for {n} atoms",
                    s.len()
                )))
            }
            Some(s) => s.clone(),
            None => DVector::zeros(n),
        };

        let corr = self.dict.tr_mul(target);
        let tt = target.norm_squared();
        // objective through the Gram matrix; g_alpha = G * alpha
        let eval = |a: &DVector<f64>, g_a: &DVector<f64>| {
            tt - 2.0 * a.dot(&corr) + a.dot(g_a) + lambda * a.lp_norm(1)
        };
        let mut lip = self.lipschitz;
        let prox = |from: &DVector<f64>, lip: f64| {
            let grad = &self.gram * from - &corr;
            let thresh = lambda / (2.0 * lip);
            from.zip_map(&grad, |x, g| shrink(x - g / lip, thresh))
        };

        let mut f_alpha = eval(&alpha, &(&self.gram * &alpha));
        let mut y = alpha.clone();
        let mut t = 1.0f64;
        let mut iterations = 0;
        while iterations < opts.max_iters {
            iterations += 1;
            let noise = 64.0 * f64::EPSILON * (tt + f_alpha.abs());
            let mut cand = prox(&y, lip);
            let mut f_cand = eval(&cand, &(&self.gram * &cand));
            if f_cand > f_alpha {
                // momentum overshot: restart with a plain proximal step
                t = 1.0;
                cand = prox(&alpha, lip);
                f_cand = eval(&cand, &(&self.gram * &cand));
                if f_cand > f_alpha {
                    if f_cand - f_alpha > noise {
                        // step too long for this problem; lengthen L and retry
                        lip *= 2.0;
                        y = alpha.clone();
                        continue;
                    }
                    break;
                }
            }
            let decrease = (f_alpha - f_cand) / f_alpha.abs().max(noise);
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = &cand + (&cand - &alpha) * ((t - 1.0) / t_next);
            t = t_next;
            alpha = cand;
            f_alpha = f_cand;
            if decrease < opts.tol {
                break;
            }
        }

        // both values carry rounding of the Gram-form objective
        let slack = 64.0 * f64::EPSILON * (tt + f_alpha.abs());
        if let Some((refined, f_refined)) = self.refine(&alpha, &corr, lambda, lip, slack, &eval) {
            if f_refined <= f_alpha + slack {
                alpha = refined;
            }
        }

        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("sparse solver produced non-finite coefficients".into()));
        }
        let objective_value = self.objective(target, &alpha, lambda);
        Ok(SparseCode {
            alpha,
            labels: Vec::new(),
            objective_value,
            iterations_used: iterations,
        })
    }
}

impl SparseCoder<'_> {
    /// Active-set (feature-sign) finish from the FISTA point. No accepted
    /// move raises the objective beyond `slack`; stops at a point meeting the optimality
    /// conditions to rounding, or when no move helps.
    fn refine(
        &self,
        alpha: &DVector<f64>,
        corr: &DVector<f64>,
        lambda: f64,
        lip: f64,
        slack: f64,
        eval: &impl Fn(&DVector<f64>, &DVector<f64>) -> f64,
    ) -> Option<(DVector<f64>, f64)> {
        let n = alpha.len();
        let half = 0.5 * lambda;
        let eps = 1e-12 * (corr.amax() + half).max(f64::MIN_POSITIVE);
        let mut a = alpha.clone();
        let mut f = eval(&a, &(&self.gram * &a));
        for _ in 0..10 * n + 10 {
            // half gradient of the quadratic term
            let grad = &self.gram * &a - corr;
            let mut active: Vec<usize> = (0..n).filter(|&i| a[i] != 0.0).collect();
            if active.len() > self.dict.nrows() {
                match self.shrink_support(&a, &active, f, slack, eval) {
                    Some((next, fn_)) => {
                        a = next;
                        f = fn_;
                        continue;
                    }
                    None => break,
                }
            }
            let mut signs: Vec<f64> = active.iter().map(|&i| a[i].signum()).collect();
            let settled = active.iter().all(|&i| (grad[i] + half * a[i].signum()).abs() <= eps);
            if settled {
                let entering = (0..n)
                    .filter(|&i| a[i] == 0.0)
                    .max_by(|&i, &j| grad[i].abs().total_cmp(&grad[j].abs()).then(j.cmp(&i)));
                match entering {
                    Some(i) if grad[i].abs() > half + eps => {
                        active.push(i);
                        signs.push(-grad[i].signum());
                    }
                    _ => break,
                }
            }
            if active.len() > self.dict.nrows() {
                // no room on the support: take a proximal gradient step instead
                let thresh = half / lip;
                let next = a.zip_map(&grad, |x, g| shrink(x - g / lip, thresh));
                let f_next = eval(&next, &(&self.gram * &next));
                if f_next > f + slack || next == a {
                    break;
                }
                a = next;
                f = f_next;
                continue;
            }
            let k = active.len();
            let sub = DMatrix::from_fn(k, k, |r, c| self.gram[(active[r], active[c])]);
            let rhs = DVector::from_fn(k, |r, _| corr[active[r]] - half * signs[r]);
            let Some(chol) = sub.cholesky() else { break };
            let z = chol.solve(&rhs);
            if z.iter().any(|v| !v.is_finite()) {
                break;
            }

            // candidates: the unconstrained point and each sign-change crossing
            let mut steps: Vec<f64> = vec![1.0];
            for (r, &i) in active.iter().enumerate() {
                let (from, to) = (a[i], z[r]);
                if from != 0.0 && from.signum() != to.signum() {
                    steps.push(from / (from - to));
                }
            }
            let mut best: Option<(DVector<f64>, f64)> = None;
            for &s in &steps {
                let mut cand = a.clone();
                for (r, &i) in active.iter().enumerate() {
                    let (from, to) = (a[i], z[r]);
                    let v = from + s * (to - from);
                    cand[i] = if from != 0.0 && from.signum() != to.signum() && s == from / (from - to) {
                        0.0
                    } else {
                        v
                    };
                }
                let fc = eval(&cand, &(&self.gram * &cand));
                if best.as_ref().is_none_or(|(_, fb)| fc < *fb) {
                    best = Some((cand, fc));
                }
            }
            let (cand, fc) = best?;
            if fc > f + slack || cand == a {
                break;
            }
            a = cand;
            f = fc;
        }
        Some((a, f))
    }

    /// With more nonzeros than rows, `D_S` has a null direction `v`. Moving
    /// along it leaves `D a` fixed and changes the l1 term linearly, so step
    /// in the non-increasing sense until the first coordinate reaches zero.
    fn shrink_support(
        &self,
        a: &DVector<f64>,
        active: &[usize],
        f: f64,
        slack: f64,
        eval: &impl Fn(&DVector<f64>, &DVector<f64>) -> f64,
    ) -> Option<(DVector<f64>, f64)> {
        let k = active.len();
        let sub = DMatrix::from_fn(k, k, |r, c| self.gram[(active[r], active[c])]);
        let eig = sub.symmetric_eigen();
        let (low, _) = eig.eigenvalues.argmin();
        if eig.eigenvalues[low] > 1e-10 * eig.eigenvalues.amax() {
            return None;
        }
        let mut v = eig.eigenvectors.column(low).into_owned();
        let slope: f64 = active.iter().zip(v.iter()).map(|(&i, vr)| a[i].signum() * vr).sum();
        if slope > 0.0 {
            v = -v;
        }
        let (hit, step) = active
            .iter()
            .zip(v.iter())
            .enumerate()
            .filter(|(_, (&i, vr))| a[i] * **vr < 0.0)
            .map(|(r, (&i, vr))| (r, -a[i] / vr))
            .min_by(|x, y| x.1.total_cmp(&y.1))?;
        let mut next = a.clone();
        for (r, &i) in active.iter().enumerate() {
            next[i] = if r == hit { 0.0 } else { a[i] + step * v[r] };
        }
        let f_next = eval(&next, &(&self.gram * &next));
        (f_next <= f + slack).then_some((next, f_next))
    }
}

/// One-shot l1 solve; see [`SparseCoder`] to amortize the Gram matrix.
pub fn solve_l1(
    dict: &DMatrix<f64>,
    target: &DVector<f64>,
    lambda: f64,
    opts: &L1Options,
    seed_alpha: Option<&DVector<f64>>,
) -> Result<SparseCode> {
    SparseCoder::new(dict)?.solve(target, lambda, opts, seed_alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn soft_threshold_definition() {
        let v = DVector::from_vec(vec![3.0, -1.0, 0.5]);
        assert_eq!(soft_threshold(&v, 1.0).as_slice(), &[2.0, 0.0, 0.0]);
        assert_eq!(soft_threshold(&v, 0.0), v);
        let mut rng = StdRng::seed_from_u64(0);
        let w = DVector::from_fn(50, |_, _| rng.random_range(-5.0..5.0));
        let s = soft_threshold(&w, 0.7);
        assert!(w.iter().zip(s.iter()).all(|(a, b)| b.abs() <= a.abs()));
    }

    #[test]
    fn lipschitz_of_simple_dictionaries() {
        let l = lipschitz_estimate(&(DMatrix::<f64>::identity(3, 3) * 2.0)).unwrap();
        assert!((4.0..=4.05).contains(&l), "{l}");
        let u = DMatrix::from_column_slice(4, 1, &[1.0, -2.0, 3.0, 0.5]);
        let l = lipschitz_estimate(&u).unwrap();
        assert!((l - u.norm_squared() * 1.01).abs() < 1e-9);
        assert!(lipschitz_estimate(&DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn lipschitz_close_to_dense_eigensolve() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let d = random_matrix(20, 50, &mut rng);
            let l = lipschitz_estimate(&d).unwrap();
            let eig = d.tr_mul(&d).symmetric_eigenvalues().max();
            assert!(l >= 0.99 * eig && l <= 1.02 * eig, "{l} vs {eig}");
        }
    }

    #[test]
    fn identity_dictionary_is_soft_threshold() {
        let d = DMatrix::<f64>::identity(4, 4);
        let target = DVector::from_vec(vec![10.0, 0.5, -3.0, 0.0]);
        let opts = L1Options { max_iters: 10_000, tol: 1e-15 };
        let code = solve_l1(&d, &target, 2.0, &opts, None).unwrap();
        let expect = [9.0, 0.0, -2.0, 0.0];
        for (a, b) in code.alpha.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", code.alpha);
        }
    }

    #[test]
    fn zero_lambda_recovers_least_squares() {
        let mut rng = StdRng::seed_from_u64(12);
        let d = DMatrix::<f64>::identity(8, 8) * 2.0 + random_matrix(8, 8, &mut rng) * 0.3;
        let target = DVector::from_fn(8, |_, _| rng.random_range(-10.0..10.0));
        let code = solve_l1(&d, &target, 0.0, &L1Options::default(), None).unwrap();
        let ls = d.clone().lu().solve(&target).unwrap();
        assert!((code.alpha - ls).amax() < 1e-6);
    }

    #[test]
    fn optimality_holds_with_small_lambda() {
        // small lambda pushes FISTA's support past the row count
        let mut rng = StdRng::seed_from_u64(15);
        for _ in 0..20 {
            let d = random_matrix(10, 30, &mut rng);
            let target = DVector::from_fn(10, |_, _| rng.random_range(-10.0..10.0));
            let lambda = rng.random_range(0.05..0.5);
            let code = solve_l1(&d, &target, lambda, &L1Options::default(), None).unwrap();
            assert!(code.alpha.iter().filter(|a| **a != 0.0).count() <= 10);
            let g = d.tr_mul(&(&d * &code.alpha - &target));
            let scale = d.tr_mul(&target).amax();
            for (gi, ai) in g.iter().zip(code.alpha.iter()) {
                let v = if *ai != 0.0 {
                    (gi + 0.5 * lambda * ai.signum()).abs()
                } else {
                    (gi.abs() - 0.5 * lambda).max(0.0)
                };
                assert!(v <= 1e-9 * scale, "violation {v}");
            }
        }
    }

    #[test]
    fn large_lambda_gives_zero() {
        let mut rng = StdRng::seed_from_u64(13);
        let d = random_matrix(10, 20, &mut rng);
        let target = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
        let lambda = 2.0 * d.tr_mul(&target).amax();
        let code = solve_l1(&d, &target, lambda, &L1Options::default(), None).unwrap();
        assert!(code.alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn never_worse_than_seed_and_deterministic() {
        let mut rng = StdRng::seed_from_u64(14);
        let d = random_matrix(30, 12, &mut rng);
        let target = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let seed = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let coder = SparseCoder::new(&d).unwrap();
        let opts = L1Options::default();
        let a = coder.solve(&target, 0.3, &opts, Some(&seed)).unwrap();
        let b = coder.solve(&target, 0.3, &opts, Some(&seed)).unwrap();
        assert_eq!(a, b);
        assert!(a.objective_value <= coder.objective(&target, &seed, 0.3));
        assert!(coder.solve(&target, -1.0, &opts, None).is_err());
        assert!(coder.solve(&DVector::zeros(3), 0.3, &opts, None).is_err());
    }
}
