//! Entropy-regularized Wasserstein distance between two empirical sets.
//!
//! Both sets are uniform point clouds. The Sinkhorn iterations run on dual
//! potentials in the log domain:
//!
//! ```text
//! f_i = -eps * LSE_j((g_j - C_ij) / eps + log b_j)
//! g_j = -eps * LSE_i((f_i - C_ij) / eps + log a_i)
//! ```
//!
//! and the regularized cost is the dual value `<a, f> + <b, g>`. With
//! debiasing, the reported quantity is the Sinkhorn divergence
//! `OT(a, b) - OT(a, a) / 2 - OT(b, b) / 2`, which vanishes on identical sets.

use crate::error::{Error, Result};
use crate::latent::LatentSet;
use crate::scalar::Scalar;

/// How the entropic regularization strength is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    /// `factor * median(C)` over the cross cost matrix.
    RelativeToMedian(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: Epsilon,
    pub max_iterations: usize,
    /// Stop once the L1 violation of the row marginal drops below this.
    pub tolerance: f64,
    /// Ground cost is `|x - y|^exponent`, the result its `1/exponent` root.
    pub exponent: f64,
    pub debias: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: Epsilon::RelativeToMedian(0.05),
            max_iterations: 1000,
            tolerance: 1e-7,
            exponent: 2.0,
            debias: true,
        }
    }
}

impl SinkhornConfig {
    fn validate(&self) -> Result<()> {
        let eps = match self.epsilon {
            Epsilon::RelativeToMedian(f) | Epsilon::Absolute(f) => f,
        };
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
        }
        if !(self.exponent >= 1.0) || !self.exponent.is_finite() {
            return Err(Error::InvalidArgument(format!("exponent must be >= 1, got {}", self.exponent)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    fn between(a: &LatentSet<T>, b: &LatentSet<T>, exponent: f64) -> Self {
        let p = T::from_f64_lossy(exponent);
        let mut data = Vec::with_capacity(a.len() * b.len());
        for x in a.rows() {
            for y in b.rows() {
                let sq: T = x.iter().zip(y).map(|(&u, &v)| (u - v) * (u - v)).sum();
                data.push(if exponent == 2.0 { sq } else { sq.sqrt().powf(p) });
            }
        }
        Self {
            rows: a.len(),
            cols: b.len(),
            data,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    fn median(&self) -> T {
        let mut v = self.data.clone();
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite costs"));
        *m
    }
}

/// Regularized transport cost between uniform measures on the rows and
/// columns of `cost`.
///
/// The target `eps` is approached by geometric annealing from the largest
/// cost, warm-starting the potentials at each stage; only the final stage is
/// run to `config.tolerance`, with over-relaxed updates. `symmetric` is set
/// for `OT(a, a)`, where a single potential is iterated.
fn entropic_ot<T: Scalar>(cost: &CostMatrix<T>, eps: T, config: &SinkhornConfig, symmetric: bool) -> Result<T> {
    let (n, m) = (cost.rows, cost.cols);
    let log_a = -T::from_usize_lossy(n).ln();
    let log_b = -T::from_usize_lossy(m).ln();
    let mut f = vec![T::zero(); n];
    let mut g = vec![T::zero(); m];
    let mut scratch = vec![T::zero(); n.max(m)];

    let c_max = cost.data.iter().copied().fold(T::zero(), T::max);
    let mut stage_eps = c_max.max(eps);
    let mut iterations = 0usize;
    let mut violation = f64::INFINITY;
    loop {
        let last_stage = stage_eps <= eps;
        let stage_eps_now = if last_stage { eps } else { stage_eps };
        let stage_tol = if last_stage { config.tolerance } else { ANNEALING_TOLERANCE };
        let mut omega = if last_stage { RELAXATION } else { 1.0 };
        let mut stage_iters = 0usize;
        let mut best = f64::INFINITY;
        while iterations < config.max_iterations {
            let w = T::from_f64_lossy(omega);
            if symmetric {
                symmetric_step(cost, stage_eps_now, log_b, &mut f, &mut scratch);
                g.copy_from_slice(&f);
            } else {
                alternating_step(cost, stage_eps_now, log_a, log_b, w, &mut f, &mut g, &mut scratch);
            }
            iterations += 1;
            stage_iters += 1;
            violation = row_marginal_violation(cost, stage_eps_now, log_a, log_b, &f, &g, &mut scratch);
            if omega > 1.0 && !(violation <= 10.0 * best) {
                // Over-relaxation is only locally convergent; fall back to plain updates.
                omega = 1.0;
            }
            best = best.min(violation);
            if violation < stage_tol || (!last_stage && stage_iters >= ANNEALING_STAGE_ITERS) {
                break;
            }
        }
        if last_stage && violation < config.tolerance {
            let value: T = f.iter().copied().sum::<T>() / T::from_usize_lossy(n)
                + g.iter().copied().sum::<T>() / T::from_usize_lossy(m);
            return Ok(value);
        }
        if iterations >= config.max_iterations {
            return Err(Error::SinkhornNotConverged {
                iterations: config.max_iterations,
                violation,
            });
        }
        stage_eps *= T::from_f64_lossy(0.5);
    }
}

const ANNEALING_TOLERANCE: f64 = 1e-3;
const ANNEALING_STAGE_ITERS: usize = 10;
/// Over-relaxation of the final stage. Values near 2 pay off at small
/// `eps`, where plain Sinkhorn contracts very slowly.
const RELAXATION: f64 = 1.9;

/// `f = (f + T(f)) / 2` for a symmetric cost. Plain alternating updates crawl
/// here: the plan is close to a scaled identity, so every mode is slow.
fn symmetric_step<T: Scalar>(cost: &CostMatrix<T>, eps: T, log_b: T, f: &mut [T], scratch: &mut [T]) {
    let half = T::from_f64_lossy(0.5);
    let next: Vec<T> = (0..cost.rows)
        .map(|i| {
            let s = &mut scratch[..cost.cols];
            for (j, sj) in s.iter_mut().enumerate() {
                *sj = (f[j] - cost.at(i, j)) / eps + log_b;
            }
            -eps * log_sum_exp(s)
        })
        .collect();
    for (fi, ni) in f.iter_mut().zip(next) {
        *fi = half * (*fi + ni);
    }
}

/// One `f` then one `g` update, each moved `w` of the way to its target.
#[allow(clippy::too_many_arguments)]
fn alternating_step<T: Scalar>(
    cost: &CostMatrix<T>,
    eps: T,
    log_a: T,
    log_b: T,
    w: T,
    f: &mut [T],
    g: &mut [T],
    scratch: &mut [T],
) {
    let keep = T::one() - w;
    for (i, fi) in f.iter_mut().enumerate() {
        let s = &mut scratch[..cost.cols];
        for (j, sj) in s.iter_mut().enumerate() {
            *sj = (g[j] - cost.at(i, j)) / eps + log_b;
        }
        *fi = keep * *fi - w * eps * log_sum_exp(s);
    }
    for (j, gj) in g.iter_mut().enumerate() {
        let s = &mut scratch[..cost.rows];
        for (i, si) in s.iter_mut().enumerate() {
            *si = (f[i] - cost.at(i, j)) / eps + log_a;
        }
        *gj = keep * *gj - w * eps * log_sum_exp(s);
    }
}

/// L1 distance between the plan's row sums and the uniform row marginal.
fn row_marginal_violation<T: Scalar>(
    cost: &CostMatrix<T>,
    eps: T,
    log_a: T,
    log_b: T,
    f: &[T],
    g: &[T],
    scratch: &mut [T],
) -> f64 {
    let (n, m) = (cost.rows, cost.cols);
    let a = T::one() / T::from_usize_lossy(n);
    let mut violation = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        let s = &mut scratch[..m];
        for (j, sj) in s.iter_mut().enumerate() {
            *sj = (fi + g[j] - cost.at(i, j)) / eps + log_a + log_b;
        }
        violation += (log_sum_exp(s).exp() - a).abs().as_f64();
    }
    violation
}

fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

/// Sinkhorn approximation of the order-`exponent` Wasserstein distance
/// between the empirical distributions of `a` and `b`.
pub fn sinkhorn_distance<T: Scalar>(a: &LatentSet<T>, b: &LatentSet<T>, config: &SinkhornConfig) -> Result<T> {
    config.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyLatentSet);
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let cross = CostMatrix::between(a, b, config.exponent);
    let eps = match config.epsilon {
        Epsilon::Absolute(e) => T::from_f64_lossy(e),
        Epsilon::RelativeToMedian(f) => {
            let med = cross.median();
            let med = if med > T::zero() {
                med
            } else {
                cross.data.iter().copied().sum::<T>() / T::from_usize_lossy(cross.data.len())
            };
            if med == T::zero() {
                // Every cross pair coincides: both measures are the same point mass.
                return Ok(T::zero());
            }
            T::from_f64_lossy(f) * med
        }
    };

    // Identical sets make the cross problem symmetric; solve it as such.
    let same = a == b;
    let mut value = entropic_ot(&cross, eps, config, same)?;
    if config.debias {
        let aa = if same { value } else { entropic_ot(&CostMatrix::between(a, a, config.exponent), eps, config, true)? };
        let bb = if same { value } else { entropic_ot(&CostMatrix::between(b, b, config.exponent), eps, config, true)? };
        let half = T::from_f64_lossy(0.5);
        value -= half * (aa + bb);
    }
    Ok(value.max(T::zero()).powf(T::from_f64_lossy(config.exponent).recip()))
}

/// Exact order-`exponent` Wasserstein distance between two equal-size 1D
/// samples: the sorted samples are matched pairwise.
pub fn wasserstein_1d_exact<T: Scalar>(a: &[T], b: &[T], exponent: f64) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyLatentSet);
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if !(exponent >= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent must be >= 1, got {exponent}")));
    }
    let sorted = |v: &[T]| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
        s
    };
    let (sa, sb) = (sorted(a), sorted(b));
    let p = T::from_f64_lossy(exponent);
    let mean = sa.iter().zip(&sb).map(|(&x, &y)| (x - y).abs().powf(p)).sum::<T>() / T::from_usize_lossy(a.len());
    Ok(mean.powf(p.recip()))
}
