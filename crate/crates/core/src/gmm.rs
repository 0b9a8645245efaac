//! Gaussian mixture baseline fitted by expectation-maximization.
//!
//! Means are seeded with k-means++, weights start uniform and every component
//! starts from the pooled data covariance. Each M-step adds
//! `cov_regularization * I` to every covariance, so Cholesky factorization
//! cannot fail on a fitted model. Responsibilities are computed in log space.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::latent::LatentSet;
use crate::linalg::{Cholesky, SquareMatrix};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceMode {
    #[default]
    Full,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop once `(ll_t - ll_{t-1}) / |ll_{t-1}|` falls below this.
    pub rel_tolerance: f64,
    /// Added to every covariance diagonal after each M-step.
    pub cov_regularization: f64,
    pub seed: u64,
    pub covariance_mode: CovarianceMode,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tolerance: 1e-6,
            cov_regularization: 1e-6,
            seed: 0,
            covariance_mode: CovarianceMode::Full,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::InvalidArgument("rel_tolerance must be positive".into()));
        }
        if !(self.cov_regularization > 0.0) || !self.cov_regularization.is_finite() {
            return Err(Error::InvalidArgument("cov_regularization must be positive".into()));
        }
        Ok(())
    }
}

/// Mixture weights, means and covariances, with cached Cholesky factors.
#[derive(Debug, Clone)]
pub struct GmmModel<T> {
    weights: Vec<T>,
    means: Vec<Vec<T>>,
    covariances: Vec<SquareMatrix<T>>,
    factors: Vec<Cholesky<T>>,
}

impl<T: Scalar> GmmModel<T> {
    /// Validates and assembles a model. Weights must be non-negative and sum
    /// to one within `1e-10`; covariances must be symmetric within `1e-10` and
    /// positive-definite.
    pub fn new(weights: Vec<T>, means: Vec<Vec<T>>, covariances: Vec<SquareMatrix<T>>) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        if means.len() != m || covariances.len() != m {
            return Err(Error::InvalidArgument(format!(
                "{m} weights but {} means and {} covariances",
                means.len(),
                covariances.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument("mixture weights must be finite and non-negative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total.as_f64() - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(total.as_f64()));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("component dimension must be at least 1".into()));
        }
        let mut factors = Vec::with_capacity(m);
        for (mu, cov) in means.iter().zip(&covariances) {
            if mu.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: mu.len() });
            }
            if cov.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: cov.dim() });
            }
            if mu.iter().chain(cov.as_slice()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite component parameter".into()));
            }
            let asym = cov.max_asymmetry().as_f64();
            if asym > 1e-10 {
                return Err(Error::NotSymmetric(asym));
            }
            factors.push(Cholesky::new(cov)?);
        }
        Ok(Self {
            weights,
            means,
            covariances,
            factors,
        })
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<T>] {
        &self.means
    }

    pub fn covariances(&self) -> &[SquareMatrix<T>] {
        &self.covariances
    }

    /// `sum_i alpha_i mu_i`.
    pub fn mixture_mean(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for (o, &m) in out.iter_mut().zip(mu) {
                *o += *w * m;
            }
        }
        out
    }

    fn component_log_density(&self, c: usize, x: &[T], diff: &mut [T], scratch: &mut [T]) -> T {
        for ((dv, &xv), &mv) in diff.iter_mut().zip(x).zip(&self.means[c]) {
            *dv = xv - mv;
        }
        let maha = self.factors[c].mahalanobis_sq(diff, scratch);
        let half = T::from_f64_lossy(0.5);
        -half * (T::from_usize_lossy(self.dim()) * T::ln_2pi() + self.factors[c].log_det() + maha)
    }

    /// `log p(x)` for one vector.
    pub fn log_density(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let d = self.dim();
        let (mut diff, mut scratch) = (vec![T::zero(); d], vec![T::zero(); d]);
        let terms: Vec<T> = (0..self.num_components())
            .map(|c| self.weights[c].ln() + self.component_log_density(c, x, &mut diff, &mut scratch))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// Sum over rows of `log sum_i alpha_i N(x | mu_i, Sigma_i)`.
    pub fn log_likelihood(&self, latents: &LatentSet<T>) -> Result<T> {
        if latents.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: latents.dim() });
        }
        let mut total = T::zero();
        for row in latents.rows() {
            total += self.log_density(row)?;
        }
        Ok(total)
    }

    /// Draws `count` vectors; deterministic per seed.
    pub fn sample(&self, count: usize, seed: u64) -> LatentSet<T> {
        self.sample_with_components(count, seed).0
    }

    /// Like [`GmmModel::sample`], also returning the component each row came from.
    pub fn sample_with_components(&self, count: usize, seed: u64) -> (LatentSet<T>, Vec<usize>) {
        let d = self.dim();
        let mut rng = rng::seeded(seed);
        let mut cumulative = Vec::with_capacity(self.num_components());
        let mut acc = 0.0f64;
        for w in &self.weights {
            acc += w.as_f64();
            cumulative.push(acc);
        }
        let last_positive = self.weights.iter().rposition(|w| *w > T::zero()).unwrap_or(0);

        let mut data = Vec::with_capacity(count * d);
        let mut labels = Vec::with_capacity(count);
        let mut z = vec![T::zero(); d];
        for _ in 0..count {
            let u = rng.random::<f64>() * acc;
            let c = cumulative.partition_point(|&cw| cw <= u).min(last_positive);
            for zv in z.iter_mut() {
                let s: f64 = StandardNormal.sample(&mut rng);
                *zv = T::from_f64_lossy(s);
            }
            let shifted = self.factors[c].mul_lower(&z);
            data.extend(shifted.iter().zip(&self.means[c]).map(|(&a, &m)| a + m));
            labels.push(c);
        }
        (LatentSet::from_trusted(data, d), labels)
    }
}

fn log_sum_exp<T: Scalar>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|&t| (t - max).exp()).sum::<T>().ln()
}

/// Convergence bookkeeping for one EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Number of M-steps performed.
    pub iterations_used: usize,
    /// True when the relative-improvement criterion stopped the run.
    pub converged: bool,
    /// Total log-likelihood of the parameters before each M-step, plus the
    /// final parameters.
    pub log_likelihoods: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GmmFit<T> {
    pub model: GmmModel<T>,
    pub report: FitReport,
}

/// k-means++ seeding: the first center is a uniformly chosen row, each
/// further center a row chosen with probability proportional to its squared
/// distance from the nearest center already picked.
pub fn init_kmeanspp<T: Scalar>(latents: &LatentSet<T>, num_components: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    let n = latents.len();
    if num_components == 0 {
        return Err(Error::InvalidArgument("num_components must be positive".into()));
    }
    if n < num_components {
        return Err(Error::TooManyComponents { components: num_components, points: n });
    }
    let mut rng = rng::seeded(seed);
    let mut chosen = vec![false; n];
    let mut centers: Vec<Vec<T>> = Vec::with_capacity(num_components);
    let mut nearest = vec![f64::INFINITY; n];

    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.push(latents.row(first).to_vec());

    while centers.len() < num_components {
        let newest = centers.last().expect("at least one center");
        for (i, row) in latents.rows().enumerate() {
            let d2: f64 = row.iter().zip(newest).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum();
            if d2 < nearest[i] {
                nearest[i] = d2;
            }
        }
        let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| nearest[i]).sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last = 0;
            for i in (0..n).filter(|&i| !chosen[i]) {
                last = i;
                acc += nearest[i];
                if acc > target && nearest[i] > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or(last)
        } else {
            // Remaining rows all coincide with a center; pick uniformly among them.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centers.push(latents.row(pick).to_vec());
    }
    Ok(centers)
}

/// Fits a `num_components` mixture by EM.
pub fn fit_gmm<T: Scalar>(latents: &LatentSet<T>, num_components: usize, config: &EmConfig) -> Result<GmmFit<T>> {
    config.validate()?;
    let means = init_kmeanspp(latents, num_components, config.seed)?;
    let n = latents.len();
    let d = latents.dim();
    let eps = T::from_f64_lossy(config.cov_regularization);

    let mut pooled = biased_covariance(latents, &column_means(latents));
    if config.covariance_mode == CovarianceMode::Diagonal {
        pooled = SquareMatrix::from_diagonal(&(0..d).map(|i| pooled[(i, i)]).collect::<Vec<_>>());
    }
    pooled.add_to_diagonal(eps);

    let uniform = T::one() / T::from_usize_lossy(num_components);
    let mut model = GmmModel::new(vec![uniform; num_components], means, vec![pooled; num_components])?;
    let mut resp = vec![T::zero(); n * num_components];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let ll = e_step(&model, latents, &mut resp)?;
        if let Some(&prev) = history.last() {
            let gain = (ll - prev) / f64::abs(prev).max(f64::MIN_POSITIVE);
            history.push(ll);
            if gain < config.rel_tolerance {
                converged = true;
                break;
            }
        } else {
            history.push(ll);
        }
        if iterations == config.max_iterations {
            break;
        }
        model = m_step(&model, latents, &resp, eps, config.covariance_mode)?;
        iterations += 1;
    }

    Ok(GmmFit {
        model,
        report: FitReport {
            iterations_used: iterations,
            converged,
            log_likelihoods: history,
        },
    })
}

/// Fills `resp` (row-major `n x m`) and returns the total log-likelihood.
fn e_step<T: Scalar>(model: &GmmModel<T>, latents: &LatentSet<T>, resp: &mut [T]) -> Result<f64> {
    let m = model.num_components();
    let d = model.dim();
    let log_weights: Vec<T> = model.weights.iter().map(|w| w.ln()).collect();
    let (mut diff, mut scratch) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut total = 0.0f64;
    for (i, row) in latents.rows().enumerate() {
        let r = &mut resp[i * m..(i + 1) * m];
        for c in 0..m {
            r[c] = log_weights[c] + model.component_log_density(c, row, &mut diff, &mut scratch);
        }
        let lse = log_sum_exp(r);
        if !lse.is_finite() {
            return Err(Error::EmDiverged);
        }
        for v in r.iter_mut() {
            *v = (*v - lse).exp();
        }
        debug_assert!((r.iter().copied().sum::<T>().as_f64() - 1.0).abs() < 1e3 * T::epsilon().as_f64() * m as f64);
        total += lse.as_f64();
    }
    if !total.is_finite() {
        return Err(Error::EmDiverged);
    }
    Ok(total)
}

fn m_step<T: Scalar>(
    prev: &GmmModel<T>,
    latents: &LatentSet<T>,
    resp: &[T],
    eps: T,
    mode: CovarianceMode,
) -> Result<GmmModel<T>> {
    let m = prev.num_components();
    let d = prev.dim();
    let n = latents.len();
    let mut weights = Vec::with_capacity(m);
    let mut means = Vec::with_capacity(m);
    let mut covariances = Vec::with_capacity(m);

    for c in 0..m {
        let nk: T = (0..n).map(|i| resp[i * m + c]).sum();
        if !(nk > T::zero()) {
            // Every responsibility underflowed: the component keeps its shape
            // and drops out of the mixture.
            weights.push(T::zero());
            means.push(prev.means[c].clone());
            covariances.push(prev.covariances[c].clone());
            continue;
        }
        let mut mu = vec![T::zero(); d];
        for (i, row) in latents.rows().enumerate() {
            let r = resp[i * m + c];
            for (acc, &x) in mu.iter_mut().zip(row) {
                *acc += r * x;
            }
        }
        for v in mu.iter_mut() {
            *v /= nk;
        }

        let mut cov = SquareMatrix::zeros(d);
        let mut diff = vec![T::zero(); d];
        for (i, row) in latents.rows().enumerate() {
            let r = resp[i * m + c];
            for ((dv, &x), &mv) in diff.iter_mut().zip(row).zip(&mu) {
                *dv = x - mv;
            }
            match mode {
                CovarianceMode::Full => {
                    for a in 0..d {
                        let ra = r * diff[a];
                        for b in 0..=a {
                            cov[(a, b)] += ra * diff[b];
                        }
                    }
                }
                CovarianceMode::Diagonal => {
                    for a in 0..d {
                        cov[(a, a)] += r * diff[a] * diff[a];
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..=a {
                let v = cov[(a, b)] / nk;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov.add_to_diagonal(eps);

        weights.push(nk / T::from_usize_lossy(n));
        means.push(mu);
        covariances.push(cov);
    }

    let total: T = weights.iter().copied().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    GmmModel::new(weights, means, covariances).map_err(|e| match e {
        Error::NotPositiveDefinite => Error::EmDiverged,
        other => other,
    })
}

pub(crate) fn column_means<T: Scalar>(latents: &LatentSet<T>) -> Vec<T> {
    let mut mean = vec![T::zero(); latents.dim()];
    for row in latents.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    let n = T::from_usize_lossy(latents.len().max(1));
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// `(1/n) sum (x - mean)(x - mean)^T`, exactly symmetric.
pub(crate) fn biased_covariance<T: Scalar>(latents: &LatentSet<T>, mean: &[T]) -> SquareMatrix<T> {
    let d = latents.dim();
    let mut cov = SquareMatrix::zeros(d);
    let mut diff = vec![T::zero(); d];
    for row in latents.rows() {
        for ((dv, &x), &m) in diff.iter_mut().zip(row).zip(mean) {
            *dv = x - m;
        }
        for a in 0..d {
            for b in 0..=a {
                cov[(a, b)] += diff[a] * diff[b];
            }
        }
    }
    let n = T::from_usize_lossy(latents.len().max(1));
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / n;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

pub fn log_likelihood<T: Scalar>(model: &GmmModel<T>, latents: &LatentSet<T>) -> Result<T> {
    model.log_likelihood(latents)
}

pub fn sample_gmm<T: Scalar>(model: &GmmModel<T>, count: usize, seed: u64) -> LatentSet<T> {
    model.sample(count, seed)
}
