//! Fitting-time comparison between the PMFS sampler and the EM baseline.
//!
//! Benchmarks run on a seeded synthetic dataset: a mixture of spherical unit
//! Gaussians with equal weights whose centers are drawn uniformly from
//! `[-10, 10]^d`. Each timing is the median wall-clock time of `repeats`
//! runs after one discarded warm-up run.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, EmConfig};
use crate::latent::LatentSet;
use crate::pmfs::PmfsModel;
use crate::rng;

pub const MIN_REPEATS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pmfs,
    Gmm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pmfs => "pmfs",
            Method::Gmm => "gmm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub components: usize,
    pub max_iterations: usize,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub method: Method,
    pub n: usize,
    pub d: usize,
    /// `k` for PMFS, the component count for GMM.
    pub param: usize,
    pub fit_seconds: f64,
    pub repeats: usize,
    pub iterations_used: Option<usize>,
    pub speedup_ratio: Option<f64>,
}

impl BenchReport {
    pub const CSV_HEADER: &'static str = "method,n,d,param,fit_seconds,repeats,iterations_used,speedup_ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{},{},{}",
            self.method,
            self.n,
            self.d,
            self.param,
            self.fit_seconds,
            self.repeats,
            self.iterations_used.map_or(String::new(), |i| i.to_string()),
            self.speedup_ratio.map_or(String::new(), |s| s.to_string()),
        )
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let param = match self.method {
            Method::Pmfs => "k",
            Method::Gmm => "components",
        };
        write!(
            f,
            "{:<4} n={} d={} {}={} fit_seconds={:.6} (median of {})",
            self.method, self.n, self.d, param, self.param, self.fit_seconds, self.repeats
        )?;
        if let Some(it) = self.iterations_used {
            write!(f, " iterations={it}")?;
        }
        if let Some(s) = self.speedup_ratio {
            write!(f, " speedup={s:.1}x")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub pmfs: BenchReport,
    pub gmm: BenchReport,
    /// GMM seconds / PMFS seconds.
    pub speedup_ratio: f64,
}

/// `n` points from an equal-weight mixture of `components` spherical unit
/// Gaussians in `d` dimensions.
pub fn synthetic_mixture(n: usize, d: usize, components: usize, seed: u64) -> Result<LatentSet<f64>> {
    if d == 0 || components == 0 {
        return Err(Error::InvalidArgument("synthetic mixture needs d >= 1 and components >= 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let centers: Vec<Vec<f64>> = (0..components)
        .map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = &centers[rng.random_range(0..components)];
        for &mu in c {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(mu + z);
        }
    }
    LatentSet::new(data, d)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

/// Runs `f` once to warm up, then `repeats` timed times; returns the median
/// seconds and the last result.
pub fn median_seconds<R>(repeats: usize, mut f: impl FnMut() -> Result<R>) -> Result<(f64, R)> {
    if repeats < MIN_REPEATS {
        return Err(Error::InvalidArgument(format!("repeats must be at least {MIN_REPEATS}, got {repeats}")));
    }
    f()?;
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let r = f()?;
        times.push(start.elapsed().as_secs_f64().max(1e-9));
        last = Some(r);
    }
    Ok((median(times), last.expect("repeats >= 1")))
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchOutcome> {
    let data = synthetic_mixture(config.n, config.d, config.components, config.seed)?;
    let (pmfs_seconds, _) = median_seconds(config.repeats, || PmfsModel::fit(&data, config.k))?;
    let em = EmConfig {
        max_iterations: config.max_iterations,
        seed: config.seed,
        ..EmConfig::default()
    };
    let (gmm_seconds, fit) = median_seconds(config.repeats, || fit_gmm(&data, config.components, &em))?;
    let speedup_ratio = gmm_seconds / pmfs_seconds;
    Ok(BenchOutcome {
        pmfs: BenchReport {
            method: Method::Pmfs,
            n: config.n,
            d: config.d,
            param: config.k,
            fit_seconds: pmfs_seconds,
            repeats: config.repeats,
            iterations_used: None,
            speedup_ratio: Some(speedup_ratio),
        },
        gmm: BenchReport {
            method: Method::Gmm,
            n: config.n,
            d: config.d,
            param: config.components,
            fit_seconds: gmm_seconds,
            repeats: config.repeats,
            iterations_used: Some(fit.report.iterations_used),
            speedup_ratio: Some(speedup_ratio),
        },
        speedup_ratio,
    })
}

/// Median PMFS fit time for each `n`, on data drawn with the config's seed.
pub fn run_scaling(ns: &[usize], config: &BenchConfig) -> Result<Vec<BenchReport>> {
    ns.iter()
        .map(|&n| {
            let data = synthetic_mixture(n, config.d, config.components, config.seed)?;
            let (secs, _) = median_seconds(config.repeats, || PmfsModel::fit(&data, config.k))?;
            Ok(BenchReport {
                method: Method::Pmfs,
                n,
                d: config.d,
                param: config.k,
                fit_seconds: secs,
                repeats: config.repeats,
                iterations_used: None,
                speedup_ratio: None,
            })
        })
        .collect()
}
