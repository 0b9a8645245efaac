use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use pmfs_core::bench::{run_bench, run_scaling, BenchConfig, BenchReport};
use pmfs_core::io::{load_latents, load_model, save_gmm, save_latents, save_pmfs, write_scatter, LatentFormat, SavedModel};
use pmfs_core::metrics::{
    empirical_distribution, frechet_gaussian_distance, gaussian_stats, sinkhorn_distance, total_variation, Epsilon,
    Pca, SinkhornConfig,
};
use pmfs_core::pmfs::sweep_k_with;
use pmfs_core::{fit_gmm, EmConfig, Latents, PartitionKey, Pmfs};

use crate::{BenchArgs, EvalArgs, FitArgs, FitMethod, Metric, ProjectArgs, SampleArgs, SweepArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] pmfs_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

type CliResult = Result<(), CliError>;

fn existing(path: &Path) -> Result<&Path, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}

fn read_latents(path: &Path) -> Result<Latents, CliError> {
    Ok(load_latents(existing(path)?, LatentFormat::from_path(path))?)
}

fn read_pmfs(path: &Path) -> Result<Pmfs, CliError> {
    match load_model(existing(path)?)? {
        SavedModel::Pmfs(m) => Ok(m),
        SavedModel::Gmm(_) => Err(CliError::Usage(format!("{} holds a GMM; a PMFS model is required", path.display()))),
    }
}

fn usize_arg(v: u64, name: &str) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::Usage(format!("--{name} is too large")))
}

fn sinkhorn_config(epsilon: Option<f64>, xi: f64) -> SinkhornConfig {
    SinkhornConfig {
        epsilon: epsilon.map_or(SinkhornConfig::default().epsilon, Epsilon::Absolute),
        exponent: xi,
        ..SinkhornConfig::default()
    }
}

pub fn fit(args: FitArgs) -> CliResult {
    let data = read_latents(&args.input)?;
    match args.method {
        FitMethod::Pmfs => {
            let k = args.k.ok_or_else(|| CliError::Usage("--k is required with --method pmfs".into()))?;
            let start = Instant::now();
            let model = Pmfs::fit(&data, k as usize)?;
            let secs = start.elapsed().as_secs_f64();
            save_pmfs(&model, &args.output)?;
            println!("fit_seconds={secs:.6} partitions={}", model.num_partitions());
        }
        FitMethod::Gmm => {
            let m = args
                .components
                .ok_or_else(|| CliError::Usage("--components is required with --method gmm".into()))?;
            let config = EmConfig {
                max_iterations: usize_arg(args.max_iters, "max-iters")?,
                seed: args.seed,
                ..EmConfig::default()
            };
            let start = Instant::now();
            let fit = fit_gmm(&data, usize_arg(m, "components")?, &config)?;
            let secs = start.elapsed().as_secs_f64();
            save_gmm(&fit.model, &args.output)?;
            println!(
                "fit_seconds={secs:.6} iterations_used={} converged={}",
                fit.report.iterations_used, fit.report.converged
            );
        }
    }
    Ok(())
}

pub fn sample(args: SampleArgs) -> CliResult {
    let samples = match load_model::<f64>(existing(&args.model)?)? {
        SavedModel::Pmfs(m) => m.sample(args.count, args.seed),
        SavedModel::Gmm(m) => m.sample(args.count, args.seed),
    };
    save_latents(&samples, &args.output, LatentFormat::from_path(&args.output))?;
    Ok(())
}

pub fn eval(args: EvalArgs) -> CliResult {
    let a = read_latents(&args.a)?;
    let b = read_latents(&args.b)?;
    let value = match args.metric {
        Metric::Sinkhorn => sinkhorn_distance(&a, &b, &sinkhorn_config(args.epsilon, args.xi))?,
        Metric::Frechet => frechet_gaussian_distance(&gaussian_stats(&a)?, &gaussian_stats(&b)?)?,
        Metric::TvBins => {
            let path = args
                .model
                .as_deref()
                .ok_or_else(|| CliError::Usage("--model is required with --metric tv-bins".into()))?;
            tv_bins(&read_pmfs(path)?, &a, &b, args.require_support)?
        }
    };
    println!("{value}");
    Ok(())
}

/// Total variation between the bin histograms of `a` and `b` under the
/// model's grid. Vectors outside the grid share one extra bin.
fn tv_bins(model: &Pmfs, a: &Latents, b: &Latents, require_support: bool) -> Result<f64, CliError> {
    let bins = |set: &Latents| -> Result<Vec<Option<PartitionKey>>, CliError> {
        if set.dim() != model.dim() {
            return Err(pmfs_core::Error::DimensionMismatch {
                expected: model.dim(),
                got: set.dim(),
            }
            .into());
        }
        Ok(set.rows().map(|z| model.grid().quantize(z).ok()).collect())
    };
    let (ka, kb) = (bins(a)?, bins(b)?);
    if a.is_empty() || b.is_empty() {
        return Err(pmfs_core::Error::EmptyLatentSet.into());
    }
    let outside = a.rows().filter(|z| !model.in_support(z)).count();
    eprintln!("support: {} of {} vectors of a in positively weighted bins", a.len() - outside, a.len());
    if require_support && outside > 0 {
        return Err(pmfs_core::Error::InvalidArgument(format!("{outside} vectors of a fall outside the model support")).into());
    }
    Ok(total_variation(&empirical_distribution(ka), &empirical_distribution(kb))?)
}

pub fn sweep(args: SweepArgs) -> CliResult {
    let train = read_latents(&args.train)?;
    let holdout = read_latents(&args.holdout)?;
    let ks: Vec<usize> = args.k_values.iter().map(|&k| k as usize).collect();
    let config = sinkhorn_config(args.epsilon, 2.0);
    let results = sweep_k_with(&train, &holdout, &ks, usize_arg(args.samples, "samples")?, args.seed, &config)?;

    let mut out = BufWriter::new(File::create(&args.output).map_err(pmfs_core::Error::from)?);
    let mut failed = 0;
    let io = |e: std::io::Error| CliError::Run(e.into());
    writeln!(out, "k,distance").map_err(io)?;
    for (k, distance) in &results {
        match distance {
            Ok(d) => {
                writeln!(out, "{k},{d}").map_err(io)?;
                println!("k={k} distance={d}");
            }
            Err(e) => {
                writeln!(out, "{k},").map_err(io)?;
                eprintln!("k={k}: {e}");
                failed += 1;
            }
        }
    }
    out.flush().map_err(io)?;
    if failed > 0 {
        return Err(pmfs_core::Error::InvalidArgument(format!("{failed} of {} k values failed", results.len())).into());
    }
    Ok(())
}

pub fn project(args: ProjectArgs) -> CliResult {
    let sets = args
        .inputs
        .iter()
        .map(|(name, path)| Ok((name.clone(), read_latents(path)?)))
        .collect::<Result<Vec<(String, Latents)>, CliError>>()?;
    let pca = Pca::fit(&sets[0].1, 2)?;
    let projected = sets
        .iter()
        .map(|(name, set)| Ok((name.clone(), pca.transform(set)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    write_scatter(&projected, &args.output)?;
    Ok(())
}

pub fn bench(args: BenchArgs) -> CliResult {
    let config = BenchConfig {
        n: usize_arg(args.n, "n")?,
        d: usize_arg(args.d, "d")?,
        k: args.k as usize,
        components: usize_arg(args.components, "components")?,
        max_iterations: usize_arg(args.max_iters, "max-iters")?,
        repeats: usize_arg(args.repeats, "repeats")?,
        seed: args.seed,
    };
    let reports = match &args.scaling {
        Some(ns) => {
            let ns = ns.iter().map(|&n| usize_arg(n, "scaling")).collect::<Result<Vec<_>, _>>()?;
            run_scaling(&ns, &config)?
        }
        None => {
            let outcome = run_bench(&config)?;
            vec![outcome.pmfs, outcome.gmm]
        }
    };
    for r in &reports {
        println!("{r}");
    }
    if let Some(path) = &args.output {
        write_bench_csv(&reports, path)?;
    }
    Ok(())
}

fn write_bench_csv(reports: &[BenchReport], path: &Path) -> CliResult {
    let io = |e: std::io::Error| CliError::Run(e.into());
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{}", BenchReport::CSV_HEADER).map_err(io)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row()).map_err(io)?;
    }
    out.flush().map_err(io)
}
