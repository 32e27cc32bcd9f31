//! Deterministic Monte Carlo sweeps.
//!
//! Trial `t` of instance `j` draws from `trial_rng(seed, j, t)`; the planted
//! model and the vector `a` of instance `j` come from
//! `trial_rng(seed, j, SETUP_TRIAL)`. Output rows are sorted by `(j, t)`, so
//! the CSV depends only on the config, never on the number of workers.

mod config;

pub use config::{AMode, ExperimentConfig, InstanceDescriptor, ModelKind};

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use faer::{Col, MatRef};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoise::{self, GroundTruthDenoising};
use crate::error::{Error, Result};
use crate::matrix::{dist, dot, eigendecompose, norm2, with_sequential_kernels, Ordering};
use crate::pca::{self, SpikedModel};
use crate::rng::{random_unit_vector, standard_normal, trial_rng, SETUP_TRIAL};

/// Column order of the results CSV.
pub const CSV_HEADER: &str = "instance,trial,dist_plugin,dist_debiased,correction,lambda_l,lambda_corrected,wall_ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub instance: usize,
    pub trial: usize,
    pub dist_plugin: f64,
    pub dist_debiased: f64,
    /// `b_l` (denoising) or `c_l` (PCA).
    pub correction: f64,
    pub lambda_l: f64,
    /// `λ_l − γ(λ_l)` (denoising oracle) or the shrunk eigenvalue (PCA).
    pub lambda_corrected: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSummary {
    pub instance: usize,
    pub trials: usize,
    pub median_plugin: f64,
    pub iqr_plugin: f64,
    pub median_debiased: f64,
    pub iqr_debiased: f64,
    pub median_correction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFailure {
    pub instance: usize,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<InstanceSummary>,
    pub failures: Vec<InstanceFailure>,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub workers: usize,
    /// Record wall-clock time per trial; otherwise `wall_ms` is 0 and the
    /// output is reproducible byte for byte.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, timing: false }
    }
}

/// Test vector for mode `mode` relative to column `l` (1-based) of `u_star`.
pub fn a_vector(mode: AMode, u_star: MatRef<'_, f64>, l: usize, seed: u64) -> Result<Col<f64>> {
    a_vector_with(mode, u_star, l, &mut crate::rng::seeded(seed))
}

pub fn a_vector_with<R: Rng + ?Sized>(
    mode: AMode,
    u_star: MatRef<'_, f64>,
    l: usize,
    rng: &mut R,
) -> Result<Col<f64>> {
    let n = u_star.nrows();
    if l == 0 || l > u_star.ncols() {
        return Err(Error::invalid(format!("l = {l} outside 1..={}", u_star.ncols())));
    }
    let u = u_star.col(l - 1);
    Ok(match mode {
        AMode::Aligned => u.to_owned(),
        AMode::Basis(i) => {
            if i == 0 || i > n {
                return Err(Error::invalid(format!("basis index {i} outside 1..={n}")));
            }
            Col::from_fn(n, |j| if j + 1 == i { 1.0 } else { 0.0 })
        }
        AMode::RandomUnit => random_unit_vector(n, rng),
        AMode::Mix(w) => {
            if !(-1.0..=1.0).contains(&w) || n < 2 {
                return Err(Error::invalid(format!("mix weight {w} needs |w| <= 1 and n >= 2")));
            }
            let v = loop {
                let g = Col::from_fn(n, |_| standard_normal(rng));
                let proj = dot(g.as_ref(), u);
                let perp = Col::from_fn(n, |i| g[i] - proj * u[i]);
                let len = norm2(perp.as_ref());
                if len > 1e-8 {
                    break Col::from_fn(n, |i| perp[i] / len);
                }
            };
            let s = (1.0 - w * w).max(0.0).sqrt();
            let a = Col::from_fn(n, |i| w * u[i] + s * v[i]);
            let len = norm2(a.as_ref());
            Col::from_fn(n, |i| a[i] / len)
        }
    })
}

enum Setup {
    Denoise(GroundTruthDenoising),
    Pca(SpikedModel),
}

struct Instance {
    setup: Setup,
    a: Col<f64>,
    desc: InstanceDescriptor,
}

fn build_instance(kind: ModelKind, desc: &InstanceDescriptor, seed: u64, j: usize) -> Result<Instance> {
    let mut rng = trial_rng(seed, j as u32, SETUP_TRIAL);
    let setup = match kind {
        ModelKind::Denoise => Setup::Denoise(GroundTruthDenoising::with_random_frame(
            desc.n,
            desc.lambdas.clone(),
            desc.noise,
            &mut rng,
        )?),
        ModelKind::Pca => Setup::Pca(SpikedModel::with_random_frame(
            desc.p.ok_or_else(|| Error::invalid("PCA instance without p"))?,
            desc.n,
            desc.lambdas.clone(),
            desc.noise,
            &mut rng,
        )?),
    };
    let u_star = match &setup {
        Setup::Denoise(m) => m.u_star(),
        Setup::Pca(m) => m.u_star(),
    };
    let a = a_vector_with(desc.a_mode, u_star, desc.l, &mut rng)?;
    Ok(Instance {
        setup,
        a,
        desc: desc.clone(),
    })
}

fn run_trial(inst: &Instance, seed: u64, j: usize, t: usize, timing: bool) -> Result<TrialRecord> {
    let start = Instant::now();
    let mut rng = trial_rng(seed, j as u32, t as u32);
    let (l, r) = (inst.desc.l, inst.desc.rank());
    let a = inst.a.as_ref();
    let mut rec = match &inst.setup {
        Setup::Denoise(model) => {
            let (m, h) = denoise::observe_with(model, &mut rng);
            let spec = eigendecompose(&m, Ordering::ByMagnitudeDesc)?;
            let est = denoise::estimate_md_from_spectrum(&spec, a, l, r, model.sigma())?;
            let truth = model.functional(a, l);
            let lambda_l = spec.eigenvalues()[l - 1];
            let lambda_corrected = if inst.desc.oracle {
                let g = denoise::gamma_oracle(model, &h, lambda_l, None)?;
                Some(lambda_l - g.gamma_at_lambda_l)
            } else {
                None
            };
            TrialRecord {
                instance: j,
                trial: t,
                dist_plugin: dist(est.plugin, truth).value(),
                dist_debiased: dist(est.debiased, truth).value(),
                correction: est.correction_b,
                lambda_l,
                lambda_corrected,
                wall_ms: 0.0,
            }
        }
        Setup::Pca(model) => {
            let s = pca::sample_with(model, &mut rng);
            let spec = eigendecompose(&pca::sample_covariance(s.as_ref()), Ordering::ByValueDesc)?;
            let est = pca::estimate_pca_from_spectrum(&spec, a, l, r, model.n(), model.sigma2())?;
            let truth = model.functional(a, l);
            TrialRecord {
                instance: j,
                trial: t,
                dist_plugin: dist(est.plugin, truth).value(),
                dist_debiased: dist(est.debiased, truth).value(),
                correction: est.correction_c,
                lambda_l: spec.eigenvalues()[l - 1],
                lambda_corrected: Some(pca::shrink_eigenvalue(&spec, l, r, model.n())?),
                wall_ms: 0.0,
            }
        }
    };
    if timing {
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    Ok(rec)
}

/// Runs every trial of every instance on a pool of `opts.workers` threads.
///
/// Instances whose setup or any trial fails are reported in `failures`
/// (first failing trial) and contribute no records.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    let instances: Vec<Result<Instance>> = cfg
        .sweep
        .iter()
        .enumerate()
        .map(|(j, d)| build_instance(cfg.model_kind, d, cfg.seed, j))
        .collect();
    // model validity is a config error, not an instance failure
    let instances = instances.into_iter().collect::<Result<Vec<_>>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("cannot start worker pool: {e}")))?;
    let tasks: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|j| (0..cfg.trials).map(move |t| (j, t)))
        .collect();
    let results: Vec<Result<TrialRecord>> = with_sequential_kernels(|| {
        pool.install(|| {
            tasks
                .par_iter()
                .map(|&(j, t)| run_trial(&instances[j], cfg.seed, j, t, opts.timing))
                .collect()
        })
    });

    let mut records = Vec::with_capacity(results.len());
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (j, chunk) in results.chunks(cfg.trials).enumerate() {
        match chunk.iter().find_map(|r| r.as_ref().err()) {
            Some(e) => failures.push(InstanceFailure {
                instance: j,
                message: e.to_string(),
            }),
            None => {
                let recs: Vec<TrialRecord> = chunk.iter().map(|r| r.as_ref().unwrap().clone()).collect();
                summaries.push(summarize(j, &recs));
                records.extend(recs);
            }
        }
    }
    Ok(ExperimentOutput {
        records,
        summaries,
        failures,
    })
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn iqr(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

pub fn summarize(instance: usize, records: &[TrialRecord]) -> InstanceSummary {
    let plug: Vec<f64> = records.iter().map(|r| r.dist_plugin).collect();
    let deb: Vec<f64> = records.iter().map(|r| r.dist_debiased).collect();
    let corr: Vec<f64> = records.iter().map(|r| r.correction).collect();
    InstanceSummary {
        instance,
        trials: records.len(),
        median_plugin: median(&plug),
        iqr_plugin: iqr(&plug),
        median_debiased: median(&deb),
        iqr_debiased: iqr(&deb),
        median_correction: median(&corr),
    }
}

pub fn write_records_csv(path: impl AsRef<Path>, records: &[TrialRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(file, records).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

pub fn write_records<W: std::io::Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))
}

pub fn records_to_csv_string(records: &[TrialRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| Error::invalid(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::invalid(format!("unexpected results header {header:?}")));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::invalid(format!("bad results row: {e}"))))
        .collect()
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    read_records(File::open(path).map_err(|e| Error::io(path, e))?)
}

/// Least-squares slope of `log(median)` against `log(n)`.
pub fn fit_error_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::invalid("slope fit needs at least 3 grid points"));
    }
    if points.iter().any(|&(n, m)| !(n > 0.0) || !(m > 0.0)) {
        return Err(Error::invalid("slope fit needs positive n and medians"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct n values"));
    }
    Ok(sxy / sxx)
}
