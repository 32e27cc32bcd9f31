use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eigdebias::denoise::{self, GroundTruthDenoising};
use eigdebias::harness::{self, AMode, ExperimentConfig, RunOptions};
use eigdebias::lowerbounds::{self, TuningConstant};
use eigdebias::master;
use eigdebias::pca::{self, Branch, SpikedModel};
use eigdebias::rng::{random_orthonormal_frame, random_symmetric, random_unit_vector, seeded};
use eigdebias::{eigendecompose, io, Error, Ordering, Result};

#[derive(Parser)]
#[command(name = "eigdebias", version, about = "De-biased eigenvector functional estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate aᵀu_l* from a noisy symmetric matrix.
    EstimateMd {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        sigma: f64,
        /// Also report the semicircle-law approximation of b_l.
        #[arg(long)]
        semicircle: bool,
    },
    /// Estimate aᵀu_l* from a p×n data matrix (one sample per column).
    EstimatePca {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long, conflicts_with = "estimate_noise")]
        sigma2: Option<f64>,
        /// Estimate σ² from the bulk eigenvalues.
        #[arg(long)]
        estimate_noise: bool,
    },
    /// Run a Monte Carlo sweep and write per-trial CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output_path from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Record per-trial wall time (output is then not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Check the angle and eigenvalue identities on random instances.
    VerifyMaster {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Minimax hypothesis constructions and the plug-in bias experiment.
    Lowerbound {
        #[command(subcommand)]
        which: LowerboundCommand,
    },
}

#[derive(Subcommand)]
enum LowerboundCommand {
    Rotation {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.0625)]
        c_n: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Direction {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 0.0625)]
        c_n: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Plugin {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        l: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value = "aligned")]
        a_mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn kv(key: &str, value: impl std::fmt::Display) {
    println!("{key}={value}");
}

fn estimate_md(matrix: PathBuf, a: PathBuf, l: usize, rank: usize, sigma: f64, semicircle: bool) -> Result<()> {
    let m = io::read_symmetric_csv(&matrix)?;
    let a = io::read_vector_csv(&a)?;
    let est = denoise::estimate_functional_md(&m, a.as_ref(), l, rank, sigma)?;
    kv("plugin", est.plugin);
    kv("correction_b", est.correction_b);
    kv("factor", est.factor);
    kv("debiased", est.debiased);
    if semicircle {
        let spec = eigendecompose(&m, Ordering::ByMagnitudeDesc)?;
        let b = denoise::semicircle_b(spec.eigenvalues()[l - 1], sigma, m.dim())?;
        kv("semicircle_b", b);
        kv("debiased_semicircle", (1.0 + b).sqrt() * est.plugin);
    }
    Ok(())
}

fn estimate_pca(data: PathBuf, a: PathBuf, l: usize, rank: usize, sigma2: Option<f64>, estimate: bool) -> Result<()> {
    let s = io::read_matrix_csv(&data)?;
    let a = io::read_vector_csv(&a)?;
    let (p, n) = (s.nrows(), s.ncols());
    let spec = eigendecompose(&pca::sample_covariance(s.as_ref()), Ordering::ByValueDesc)?;
    let sigma2 = match (sigma2, estimate) {
        (Some(v), _) => v,
        (None, true) => pca::estimate_noise_pca(&spec, rank, n)?,
        // only the n < p formula reads σ²
        (None, false) if Branch::select(n, p) == Branch::NgeP => f64::NAN,
        (None, false) => {
            return Err(Error::InvalidInput(
                "n < p needs --sigma2 or --estimate-noise".into(),
            ))
        }
    };
    let est = pca::estimate_pca_from_spectrum(&spec, a.as_ref(), l, rank, n, sigma2)?;
    kv("plugin", est.plugin);
    kv("correction_c", est.correction_c);
    kv("factor", est.factor);
    kv("debiased", est.debiased);
    kv("branch", if est.branch == Branch::NgeP { "n_ge_p" } else { "n_lt_p" });
    if sigma2.is_finite() {
        kv("sigma2", sigma2);
    }
    kv("shrunk_eigenvalue", pca::shrink_eigenvalue(&spec, l, rank, n)?);
    Ok(())
}

fn experiment(config: PathBuf, out: Option<PathBuf>, workers: usize, timing: bool) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&config)?;
    let out = out
        .or_else(|| cfg.output_path.clone())
        .ok_or_else(|| Error::InvalidInput("no output path: pass --out or set output_path".into()))?;
    let result = harness::run_experiment(&cfg, RunOptions { workers, timing })?;
    harness::write_records_csv(&out, &result.records)?;
    for s in &result.summaries {
        println!(
            "instance={} trials={} median_plugin={} iqr_plugin={} median_debiased={} iqr_debiased={}",
            s.instance, s.trials, s.median_plugin, s.iqr_plugin, s.median_debiased, s.iqr_debiased
        );
    }
    for f in &result.failures {
        eprintln!("instance={} failed: {}", f.instance, f.message);
    }
    kv("records", result.records.len());
    kv("output", out.display());
    Ok(())
}

fn verify_master(n: usize, trials: usize, seed: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput("verify-master needs n >= 2".into()));
    }
    let mut rng = seeded(seed);
    let (mut worst_vector, mut worst_general, mut skipped) = (0.0f64, 0.0f64, 0usize);
    for t in 0..trials {
        let m = random_symmetric(n, &mut rng);
        let scale = 1.0 + m.spectral_norm()?;
        let l = 1 + t % n;
        let q = random_unit_vector(n, &mut rng);
        match master::verify_vector_master(&m, q.as_ref(), l) {
            Ok(rep) => {
                worst_vector = worst_vector.max(rep.cos2_gap.max(rep.lambda_gap).max(rep.u_perp_gap) / scale)
            }
            Err(Error::DegenerateSpectrum(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
        let k = 1 + t % (n - 1).min(5);
        let frame = random_orthonormal_frame(n, k, &mut rng);
        match master::verify_general_master(&m, frame.as_ref(), l) {
            Ok(rep) => worst_general = worst_general.max(rep.cos2_gap.max(rep.identity_residual) / scale),
            Err(Error::DegenerateSpectrum(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    kv("max_vector_gap", worst_vector);
    kv("max_general_gap", worst_general);
    kv("skipped_ill_conditioned", skipped);
    kv("pass", worst_vector <= 1e-8 && worst_general <= 1e-8);
    Ok(())
}

fn lowerbound(which: LowerboundCommand) -> Result<()> {
    match which {
        LowerboundCommand::Rotation { p, n, lambdas, sigma2, l, k, c_n, seed } => {
            let model = SpikedModel::with_random_frame(p, n, lambdas, sigma2, &mut seeded(seed))?;
            let pair = lowerbounds::rotation_pair(&model, l, k, TuningConstant::from_value(c_n)?)?;
            let generic = n as f64 * lowerbounds::gaussian_kl(&pair.sigma0, &pair.sigma1)?;
            kv("theta_n", pair.separation);
            kv("kl_closed_form", pair.kl);
            kv("kl_generic", generic);
        }
        LowerboundCommand::Direction { p, n, lambdas, sigma2, l, c_n, seed } => {
            let mut rng = seeded(seed);
            let model = SpikedModel::with_random_frame(p, n, lambdas, sigma2, &mut rng)?;
            let a = random_unit_vector(p, &mut rng);
            let pair = lowerbounds::direction_pair(&model, l, a.as_ref(), TuningConstant::from_value(c_n)?)?;
            kv("delta_n", pair.separation);
            kv("kl", pair.kl);
        }
        LowerboundCommand::Plugin { n, lambdas, sigma, l, trials, a_mode, seed } => {
            let mut rng = seeded(seed);
            let model = GroundTruthDenoising::with_random_frame(n, lambdas, sigma, &mut rng)?;
            let mode: AMode = a_mode.parse()?;
            let a = harness::a_vector_with(mode, model.u_star(), l, &mut rng)?;
            let rep = lowerbounds::plugin_lower_experiment(&model, a.as_ref(), l, trials, seed)?;
            kv("bias_scale", rep.bias_scale);
            for (c, pr) in rep.thresholds.iter().zip(rep.exceed_probability) {
                kv(&format!("p_exceed_{c}"), pr);
            }
            kv("feasible", rep.feasible);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::EstimateMd { matrix, a, l, rank, sigma, semicircle } => {
            estimate_md(matrix, a, l, rank, sigma, semicircle)
        }
        Command::EstimatePca { data, a, l, rank, sigma2, estimate_noise } => {
            estimate_pca(data, a, l, rank, sigma2, estimate_noise)
        }
        Command::Experiment { config, out, workers, timing } => experiment(config, out, workers, timing),
        Command::VerifyMaster { n, trials, seed } => verify_master(n, trials, seed),
        Command::Lowerbound { which } => lowerbound(which),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
