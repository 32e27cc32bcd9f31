//! Experiment configuration files.
//!
//! Flat `key = value` lines; `#` starts a comment. Scalar keys are
//! `model_kind`, `trials`, `seed` and `output_path`. Each `sweep` line holds
//! one or more instances separated by `;`, an instance being
//! whitespace-separated `field:value` pairs:
//!
//! ```text
//! model_kind = denoise
//! trials = 200
//! seed = 7
//! sweep = n:1000 lambdas:63.25,31.62 sigma:1 a_mode:aligned l:1
//! ```
//!
//! PCA instances give `p:` and `sigma2:` instead of `sigma:`. `a_mode` is
//! `aligned`, `random`, `basis(i)` (1-based) or `mix(w)`. `oracle:false`
//! skips the simulation-only eigenvalue oracle.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Denoise,
    Pca,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "denoise" | "md" => Ok(ModelKind::Denoise),
            "pca" => Ok(ModelKind::Pca),
            other => Err(Error::invalid(format!("unknown model_kind {other:?}"))),
        }
    }
}

/// How the test vector `a` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AMode {
    Aligned,
    /// 1-based standard basis index.
    Basis(usize),
    RandomUnit,
    /// `w·u_l* + √(1−w²)·(random unit vector ⟂ u_l*)`.
    Mix(f64),
}

impl FromStr for AMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let arg = |prefix: &str| {
            lower
                .strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('('))
                .and_then(|rest| rest.strip_suffix(')'))
        };
        if lower == "aligned" {
            Ok(AMode::Aligned)
        } else if lower == "random" || lower == "random_unit" {
            Ok(AMode::RandomUnit)
        } else if let Some(i) = arg("basis") {
            let i = parse_num::<usize>("basis index", i)?;
            if i == 0 {
                return Err(Error::invalid("basis index is 1-based"));
            }
            Ok(AMode::Basis(i))
        } else if let Some(w) = arg("mix") {
            let w = parse_num::<f64>("mix weight", w)?;
            if !(-1.0..=1.0).contains(&w) {
                return Err(Error::invalid(format!("mix weight {w} outside [-1, 1]")));
            }
            Ok(AMode::Mix(w))
        } else {
            Err(Error::invalid(format!("unknown a_mode {s:?}")))
        }
    }
}

/// One point of a sweep. `noise` is `σ` for denoising and `σ²` for PCA.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceDescriptor {
    pub n: usize,
    pub p: Option<usize>,
    pub lambdas: Vec<f64>,
    pub noise: f64,
    pub a_mode: AMode,
    pub l: usize,
    pub oracle: bool,
}

impl InstanceDescriptor {
    pub fn rank(&self) -> usize {
        self.lambdas.len()
    }

    fn parse(text: &str, kind: ModelKind) -> Result<Self> {
        let (mut n, mut p, mut lambdas, mut noise) = (None, None, None, None);
        let (mut a_mode, mut l, mut oracle) = (AMode::Aligned, 1usize, true);
        for field in text.split_whitespace() {
            let (key, value) = field
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("expected field:value, got {field:?}")))?;
            match (key, kind) {
                ("n", _) => n = Some(parse_num::<usize>("n", value)?),
                ("p", ModelKind::Pca) => p = Some(parse_num::<usize>("p", value)?),
                ("lambdas", _) => {
                    lambdas = Some(
                        value
                            .split(',')
                            .map(|v| parse_num::<f64>("lambdas", v))
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
                ("sigma", ModelKind::Denoise) | ("sigma2", ModelKind::Pca) => {
                    noise = Some(parse_num::<f64>(key, value)?)
                }
                ("a_mode", _) => a_mode = value.parse()?,
                ("l", _) => l = parse_num::<usize>("l", value)?,
                ("oracle", _) => oracle = parse_num::<bool>("oracle", value)?,
                _ => return Err(Error::invalid(format!("unknown instance field {key:?} for {kind:?}"))),
            }
        }
        let missing = |what: &str| Error::invalid(format!("instance {text:?} is missing {what}"));
        let desc = Self {
            n: n.ok_or_else(|| missing("n"))?,
            p: match kind {
                ModelKind::Pca => Some(p.ok_or_else(|| missing("p"))?),
                ModelKind::Denoise => None,
            },
            lambdas: lambdas.ok_or_else(|| missing("lambdas"))?,
            noise: noise.ok_or_else(|| missing(if kind == ModelKind::Pca { "sigma2" } else { "sigma" }))?,
            a_mode,
            l,
            oracle,
        };
        if desc.l == 0 || desc.l > desc.rank() {
            return Err(Error::invalid(format!("l = {} outside 1..={}", desc.l, desc.rank())));
        }
        if let AMode::Basis(i) = desc.a_mode {
            let dim = desc.p.unwrap_or(desc.n);
            if i > dim {
                return Err(Error::invalid(format!("basis index {i} exceeds dimension {dim}")));
            }
        }
        Ok(desc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model_kind: ModelKind,
    pub sweep: Vec<InstanceDescriptor>,
    pub trials: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

fn parse_num<T: FromStr>(what: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse {what} from {s:?}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut model_kind = None;
        let mut trials = None;
        let mut seed = None;
        let mut output_path = None;
        let mut sweep_lines = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let once = |slot_set: bool| {
                if slot_set {
                    Err(Error::invalid(format!("line {}: duplicate key {key:?}", no + 1)))
                } else {
                    Ok(())
                }
            };
            match key {
                "model_kind" => {
                    once(model_kind.is_some())?;
                    model_kind = Some(value.parse::<ModelKind>()?);
                }
                "trials" => {
                    once(trials.is_some())?;
                    trials = Some(parse_num::<usize>("trials", value)?);
                }
                "seed" => {
                    once(seed.is_some())?;
                    seed = Some(parse_num::<u64>("seed", value)?);
                }
                "output_path" => {
                    once(output_path.is_some())?;
                    output_path = Some(PathBuf::from(value));
                }
                "sweep" => sweep_lines.push(value.to_string()),
                other => return Err(Error::invalid(format!("line {}: unknown key {other:?}", no + 1))),
            }
        }
        let model_kind = model_kind.ok_or_else(|| Error::invalid("config is missing model_kind"))?;
        let trials = trials.ok_or_else(|| Error::invalid("config is missing trials"))?;
        if trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        let sweep = sweep_lines
            .iter()
            .flat_map(|line| line.split(';'))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| InstanceDescriptor::parse(s, model_kind))
            .collect::<Result<Vec<_>>>()?;
        if sweep.is_empty() {
            return Err(Error::invalid("config has no sweep instances"));
        }
        if sweep.len() > u32::MAX as usize - 1 || trials >= u32::MAX as usize {
            return Err(Error::invalid("too many instances or trials"));
        }
        Ok(Self {
            model_kind,
            sweep,
            trials,
            seed: seed.unwrap_or(0),
            output_path,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
