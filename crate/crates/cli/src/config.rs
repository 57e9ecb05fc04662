use crate::error::CliError;
use balmet_core::balance::IterationConfig;
use balmet_core::variety::{GeometryKind, GeometrySpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Job {
    Balance,
    Functionals,
    Convexity,
    Bergman,
    MabuchiSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Identity,
    RoundBalanced,
    File,
    Perturbed,
}

/// Starting Gram matrix. Accepts either a bare kind (`"identity"`) or an
/// object with `kind` and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "InitialRepr")]
pub struct InitialMetric {
    pub kind: InitialKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Perturbation size around the round (or identity) metric.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InitialRepr {
    Kind(InitialKind),
    Full {
        kind: InitialKind,
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        epsilon: Option<f64>,
    },
}

impl From<InitialRepr> for InitialMetric {
    fn from(r: InitialRepr) -> Self {
        match r {
            InitialRepr::Kind(kind) => InitialMetric { kind, path: None, epsilon: None },
            InitialRepr::Full { kind, path, epsilon } => InitialMetric { kind, path, epsilon },
        }
    }
}

impl Default for InitialMetric {
    fn default() -> Self {
        InitialMetric { kind: InitialKind::Identity, path: None, epsilon: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Parameters of the `bergman` and `mabuchi-sweep` jobs. The base level of
/// the fixed class is `geometry.k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub k_values: Vec<usize>,
    pub epsilon: f64,
    pub mabuchi_steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { k_values: vec![4, 8, 12], epsilon: 0.3, mabuchi_steps: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub job: Job,
    #[serde(default)]
    pub initial_metric: InitialMetric,
    #[serde(default)]
    pub iteration: IterationConfig,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Number of seeded samples for the `functionals` and `convexity` jobs.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_mabuchi_steps")]
    pub mabuchi_steps: usize,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

fn default_samples() -> usize {
    50
}

fn default_mabuchi_steps() -> usize {
    16
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub max_iters: Option<usize>,
}

impl RunConfig {
    /// Reads the file, applies overrides and validates. Relative paths inside
    /// the file are resolved against its directory.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::validation("config", e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(p) = cfg.initial_metric.path.as_mut() {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            cfg.output_dir = dir.clone();
        } else if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Some(n) = overrides.max_iters {
            cfg.iteration.max_iters = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.geometry.k == 0 {
            return Err(CliError::validation("geometry.k", "k must be at least 1"));
        }
        self.geometry.validate().map_err(|e| CliError::from_core("geometry", e))?;
        self.iteration.validate().map_err(|e| CliError::from_core("iteration", e))?;
        if self.formats.is_empty() {
            return Err(CliError::validation("formats", "at least one of json, csv is required"));
        }
        if !(self.mabuchi_steps >= 8 && self.mabuchi_steps.is_multiple_of(4)) {
            return Err(CliError::validation("mabuchi_steps", "must be a multiple of 4 and at least 8"));
        }
        let init = &self.initial_metric;
        match init.kind {
            InitialKind::File => {
                let path = init
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::validation("initial_metric.path", "required for kind = file"))?;
                if !path.is_file() {
                    return Err(CliError::validation(
                        "initial_metric.path",
                        format!("{} does not exist", path.display()),
                    ));
                }
            }
            InitialKind::RoundBalanced if self.geometry.kind != GeometryKind::ProjectiveLine => {
                return Err(CliError::validation(
                    "initial_metric.kind",
                    "round_balanced is only known in closed form on projective_line",
                ));
            }
            _ => {}
        }
        if let Some(eps) = init.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(CliError::validation("initial_metric.epsilon", "must be finite and nonnegative"));
            }
        }
        match self.job {
            Job::Functionals | Job::Convexity if self.samples == 0 => {
                return Err(CliError::validation("samples", "must be at least 1"));
            }
            Job::Bergman | Job::MabuchiSweep => self.validate_sweep()?,
            _ => {}
        }
        check_writable(&self.output_dir)
    }

    fn validate_sweep(&self) -> Result<(), CliError> {
        if self.geometry.kind != GeometryKind::ProjectiveLine {
            return Err(CliError::validation("geometry.kind", "asymptotic jobs require projective_line"));
        }
        let s = &self.sweep;
        let k0 = self.geometry.k;
        if s.k_values.len() < 2 || s.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::validation(
                "sweep.k_values",
                "must be strictly increasing with at least two entries",
            ));
        }
        if let Some(k) = s.k_values.iter().find(|&&k| k == 0 || k % k0 != 0) {
            return Err(CliError::validation(
                "sweep.k_values",
                format!("{k} is not a positive multiple of geometry.k = {k0}"),
            ));
        }
        if !(s.epsilon.is_finite() && s.epsilon >= 0.0) {
            return Err(CliError::validation("sweep.epsilon", "must be finite and nonnegative"));
        }
        if !(s.mabuchi_steps >= 8 && s.mabuchi_steps.is_multiple_of(4)) {
            return Err(CliError::validation("sweep.mabuchi_steps", "must be a multiple of 4 and at least 8"));
        }
        Ok(())
    }
}

fn check_writable(dir: &Path) -> Result<(), CliError> {
    let field = "output_dir";
    if !dir.exists() {
        return Ok(());
    }
    let meta = std::fs::metadata(dir).map_err(|e| CliError::validation(field, e.to_string()))?;
    if !meta.is_dir() {
        return Err(CliError::validation(field, format!("{} is not a directory", dir.display())));
    }
    if meta.permissions().readonly() {
        return Err(CliError::validation(field, format!("{} is read-only", dir.display())));
    }
    Ok(())
}
