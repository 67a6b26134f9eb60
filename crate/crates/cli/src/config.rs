//! Experiment configuration files.
//!
//! Configs are TOML documents with four optional sections:
//!
//! ```toml
//! [problem]
//! kind = "synthetic"        # or "csv" with features/labels/partition paths
//! clients = 100
//! samples_per_client = 100
//! dim = 10
//! kappa = 25.0
//! sigma = 10.0
//! noise_sd = 0.31622776601683794
//!
//! [training]
//! k = 5
//! rounds = 2000
//! sampler = "adaptive-osmd"
//! alpha = 0.4
//!
//! [sweep]
//! samplers = ["uniform", "adaptive-osmd", "oracle-optimal"]
//! seeds = [0, 1, 2]
//!
//! [output]
//! dir = "results"
//! ```
//!
//! Every key is optional and unknown keys are rejected. Empty sweep lists fall
//! back to the scalar value of the matching `[problem]` or `[training]` key.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fedsamp::sim::problem::SyntheticConfig;
use fedsamp::sim::train::{Replacement, SamplerKind, TrainConfig};
use serde::Deserialize;

use crate::error::ConfigError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub clients: usize,
    pub samples_per_client: usize,
    pub dim: usize,
    pub kappa: f64,
    pub sigma: f64,
    pub noise_sd: f64,
    pub coef_mean: f64,
    pub coef_sd: f64,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub partition: Option<PathBuf>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let s = SyntheticConfig::default();
        Self {
            kind: ProblemKind::Synthetic,
            clients: s.clients,
            samples_per_client: s.samples_per_client,
            dim: s.dim,
            kappa: s.kappa,
            sigma: s.sigma,
            noise_sd: s.noise_sd,
            coef_mean: s.coef_mean,
            coef_sd: s.coef_sd,
            features: None,
            labels: None,
            partition: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub k: usize,
    pub batch: usize,
    pub mu_sgd: f64,
    pub rounds: usize,
    pub sampler: String,
    pub replacement: String,
    pub alpha: f64,
    pub seed: u64,
    pub warm_start: bool,
    pub osmd_eta: Option<f64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            k: t.k,
            batch: t.batch,
            mu_sgd: t.mu_sgd,
            rounds: t.rounds,
            sampler: t.sampler.as_str().to_string(),
            replacement: t.replacement.as_str().to_string(),
            alpha: t.alpha,
            seed: t.seed,
            warm_start: t.warm_start,
            osmd_eta: t.osmd_eta,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub samplers: Vec<String>,
    pub sigmas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub replacements: Vec<String>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Only `"csv"` is supported.
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            formats: vec!["csv".to_string()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub training: TrainingSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

/// One fully resolved run of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub run_id: usize,
    /// `None` for dataset-backed problems.
    pub sigma: Option<f64>,
    pub train: TrainConfig,
}

impl RunSpec {
    pub fn synthetic(&self, problem: &ProblemSection) -> Option<SyntheticConfig> {
        let sigma = self.sigma?;
        Some(SyntheticConfig {
            clients: problem.clients,
            samples_per_client: problem.samples_per_client,
            dim: problem.dim,
            kappa: problem.kappa,
            sigma,
            noise_sd: problem.noise_sd,
            coef_mean: problem.coef_mean,
            coef_sd: problem.coef_sd,
            seed: self.train.seed,
        })
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn or_scalar<T: Clone>(list: &[T], scalar: T) -> Vec<T> {
    if list.is_empty() {
        vec![scalar]
    } else {
        list.to_vec()
    }
}

fn check_alpha(field: &str, alpha: f64) -> Result<(), ConfigError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must lie in (0, 1], got {alpha}")))
    }
}

fn check_sigma(field: &str, sigma: f64) -> Result<(), ConfigError> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and nonnegative, got {sigma}")))
    }
}

fn parse_named<T: FromStr>(field: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(field, format!("unknown value {value:?}")))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn is_synthetic(&self) -> bool {
        self.problem.kind == ProblemKind::Synthetic
    }

    pub fn seeds(&self) -> Vec<u64> {
        or_scalar(&self.sweep.seeds, self.training.seed)
    }

    /// Field-level checks that do not need the dataset loaded.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.problem;
        let t = &self.training;
        let s = &self.sweep;
        match p.kind {
            ProblemKind::Synthetic => {
                for (field, value) in [
                    ("problem.clients", p.clients),
                    ("problem.samples_per_client", p.samples_per_client),
                    ("problem.dim", p.dim),
                ] {
                    if value == 0 {
                        return Err(invalid(field, "must be at least 1"));
                    }
                }
                if !(p.kappa.is_finite() && p.kappa >= 1.0) {
                    return Err(invalid("problem.kappa", format!("must be at least 1, got {}", p.kappa)));
                }
                check_sigma("problem.sigma", p.sigma)?;
                if !(p.noise_sd.is_finite() && p.noise_sd >= 0.0) {
                    return Err(invalid("problem.noise_sd", "must be finite and nonnegative"));
                }
                if !p.coef_mean.is_finite() {
                    return Err(invalid("problem.coef_mean", "must be finite"));
                }
                if !(p.coef_sd.is_finite() && p.coef_sd >= 0.0) {
                    return Err(invalid("problem.coef_sd", "must be finite and nonnegative"));
                }
                for (field, path) in [
                    ("problem.features", &p.features),
                    ("problem.labels", &p.labels),
                    ("problem.partition", &p.partition),
                ] {
                    if path.is_some() {
                        return Err(invalid(field, "only used when kind = \"csv\""));
                    }
                }
                for &sigma in &s.sigmas {
                    check_sigma("sweep.sigmas", sigma)?;
                }
            }
            ProblemKind::Csv => {
                for (field, path) in [
                    ("problem.features", &p.features),
                    ("problem.labels", &p.labels),
                    ("problem.partition", &p.partition),
                ] {
                    if path.is_none() {
                        return Err(invalid(field, "required when kind = \"csv\""));
                    }
                }
                if !s.sigmas.is_empty() {
                    return Err(invalid("sweep.sigmas", "only applies to synthetic problems"));
                }
            }
        }

        if t.k == 0 {
            return Err(invalid("training.k", "must be at least 1"));
        }
        if self.is_synthetic() && t.k > p.clients {
            return Err(invalid(
                "training.k",
                format!("cannot exceed the {} clients", p.clients),
            ));
        }
        if t.batch == 0 {
            return Err(invalid("training.batch", "must be at least 1"));
        }
        if !(t.mu_sgd.is_finite() && t.mu_sgd > 0.0) {
            return Err(invalid(
                "training.mu_sgd",
                format!("must be positive, got {}", t.mu_sgd),
            ));
        }
        if t.rounds == 0 {
            return Err(invalid("training.rounds", "must be at least 1"));
        }
        check_alpha("training.alpha", t.alpha)?;
        parse_named::<SamplerKind>("training.sampler", &t.sampler)?;
        parse_named::<Replacement>("training.replacement", &t.replacement)?;
        if let Some(eta) = t.osmd_eta {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(invalid("training.osmd_eta", format!("must be positive, got {eta}")));
            }
        }

        for &alpha in &s.alphas {
            check_alpha("sweep.alphas", alpha)?;
        }
        for name in &s.samplers {
            parse_named::<SamplerKind>("sweep.samplers", name)?;
        }
        for name in &s.replacements {
            parse_named::<Replacement>("sweep.replacements", name)?;
        }
        let mut seen = HashSet::new();
        for &seed in &s.seeds {
            if !seen.insert(seed) {
                return Err(invalid("sweep.seeds", format!("seed {seed} appears more than once")));
            }
        }
        for f in &self.output.formats {
            if f != "csv" {
                return Err(invalid("output.formats", format!("unsupported format {f:?}")));
            }
        }
        Ok(())
    }

    /// Expands the sweep in sigma, alpha, replacement, sampler, seed order and
    /// checks each run against a problem with `clients` clients.
    pub fn runs(&self, clients: usize) -> Result<Vec<RunSpec>, ConfigError> {
        self.validate()?;
        let t = &self.training;
        let sigmas: Vec<Option<f64>> = if self.is_synthetic() {
            or_scalar(&self.sweep.sigmas, self.problem.sigma)
                .into_iter()
                .map(Some)
                .collect()
        } else {
            vec![None]
        };
        let alphas = or_scalar(&self.sweep.alphas, t.alpha);
        let replacements = or_scalar(&self.sweep.replacements, t.replacement.clone());
        let samplers = or_scalar(&self.sweep.samplers, t.sampler.clone());
        let seeds = self.seeds();

        let mut runs = Vec::new();
        for &sigma in &sigmas {
            for &alpha in &alphas {
                for replacement in &replacements {
                    for sampler in &samplers {
                        for &seed in &seeds {
                            let train = TrainConfig {
                                k: t.k,
                                batch: t.batch,
                                mu_sgd: t.mu_sgd,
                                rounds: t.rounds,
                                sampler: parse_named("sweep.samplers", sampler)?,
                                replacement: parse_named("sweep.replacements", replacement)?,
                                alpha,
                                seed,
                                warm_start: t.warm_start,
                                osmd_eta: t.osmd_eta,
                            };
                            train
                                .validate(clients)
                                .map_err(|e| invalid("training", format!("{} run: {e}", train.sampler)))?;
                            runs.push(RunSpec {
                                run_id: runs.len(),
                                sigma,
                                train,
                            });
                        }
                    }
                }
            }
        }
        Ok(runs)
    }

    /// Resolves relative dataset paths against `base`.
    fn rebase(&mut self, base: &Path) {
        for path in [
            &mut self.problem.features,
            &mut self.problem.labels,
            &mut self.problem.partition,
        ]
        .into_iter()
        .flatten()
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Reads and validates a config file. Dataset paths are taken relative to the
/// file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    cfg.validate()?;
    if let Some(dir) = path.parent() {
        cfg.rebase(dir);
    }
    Ok(cfg)
}
