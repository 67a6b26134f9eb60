//! Named experiment configurations.

use std::path::PathBuf;

use crate::config::{ExperimentConfig, OutputSection, ProblemSection, SweepSection, TrainingSection};
use crate::error::ConfigError;

pub const SEEDS: u64 = 10;
pub const ALPHA_GRID: [f64; 6] = [0.01, 0.1, 0.4, 0.7, 0.9, 1.0];
pub const SIGMAS: [f64; 3] = [1.0, 3.0, 10.0];

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "synthetic-sigma1",
        summary: "uniform vs adaptive-osmd vs oracle at sigma = 1",
    },
    Preset {
        name: "synthetic-sigma3",
        summary: "uniform vs adaptive-osmd vs oracle at sigma = 3",
    },
    Preset {
        name: "synthetic-sigma10",
        summary: "uniform vs adaptive-osmd vs oracle at sigma = 10",
    },
    Preset {
        name: "alpha-robustness",
        summary: "adaptive-osmd over six alpha values for each sigma",
    },
    Preset {
        name: "replacement-compare",
        summary: "adaptive-osmd with and without replacement for each sigma",
    },
];

fn base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSection {
            clients: 100,
            samples_per_client: 100,
            dim: 10,
            kappa: 25.0,
            ..ProblemSection::default()
        },
        training: TrainingSection {
            k: 5,
            batch: 10,
            mu_sgd: 0.1,
            alpha: 0.4,
            rounds: 2000,
            ..TrainingSection::default()
        },
        sweep: SweepSection {
            seeds: (0..SEEDS).collect(),
            ..SweepSection::default()
        },
        output: OutputSection {
            dir: PathBuf::from("results").join(name),
            ..OutputSection::default()
        },
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn sigma_preset(name: &str, sigma: f64) -> ExperimentConfig {
    let mut cfg = base(name);
    cfg.problem.sigma = sigma;
    cfg.sweep.samplers = names(&["uniform", "adaptive-osmd", "oracle-optimal"]);
    cfg
}

/// Looks up a preset by name. `fig1-sigma{1,3,10}` are accepted as aliases of
/// the synthetic presets.
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let canonical = match name {
        "fig1-sigma1" => "synthetic-sigma1",
        "fig1-sigma3" => "synthetic-sigma3",
        "fig1-sigma10" => "synthetic-sigma10",
        other => other,
    };
    let cfg = match canonical {
        "synthetic-sigma1" => sigma_preset(canonical, 1.0),
        "synthetic-sigma3" => sigma_preset(canonical, 3.0),
        "synthetic-sigma10" => sigma_preset(canonical, 10.0),
        "alpha-robustness" => {
            let mut cfg = base(canonical);
            cfg.sweep.sigmas = SIGMAS.to_vec();
            cfg.sweep.alphas = ALPHA_GRID.to_vec();
            cfg.sweep.samplers = names(&["adaptive-osmd"]);
            cfg
        }
        "replacement-compare" => {
            let mut cfg = base(canonical);
            cfg.sweep.sigmas = SIGMAS.to_vec();
            cfg.sweep.replacements = names(&["with", "without"]);
            cfg.sweep.samplers = names(&["adaptive-osmd"]);
            cfg
        }
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    };
    Ok(cfg)
}

/// Every preset under its canonical name.
pub fn presets() -> Vec<(&'static str, ExperimentConfig)> {
    PRESETS
        .iter()
        .map(|p| (p.name, preset(p.name).expect("listed preset")))
        .collect()
}
