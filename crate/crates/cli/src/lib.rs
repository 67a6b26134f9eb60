//! Experiment runner for the `fedsamp` simulator: TOML configs, named presets,
//! parallel sweeps and CSV output.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod sweep;

use std::path::PathBuf;

pub use config::{parse_config, ExperimentConfig, RunSpec};
pub use error::{CliError, ConfigError};
pub use sweep::{run_sweep, Plan, RunOutcome, SweepReport};

/// Command-line overrides, applied on top of a file or preset.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    /// Replace the seed list with `0..n`.
    pub seeds: Option<u64>,
    pub rounds: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        if let Some(n) = self.seeds {
            if n == 0 {
                return Err(ConfigError::Validation {
                    field: "--seeds".into(),
                    message: "must be at least 1".into(),
                });
            }
            cfg.sweep.seeds = (0..n).collect();
        }
        if let Some(t) = self.rounds {
            cfg.training.rounds = t;
        }
        cfg.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = presets::preset("synthetic-sigma1").unwrap();
        let o = Overrides {
            out: Some("elsewhere".into()),
            seeds: Some(3),
            rounds: Some(50),
        };
        o.apply(&mut cfg).unwrap();
        assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.sweep.seeds, [0, 1, 2]);
        assert_eq!(cfg.training.rounds, 50);
        assert!(Overrides {
            seeds: Some(0),
            ..Default::default()
        }
        .apply(&mut cfg)
        .is_err());
        assert!(Overrides {
            rounds: Some(0),
            ..Default::default()
        }
        .apply(&mut cfg)
        .is_err());
    }
}
