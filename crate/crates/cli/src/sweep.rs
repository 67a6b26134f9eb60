//! Sweep planning and parallel execution.

use std::path::PathBuf;

use fedsamp::sim::problem::{generate_synthetic, ingest_csv, FederatedProblem};
use fedsamp::sim::train::{run_experiment, RoundRecord};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ProblemKind, RunSpec};
use crate::error::{CliError, ConfigError};
use crate::output;

/// The per-round quantities kept for the results file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub t: usize,
    pub train_loss: f64,
    pub sampler_loss: f64,
    pub oracle_loss: f64,
    pub cum_regret: f64,
    pub tv_pstar: f64,
}

impl From<&RoundRecord> for Row {
    fn from(r: &RoundRecord) -> Self {
        Self {
            t: r.t,
            train_loss: r.train_loss,
            sampler_loss: r.sampler_loss,
            oracle_loss: r.oracle_loss,
            cum_regret: r.cum_regret,
            tv_pstar: r.tv_pstar,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub spec: RunSpec,
    /// Rounds completed before any failure.
    pub rows: Vec<Row>,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_loss)
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.rows.last().map(|r| r.cum_regret)
    }
}

/// A validated sweep ready to execute.
#[derive(Debug)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub runs: Vec<RunSpec>,
    dataset: Option<FederatedProblem>,
}

impl Plan {
    pub fn new(config: &ExperimentConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let (dataset, clients) = match config.problem.kind {
            ProblemKind::Synthetic => (None, config.problem.clients),
            ProblemKind::Csv => {
                let p = &config.problem;
                let problem = ingest_csv(
                    p.features.as_deref().expect("validated"),
                    p.labels.as_deref().expect("validated"),
                    p.partition.as_deref().expect("validated"),
                )
                .map_err(|e| ConfigError::Dataset(e.to_string()))?;
                let m = problem.num_clients();
                (Some(problem), m)
            }
        };
        let runs = config.runs(clients)?;
        Ok(Self {
            config: config.clone(),
            runs,
            dataset,
        })
    }

    fn execute_one(&self, spec: &RunSpec) -> RunOutcome {
        let generated;
        let problem = match (&self.dataset, spec.synthetic(&self.config.problem)) {
            (Some(p), _) => p,
            (None, Some(syn)) => match generate_synthetic(&syn) {
                Ok(p) => {
                    generated = p;
                    &generated
                }
                Err(e) => {
                    return RunOutcome {
                        spec: spec.clone(),
                        rows: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            },
            (None, None) => unreachable!("synthetic runs always carry sigma"),
        };
        match run_experiment(problem, &spec.train) {
            Ok((records, _)) => RunOutcome {
                spec: spec.clone(),
                rows: records.iter().map(Row::from).collect(),
                error: None,
            },
            Err(failure) => {
                warn!(
                    "run {} ({}, seed {}) failed: {}",
                    spec.run_id, spec.train.sampler, spec.train.seed, failure.error
                );
                RunOutcome {
                    spec: spec.clone(),
                    rows: failure.records.iter().map(Row::from).collect(),
                    error: Some(failure.error.to_string()),
                }
            }
        }
    }

    /// Runs every spec in parallel; outcomes come back in run order.
    pub fn execute(&self) -> Vec<RunOutcome> {
        info!("executing {} runs", self.runs.len());
        self.runs.par_iter().map(|spec| self.execute_one(spec)).collect()
    }
}

#[derive(Debug)]
pub struct SweepReport {
    pub outcomes: Vec<RunOutcome>,
    pub files: Vec<PathBuf>,
}

impl SweepReport {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.succeeded()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed() == 0 {
            0
        } else {
            1
        }
    }
}

/// Plans, executes and writes a sweep into `cfg.output.dir`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, CliError> {
    let plan = Plan::new(cfg)?;
    let outcomes = plan.execute();
    let files = output::write_all(&cfg.output.dir, &outcomes)?;
    Ok(SweepReport { outcomes, files })
}
