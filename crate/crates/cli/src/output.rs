//! CSV writers for sweep results.
//!
//! A sweep writes three files:
//! - `results.csv`: one row per run and round, ordered by run then round.
//! - `runs.csv`: one row per run with its final values and status.
//! - `summary.csv`: mean and sample standard deviation of the final training
//!   loss and cumulative regret per (sampler, sigma, alpha, replacement) group.
//!   Failed runs are counted in `n_failed` and left out of the statistics.
//!
//! Floats are written in Rust's shortest round-trip form.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::sweep::RunOutcome;

pub const RESULTS_HEADER: [&str; 12] = [
    "run_id",
    "sampler",
    "sigma",
    "alpha",
    "replacement",
    "seed",
    "t",
    "train_loss",
    "sampler_loss",
    "oracle_loss",
    "cum_regret",
    "tv_pstar",
];

pub const RUNS_HEADER: [&str; 11] = [
    "run_id",
    "sampler",
    "sigma",
    "alpha",
    "replacement",
    "seed",
    "status",
    "rounds",
    "final_loss",
    "final_regret",
    "error",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "sampler",
    "sigma",
    "alpha",
    "replacement",
    "n_runs",
    "n_failed",
    "final_loss_mean",
    "final_loss_sd",
    "final_regret_mean",
    "final_regret_sd",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn run_key(o: &RunOutcome) -> [String; 4] {
    [
        o.spec.train.sampler.to_string(),
        fmt_opt(o.spec.sigma),
        fmt_f64(o.spec.train.alpha),
        o.spec.train.replacement.to_string(),
    ]
}

/// Mean and sample standard deviation; the deviation is `None` below two values.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

pub fn write_results(path: &Path, outcomes: &[RunOutcome]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(RESULTS_HEADER).map_err(|e| csv_err(path, e))?;
    for o in outcomes {
        let [sampler, sigma, alpha, replacement] = run_key(o);
        let run_id = o.spec.run_id.to_string();
        let seed = o.spec.train.seed.to_string();
        for r in &o.rows {
            w.write_record([
                run_id.as_str(),
                &sampler,
                &sigma,
                &alpha,
                &replacement,
                &seed,
                &r.t.to_string(),
                &fmt_f64(r.train_loss),
                &fmt_f64(r.sampler_loss),
                &fmt_f64(r.oracle_loss),
                &fmt_f64(r.cum_regret),
                &fmt_f64(r.tv_pstar),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

pub fn write_runs(path: &Path, outcomes: &[RunOutcome]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(RUNS_HEADER).map_err(|e| csv_err(path, e))?;
    for o in outcomes {
        let [sampler, sigma, alpha, replacement] = run_key(o);
        w.write_record([
            o.spec.run_id.to_string(),
            sampler,
            sigma,
            alpha,
            replacement,
            o.spec.train.seed.to_string(),
            if o.succeeded() { "ok" } else { "failed" }.to_string(),
            o.rows.len().to_string(),
            fmt_opt(o.final_loss()),
            fmt_opt(o.final_regret()),
            o.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_summary(path: &Path, outcomes: &[RunOutcome]) -> Result<(), CliError> {
    let mut groups: Vec<([String; 4], Vec<&RunOutcome>)> = Vec::new();
    for o in outcomes {
        let key = run_key(o);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(o),
            None => groups.push((key, vec![o])),
        }
    }

    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_err(path, e))?;
    for (key, members) in groups {
        let ok: Vec<&RunOutcome> = members.iter().copied().filter(|o| o.succeeded()).collect();
        let losses: Vec<f64> = ok.iter().filter_map(|o| o.final_loss()).collect();
        let regrets: Vec<f64> = ok.iter().filter_map(|o| o.final_regret()).collect();
        let (loss_mean, loss_sd) = mean_sd(&losses);
        let (regret_mean, regret_sd) = mean_sd(&regrets);
        let [sampler, sigma, alpha, replacement] = key;
        w.write_record([
            sampler,
            sigma,
            alpha,
            replacement,
            members.len().to_string(),
            (members.len() - ok.len()).to_string(),
            fmt_opt(loss_mean),
            fmt_opt(loss_sd),
            fmt_opt(regret_mean),
            fmt_opt(regret_sd),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Writes all three files into `dir`, creating it if needed.
pub fn write_all(dir: &Path, outcomes: &[RunOutcome]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let results = dir.join("results.csv");
    let runs = dir.join("runs.csv");
    let summary = dir.join("summary.csv");
    write_results(&results, outcomes)?;
    write_runs(&runs, outcomes)?;
    write_summary(&summary, outcomes)?;
    Ok(vec![results, runs, summary])
}
