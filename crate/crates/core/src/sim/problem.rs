//! Federated datasets: synthetic heterogeneous regression and CSV ingestion.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Loss used on every client.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossFamily {
    /// `0.5 (y - <w, x>)^2`.
    Squared,
    /// Softmax cross-entropy with `classes` outputs; parameters are a
    /// row-major `classes x d` matrix.
    Logistic { classes: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Real(Vec<f64>),
    Class(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Class(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One client's samples; `features` is row-major `n x d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientData {
    pub features: Vec<f64>,
    pub targets: Targets,
    pub dim: usize,
}

impl ClientData {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FederatedProblem {
    pub clients: Vec<ClientData>,
    /// `lambda_m = n_m / n`.
    pub lambdas: Vec<f64>,
    pub family: LossFamily,
    pub dim: usize,
    /// True coefficients (synthetic problems only).
    pub w_star: Option<Vec<f64>>,
    /// Per-client covariance scales `s_m` (synthetic problems only).
    pub scales: Option<Vec<f64>>,
}

impl FederatedProblem {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    /// Length of the parameter vector.
    pub fn param_dim(&self) -> usize {
        match self.family {
            LossFamily::Squared => self.dim,
            LossFamily::Logistic { classes } => classes * self.dim,
        }
    }

    fn from_clients(clients: Vec<ClientData>, family: LossFamily, dim: usize) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::Empty);
        }
        let total: usize = clients.iter().map(ClientData::len).sum();
        let lambdas = clients.iter().map(|c| c.len() as f64 / total as f64).collect();
        Ok(Self {
            clients,
            lambdas,
            family,
            dim,
            w_star: None,
            scales: None,
        })
    }
}

/// Parameters of the synthetic linear-regression problem.
///
/// Client `m` draws `x ~ N(0, s_m Sigma)` with `Sigma` diagonal,
/// `Sigma_jj = kappa^((j-1)/(d-1) - 1)`, and `y = <w*, x> + noise`. The scales
/// `s_m` are `exp(N(0, sigma^2))` rescaled so the largest equals 10.
/// The defaults give coefficients of variance 3 and noise of variance 0.1.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub clients: usize,
    pub samples_per_client: usize,
    pub dim: usize,
    pub kappa: f64,
    pub sigma: f64,
    pub noise_sd: f64,
    pub coef_mean: f64,
    pub coef_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            clients: 100,
            samples_per_client: 100,
            dim: 10,
            kappa: 25.0,
            sigma: 1.0,
            noise_sd: 0.1f64.sqrt(),
            coef_mean: 10.0,
            coef_sd: 3f64.sqrt(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.clients == 0 || self.samples_per_client == 0 || self.dim == 0 {
            return bad("clients, samples_per_client and dim must be positive");
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return bad("kappa must be positive");
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad("sigma must be nonnegative");
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad("noise_sd must be nonnegative");
        }
        if !(self.coef_sd.is_finite() && self.coef_sd >= 0.0) || !self.coef_mean.is_finite() {
            return bad("coefficient distribution must be finite with nonnegative spread");
        }
        Ok(())
    }
}

/// Diagonal of `Sigma`: `kappa^((j-1)/(d-1) - 1)` for `j = 1..=d`; `[1]` when `d = 1`.
pub fn covariance_diagonal(dim: usize, kappa: f64) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    (0..dim)
        .map(|j| kappa.powf(j as f64 / (dim - 1) as f64 - 1.0))
        .collect()
}

const TAG_COEF: u64 = 1;
const TAG_SCALE: u64 = 2;
const TAG_CLIENT: u64 = 3;

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<FederatedProblem> {
    cfg.validate()?;
    let d = cfg.dim;
    let diag = covariance_diagonal(d, cfg.kappa);

    let mut coef_rng = RngStream::derive(cfg.seed, &[TAG_COEF]);
    let w_star: Vec<f64> = (0..d).map(|_| coef_rng.normal(cfg.coef_mean, cfg.coef_sd)).collect();

    // s_m = exp(sigma z_m), rescaled to max 10; done in log space so large
    // sigma cannot overflow.
    let mut scale_rng = RngStream::derive(cfg.seed, &[TAG_SCALE]);
    let logs: Vec<f64> = (0..cfg.clients)
        .map(|_| cfg.sigma * scale_rng.standard_normal())
        .collect();
    let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scales: Vec<f64> = logs.iter().map(|l| (l - max_log).exp() * 10.0).collect();

    let clients = scales
        .iter()
        .enumerate()
        .map(|(m, &s)| {
            let mut rng = RngStream::derive(cfg.seed, &[TAG_CLIENT, m as u64]);
            let sd: Vec<f64> = diag.iter().map(|v| (s * v).sqrt()).collect();
            let n = cfg.samples_per_client;
            let mut features = Vec::with_capacity(n * d);
            let mut targets = Vec::with_capacity(n);
            for _ in 0..n {
                let mut y = 0.0;
                for j in 0..d {
                    let x = sd[j] * rng.standard_normal();
                    y += w_star[j] * x;
                    features.push(x);
                }
                targets.push(y + cfg.noise_sd * rng.standard_normal());
            }
            ClientData {
                features,
                targets: Targets::Real(targets),
                dim: d,
            }
        })
        .collect();

    let mut problem = FederatedProblem::from_clients(clients, LossFamily::Squared, d)?;
    problem.w_star = Some(w_star);
    problem.scales = Some(scales);
    Ok(problem)
}

/// Nonempty records of a headerless CSV file, with their 1-based line numbers.
fn read_records(path: &Path) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedCsv(format!("{}: {e}", path.display())))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        out.push((line, record));
    }
    Ok(out)
}

fn malformed(path: &Path, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::MalformedCsv(format!("{}:{line}: {msg}", path.display()))
}

fn single_field<'a>(path: &Path, line: u64, record: &'a csv::StringRecord) -> Result<&'a str> {
    if record.len() != 1 {
        return Err(malformed(path, line, "expected one column"));
    }
    Ok(&record[0])
}

/// Reads a dataset split across clients.
///
/// * features: one row per sample, `d` comma-separated reals, no header
/// * labels: one value per row
/// * partition: one client id per row, ids `0..M`
///
/// Labels that all parse as nonnegative integers select the logistic loss
/// with `max + 1` classes; anything else selects the squared loss.
pub fn ingest_csv(features: &Path, labels: &Path, partition: &Path) -> Result<FederatedProblem> {
    let feature_rows = read_records(features)?;
    let label_rows = read_records(labels)?;
    let partition_rows = read_records(partition)?;
    let n = feature_rows.len();
    if n == 0 {
        return Err(Error::MalformedCsv(format!("{} is empty", features.display())));
    }
    if label_rows.len() != n || partition_rows.len() != n {
        return Err(Error::MalformedCsv(format!(
            "row counts differ: {} features, {} labels, {} partition",
            n,
            label_rows.len(),
            partition_rows.len()
        )));
    }

    let mut dim = None;
    let mut x = Vec::with_capacity(n);
    for (line, record) in &feature_rows {
        let row = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(features, *line, e))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(malformed(features, *line, "non-finite value"));
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => return Err(malformed(features, *line, format!("expected {d} columns"))),
            _ => {}
        }
        x.push(row);
    }
    let dim = dim.unwrap_or(0);

    let ids = partition_rows
        .iter()
        .map(|(line, r)| {
            single_field(partition, *line, r)?
                .parse::<usize>()
                .map_err(|e| malformed(partition, *line, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let label_text = label_rows
        .iter()
        .map(|(line, r)| Ok((*line, single_field(labels, *line, r)?)))
        .collect::<Result<Vec<_>>>()?;
    let m = ids.iter().max().map_or(0, |v| v + 1);

    let classes: Option<Vec<usize>> = label_text.iter().map(|(_, t)| t.parse::<usize>().ok()).collect();
    let targets = match classes {
        Some(c) => Targets::Class(c),
        None => Targets::Real(
            label_text
                .iter()
                .map(|(line, t)| match t.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err(malformed(labels, *line, "non-finite label")),
                    Err(e) => Err(malformed(labels, *line, e)),
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let family = match &targets {
        Targets::Class(c) => LossFamily::Logistic {
            classes: c.iter().max().map_or(1, |v| v + 1),
        },
        Targets::Real(_) => LossFamily::Squared,
    };

    let mut clients: Vec<ClientData> = (0..m)
        .map(|_| ClientData {
            features: Vec::new(),
            targets: match family {
                LossFamily::Squared => Targets::Real(Vec::new()),
                LossFamily::Logistic { .. } => Targets::Class(Vec::new()),
            },
            dim,
        })
        .collect();
    for (i, &id) in ids.iter().enumerate() {
        let c = &mut clients[id];
        c.features.extend_from_slice(&x[i]);
        match (&mut c.targets, &targets) {
            (Targets::Real(dst), Targets::Real(src)) => dst.push(src[i]),
            (Targets::Class(dst), Targets::Class(src)) => dst.push(src[i]),
            _ => unreachable!("target kinds fixed above"),
        }
    }
    if let Some(empty) = clients.iter().position(ClientData::is_empty) {
        return Err(Error::EmptyClient(empty));
    }
    FederatedProblem::from_clients(clients, family, dim)
}

/// Writes `problem` in the format read by [`ingest_csv`], clients in order.
pub fn write_csv(problem: &FederatedProblem, features: &Path, labels: &Path, partition: &Path) -> Result<()> {
    let mut fx = BufWriter::new(File::create(features)?);
    let mut fy = BufWriter::new(File::create(labels)?);
    let mut fp = BufWriter::new(File::create(partition)?);
    for (m, client) in problem.clients.iter().enumerate() {
        for i in 0..client.len() {
            let row: Vec<String> = client.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(fx, "{}", row.join(","))?;
            match &client.targets {
                // Debug formatting keeps a decimal point or exponent, so real
                // targets never read back as class labels.
                Targets::Real(v) => writeln!(fy, "{:?}", v[i])?,
                Targets::Class(v) => writeln!(fy, "{}", v[i])?,
            }
            writeln!(fp, "{m}")?;
        }
    }
    fx.flush()?;
    fy.flush()?;
    fp.flush()?;
    Ok(())
}
