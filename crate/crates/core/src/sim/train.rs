//! The federated SGD loop with pluggable client samplers, and the regret
//! ledger that compares each played distribution with the per-round optimum.
//!
//! Only the simulator sees every client's update norm; samplers receive
//! [`BanditFeedback`] built from the chosen clients alone.

use std::fmt;
use std::str::FromStr;

use crate::ensemble::{pretrain_estimate_or_floor, BlockSchedule, DoublingState, EnsembleState};
use crate::error::{Error, Result};
use crate::feedback::{sample_with_replacement, variance_loss, BanditFeedback, Selection};
use crate::osmd::{tuned_rate, OsmdState, RateSchedule};
use crate::rng::RngStream;
use crate::sampler::{BanditSampler, UniformSampler};
use crate::sim::model::{local_update, training_loss};
use crate::sim::problem::FederatedProblem;
use crate::simplex::{optimal_distribution, FloorConstraint, PositiveWeights, SimplexPoint};
use crate::wor::{combine_gradients, sample_without_replacement, LocalUpdate, LocalUpdateSet, OrderedSelection};

const TAG_LOCAL: u64 = 11;
const TAG_SELECT: u64 = 12;
const TAG_PRETRAIN: u64 = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    Uniform,
    /// Plays the per-round optimum using full information.
    Oracle,
    /// Single OSMD sampler with a constant rate.
    Osmd,
    /// Ensemble of OSMD experts tuned for the known horizon.
    Adaptive,
    /// Ensemble restarted on a doubling schedule; horizon not needed.
    Doubling,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 5] = [
        SamplerKind::Uniform,
        SamplerKind::Oracle,
        SamplerKind::Osmd,
        SamplerKind::Adaptive,
        SamplerKind::Doubling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Oracle => "oracle-optimal",
            SamplerKind::Osmd => "osmd",
            SamplerKind::Adaptive => "adaptive-osmd",
            SamplerKind::Doubling => "adaptive-doubling-osmd",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sampler {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Replacement {
    With,
    Without,
}

impl Replacement {
    pub fn as_str(self) -> &'static str {
        match self {
            Replacement::With => "with",
            Replacement::Without => "without",
        }
    }
}

impl fmt::Display for Replacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Replacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with" => Ok(Replacement::With),
            "without" => Ok(Replacement::Without),
            _ => Err(Error::InvalidArgument(format!("unknown replacement mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Clients drawn per round.
    pub k: usize,
    /// Minibatch size per chosen client (capped at the client's sample count).
    pub batch: usize,
    pub mu_sgd: f64,
    pub rounds: usize,
    pub sampler: SamplerKind,
    pub replacement: Replacement,
    pub alpha: f64,
    pub seed: u64,
    /// Doubling sampler only: start each block where the last one ended.
    pub warm_start: bool,
    /// Rate for [`SamplerKind::Osmd`]; tuned from a pilot run when absent.
    pub osmd_eta: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 5,
            batch: 10,
            mu_sgd: 0.1,
            rounds: 2000,
            sampler: SamplerKind::Adaptive,
            replacement: Replacement::With,
            alpha: 0.4,
            seed: 0,
            warm_start: true,
            osmd_eta: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, clients: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.k == 0 || self.k > clients {
            return bad(format!("k must lie in 1..={clients}, got {}", self.k));
        }
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if !(self.mu_sgd.is_finite() && self.mu_sgd > 0.0) {
            return bad(format!("mu_sgd must be positive, got {}", self.mu_sgd));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if matches!(self.sampler, SamplerKind::Adaptive) && self.rounds < 2 {
            return Err(Error::DegenerateHorizon(self.rounds));
        }
        if matches!(self.sampler, SamplerKind::Adaptive | SamplerKind::Doubling) && clients < 2 {
            return bad("adaptive samplers need at least 2 clients".into());
        }
        if let Some(eta) = self.osmd_eta {
            if !(eta.is_finite() && eta > 0.0) {
                return bad(format!("osmd_eta must be positive, got {eta}"));
            }
        }
        Ok(())
    }
}

/// One round of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// `F(w^t)`, before this round's update.
    pub train_loss: f64,
    /// Variance loss of the distribution the sampler played.
    pub sampler_loss: f64,
    /// Variance loss of the round's optimal distribution.
    pub oracle_loss: f64,
    pub p_star: SimplexPoint,
    /// Clients drawn, in draw order (repeats possible with replacement).
    pub chosen: Vec<usize>,
    pub cum_regret: f64,
    pub tv_pstar: f64,
}

/// Running regret against the per-round optimum and total variation of the
/// optimal sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretLedger {
    cum_regret: Vec<f64>,
    tv: Vec<f64>,
    last: Option<SimplexPoint>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a round and returns `(cumulative regret, total variation)`.
    pub fn push(&mut self, sampler_loss: f64, oracle_loss: f64, p_star: &SimplexPoint) -> Result<(f64, f64)> {
        let regret = self.cumulative_regret() + (sampler_loss - oracle_loss);
        let step = match &self.last {
            Some(prev) => prev.l1_distance(p_star)?,
            None => 0.0,
        };
        let tv = self.total_variation() + step;
        self.cum_regret.push(regret);
        self.tv.push(tv);
        self.last = Some(p_star.clone());
        Ok((regret, tv))
    }

    pub fn cumulative_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    pub fn total_variation(&self) -> f64 {
        self.tv.last().copied().unwrap_or(0.0)
    }

    pub fn regret_history(&self) -> &[f64] {
        &self.cum_regret
    }

    pub fn tv_history(&self) -> &[f64] {
        &self.tv
    }

    pub fn len(&self) -> usize {
        self.cum_regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_regret.is_empty()
    }
}

/// A run that stopped early, with everything recorded before the failure.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub records: Vec<RoundRecord>,
    pub ledger: RegretLedger,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} rounds", self.error, self.records.len())
    }
}

impl std::error::Error for RunFailure {}

impl From<Error> for Box<RunFailure> {
    fn from(error: Error) -> Self {
        Box::new(RunFailure {
            error,
            records: Vec::new(),
            ledger: RegretLedger::new(),
        })
    }
}

pub type RunResult = std::result::Result<(Vec<RoundRecord>, RegretLedger), Box<RunFailure>>;

/// Clients drawn in one round.
#[derive(Clone, Debug, PartialEq)]
pub enum Draw {
    With(Selection),
    Without(OrderedSelection),
}

impl Draw {
    pub fn clients(&self) -> &[usize] {
        match self {
            Draw::With(s) => s.draws(),
            Draw::Without(s) => s.order(),
        }
    }
}

/// Importance-weighted global update. With replacement this is
/// `(1 / K) sum_{draws} lambda_m g_m / p_m`; without replacement it is
/// [`combine_gradients`].
pub fn aggregate_gradient(draw: &Draw, locals: &LocalUpdateSet, p: &SimplexPoint) -> Result<Vec<f64>> {
    match draw {
        Draw::Without(sel) => combine_gradients(sel, locals),
        Draw::With(sel) => {
            let first = sel.draws().first().ok_or(Error::Empty)?;
            let dim = locals.get(first).ok_or(Error::MissingLocal(*first))?.gradient.len();
            let mut out = vec![0.0; dim];
            for &m in sel.draws() {
                let local = locals.get(&m).ok_or(Error::MissingLocal(m))?;
                if local.gradient.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: local.gradient.len(),
                    });
                }
                let pm = p.probs().get(m).copied().unwrap_or(0.0);
                if pm <= 0.0 {
                    return Err(Error::ZeroProbabilitySelected(m));
                }
                let scale = local.weight / pm;
                for (o, g) in out.iter_mut().zip(&local.gradient) {
                    *o += scale * g;
                }
            }
            let k = sel.len() as f64;
            for o in &mut out {
                *o /= k;
            }
            Ok(out)
        }
    }
}

/// Every client's minibatch gradient at `w` for round `t`. Each client draws
/// from its own stream keyed by `(seed, t, m)`.
pub fn round_gradients(problem: &FederatedProblem, cfg: &TrainConfig, w: &[f64], t: usize) -> Result<Vec<Vec<f64>>> {
    (0..problem.num_clients())
        .map(|m| {
            let mut rng = RngStream::derive(cfg.seed, &[TAG_LOCAL, t as u64, m as u64]);
            local_update(problem, m, w, cfg.batch, &mut rng)
        })
        .collect()
}

/// `a_m = lambda_m^2 ||g_m||^2`.
pub fn update_norms(problem: &FederatedProblem, grads: &[Vec<f64>]) -> Vec<f64> {
    grads
        .iter()
        .zip(&problem.lambdas)
        .map(|(g, l)| l * l * g.iter().map(|v| v * v).sum::<f64>())
        .collect()
}

/// Minimizer of the round's variance loss; uniform when every norm is zero.
pub fn optimal_for(a: &[f64]) -> Result<SimplexPoint> {
    match PositiveWeights::new(a.to_vec()) {
        Ok(w) => Ok(optimal_distribution(&w)),
        Err(Error::ZeroSum) => Ok(SimplexPoint::uniform(a.len())),
        Err(e) => Err(e),
    }
}

/// Largest `a_m` at the initial parameters, each client evaluated on its own
/// pre-training stream.
pub fn pretrain_scale(problem: &FederatedProblem, cfg: &TrainConfig, w0: &[f64]) -> Result<f64> {
    let mut observed = Vec::with_capacity(problem.num_clients());
    for m in 0..problem.num_clients() {
        let mut rng = RngStream::derive(cfg.seed, &[TAG_PRETRAIN, m as u64]);
        let g = local_update(problem, m, w0, cfg.batch, &mut rng)?;
        let l = problem.lambdas[m];
        observed.push((m, l * l * g.iter().map(|v| v * v).sum::<f64>()));
    }
    Ok(pretrain_estimate_or_floor(&observed))
}

/// Who picks the clients each round.
enum Policy<'a> {
    Oracle,
    Bandit(&'a mut dyn BanditSampler),
}

/// Runs `cfg.rounds` rounds with the sampler named in `cfg`.
pub fn run_experiment(problem: &FederatedProblem, cfg: &TrainConfig) -> RunResult {
    cfg.validate(problem.num_clients())?;
    let m = problem.num_clients();
    let w0 = vec![0.0; problem.param_dim()];
    let constraint = FloorConstraint::new(cfg.alpha, m)?;
    match cfg.sampler {
        SamplerKind::Oracle => run_policy(problem, cfg, Policy::Oracle),
        SamplerKind::Uniform => run_with_sampler(problem, cfg, &mut UniformSampler::new(m)),
        SamplerKind::Osmd => {
            let eta = match cfg.osmd_eta {
                Some(eta) => eta,
                None => {
                    // The tuned rate needs the variation of the optimal
                    // sequence, which is measured on an oracle pilot run.
                    let pilot = TrainConfig {
                        sampler: SamplerKind::Oracle,
                        ..cfg.clone()
                    };
                    let (_, ledger) = run_policy(problem, &pilot, Policy::Oracle)?;
                    let a_bar = pretrain_scale(problem, cfg, &w0)?;
                    tuned_rate(m, cfg.k, cfg.alpha, a_bar, ledger.total_variation(), cfg.rounds)
                }
            };
            let mut s = OsmdState::new(constraint, RateSchedule::constant(eta)?);
            run_with_sampler(problem, cfg, &mut s)
        }
        SamplerKind::Adaptive => {
            let a_bar = pretrain_scale(problem, cfg, &w0)?;
            let mut s = EnsembleState::for_horizon(constraint, cfg.k, a_bar, cfg.rounds, SimplexPoint::uniform(m))?;
            run_with_sampler(problem, cfg, &mut s)
        }
        SamplerKind::Doubling => {
            let a_hat = pretrain_scale(problem, cfg, &w0)?;
            let mut s = DoublingState::new(constraint, cfg.k, a_hat, cfg.warm_start, BlockSchedule::Doubling)?;
            run_with_sampler(problem, cfg, &mut s)
        }
    }
}

/// Runs the loop with a caller-supplied sampler; `cfg.sampler` is ignored.
pub fn run_with_sampler(problem: &FederatedProblem, cfg: &TrainConfig, sampler: &mut dyn BanditSampler) -> RunResult {
    run_policy(problem, cfg, Policy::Bandit(sampler))
}

fn run_policy(problem: &FederatedProblem, cfg: &TrainConfig, mut policy: Policy<'_>) -> RunResult {
    let m = problem.num_clients();
    cfg.validate(m)?;
    let mut w = vec![0.0; problem.param_dim()];
    let mut records = Vec::with_capacity(cfg.rounds);
    let mut ledger = RegretLedger::new();
    let fail =
        |error: Error, records: Vec<RoundRecord>, ledger: RegretLedger| Box::new(RunFailure { error, records, ledger });

    for t in 1..=cfg.rounds {
        let train_loss = training_loss(problem, &w);
        if !train_loss.is_finite() {
            return Err(fail(Error::Diverged(t), records, ledger));
        }
        let step = (|| -> Result<(RoundRecord, Vec<f64>, Option<BanditFeedback>)> {
            let grads = round_gradients(problem, cfg, &w, t)?;
            let a = update_norms(problem, &grads);
            let p_star = optimal_for(&a)?;
            let oracle_loss = variance_loss(&p_star, &a, cfg.k)?;
            let played = match &policy {
                Policy::Oracle => p_star.clone(),
                Policy::Bandit(s) => s.distribution().clone(),
            };
            if played.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: played.len(),
                });
            }
            let sampler_loss = match policy {
                Policy::Oracle => oracle_loss,
                Policy::Bandit(_) => variance_loss(&played, &a, cfg.k)?,
            };

            let mut rng = RngStream::derive(cfg.seed, &[TAG_SELECT, t as u64]);
            let draw = match cfg.replacement {
                Replacement::With => Draw::With(sample_with_replacement(&played, cfg.k, &mut rng)),
                Replacement::Without => Draw::Without(sample_without_replacement(&played, cfg.k, &mut rng)?),
            };
            // Only the chosen clients' updates leave this scope.
            let locals: LocalUpdateSet = draw
                .clients()
                .iter()
                .map(|&c| {
                    (
                        c,
                        LocalUpdate {
                            weight: problem.lambdas[c],
                            gradient: grads[c].clone(),
                        },
                    )
                })
                .collect();
            let g = aggregate_gradient(&draw, &locals, &played)?;
            let fb = match (&policy, &draw) {
                (Policy::Oracle, _) => None,
                (_, Draw::With(sel)) => Some(BanditFeedback::observe(sel, |c| a[c])?),
                (_, Draw::Without(sel)) => Some(sel.feedback(|c| a[c])?),
            };
            let record = RoundRecord {
                t,
                train_loss,
                sampler_loss,
                oracle_loss,
                p_star,
                chosen: draw.clients().to_vec(),
                cum_regret: 0.0,
                tv_pstar: 0.0,
            };
            Ok((record, g, fb))
        })();
        let (mut record, g, fb) = match step {
            Ok(v) => v,
            Err(e) => return Err(fail(e, records, ledger)),
        };
        match ledger.push(record.sampler_loss, record.oracle_loss, &record.p_star) {
            Ok((regret, tv)) => {
                record.cum_regret = regret;
                record.tv_pstar = tv;
            }
            Err(e) => return Err(fail(e, records, ledger)),
        }
        debug_assert!(record.oracle_loss <= record.sampler_loss * (1.0 + 1e-9) + 1e-12);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= cfg.mu_sgd * gi;
        }
        records.push(record);
        if let (Policy::Bandit(s), Some(fb)) = (&mut policy, fb) {
            if let Err(e) = s.update(&fb) {
                return Err(fail(e, records, ledger));
            }
        }
    }
    Ok((records, ledger))
}
