//! Expert ensembles of OSMD samplers.
//!
//! [`EnsembleState`] runs one OSMD expert per learning rate on a geometric
//! grid and mixes their distributions with exponential weights. The grid
//! depends on the horizon and on the scale `a_bar` of the feedback;
//! [`DoublingState`] removes the need to know either by restarting the
//! ensemble on blocks of doubling length.

use crate::error::{Error, Result};
use crate::feedback::BanditFeedback;
use crate::osmd::{OsmdState, RateSchedule};
use crate::simplex::{FloorConstraint, SimplexPoint};

/// Lower bound substituted for a zero or missing `a_bar` estimate.
pub const A_HAT_FLOOR: f64 = 1e-12;

/// Expert learning rates; the tuned grids are geometric with ratio 2.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertGrid {
    rates: Vec<f64>,
}

impl ExpertGrid {
    /// Arbitrary positive rates, e.g. a single rate to reduce the ensemble
    /// to one OSMD sampler.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidSchedule);
        }
        Ok(Self { rates })
    }

    fn geometric(base: f64, count: usize) -> Self {
        Self {
            rates: (0..count).map(|e| base * 2f64.powi(e as i32)).collect(),
        }
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

fn check_grid_args(m: usize, alpha: f64, k: usize, a_bar: f64) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "expert grid needs at least 2 clients, got {m}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if !(a_bar.is_finite() && a_bar > 0.0) {
        return Err(Error::InvalidArgument(format!("a_bar must be positive, got {a_bar}")));
    }
    Ok(())
}

/// Number of experts needed so the grid brackets the tuned rate for every
/// total variation in `[0, 2 (T - 1)]`:
/// `floor(log2(1 + 4 log(M / alpha) / log M * (T - 1)) / 2) + 1`.
pub fn expert_count(m: usize, alpha: f64, horizon: usize) -> usize {
    let mf = m as f64;
    let spread = 4.0 * (mf / alpha).ln() / mf.ln() * (horizon.saturating_sub(1)) as f64;
    ((1.0 + spread).log2() / 2.0).floor() as usize + 1
}

fn rate_scale(m: usize, alpha: f64, k: usize, a_bar: f64) -> f64 {
    let kf = k as f64;
    kf * kf * alpha.powi(3) / ((m as f64).powi(3) * a_bar)
}

/// Rates `2^(e-1) K^2 alpha^3 / (M^3 a_bar) sqrt(log M / (2T))`, `e = 1..=E`.
pub fn expert_grid(m: usize, alpha: f64, k: usize, a_bar: f64, horizon: usize) -> Result<ExpertGrid> {
    check_grid_args(m, alpha, k, a_bar)?;
    if horizon < 2 {
        return Err(Error::DegenerateHorizon(horizon));
    }
    let base = rate_scale(m, alpha, k, a_bar) * ((m as f64).ln() / (2.0 * horizon as f64)).sqrt();
    Ok(ExpertGrid::geometric(base, expert_count(m, alpha, horizon)))
}

/// Meta learning rate `(alpha / M) sqrt(8 K / (T a_bar))`.
pub fn meta_rate(m: usize, alpha: f64, k: usize, a_bar: f64, horizon: usize) -> f64 {
    alpha / m as f64 * (8.0 * k as f64 / (horizon as f64 * a_bar)).sqrt()
}

/// Grid used in block `b >= 1` of the doubling scheme (block length `2^(b-1)`):
/// rates `2^(e - b/2 - 1) K^2 alpha^3 sqrt(log M) / (M^3 a_hat)`.
pub fn block_grid(m: usize, alpha: f64, k: usize, a_hat: f64, block: u32) -> Result<ExpertGrid> {
    check_grid_args(m, alpha, k, a_hat)?;
    if block == 0 {
        return Err(Error::InvalidArgument("blocks are numbered from 1".into()));
    }
    let base = 2f64.powf(-(block as f64) / 2.0) * rate_scale(m, alpha, k, a_hat) * (m as f64).ln().sqrt();
    let len = 1usize << (block - 1);
    Ok(ExpertGrid::geometric(base, expert_count(m, alpha, len)))
}

/// Meta learning rate for block `b`: `(alpha / M) sqrt(8 K / (2^(b-1) a_hat))`.
pub fn block_meta_rate(m: usize, alpha: f64, k: usize, a_hat: f64, block: u32) -> f64 {
    meta_rate(m, alpha, k, a_hat, 1usize << (block - 1))
}

/// Initial expert weights `(1 + 1/E) / (e (e + 1))`, `e = 1..=E`. They sum to
/// one and each is at least `1 / E^2`.
pub fn meta_init(count: usize) -> Vec<f64> {
    let ef = count as f64;
    (1..=count)
        .map(|e| {
            let e = e as f64;
            (1.0 + 1.0 / ef) / (e * (e + 1.0))
        })
        .collect()
}

/// Exponential-weights update `theta_e <- theta_e exp(-gamma loss_e)`, normalized.
/// Computed in log space with the maximum subtracted.
pub fn exponential_weights(theta: &mut [f64], losses: &[f64], gamma: f64) -> Result<()> {
    if theta.len() != losses.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: losses.len(),
        });
    }
    // Equal losses leave the weights unchanged.
    if losses.windows(2).all(|w| w[0] == w[1]) {
        return Ok(());
    }
    let logw: Vec<f64> = theta.iter().zip(losses).map(|(&th, &l)| th.ln() - gamma * l).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::WeightUnderflow);
    }
    let mut total = 0.0;
    for (th, lw) in theta.iter_mut().zip(&logw) {
        *th = (lw - max).exp();
        total += *th;
    }
    for th in theta.iter_mut() {
        *th /= total;
    }
    Ok(())
}

/// Convex combination `sum_e theta_e p_e`. Entries on which every expert
/// agrees are copied rather than recomputed.
fn mix(experts: &[OsmdState], theta: &[f64]) -> SimplexPoint {
    let m = experts[0].current().len();
    let mut out = vec![0.0; m];
    for (i, slot) in out.iter_mut().enumerate() {
        let first = experts[0].current()[i];
        if experts.iter().all(|e| e.current()[i] == first) {
            *slot = first;
        } else {
            *slot = experts.iter().zip(theta).map(|(e, th)| th * e.current()[i]).sum();
        }
    }
    SimplexPoint::from_vec_unchecked(out)
}

/// Ensemble of OSMD experts mixed by exponential weights.
#[derive(Clone, Debug)]
pub struct EnsembleState {
    experts: Vec<OsmdState>,
    theta: Vec<f64>,
    gamma: f64,
    t: usize,
    aggregated: SimplexPoint,
}

impl EnsembleState {
    /// One expert per rate in `grid`, all starting at `init`.
    pub fn new(grid: &ExpertGrid, gamma: f64, constraint: FloorConstraint, init: SimplexPoint) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidArgument("empty expert grid".into()));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("meta rate {gamma}")));
        }
        let experts = grid
            .rates()
            .iter()
            .map(|&eta| OsmdState::with_initial(constraint, RateSchedule::constant(eta)?, init.clone()))
            .collect::<Result<Vec<_>>>()?;
        let theta = meta_init(experts.len());
        let aggregated = mix(&experts, &theta);
        Ok(Self {
            experts,
            theta,
            gamma,
            t: 1,
            aggregated,
        })
    }

    /// Grid and meta rate tuned for a known horizon and initial scale `a_bar`.
    pub fn for_horizon(
        constraint: FloorConstraint,
        k: usize,
        a_bar: f64,
        horizon: usize,
        init: SimplexPoint,
    ) -> Result<Self> {
        let m = constraint.clients();
        let alpha = constraint.alpha();
        let grid = expert_grid(m, alpha, k, a_bar, horizon)?;
        let gamma = meta_rate(m, alpha, k, a_bar, horizon);
        Self::new(&grid, gamma, constraint, init)
    }

    /// The mixture distribution from which the next round is sampled.
    pub fn aggregated(&self) -> &SimplexPoint {
        &self.aggregated
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn experts(&self) -> &[OsmdState] {
        &self.experts
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn round(&self) -> usize {
        self.t
    }

    /// Advances every expert on the shared feedback (drawn from the
    /// aggregated distribution) and reweights them by their estimated losses.
    pub fn step(&mut self, fb: &BanditFeedback) -> Result<()> {
        let sampling = self.aggregated.clone();
        let mut losses = Vec::with_capacity(self.experts.len());
        for expert in &mut self.experts {
            losses.push(expert.estimated_loss(fb, &sampling)?);
            expert.step_with(fb, &sampling)?;
        }
        exponential_weights(&mut self.theta, &losses, self.gamma)?;
        self.aggregated = mix(&self.experts, &self.theta);
        self.t += 1;
        Ok(())
    }
}

/// Largest value reported in the pre-training phase.
pub fn pretrain_estimate(observed: &[(usize, f64)]) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::EmptyPretrain);
    }
    let max = observed.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    if max.is_finite() && max > 0.0 {
        Ok(max)
    } else {
        Err(Error::DegenerateEstimate)
    }
}

/// [`pretrain_estimate`], falling back to [`A_HAT_FLOOR`] when the estimate
/// is zero or no client responded.
pub fn pretrain_estimate_or_floor(observed: &[(usize, f64)]) -> f64 {
    match pretrain_estimate(observed) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("pre-training estimate unusable ({e}); using {A_HAT_FLOOR}");
            A_HAT_FLOOR
        }
    }
}

/// How the doubling wrapper splits time into blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSchedule {
    /// Block `b` covers rounds `2^(b-1) ..= 2^b - 1`.
    Doubling,
    /// One block of the given horizon, never restarted.
    Single { horizon: usize },
}

/// Ensemble restarted at rounds `1, 2, 4, 8, ...` with a fresh grid and
/// meta rate per block.
#[derive(Clone, Debug)]
pub struct DoublingState {
    k: usize,
    constraint: FloorConstraint,
    schedule: BlockSchedule,
    warm_start: bool,
    block: u32,
    block_end: usize,
    t: usize,
    a_hat: f64,
    inner: EnsembleState,
}

impl DoublingState {
    pub fn new(
        constraint: FloorConstraint,
        k: usize,
        a_hat: f64,
        warm_start: bool,
        schedule: BlockSchedule,
    ) -> Result<Self> {
        let init = SimplexPoint::uniform(constraint.clients());
        let (inner, block_end) = match schedule {
            BlockSchedule::Doubling => (Self::build_block(constraint, k, a_hat, 1, init)?, 1),
            BlockSchedule::Single { horizon } => (
                EnsembleState::for_horizon(constraint, k, a_hat, horizon, init)?,
                usize::MAX,
            ),
        };
        Ok(Self {
            k,
            constraint,
            schedule,
            warm_start,
            block: 1,
            block_end,
            t: 1,
            a_hat,
            inner,
        })
    }

    fn build_block(
        constraint: FloorConstraint,
        k: usize,
        a_hat: f64,
        block: u32,
        init: SimplexPoint,
    ) -> Result<EnsembleState> {
        let m = constraint.clients();
        let alpha = constraint.alpha();
        let grid = block_grid(m, alpha, k, a_hat, block)?;
        let gamma = block_meta_rate(m, alpha, k, a_hat, block);
        EnsembleState::new(&grid, gamma, constraint, init)
    }

    pub fn aggregated(&self) -> &SimplexPoint {
        self.inner.aggregated()
    }

    pub fn inner(&self) -> &EnsembleState {
        &self.inner
    }

    /// Current block index `b`, starting at 1.
    pub fn block(&self) -> u32 {
        self.block
    }

    /// Round about to be played, starting at 1.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn a_hat(&self) -> f64 {
        self.a_hat
    }

    /// Feeds the current round's feedback. When the round closes a block,
    /// the next block's ensemble is built from the largest value observed
    /// in this round, initialized at this round's distribution (warm start)
    /// or at uniform.
    pub fn step(&mut self, fb: &BanditFeedback) -> Result<()> {
        let played = self.inner.aggregated().clone();
        self.inner.step(fb)?;
        self.t += 1;
        if self.t > self.block_end {
            self.block += 1;
            let observed = fb.max_value();
            self.a_hat = if observed > 0.0 {
                observed
            } else {
                log::warn!("block {} starts with zero feedback; using {A_HAT_FLOOR}", self.block);
                A_HAT_FLOOR
            };
            let init = if self.warm_start {
                played
            } else {
                SimplexPoint::uniform(self.constraint.clients())
            };
            self.inner = Self::build_block(self.constraint, self.k, self.a_hat, self.block, init)?;
            self.block_end = (1usize << self.block) - 1;
        }
        debug_assert!(matches!(self.schedule, BlockSchedule::Doubling) || self.block == 1);
        Ok(())
    }
}
