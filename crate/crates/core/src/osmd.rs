//! Online stochastic mirror descent over the floored simplex.
//!
//! With the unnormalized negative entropy as mirror map, each step is a
//! multiplicative update `p_m exp(-eta grad_m)` followed by the closed-form
//! KL projection onto the floored set.

use crate::error::{Error, Result};
use crate::feedback::{estimated_gradient, estimated_loss, BanditFeedback};
use crate::simplex::{project_with_order, FloorConstraint, PositiveWeights, SimplexPoint};

/// Exponents of the multiplicative update are clamped here before `exp`.
pub const EXPONENT_CAP: f64 = 60.0;

/// Learning rates `eta_t`, positive and nonincreasing.
#[derive(Clone, Debug, PartialEq)]
pub enum RateSchedule {
    Constant(f64),
    /// Rate for round `t` is entry `t - 1`; the last entry repeats afterwards.
    Explicit(Vec<f64>),
}

impl RateSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        if eta.is_finite() && eta > 0.0 {
            Ok(Self::Constant(eta))
        } else {
            Err(Error::InvalidSchedule)
        }
    }

    pub fn explicit(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty()
            || rates.iter().any(|r| !(r.is_finite() && *r > 0.0))
            || rates.windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::InvalidSchedule);
        }
        Ok(Self::Explicit(rates))
    }

    /// Rate at round `t >= 1`.
    pub fn rate(&self, t: usize) -> f64 {
        match self {
            Self::Constant(eta) => *eta,
            Self::Explicit(rates) => rates[t.saturating_sub(1).min(rates.len() - 1)],
        }
    }
}

/// Tuned constant rate when the horizon, the total variation of the optimal
/// sequence and the initial scale `a_bar` are known:
/// `K^2 alpha^3 / (M^3 a_bar) * sqrt((log M + 2 log(M / alpha) TV) / (2 T))`.
pub fn tuned_rate(m: usize, k: usize, alpha: f64, a_bar: f64, tv: f64, horizon: usize) -> f64 {
    let mf = m as f64;
    let kf = k as f64;
    let scale = kf * kf * alpha.powi(3) / (mf.powi(3) * a_bar);
    scale * ((mf.ln() + 2.0 * (mf / alpha).ln() * tv) / (2.0 * horizon as f64)).sqrt()
}

/// `p_m exp(-eta grad_m)` with the exponent clamped at [`EXPONENT_CAP`].
fn mirror_weights(p: &SimplexPoint, grad: &[f64], eta: f64) -> Vec<f64> {
    let mut clamped = 0usize;
    let out = p
        .probs()
        .iter()
        .zip(grad)
        .map(|(&pm, &gm)| {
            let mut exponent = -eta * gm;
            if exponent > EXPONENT_CAP {
                exponent = EXPONENT_CAP;
                clamped += 1;
            }
            pm * exponent.exp()
        })
        .collect();
    if clamped > 0 {
        log::warn!("multiplicative update exponent clamped at {EXPONENT_CAP} for {clamped} entries");
    }
    out
}

/// The unprojected OSMD update at `p` with importance distribution `p`:
/// entry `m` becomes `p_m exp(count_m eta a_m / (K^2 p_m^3))`.
pub fn multiplicative_update(p: &SimplexPoint, fb: &BanditFeedback, eta: f64) -> Result<PositiveWeights> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate {eta}")));
    }
    let grad = estimated_gradient(p, p, fb)?;
    PositiveWeights::new(mirror_weights(p, &grad, eta))
}

/// Divides by the largest entry. The KL projection onto the floored set is
/// invariant to positive scaling of its input.
fn rescale_by_max(mut y: Vec<f64>) -> Vec<f64> {
    let max = y.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut y {
            *v /= max;
        }
    }
    y
}

/// State of a single OSMD sampler.
#[derive(Clone, Debug)]
pub struct OsmdState {
    current: SimplexPoint,
    constraint: FloorConstraint,
    schedule: RateSchedule,
    t: usize,
    // Ascending permutation of the last projection input, reused as the
    // starting point of the next sort.
    order: Vec<usize>,
}

impl OsmdState {
    /// Starts at the uniform distribution.
    pub fn new(constraint: FloorConstraint, schedule: RateSchedule) -> Self {
        let m = constraint.clients();
        Self {
            current: SimplexPoint::uniform(m),
            constraint,
            schedule,
            t: 1,
            order: (0..m).collect(),
        }
    }

    /// Starts at `init`, which must lie in the floored set.
    pub fn with_initial(constraint: FloorConstraint, schedule: RateSchedule, init: SimplexPoint) -> Result<Self> {
        if !constraint.contains(&init) {
            return Err(Error::InvalidArgument(
                "initial distribution outside the floored set".into(),
            ));
        }
        let mut state = Self::new(constraint, schedule);
        state.current = init;
        Ok(state)
    }

    pub fn current(&self) -> &SimplexPoint {
        &self.current
    }

    pub fn constraint(&self) -> &FloorConstraint {
        &self.constraint
    }

    /// Round counter, starting at 1.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn rate(&self) -> f64 {
        self.schedule.rate(self.t)
    }

    /// One step with feedback drawn from the state's own distribution.
    pub fn step(&mut self, fb: &BanditFeedback) -> Result<()> {
        let sampling = self.current.clone();
        self.step_with(fb, &sampling)
    }

    /// One step where the feedback was drawn from `sampling` rather than from
    /// this state's own point (the expert case inside an ensemble). The
    /// gradient estimate is taken at the current point and importance-weighted
    /// by `sampling`.
    pub fn step_with(&mut self, fb: &BanditFeedback, sampling: &SimplexPoint) -> Result<()> {
        let grad = estimated_gradient(&self.current, sampling, fb)?;
        let eta = self.rate();
        let y = rescale_by_max(mirror_weights(&self.current, &grad, eta));
        self.current = project_with_order(&y, &self.constraint, &mut self.order)?;
        self.t += 1;
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn current_mut_for_test(&mut self, p: SimplexPoint) {
        self.current = p;
    }

    /// Estimated loss of the current point under feedback drawn from `sampling`.
    pub fn estimated_loss(&self, fb: &BanditFeedback, sampling: &SimplexPoint) -> Result<f64> {
        estimated_loss(&self.current, sampling, fb)
    }
}
