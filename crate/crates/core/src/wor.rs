//! Sampling clients without replacement by sequential renormalization, and
//! the matching unbiased estimate of the aggregated update.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::feedback::{BanditFeedback, Observation};
use crate::rng::RngStream;
use crate::simplex::SimplexPoint;

/// Chosen mass at or above `1 - EXHAUSTED_MASS` leaves nothing to renormalize.
pub const EXHAUSTED_MASS: f64 = 1e-12;

/// Distinct clients in draw order, together with the distribution each draw
/// was made from.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedSelection {
    order: Vec<usize>,
    step_probs: Vec<SimplexPoint>,
}

impl OrderedSelection {
    /// The selection that drawing `order` from `p` would have produced.
    pub fn from_order(p: &SimplexPoint, order: Vec<usize>) -> Result<Self> {
        let mut step_probs = Vec::with_capacity(order.len());
        for k in 0..order.len() {
            if order[..k].contains(&order[k]) {
                return Err(Error::InvalidArgument(format!("client {} repeated", order[k])));
            }
            step_probs.push(renormalized_distribution(p, &order[..k])?);
        }
        Ok(Self { order, step_probs })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `step_probs()[k]` is the distribution the `(k+1)`-th client was drawn from.
    pub fn step_probs(&self) -> &[SimplexPoint] {
        &self.step_probs
    }

    /// Probability of this exact ordered outcome.
    pub fn probability(&self) -> f64 {
        self.order.iter().zip(&self.step_probs).map(|(&m, p)| p[m]).product()
    }

    /// Feedback with multiplicity one per chosen client.
    pub fn feedback(&self, mut value: impl FnMut(usize) -> f64) -> Result<BanditFeedback> {
        BanditFeedback::new(
            self.order.len(),
            self.order
                .iter()
                .map(|&client| Observation {
                    client,
                    count: 1,
                    value: value(client),
                })
                .collect(),
        )
    }
}

/// `p` restricted to the clients outside `chosen`, rescaled by
/// `1 / (1 - sum_{chosen} p)`.
pub fn renormalized_distribution(p: &SimplexPoint, chosen: &[usize]) -> Result<SimplexPoint> {
    let mut out = p.probs().to_vec();
    let mut mass = 0.0;
    for &c in chosen {
        if c >= out.len() {
            return Err(Error::InvalidArgument(format!("client {c} out of range")));
        }
        mass += out[c];
        out[c] = 0.0;
    }
    if mass >= 1.0 - EXHAUSTED_MASS {
        return Err(Error::ExhaustedMass);
    }
    if chosen.is_empty() {
        return Ok(p.clone());
    }
    let scale = 1.0 - mass;
    for v in &mut out {
        *v /= scale;
    }
    SimplexPoint::new(out)
}

/// Draws `k` distinct clients, each from `p` renormalized over the clients
/// not yet chosen.
pub fn sample_without_replacement(p: &SimplexPoint, k: usize, rng: &mut RngStream) -> Result<OrderedSelection> {
    if k > p.len() {
        return Err(Error::KExceedsM { k, m: p.len() });
    }
    let mut order = Vec::with_capacity(k);
    let mut step_probs = Vec::with_capacity(k);
    for _ in 0..k {
        let dist = renormalized_distribution(p, &order)?;
        let next = rng.categorical(dist.probs());
        order.push(next);
        step_probs.push(dist);
    }
    Ok(OrderedSelection { order, step_probs })
}

/// A chosen client's weight `lambda_m` and local update `g_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUpdate {
    pub weight: f64,
    pub gradient: Vec<f64>,
}

pub type LocalUpdateSet = BTreeMap<usize, LocalUpdate>;

/// `K^{-1} sum_k g_(k)` with
/// `g_(k) = lambda_{m_k} g_{m_k} / p_(k),m_k + sum_{l<k} lambda_{m_l} g_{m_l}`.
pub fn combine_gradients(sel: &OrderedSelection, locals: &LocalUpdateSet) -> Result<Vec<f64>> {
    let first = sel.order.first().ok_or(Error::Empty)?;
    let dim = locals.get(first).ok_or(Error::MissingLocal(*first))?.gradient.len();
    let mut total = vec![0.0; dim];
    // running sum of lambda_l g_l over earlier draws
    let mut prefix = vec![0.0; dim];
    for (&m, probs) in sel.order.iter().zip(&sel.step_probs) {
        let local = locals.get(&m).ok_or(Error::MissingLocal(m))?;
        if local.gradient.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: local.gradient.len(),
            });
        }
        let pk = probs[m];
        if pk <= 0.0 {
            return Err(Error::ZeroProbabilitySelected(m));
        }
        for ((t, pre), g) in total.iter_mut().zip(&mut prefix).zip(&local.gradient) {
            let weighted = local.weight * g;
            *t += weighted / pk + *pre;
            *pre += weighted;
        }
    }
    let k = sel.order.len() as f64;
    for t in &mut total {
        *t /= k;
    }
    Ok(total)
}
