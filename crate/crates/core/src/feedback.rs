//! Client selection with replacement, the variance-reduction loss, and its
//! unbiased estimators from bandit feedback.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::simplex::SimplexPoint;

/// Clients drawn in one round, in draw order. May contain repeats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    draws: Vec<usize>,
}

impl Selection {
    pub fn new(draws: Vec<usize>) -> Self {
        Self { draws }
    }

    pub fn draws(&self) -> &[usize] {
        &self.draws
    }

    /// Number of draws `K`.
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// `(client, count)` pairs sorted by client.
    pub fn multiplicities(&self) -> Vec<(usize, usize)> {
        let mut sorted = self.draws.clone();
        sorted.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::new();
        for c in sorted {
            match out.last_mut() {
                Some((last, n)) if *last == c => *n += 1,
                _ => out.push((c, 1)),
            }
        }
        out
    }

    pub fn count(&self, client: usize) -> usize {
        self.draws.iter().filter(|&&c| c == client).count()
    }
}

/// One observed client: how often it was drawn and its value `a_m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub client: usize,
    pub count: usize,
    pub value: f64,
}

/// What the server learns in one round: `a_m` for the drawn clients only.
#[derive(Clone, Debug, PartialEq)]
pub struct BanditFeedback {
    k: usize,
    observations: Vec<Observation>,
}

impl BanditFeedback {
    /// Observations must have distinct clients, positive counts summing to
    /// `k`, and finite nonnegative values.
    pub fn new(k: usize, mut observations: Vec<Observation>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidFeedback("K must be positive".into()));
        }
        observations.sort_by_key(|o| o.client);
        let mut total = 0;
        for (i, o) in observations.iter().enumerate() {
            if i > 0 && observations[i - 1].client == o.client {
                return Err(Error::InvalidFeedback(format!("client {} listed twice", o.client)));
            }
            if o.count == 0 || o.count > k {
                return Err(Error::InvalidFeedback(format!(
                    "client {} has count {}",
                    o.client, o.count
                )));
            }
            if !o.value.is_finite() || o.value < 0.0 {
                return Err(Error::InvalidFeedback(format!(
                    "client {} has value {}",
                    o.client, o.value
                )));
            }
            total += o.count;
        }
        if total != k {
            return Err(Error::InvalidFeedback(format!("counts sum to {total}, expected {k}")));
        }
        Ok(Self { k, observations })
    }

    /// Builds feedback for `selection`, querying `value` once per distinct
    /// drawn client and for no other client.
    pub fn observe(selection: &Selection, mut value: impl FnMut(usize) -> f64) -> Result<Self> {
        let observations = selection
            .multiplicities()
            .into_iter()
            .map(|(client, count)| Observation {
                client,
                count,
                value: value(client),
            })
            .collect();
        Self::new(selection.len(), observations)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Largest observed value, or 0 when nothing was observed.
    pub fn max_value(&self) -> f64 {
        self.observations.iter().map(|o| o.value).fold(0.0, f64::max)
    }

    fn check_clients(&self, m: usize) -> Result<()> {
        match self.observations.iter().find(|o| o.client >= m) {
            Some(o) => Err(Error::InvalidFeedback(format!(
                "client {} out of range for {m} clients",
                o.client
            ))),
            None => Ok(()),
        }
    }
}

/// `k` i.i.d. draws from `p`.
pub fn sample_with_replacement(p: &SimplexPoint, k: usize, rng: &mut RngStream) -> Selection {
    let mut cumulative = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &x in p.probs() {
        acc += x;
        cumulative.push(acc);
    }
    Selection::new((0..k).map(|_| rng.categorical_cumulative(&cumulative)).collect())
}

/// `l(q) = (1 / K) sum_m a_m / q_m`.
pub fn variance_loss(q: &SimplexPoint, a: &[f64], k: usize) -> Result<f64> {
    if a.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: a.len(),
        });
    }
    let mut total = 0.0;
    for (m, (&am, &qm)) in a.iter().zip(q.probs()).enumerate() {
        if !am.is_finite() {
            return Err(Error::NonFiniteInput(m));
        }
        if am < 0.0 {
            return Err(Error::NegativeInput(m));
        }
        if am > 0.0 {
            if qm <= 0.0 {
                return Err(Error::ZeroProbabilityWithMass(m));
            }
            total += am / qm;
        }
    }
    Ok(total / k as f64)
}

fn check_pair(q: &SimplexPoint, p: &SimplexPoint, fb: &BanditFeedback) -> Result<()> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: p.len(),
        });
    }
    fb.check_clients(q.len())?;
    for o in fb.observations() {
        if q[o.client] <= 0.0 || p[o.client] <= 0.0 {
            return Err(Error::ZeroProbabilityObserved(o.client));
        }
    }
    Ok(())
}

/// Importance-weighted estimate of `l(q)` when the draws came from `p`:
/// `(1 / K^2) sum_{observed} count_m a_m / (q_m p_m)`.
pub fn estimated_loss(q: &SimplexPoint, p: &SimplexPoint, fb: &BanditFeedback) -> Result<f64> {
    check_pair(q, p, fb)?;
    let k2 = (fb.k() * fb.k()) as f64;
    Ok(fb
        .observations()
        .iter()
        .map(|o| o.count as f64 * o.value / (q[o.client] * p[o.client]))
        .sum::<f64>()
        / k2)
}

/// Estimate of the gradient of `l` at `q`:
/// entry `m` is `-(1 / K^2) count_m a_m / (q_m^2 p_m)`, zero if unobserved.
pub fn estimated_gradient(q: &SimplexPoint, p: &SimplexPoint, fb: &BanditFeedback) -> Result<Vec<f64>> {
    check_pair(q, p, fb)?;
    let k2 = (fb.k() * fb.k()) as f64;
    let mut grad = vec![0.0; q.len()];
    for o in fb.observations() {
        let qm = q[o.client];
        grad[o.client] = -(o.count as f64) * o.value / (k2 * qm * qm * p[o.client]);
    }
    Ok(grad)
}
