//! Probability-simplex arithmetic.
//!
//! Points on the simplex, the floored set `{p : sum p = 1, p_m >= alpha / M}`,
//! the generalized KL divergence (Bregman divergence of the unnormalized
//! negative entropy), and the closed-form KL projection onto the floored set.

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of a simplex point.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Inputs whose sum is off by more than [`SUM_TOLERANCE`] but at most this
/// much are renormalized on construction instead of rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// Slack allowed when checking membership of the floored set.
pub const FLOOR_TOLERANCE: f64 = 1e-12;

fn check_nonnegative(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput(i));
        }
        if v < 0.0 {
            return Err(Error::NegativeInput(i));
        }
        sum += v;
    }
    Ok(sum)
}

/// A probability distribution over `M` clients.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint {
    probs: Vec<f64>,
}

impl SimplexPoint {
    /// Validates `probs`. Sums within [`RENORMALIZE_TOLERANCE`] of one are
    /// renormalized; sums within [`SUM_TOLERANCE`] are kept bit-for-bit.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum = check_nonnegative(&probs)?;
        let gap = (sum - 1.0).abs();
        if gap <= SUM_TOLERANCE {
            Ok(Self { probs })
        } else if gap <= RENORMALIZE_TOLERANCE {
            Ok(Self {
                probs: probs.into_iter().map(|p| p / sum).collect(),
            })
        } else {
            Err(Error::NotNormalized(sum))
        }
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "uniform distribution needs at least one client");
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    /// Internal constructor for values already known to lie on the simplex.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        debug_assert!(
            (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-8,
            "sum {}",
            probs.iter().sum::<f64>()
        );
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// L1 distance to another point of the same dimension.
    pub fn l1_distance(&self, other: &SimplexPoint) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum())
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// The floored set: simplex points with every entry at least `alpha / M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloorConstraint {
    alpha: f64,
    m: usize,
}

impl FloorConstraint {
    pub fn new(alpha: f64, m: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        if m == 0 {
            return Err(Error::Empty);
        }
        Ok(Self { alpha, m })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn clients(&self) -> usize {
        self.m
    }

    /// The per-entry lower bound `alpha / M`.
    pub fn floor(&self) -> f64 {
        self.alpha / self.m as f64
    }

    pub fn contains(&self, p: &SimplexPoint) -> bool {
        let floor = self.floor();
        p.len() == self.m
            && p.probs().iter().all(|&x| x >= floor - FLOOR_TOLERANCE)
            && (p.probs().iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE
    }
}

/// Nonnegative weights, not all zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveWeights {
    values: Vec<f64>,
}

impl PositiveWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let sum = check_nonnegative(&values)?;
        if sum <= 0.0 {
            return Err(Error::ZeroSum);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Normalizes weights into a distribution.
pub fn make_distribution(weights: &PositiveWeights) -> SimplexPoint {
    let sum: f64 = weights.values.iter().sum();
    SimplexPoint::from_vec_unchecked(weights.values.iter().map(|w| w / sum).collect())
}

/// The minimizer of `q -> sum_m a_m / q_m` over the simplex: `sqrt(a)` normalized.
pub fn optimal_distribution(a: &PositiveWeights) -> SimplexPoint {
    let roots: Vec<f64> = a.values.iter().map(|v| v.sqrt()).collect();
    let sum: f64 = roots.iter().sum();
    SimplexPoint::from_vec_unchecked(roots.into_iter().map(|r| r / sum).collect())
}

/// Generalized KL divergence `sum x log(x / y) - sum x + sum y`, with `0 log 0 = 0`.
pub fn kl_divergence(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    check_nonnegative(x)?;
    check_nonnegative(y)?;
    let mut total = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        if xi > 0.0 {
            if yi == 0.0 {
                return Err(Error::SupportMismatch(i));
            }
            total += xi * (xi / yi).ln();
        }
        total += yi - xi;
    }
    Ok(total)
}

/// KL projection of positive weights onto the floored set.
///
/// Entries are sorted ascending; the smallest sorted position `k` with
/// `y_(k) (1 - k alpha / M) > (alpha / M) sum_{j >= k} y_(j)` splits the
/// output into entries pinned at `alpha / M` (positions before `k`) and
/// entries rescaled by `(1 - k alpha / M) / sum_{j >= k} y_(j)`.
pub fn floor_kl_projection(y: &[f64], constraint: &FloorConstraint) -> Result<SimplexPoint> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    project_with_order(y, constraint, &mut order)
}

/// Same as [`floor_kl_projection`], reusing `order` as the starting
/// permutation for the sort. A permutation that is already close to sorted
/// (e.g. the previous round's) makes the sort nearly linear. On return
/// `order` holds the ascending permutation of `y`, ties broken by index.
pub fn project_with_order(y: &[f64], constraint: &FloorConstraint, order: &mut Vec<usize>) -> Result<SimplexPoint> {
    let m = constraint.clients();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput(i));
        }
        if v <= 0.0 {
            return Err(Error::NonPositiveInput(i));
        }
    }
    if order.len() != m {
        *order = (0..m).collect();
    }
    // The floored set is the single point {uniform} when alpha = 1.
    if constraint.alpha() == 1.0 {
        return Ok(SimplexPoint::uniform(m));
    }

    // slice::sort_by is a stable run-detecting merge sort, linear on sorted runs.
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));

    let mut suffix = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suffix[k] = suffix[k + 1] + y[order[k]];
    }

    let alpha = constraint.alpha();
    let floor = constraint.floor();
    let mf = m as f64;
    // Position m - 1 always satisfies the inequality for alpha < 1.
    let split = (0..m)
        .find(|&k| y[order[k]] * (1.0 - k as f64 / mf * alpha) > floor * suffix[k])
        .unwrap_or(m - 1);

    let scale = (1.0 - split as f64 / mf * alpha) / suffix[split];
    let mut out = vec![0.0; m];
    for (pos, &idx) in order.iter().enumerate() {
        out[idx] = if pos < split { floor } else { y[idx] * scale };
    }
    Ok(SimplexPoint::from_vec_unchecked(out))
}

/// Total variation `sum_t ||q^{t+1} - q^t||_1` of a sequence of points.
pub fn total_variation(seq: &[SimplexPoint]) -> Result<f64> {
    let first = seq.first().ok_or(Error::Empty)?;
    let mut tv = 0.0;
    for pair in seq.windows(2) {
        if pair[1].len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: pair[1].len(),
            });
        }
        tv += pair[1].l1_distance(&pair[0])?;
    }
    Ok(tv)
}

/// How far a point lies from the floored set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionGap {
    /// Total mass missing below the floor.
    pub psi: f64,
    /// Missing mass relative to the mass above the floor; in `[0, 1]`.
    pub omega: f64,
    /// `omega / (1 - omega (1 - alpha / M))`; at most `M / alpha`.
    pub phi: f64,
}

pub fn projection_gap(q: &SimplexPoint, constraint: &FloorConstraint) -> Result<ProjectionGap> {
    if q.len() != constraint.clients() {
        return Err(Error::DimensionMismatch {
            expected: constraint.clients(),
            got: q.len(),
        });
    }
    let floor = constraint.floor();
    let (mut below, mut above) = (0.0, 0.0);
    for &x in q.probs() {
        if x < floor {
            below += floor - x;
        } else {
            above += x - floor;
        }
    }
    if below == 0.0 {
        return Ok(ProjectionGap {
            psi: 0.0,
            omega: 0.0,
            phi: 0.0,
        });
    }
    let omega = below / above;
    let phi = omega / (1.0 - omega * (1.0 - floor));
    Ok(ProjectionGap { psi: below, omega, phi })
}
