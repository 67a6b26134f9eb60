//! Per-sample losses, minibatch gradients and the global training objective.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sim::problem::{ClientData, FederatedProblem, LossFamily, Targets};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax logits `W x` for a row-major `classes x d` matrix.
fn logits(w: &[f64], x: &[f64], classes: usize) -> Vec<f64> {
    let d = x.len();
    (0..classes).map(|c| dot(&w[c * d..(c + 1) * d], x)).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Loss of sample `i` of `client`.
pub fn sample_loss(client: &ClientData, family: LossFamily, w: &[f64], i: usize) -> f64 {
    let x = client.row(i);
    match (family, &client.targets) {
        (LossFamily::Squared, Targets::Real(y)) => {
            let r = y[i] - dot(w, x);
            0.5 * r * r
        }
        (LossFamily::Logistic { classes }, Targets::Class(y)) => {
            let z = logits(w, x, classes);
            log_sum_exp(&z) - z[y[i]]
        }
        _ => panic!("target kind does not match loss family"),
    }
}

/// Adds the gradient of sample `i`'s loss, scaled by `scale`, into `out`.
fn add_sample_gradient(client: &ClientData, family: LossFamily, w: &[f64], i: usize, scale: f64, out: &mut [f64]) {
    let x = client.row(i);
    match (family, &client.targets) {
        (LossFamily::Squared, Targets::Real(y)) => {
            let r = y[i] - dot(w, x);
            for (o, xj) in out.iter_mut().zip(x) {
                *o -= scale * r * xj;
            }
        }
        (LossFamily::Logistic { classes }, Targets::Class(y)) => {
            let z = logits(w, x, classes);
            let lse = log_sum_exp(&z);
            let d = x.len();
            for c in 0..classes {
                let mut coef = (z[c] - lse).exp();
                if c == y[i] {
                    coef -= 1.0;
                }
                for (o, xj) in out[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *o += scale * coef * xj;
                }
            }
        }
        _ => panic!("target kind does not match loss family"),
    }
}

/// Mean loss over `indices`.
pub fn batch_loss(client: &ClientData, family: LossFamily, w: &[f64], indices: &[usize]) -> f64 {
    let n = indices.len() as f64;
    indices.iter().map(|&i| sample_loss(client, family, w, i)).sum::<f64>() / n
}

/// Gradient of [`batch_loss`].
pub fn batch_gradient(client: &ClientData, family: LossFamily, w: &[f64], indices: &[usize]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    let scale = 1.0 / indices.len() as f64;
    for &i in indices {
        add_sample_gradient(client, family, w, i, scale, &mut g);
    }
    g
}

/// Mean loss over all of `client`'s samples.
pub fn client_loss(client: &ClientData, family: LossFamily, w: &[f64]) -> f64 {
    let all: Vec<usize> = (0..client.len()).collect();
    batch_loss(client, family, w, &all)
}

/// Minibatch gradient of client `m`: `min(batch, n_m)` samples drawn
/// uniformly without replacement.
pub fn local_update(
    problem: &FederatedProblem,
    m: usize,
    w: &[f64],
    batch: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let client = problem
        .clients
        .get(m)
        .ok_or_else(|| Error::InvalidArgument(format!("client {m} out of range")))?;
    if w.len() != problem.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.param_dim(),
            got: w.len(),
        });
    }
    if client.is_empty() {
        return Err(Error::EmptyClient(m));
    }
    let size = batch.min(client.len());
    let indices = rng.sample_indices(client.len(), size);
    Ok(batch_gradient(client, problem.family, w, &indices))
}

/// `F(w) = sum_m lambda_m f_m(w)`.
pub fn training_loss(problem: &FederatedProblem, w: &[f64]) -> f64 {
    problem
        .clients
        .iter()
        .zip(&problem.lambdas)
        .map(|(c, l)| l * client_loss(c, problem.family, w))
        .sum()
}
