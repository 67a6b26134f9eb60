#![allow(dead_code)]

//! Reference implementations used as test oracles. None of these share code
//! with the library's algorithms.

use fedsamp::RngStream;

/// Generalized KL divergence, written out directly.
pub fn kl(x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        if x[i] > 0.0 {
            total += x[i] * (x[i] / y[i]).ln();
        }
        total += y[i] - x[i];
    }
    total
}

/// KL projection onto `{x : sum x = 1, x >= alpha / M}` through the
/// stationarity condition `x = max(floor, c y)`, with `c` found by bisection.
pub fn projection_by_bisection(y: &[f64], alpha: f64) -> Vec<f64> {
    let floor = alpha / y.len() as f64;
    let mass = |c: f64| y.iter().map(|v| (c * v).max(floor)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while mass(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    y.iter().map(|v| (c * v).max(floor)).collect()
}

/// Minimizer of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Direct numerical minimization of `kl(x, y)` over the floored simplex
/// for two or three clients (nested golden-section search).
pub fn projection_by_search(y: &[f64], alpha: f64) -> Vec<f64> {
    let m = y.len();
    let f = alpha / m as f64;
    match m {
        2 => {
            let x0 = golden(f, 1.0 - f, |x0| kl(&[x0, 1.0 - x0], y));
            vec![x0, 1.0 - x0]
        }
        3 => {
            let inner = |x0: f64| {
                let x1 = golden(f, 1.0 - x0 - f, |x1| kl(&[x0, x1, 1.0 - x0 - x1], y));
                (x1, kl(&[x0, x1, 1.0 - x0 - x1], y))
            };
            let x0 = golden(f, 1.0 - 2.0 * f, |x0| inner(x0).1);
            let x1 = inner(x0).0;
            vec![x0, x1, 1.0 - x0 - x1]
        }
        _ => panic!("search oracle supports two or three clients"),
    }
}

/// Every ordered tuple of `k` draws with replacement and its probability.
pub fn ordered_draws(p: &[f64], k: usize) -> Vec<(Vec<usize>, f64)> {
    let m = p.len();
    let mut out = Vec::new();
    let total = m.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let mut draws = Vec::with_capacity(k);
        let mut prob = 1.0;
        for _ in 0..k {
            draws.push(c % m);
            prob *= p[c % m];
            c /= m;
        }
        out.push((draws, prob));
    }
    out
}

/// Every ordered selection of `k` distinct clients drawn by sequential
/// renormalization, with its probability and the per-step probability of
/// each chosen client.
pub fn ordered_distinct(p: &[f64], k: usize) -> Vec<(Vec<usize>, Vec<f64>, f64)> {
    fn rec(
        p: &[f64],
        k: usize,
        order: &mut Vec<usize>,
        steps: &mut Vec<f64>,
        prob: f64,
        out: &mut Vec<(Vec<usize>, Vec<f64>, f64)>,
    ) {
        if order.len() == k {
            out.push((order.clone(), steps.clone(), prob));
            return;
        }
        let left: f64 = 1.0 - order.iter().map(|&i| p[i]).sum::<f64>();
        for m in 0..p.len() {
            if order.contains(&m) {
                continue;
            }
            let step = p[m] / left;
            order.push(m);
            steps.push(step);
            rec(p, k, order, steps, prob * step, out);
            order.pop();
            steps.pop();
        }
    }
    let mut out = Vec::new();
    rec(p, k, &mut Vec::new(), &mut Vec::new(), 1.0, &mut out);
    out
}

/// A random point of the simplex with every entry at least `min`.
pub fn random_simplex(rng: &mut RngStream, m: usize, min: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| min + (1.0 - m as f64 * min) * v / s).collect()
}

pub fn random_positive(rng: &mut RngStream, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..m).map(|_| lo + (hi - lo) * rng.uniform()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
