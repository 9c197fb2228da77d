//! Numerically stable logistic helpers and simplex sampling.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Logits are clamped to this magnitude before exponentiation.
pub const LOGIT_CLAMP: f64 = 700.0;

#[inline]
fn clamp(x: f64) -> f64 {
    x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

/// Logistic function σ(x).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = clamp(x);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log σ(x), computed without forming σ(x).
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    let x = clamp(x);
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// σ'(x) = σ(x)(1 − σ(x)).
#[inline]
pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Log of a Gamma(shape, 1) draw.
///
/// Small shapes underflow when drawn directly, so for shape < 1 we use
/// G(a) = G(a + 1) · U^(1/a) and stay in log space.
fn log_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape");
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.sample(rng).ln() + u.ln() / shape
    }
}

/// Symmetric Dirichlet draw of dimension `dim` via normalized Gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(dim: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = (0..dim).map(|_| log_gamma_draw(concentration, rng)).collect();
    let norm = log_sum_exp(&logs);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
    normalize_in_place(&mut out);
    out
}

/// Rescales nonnegative entries to sum to one.
pub fn normalize_in_place(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// Index drawn from a categorical distribution given its cumulative weights.
pub fn sample_cumulative<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("nonempty weights");
    let u = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

pub fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

pub fn is_simplex(v: &[f64], tol: f64) -> bool {
    v.iter().all(|&x| x >= 0.0 && x.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}
