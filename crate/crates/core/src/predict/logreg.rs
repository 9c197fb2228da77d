//! Per-justice L1-regularized logistic regression over concatenated topic
//! proportions, fit by proximal gradient with backtracking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::corpus::{JusticeId, Side};
use crate::error::{Error, Result};
use crate::math::{dot, log_sigmoid, sigmoid};
use crate::topics::CaseMixtures;

/// Penalty grid searched by the cross-validation harness.
pub const L1_GRID: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub lambda1: f64,
    pub max_iters: usize,
    /// Relative objective change below which iteration stops.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { lambda1: 1.0, max_iters: 500, tol: 1e-9 }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1.is_nan() || self.lambda1 < 0.0 {
            return Err(Error::invalid("lambda1 must be nonnegative"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Set when the training labels had a single class.
    pub majority_only: bool,
    pub converged: bool,
    /// Penalized objective after each iteration.
    pub objective_trace: Vec<f64>,
}

impl LogisticModel {
    /// Probability of the positive (petitioner) class.
    pub fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.intercept + dot(&self.weights, x))
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
}

impl Problem<'_> {
    fn loss(&self, w: &[f64], b: f64) -> f64 {
        self.x.iter().zip(self.y).map(|(xi, &yi)| -log_sigmoid(yi * (b + dot(w, xi)))).sum()
    }

    fn grad(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (xi, &yi) in self.x.iter().zip(self.y) {
            let r = -yi * sigmoid(-yi * (b + dot(w, xi)));
            gb += r;
            for (g, v) in gw.iter_mut().zip(xi) {
                *g += r * v;
            }
        }
        (gw, gb)
    }
}

/// Minimizes Σ log(1 + exp(−y(wᵀx + b))) + λ‖w‖₁ with the intercept
/// unpenalized. `y` is true for the petitioner class.
pub fn fit_l1_logistic(x: &[Vec<f64>], y: &[bool], cfg: &LogRegConfig) -> Result<LogisticModel> {
    cfg.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid("logistic regression needs matching, nonempty features and labels"));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("features must be finite and of equal length"));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Ok(LogisticModel {
            weights: vec![0.0; dim],
            intercept: if positives == 0 { -1e3 } else { 1e3 },
            majority_only: true,
            converged: true,
            objective_trace: vec![],
        });
    }
    let ys: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
    let prob = Problem { x, y: &ys };
    let l1 = |w: &[f64]| cfg.lambda1 * w.iter().map(|v| v.abs()).sum::<f64>();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut f = prob.loss(&w, b);
    let mut obj = f + l1(&w);
    let mut step = 1.0;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let (gw, gb) = prob.grad(&w, b);
        loop {
            let w_new: Vec<f64> = w
                .iter()
                .zip(&gw)
                .map(|(wi, gi)| soft_threshold(wi - step * gi, step * cfg.lambda1))
                .collect();
            let b_new = b - step * gb;
            let f_new = prob.loss(&w_new, b_new);
            let mut lin = gb * (b_new - b);
            let mut sq = (b_new - b).powi(2);
            for ((wn, wo), g) in w_new.iter().zip(&w).zip(&gw) {
                lin += g * (wn - wo);
                sq += (wn - wo).powi(2);
            }
            if f_new <= f + lin + sq / (2.0 * step) + 1e-12 * f.abs() || step < 1e-12 {
                w = w_new;
                b = b_new;
                f = f_new;
                break;
            }
            step *= 0.5;
        }
        let new_obj = f + l1(&w);
        trace.push(new_obj);
        let done = (obj - new_obj).abs() < cfg.tol * obj.abs().max(1.0);
        obj = new_obj;
        if done {
            converged = true;
            break;
        }
        step *= 1.5;
    }
    if !converged {
        log::warn!("logistic regression did not converge in {} iterations", cfg.max_iters);
    }
    Ok(LogisticModel {
        weights: w,
        intercept: b,
        majority_only: false,
        converged,
        objective_trace: trace,
    })
}

/// θ ⊕ Δ_p ⊕ Δ_r, with zeros for an absent brief side.
pub fn case_features(mix: &CaseMixtures) -> Vec<f64> {
    let d = mix.theta.len();
    let mut out = mix.theta.clone();
    for side in Side::ALL {
        out.extend(mix.side_mean(side).unwrap_or_else(|| vec![0.0; d]));
    }
    out
}

/// One classifier per justice; `None` for justices with no training votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JusticeClassifiers {
    pub models: Vec<Option<LogisticModel>>,
}

impl JusticeClassifiers {
    /// Independent per-justice argmax; ties and untrained justices go to
    /// the petitioner.
    pub fn predict(&self, features: &[f64], justices: &[JusticeId]) -> Prediction {
        let marginals: BTreeMap<JusticeId, f64> = justices
            .iter()
            .map(|&j| {
                let p = self.models.get(j).and_then(|m| m.as_ref()).map_or(0.5, |m| m.prob(features));
                (j, p)
            })
            .collect();
        let partition = marginals
            .iter()
            .map(|(&j, &p)| (j, if p >= 0.5 { Side::Petitioner } else { Side::Respondent }))
            .collect();
        Prediction {
            marginals,
            partition,
            num_kappa_samples: 0,
            uniform_fallback: false,
        }
    }
}

/// Fits a classifier per justice from per-case features and vote maps.
pub fn l1_logreg(
    features: &[Vec<f64>],
    labels: &[BTreeMap<JusticeId, Side>],
    num_justices: usize,
    cfg: &LogRegConfig,
) -> Result<JusticeClassifiers> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
    }
    let models = (0..num_justices)
        .map(|j| {
            let (x, y): (Vec<Vec<f64>>, Vec<bool>) = features
                .iter()
                .zip(labels)
                .filter_map(|(f, votes)| votes.get(&j).map(|&s| (f.clone(), s == Side::Petitioner)))
                .unzip();
            if x.is_empty() {
                Ok(None)
            } else {
                fit_l1_logistic(&x, &y, cfg).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    Ok(JusticeClassifiers { models })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut r = rng::seeded(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let y = x.iter().map(|v| v[0] + 0.5 * v[1] > 0.1).collect();
        (x, y)
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let (x, y) = toy(60, 1);
        let cfg = LogRegConfig { lambda1: 0.01, max_iters: 5000, tol: 1e-12 };
        let m = fit_l1_logistic(&x, &y, &cfg).unwrap();
        let correct = x.iter().zip(&y).filter(|(xi, &yi)| (m.prob(xi) > 0.5) == yi).count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn objective_is_monotone() {
        let (x, mut y) = toy(80, 2);
        for i in (0..y.len()).step_by(7) {
            y[i] = !y[i];
        }
        let cfg = LogRegConfig { lambda1: 0.5, max_iters: 200, tol: 0.0 };
        let m = fit_l1_logistic(&x, &y, &cfg).unwrap();
        assert!(m.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert!(m.objective_trace[99] <= m.objective_trace[9]);
        assert_eq!(m.objective_trace.len(), 200);
        assert!(!m.converged);
    }

    #[test]
    fn huge_penalty_gives_majority_intercept() {
        let (x, mut y) = toy(50, 3);
        y.iter_mut().enumerate().for_each(|(i, v)| *v = i % 3 != 0);
        let m = fit_l1_logistic(&x, &y, &LogRegConfig { lambda1: 1e9, ..Default::default() }).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert!(x.iter().all(|xi| m.prob(xi) > 0.5));
    }

    #[test]
    fn single_class_falls_back_to_majority() {
        let (x, _) = toy(10, 4);
        let m = fit_l1_logistic(&x, &[false; 10], &LogRegConfig::default()).unwrap();
        assert!(m.majority_only);
        assert!(m.prob(&x[0]) < 0.5);
        assert!(fit_l1_logistic(&[], &[], &LogRegConfig::default()).is_err());
    }

    #[test]
    fn features_zero_fill_missing_sides() {
        let mix = CaseMixtures { case_id: "c".into(), theta: vec![0.2, 0.8], briefs: vec![] };
        assert_eq!(case_features(&mix), vec![0.2, 0.8, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn per_justice_classifiers_predict_partitions() {
        let feats = vec![vec![1.0], vec![-1.0], vec![0.9], vec![-0.8]];
        let labels: Vec<BTreeMap<JusticeId, Side>> = feats
            .iter()
            .map(|f| {
                let s = if f[0] > 0.0 { Side::Petitioner } else { Side::Respondent };
                BTreeMap::from([(0, s), (1, s.flip())])
            })
            .collect();
        let c = l1_logreg(&feats, &labels, 3, &LogRegConfig { lambda1: 0.01, ..Default::default() }).unwrap();
        assert!(c.models[2].is_none());
        let p = c.predict(&[1.0], &[0, 1, 2]);
        assert_eq!(p.partition[&0], Side::Petitioner);
        assert_eq!(p.partition[&1], Side::Respondent);
        assert_eq!(p.partition[&2], Side::Petitioner);
    }
}
