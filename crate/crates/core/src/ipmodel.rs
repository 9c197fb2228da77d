//! Vote likelihoods, priors, and the amicus expected-utility quantities.
//!
//! Every function here is pure; callers may evaluate them from any thread.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Case, Corpus, JusticeId, Side};
use crate::error::{check_dim, Error, Result};
use crate::math::{dot, log_sigmoid, sigmoid, sigmoid_prime, sq_dist};
use crate::topics::{CaseMixtures, Mixtures};

/// Floor applied to expected-utility factors before taking logs.
pub const UTILITY_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Issue-specific ideal point of one justice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JusticeParams {
    pub psi: Vec<f64>,
}

impl JusticeParams {
    pub fn new(psi: Vec<f64>) -> Self {
        JusticeParams { psi }
    }

    pub fn zeros(dim: usize) -> Self {
        JusticeParams { psi: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }
}

/// Per-case popularity `a`, polarity `b`, and amicus polarities `c_p`, `c_r`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CaseParams {
    pub a: f64,
    pub b: f64,
    pub c_p: f64,
    pub c_r: f64,
}

impl CaseParams {
    pub fn new(a: f64, b: f64, c_p: f64, c_r: f64) -> Self {
        CaseParams { a, b, c_p, c_r }
    }

    pub fn c(&self, side: Side) -> f64 {
        match side {
            Side::Petitioner => self.c_p,
            Side::Respondent => self.c_r,
        }
    }

    /// The parameters the model kind estimates, in `a, b, c_p, c_r` order.
    pub fn active(&self, kind: ModelKind) -> Vec<f64> {
        let all = [self.a, self.b, self.c_p, self.c_r];
        all[..kind.num_case_params()].to_vec()
    }

    /// Inverse of [`CaseParams::active`]; inactive amicus polarities are zero.
    pub fn from_active(kind: ModelKind, v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), kind.num_case_params());
        let get = |i: usize| v.get(i).copied().unwrap_or(0.0);
        CaseParams {
            a: get(0),
            b: get(1),
            c_p: if kind.has_amici() { get(2) } else { 0.0 },
            c_r: if kind.has_amici() { get(3) } else { 0.0 },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c_p.is_finite() && self.c_r.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Unidimensional,
    Issues,
    Amici,
    RandomUtility,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Unidimensional,
        ModelKind::Issues,
        ModelKind::Amici,
        ModelKind::RandomUtility,
    ];

    pub fn has_amici(self) -> bool {
        matches!(self, ModelKind::Amici | ModelKind::RandomUtility)
    }

    pub fn num_case_params(self) -> usize {
        if self.has_amici() {
            4
        } else {
            2
        }
    }

    /// Ideal-point dimension for a topic model with `num_topics` topics.
    pub fn psi_dim(self, num_topics: usize) -> usize {
        match self {
            ModelKind::Unidimensional => 1,
            _ => num_topics,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Unidimensional => "unidimensional",
            ModelKind::Issues => "issues",
            ModelKind::Amici => "amici",
            ModelKind::RandomUtility => "random_utility",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unidimensional" | "uni" => Ok(ModelKind::Unidimensional),
            "issues" => Ok(ModelKind::Issues),
            "amici" => Ok(ModelKind::Amici),
            "random_utility" | "utility" | "ru" => Ok(ModelKind::RandomUtility),
            other => Err(Error::invalid(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Component-wise variance of the justice prior.
    pub lambda: f64,
    /// Shared covariance of the justice prior; the sampler's starting value.
    pub rho: f64,
    /// Prior variance of each case parameter.
    pub sigma_kappa: f64,
    /// Exponent on the expected-utility factors.
    pub eta: f64,
    /// Weight of the brief-writing cost.
    pub xi: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 1.0,
            rho: 0.5,
            sigma_kappa: 4.0,
            eta: 1.0,
            xi: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid("rho must lie in (0, 1)"));
        }
        if !(self.sigma_kappa > 0.0 && self.sigma_kappa.is_finite()) {
            return Err(Error::invalid("sigma_kappa must be positive"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta must be nonnegative"));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::invalid("xi must be positive"));
        }
        Ok(())
    }
}

/// Argument of σ for a petitioner vote.
///
/// An absent side mixture contributes nothing. `Unidimensional` expects a
/// one-dimensional `psi` and ignores all text.
pub fn vote_logit(
    psi: &[f64],
    theta: &[f64],
    delta_p: Option<&[f64]>,
    delta_r: Option<&[f64]>,
    kappa: &CaseParams,
    kind: ModelKind,
) -> Result<f64> {
    match kind {
        ModelKind::Unidimensional => {
            check_dim(1, psi.len())?;
            Ok(kappa.a + psi[0] * kappa.b)
        }
        ModelKind::Issues => {
            check_dim(psi.len(), theta.len())?;
            Ok(kappa.a + kappa.b * dot(psi, theta))
        }
        ModelKind::Amici | ModelKind::RandomUtility => {
            check_dim(psi.len(), theta.len())?;
            let mut logit = kappa.a + kappa.b * dot(psi, theta);
            if let Some(dp) = delta_p {
                check_dim(psi.len(), dp.len())?;
                logit += kappa.c_p * dot(psi, dp);
            }
            if let Some(dr) = delta_r {
                check_dim(psi.len(), dr.len())?;
                logit += kappa.c_r * dot(psi, dr);
            }
            Ok(logit)
        }
    }
}

pub fn vote_prob(logit: f64, vote: Side) -> f64 {
    match vote {
        Side::Petitioner => sigmoid(logit),
        Side::Respondent => sigmoid(-logit),
    }
}

pub fn log_vote_prob(logit: f64, vote: Side) -> f64 {
    match vote {
        Side::Petitioner => log_sigmoid(logit),
        Side::Respondent => log_sigmoid(-logit),
    }
}

/// Number of votes cast for `side`.
pub fn utility(votes: &BTreeMap<JusticeId, Side>, side: Side) -> usize {
    votes.values().filter(|&&v| v == side).count()
}

/// (ξ/2)‖Δ − θ‖².
pub fn cost(delta: &[f64], theta: &[f64], xi: f64) -> Result<f64> {
    check_dim(theta.len(), delta.len())?;
    Ok(0.5 * xi * sq_dist(delta, theta))
}

fn side_sign(side: Side) -> f64 {
    match side {
        Side::Petitioner => 1.0,
        Side::Respondent => -1.0,
    }
}

/// Expected number of votes for `side` when a single brief with mixture
/// `delta` is filed on that side, ignoring every other brief.
pub fn expected_votes(
    psi_all: &[JusticeParams],
    theta: &[f64],
    delta: &[f64],
    kappa: &CaseParams,
    side: Side,
) -> Result<f64> {
    check_dim(theta.len(), delta.len())?;
    let c = kappa.c(side);
    let sign = side_sign(side);
    let mut total = 0.0;
    for j in psi_all {
        check_dim(theta.len(), j.dim())?;
        let logit = kappa.a + kappa.b * dot(&j.psi, theta) + c * dot(&j.psi, delta);
        total += sigmoid(sign * logit);
    }
    Ok(total)
}

/// Unnormalized random-utility density of a brief's mixture:
/// expected votes plus ξ(1 − ½‖Δ − θ‖²). Nonnegative on the simplex.
pub fn putil_factor(
    psi_all: &[JusticeParams],
    theta: &[f64],
    delta: &[f64],
    kappa: &CaseParams,
    side: Side,
    xi: f64,
) -> Result<f64> {
    let ev = expected_votes(psi_all, theta, delta, kappa, side)?;
    Ok(ev + xi * (1.0 - 0.5 * sq_dist(delta, theta)))
}

/// Amicus objective: expected votes minus writing cost.
pub fn amicus_objective(
    psi_all: &[JusticeParams],
    theta: &[f64],
    delta: &[f64],
    kappa: &CaseParams,
    side: Side,
    xi: f64,
) -> Result<f64> {
    Ok(expected_votes(psi_all, theta, delta, kappa, side)? - cost(delta, theta, xi)?)
}

/// Gradient of [`amicus_objective`] with respect to each coordinate of Δ.
pub fn marginal_values(
    psi_all: &[JusticeParams],
    theta: &[f64],
    delta: &[f64],
    kappa: &CaseParams,
    side: Side,
    xi: f64,
) -> Result<Vec<f64>> {
    check_dim(theta.len(), delta.len())?;
    let c = kappa.c(side);
    let sign = side_sign(side);
    let mut m: Vec<f64> = delta
        .iter()
        .zip(theta)
        .map(|(d, t)| -xi * (d - t))
        .collect();
    for j in psi_all {
        check_dim(theta.len(), j.dim())?;
        let logit = kappa.a + kappa.b * dot(&j.psi, theta) + c * dot(&j.psi, delta);
        let w = sign * sigmoid_prime(logit) * c;
        for (md, p) in m.iter_mut().zip(&j.psi) {
            *md += w * p;
        }
    }
    Ok(m)
}

/// First-order-condition residuals across the topics with positive weight:
/// each active topic's marginal value minus that of the first active topic.
pub fn foc_residual(
    delta: &[f64],
    theta: &[f64],
    psi_all: &[JusticeParams],
    kappa: &CaseParams,
    side: Side,
    xi: f64,
) -> Result<Vec<f64>> {
    let active: Vec<usize> = (0..delta.len()).filter(|&d| delta[d] > 0.0).collect();
    if let Some(&d) = active.iter().find(|&&d| delta[d] >= 1.0) {
        return Err(Error::invalid(format!(
            "delta[{d}] = {} lies on the simplex boundary",
            delta[d]
        )));
    }
    if delta.iter().any(|&x| x < 0.0) {
        return Err(Error::invalid("delta has negative entries"));
    }
    let m = marginal_values(psi_all, theta, delta, kappa, side, xi)?;
    let Some(&first) = active.first() else {
        return Err(Error::invalid("delta has no positive entries"));
    };
    Ok(active.iter().map(|&d| m[d] - m[first]).collect())
}

/// Justices presiding over a case: its voters, or the full roster when no
/// votes are recorded.
pub(crate) fn presiding(case: &Case, roster_len: usize) -> Vec<JusticeId> {
    if case.votes.is_empty() {
        (0..roster_len).collect()
    } else {
        case.votes.keys().copied().collect()
    }
}

/// Log-likelihood of a single case's votes, plus its brief utility terms for
/// `RandomUtility`.
pub fn case_log_likelihood(
    case: &Case,
    mix: &CaseMixtures,
    psi_all: &[JusticeParams],
    kappa: &CaseParams,
    hyper: &Hyperparams,
    kind: ModelKind,
) -> Result<f64> {
    if !kappa.is_finite() {
        return Err(Error::Numeric(format!("non-finite case parameters for {:?}", case.id)));
    }
    let delta_p = mix.side_mean(Side::Petitioner);
    let delta_r = mix.side_mean(Side::Respondent);
    let mut ll = 0.0;
    for (&j, &vote) in &case.votes {
        let psi = &psi_all
            .get(j)
            .ok_or_else(|| Error::invalid(format!("no ideal point for justice {j}")))?
            .psi;
        let logit = vote_logit(psi, &mix.theta, delta_p.as_deref(), delta_r.as_deref(), kappa, kind)?;
        ll += log_vote_prob(logit, vote);
    }
    if kind == ModelKind::RandomUtility && !mix.briefs.is_empty() {
        let bench: Vec<JusticeParams> = presiding(case, psi_all.len())
            .into_iter()
            .map(|j| psi_all[j].clone())
            .collect();
        for brief in &mix.briefs {
            let f = putil_factor(&bench, &mix.theta, &brief.mixture, kappa, brief.side, hyper.xi)?;
            ll += hyper.eta * f.max(UTILITY_FLOOR).ln();
        }
    }
    Ok(ll)
}

/// Log-likelihood of every observed vote, plus η·Σ log E[U] over briefs for
/// `RandomUtility`. Priors are not included.
pub fn log_likelihood(
    corpus: &Corpus,
    mixtures: &Mixtures,
    psi_all: &[JusticeParams],
    kappas: &[CaseParams],
    hyper: &Hyperparams,
    kind: ModelKind,
) -> Result<f64> {
    check_dim(corpus.cases.len(), kappas.len())?;
    check_dim(corpus.justices.len(), psi_all.len())?;
    if psi_all.iter().any(|j| j.psi.iter().any(|x| !x.is_finite())) {
        return Err(Error::Numeric("non-finite ideal point".into()));
    }
    let aligned = mixtures.aligned(corpus)?;
    let mut total = 0.0;
    for ((case, mix), kappa) in corpus.cases.iter().zip(aligned).zip(kappas) {
        total += case_log_likelihood(case, mix, psi_all, kappa, hyper, kind)?;
    }
    Ok(total)
}

/// Log-density of one ideal point under N(0, λI + ρ𝟙𝟙ᵀ).
pub fn log_prior_justice(psi: &[f64], lambda: f64, rho: f64) -> f64 {
    let d = psi.len() as f64;
    let s: f64 = psi.iter().sum();
    let ss: f64 = psi.iter().map(|x| x * x).sum();
    let quad = ss / lambda - rho / (lambda * (lambda + d * rho)) * s * s;
    let log_det = (d - 1.0) * lambda.ln() + (lambda + d * rho).ln();
    -0.5 * (d * LN_2PI + log_det + quad)
}

pub fn log_prior_justices(psi_all: &[JusticeParams], lambda: f64, rho: f64) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::invalid("lambda must be positive"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho must lie in (0, 1)"));
    }
    Ok(psi_all.iter().map(|j| log_prior_justice(&j.psi, lambda, rho)).sum())
}

/// Independent zero-mean Gaussian log-density over the active case parameters.
pub fn log_prior_case(kappa: &CaseParams, sigma_kappa: f64, kind: ModelKind) -> f64 {
    let active = kappa.active(kind);
    let k = active.len() as f64;
    let ss: f64 = active.iter().map(|x| x * x).sum();
    -0.5 * k * (LN_2PI + sigma_kappa.ln()) - 0.5 * ss / sigma_kappa
}

pub fn log_prior_cases(kappas: &[CaseParams], sigma_kappa: f64, kind: ModelKind) -> Result<f64> {
    if sigma_kappa.is_nan() || sigma_kappa <= 0.0 {
        return Err(Error::invalid("sigma_kappa must be positive"));
    }
    Ok(kappas.iter().map(|k| log_prior_case(k, sigma_kappa, kind)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::topics::BriefMixture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        crate::math::sample_dirichlet(d, 1.0, rng)
    }

    fn random_kappa(rng: &mut ChaCha8Rng) -> CaseParams {
        CaseParams::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        )
    }

    fn random_psi(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<JusticeParams> {
        (0..n)
            .map(|_| JusticeParams::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect()))
            .collect()
    }

    #[test]
    fn logit_hand_example() {
        let k = CaseParams::new(0.3, 2.0, 0.5, 0.0);
        let l = vote_logit(&[1.0, -1.0], &[0.5, 0.5], Some(&[1.0, 0.0]), None, &k, ModelKind::Amici).unwrap();
        assert!((l - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_ideal_point_gives_popularity() {
        let k = CaseParams::new(-1.7, 2.0, 0.5, 3.0);
        let theta = [0.2, 0.8];
        for kind in ModelKind::ALL {
            let psi = vec![0.0; kind.psi_dim(2)];
            let l = vote_logit(&psi, &theta, Some(&[1.0, 0.0]), Some(&[0.0, 1.0]), &k, kind).unwrap();
            assert_eq!(l, -1.7);
        }
    }

    #[test]
    fn logit_dimension_mismatch() {
        let k = CaseParams::default();
        assert!(vote_logit(&[1.0, 2.0], &[1.0], None, None, &k, ModelKind::Issues).is_err());
        assert!(vote_logit(&[1.0, 2.0], &[1.0, 0.0], None, None, &k, ModelKind::Unidimensional).is_err());
    }

    #[test]
    fn reduction_chain_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let d = rng.random_range(1..8);
            let theta = random_simplex(&mut rng, d);
            let dp = random_simplex(&mut rng, d);
            let dr = random_simplex(&mut rng, d);
            let psi: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut k = random_kappa(&mut rng);
            let issues = vote_logit(&psi, &theta, Some(&dp), Some(&dr), &k, ModelKind::Issues).unwrap();
            k.c_p = 0.0;
            k.c_r = 0.0;
            let amici = vote_logit(&psi, &theta, Some(&dp), Some(&dr), &k, ModelKind::Amici).unwrap();
            assert_eq!(issues, amici);
            let uni = vote_logit(&psi[..1], &[1.0], None, None, &k, ModelKind::Unidimensional).unwrap();
            let iss1 = vote_logit(&psi[..1], &[1.0], None, None, &k, ModelKind::Issues).unwrap();
            assert_eq!(uni, iss1);
        }
    }

    #[test]
    fn vote_prob_basics() {
        assert_eq!(vote_prob(0.0, Side::Petitioner), 0.5);
        assert_eq!(vote_prob(0.0, Side::Respondent), 0.5);
        assert!((vote_prob(3.7, Side::Petitioner) + vote_prob(3.7, Side::Respondent) - 1.0).abs() < 1e-15);
        let lp = log_vote_prob(-50.0, Side::Petitioner);
        assert!((lp + 50.0).abs() < 1e-12);
        assert!(vote_prob(-50.0, Side::Petitioner) > 0.0);
    }

    #[test]
    fn utility_counts() {
        let all: BTreeMap<_, _> = (0..9).map(|j| (j, Side::Petitioner)).collect();
        assert_eq!(utility(&all, Side::Petitioner), 9);
        assert_eq!(utility(&all, Side::Respondent), 0);
        let split: BTreeMap<_, _> = (0..9)
            .map(|j| (j, if j < 5 { Side::Respondent } else { Side::Petitioner }))
            .collect();
        assert_eq!(utility(&split, Side::Respondent), 5);
    }

    #[test]
    fn cost_values() {
        assert_eq!(cost(&[0.3, 0.7], &[0.3, 0.7], 1.0).unwrap(), 0.0);
        assert!((cost(&[1.0, 0.0], &[0.5, 0.5], 1.0).unwrap() - 0.25).abs() < 1e-15);
        let c1 = cost(&[0.9, 0.1], &[0.2, 0.8], 1.0).unwrap();
        let c2 = cost(&[0.9, 0.1], &[0.2, 0.8], 2.0).unwrap();
        assert!((c2 - 2.0 * c1).abs() < 1e-15);
        assert!(cost(&[1.0], &[0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn expected_votes_values() {
        let psi = vec![JusticeParams::zeros(3); 9];
        let theta = [0.2, 0.3, 0.5];
        let k = CaseParams::default();
        assert_eq!(expected_votes(&psi, &theta, &theta, &k, Side::Petitioner).unwrap(), 4.5);
        let big = CaseParams::new(1e4, 0.0, 0.0, 0.0);
        assert_eq!(expected_votes(&psi, &theta, &theta, &big, Side::Petitioner).unwrap(), 9.0);
        assert!(expected_votes(&psi, &theta, &theta, &big, Side::Respondent).unwrap() < 1e-300);

        // three justices, scalar oracle
        let psi = vec![
            JusticeParams::new(vec![1.0, 0.0]),
            JusticeParams::new(vec![-0.5, 2.0]),
            JusticeParams::new(vec![0.3, -1.2]),
        ];
        let theta = [0.6, 0.4];
        let delta = [0.1, 0.9];
        let k = CaseParams::new(0.2, 1.5, -0.7, 0.4);
        let logits: Vec<f64> = psi
            .iter()
            .map(|j| {
                let x0 = 1.5 * 0.6 + -0.7 * 0.1;
                let x1 = 1.5 * 0.4 + -0.7 * 0.9;
                0.2 + j.psi[0] * x0 + j.psi[1] * x1
            })
            .collect();
        let expect: f64 = logits.iter().map(|l| 1.0 / (1.0 + (-l).exp())).sum();
        let got = expected_votes(&psi, &theta, &delta, &k, Side::Petitioner).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn putil_factor_values() {
        let psi = vec![JusticeParams::zeros(2); 9];
        let theta = [0.5, 0.5];
        let k = CaseParams::default();
        assert!((putil_factor(&psi, &theta, &theta, &k, Side::Petitioner, 1.0).unwrap() - 5.5).abs() < 1e-15);

        let k = CaseParams::new(-1e4, 0.0, 0.0, 0.0);
        let f = putil_factor(&psi, &[1.0, 0.0], &[0.0, 1.0], &k, Side::Petitioner, 1.0).unwrap();
        assert!((0.0..1e-12).contains(&f));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = random_psi(&mut rng, 9, 4);
        let theta = random_simplex(&mut rng, 4);
        let delta = random_simplex(&mut rng, 4);
        let k = random_kappa(&mut rng);
        let ev = expected_votes(&psi, &theta, &delta, &k, Side::Respondent).unwrap();
        let complement = 1.3 * (1.0 - 0.5 * crate::math::sq_dist(&delta, &theta));
        let got = putil_factor(&psi, &theta, &delta, &k, Side::Respondent, 1.3).unwrap();
        assert!((got - (ev + complement)).abs() < 1e-12);
    }

    #[test]
    fn putil_factor_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10_000 {
            let d = rng.random_range(2..6);
            let n = rng.random_range(1..10);
            let psi = random_psi(&mut rng, n, d);
            let theta = crate::math::sample_dirichlet(d, 0.1, &mut rng);
            let delta = crate::math::sample_dirichlet(d, 0.1, &mut rng);
            let k = random_kappa(&mut rng);
            let side = if rng.random::<bool>() { Side::Petitioner } else { Side::Respondent };
            let f = putil_factor(&psi, &theta, &delta, &k, side, rng.random_range(0.01..10.0)).unwrap();
            assert!(f >= 0.0);
        }
    }

    #[test]
    fn marginal_values_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-5;
        for _ in 0..100 {
            let d = rng.random_range(2..6);
            let psi = random_psi(&mut rng, 9, d);
            let theta = random_simplex(&mut rng, d);
            let delta = random_simplex(&mut rng, d);
            let k = random_kappa(&mut rng);
            let xi = rng.random_range(0.1..3.0);
            let side = if rng.random::<bool>() { Side::Petitioner } else { Side::Respondent };
            let m = marginal_values(&psi, &theta, &delta, &k, side, xi).unwrap();
            for dim in 0..d {
                let mut up = delta.clone();
                let mut dn = delta.clone();
                up[dim] += h;
                dn[dim] -= h;
                let fd = (amicus_objective(&psi, &theta, &up, &k, side, xi).unwrap()
                    - amicus_objective(&psi, &theta, &dn, &k, side, xi).unwrap())
                    / (2.0 * h);
                let rel = (fd - m[dim]).abs() / m[dim].abs().max(1e-3);
                assert!(rel < 1e-4, "dim {dim}: fd {fd} analytic {}", m[dim]);
            }
            // cost gradient on its own
            for dim in 0..d {
                let mut up = delta.clone();
                let mut dn = delta.clone();
                up[dim] += h;
                dn[dim] -= h;
                let fd = (cost(&up, &theta, xi).unwrap() - cost(&dn, &theta, xi).unwrap()) / (2.0 * h);
                let an = xi * (delta[dim] - theta[dim]);
                assert!((fd - an).abs() / an.abs().max(1e-3) < 1e-4);
            }
        }
    }

    #[test]
    fn foc_residual_zero_when_flat() {
        let psi = vec![JusticeParams::zeros(3); 9];
        let theta = [0.2, 0.3, 0.5];
        let r = foc_residual(&theta, &theta, &psi, &CaseParams::new(0.4, 1.0, 2.0, -1.0), Side::Petitioner, 1.0)
            .unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-15));
        assert!(foc_residual(&[1.0, 0.0, 0.0], &theta, &psi, &CaseParams::default(), Side::Petitioner, 1.0).is_err());
    }

    #[test]
    fn foc_residual_small_at_grid_optimum() {
        let psi = vec![
            JusticeParams::new(vec![1.2, -0.4]),
            JusticeParams::new(vec![0.3, 0.9]),
            JusticeParams::new(vec![-0.8, 0.5]),
            JusticeParams::new(vec![0.1, 1.5]),
        ];
        let theta = [0.55, 0.45];
        let k = CaseParams::new(0.1, 0.8, 1.6, -0.9);
        for side in [Side::Petitioner, Side::Respondent] {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 1..1000 {
                let p = i as f64 * 1e-3;
                let v = amicus_objective(&psi, &theta, &[p, 1.0 - p], &k, side, 1.0).unwrap();
                if v > best.0 {
                    best = (v, p);
                }
            }
            let p = best.1;
            assert!(p > 0.0 && p < 1.0);
            let r = foc_residual(&[p, 1.0 - p], &theta, &psi, &k, side, 1.0).unwrap();
            assert!(r.iter().all(|x| x.abs() <= 0.05), "{side}: {r:?} at p={p}");
        }
    }

    #[test]
    fn justice_prior_closed_form_matches_direct_inverse() {
        let (lambda, rho) = (1.3f64, 0.4f64);
        let psi = [0.7, -1.1];
        // Σ = [[λ+ρ, ρ], [ρ, λ+ρ]]
        let (s11, s12) = (lambda + rho, rho);
        let det = s11 * s11 - s12 * s12;
        let inv = [[s11 / det, -s12 / det], [-s12 / det, s11 / det]];
        let quad = psi[0] * (inv[0][0] * psi[0] + inv[0][1] * psi[1])
            + psi[1] * (inv[1][0] * psi[0] + inv[1][1] * psi[1]);
        let direct = -0.5 * (2.0 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad);
        assert!((log_prior_justice(&psi, lambda, rho) - direct).abs() < 1e-12);
    }

    #[test]
    fn justice_prior_diagonal_limit_and_exchangeability() {
        let psi = [0.3, -0.2, 1.4, 0.8];
        let indep: f64 = psi
            .iter()
            .map(|x| -0.5 * ((2.0 * std::f64::consts::PI).ln() + x * x))
            .sum();
        assert!((log_prior_justice(&psi, 1.0, 1e-10) - indep).abs() < 1e-8);
        let permuted = [1.4, 0.3, 0.8, -0.2];
        assert!((log_prior_justice(&psi, 0.7, 0.3) - log_prior_justice(&permuted, 0.7, 0.3)).abs() < 1e-13);
        assert!(log_prior_justices(&[JusticeParams::new(psi.to_vec())], 1.0, 1.0).is_err());
        assert!(log_prior_justices(&[], 0.0, 0.5).is_err());
    }

    #[test]
    fn case_prior_values() {
        let z = CaseParams::default();
        let v = log_prior_case(&z, 4.0, ModelKind::Amici);
        assert!((v + 2.0 * (2.0 * std::f64::consts::PI * 4.0).ln()).abs() < 1e-12);
        let v2 = log_prior_case(&z, 4.0, ModelKind::Issues);
        assert!((v2 + (2.0 * std::f64::consts::PI * 4.0).ln()).abs() < 1e-12);
        assert!(log_prior_case(&z, 8.0, ModelKind::Amici) < v);
        let k = CaseParams::new(1.0, -2.0, 0.5, 3.0);
        let oracle: f64 = [1.0f64, -2.0, 0.5, 3.0]
            .iter()
            .map(|x| -0.5 * (2.0 * std::f64::consts::PI * 2.5).ln() - x * x / 5.0)
            .sum();
        assert!((log_prior_case(&k, 2.5, ModelKind::RandomUtility) - oracle).abs() < 1e-12);
    }

    fn fixture() -> (Corpus, Mixtures, Vec<JusticeParams>, Vec<CaseParams>) {
        let vocab = Vocabulary::new(vec!["x".into(), "y".into()]).unwrap();
        let justices: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let sides = [
            [Side::Petitioner, Side::Petitioner, Side::Respondent],
            [Side::Respondent, Side::Petitioner, Side::Respondent],
            [Side::Petitioner, Side::Respondent, Side::Respondent],
        ];
        let briefs = [
            vec![Side::Petitioner, Side::Respondent],
            vec![],
            vec![Side::Respondent, Side::Respondent],
        ];
        let cases: Vec<Case> = (0..3)
            .map(|i| Case {
                id: format!("c{i}"),
                merits: Document::from_tokens([0, 1]),
                briefs: briefs[i]
                    .iter()
                    .map(|&side| crate::corpus::AmicusBrief {
                        doc: Document::from_tokens([1]),
                        side,
                    })
                    .collect(),
                votes: (0..3).map(|j| (j, sides[i][j])).collect(),
            })
            .collect();
        let corpus = Corpus::new(vocab, justices, cases).unwrap();
        let bm = |side, m: [f64; 2]| BriefMixture { side, mixture: m.to_vec() };
        let mixtures = Mixtures {
            num_topics: 2,
            cases: vec![
                CaseMixtures {
                    case_id: "c0".into(),
                    theta: vec![0.7, 0.3],
                    briefs: vec![bm(Side::Petitioner, [0.9, 0.1]), bm(Side::Respondent, [0.2, 0.8])],
                },
                CaseMixtures {
                    case_id: "c1".into(),
                    theta: vec![0.4, 0.6],
                    briefs: vec![],
                },
                CaseMixtures {
                    case_id: "c2".into(),
                    theta: vec![0.5, 0.5],
                    briefs: vec![bm(Side::Respondent, [0.1, 0.9]), bm(Side::Respondent, [0.3, 0.7])],
                },
            ],
        };
        let psi = vec![
            JusticeParams::new(vec![0.8, -0.3]),
            JusticeParams::new(vec![-1.1, 0.4]),
            JusticeParams::new(vec![0.2, 1.7]),
        ];
        let kappas = vec![
            CaseParams::new(0.5, 1.2, -0.4, 0.9),
            CaseParams::new(-0.3, 2.0, 1.0, 1.0),
            CaseParams::new(0.1, -0.7, 0.6, -1.5),
        ];
        (corpus, mixtures, psi, kappas)
    }

    /// Naive re-implementation with no shared helpers.
    #[allow(clippy::needless_range_loop)]
    fn oracle_ll(eta: f64, xi: f64, utility_terms: bool) -> f64 {
        let thetas = [[0.7, 0.3], [0.4, 0.6], [0.5, 0.5]];
        let dps: [Option<[f64; 2]>; 3] = [Some([0.9, 0.1]), None, None];
        let drs: [Option<[f64; 2]>; 3] = [Some([0.2, 0.8]), None, Some([0.2, 0.8])];
        let briefs: [&[(bool, [f64; 2])]; 3] = [
            &[(true, [0.9, 0.1]), (false, [0.2, 0.8])],
            &[],
            &[(false, [0.1, 0.9]), (false, [0.3, 0.7])],
        ];
        let psi = [[0.8, -0.3], [-1.1, 0.4], [0.2, 1.7]];
        let k = [[0.5, 1.2, -0.4, 0.9], [-0.3, 2.0, 1.0, 1.0], [0.1, -0.7, 0.6, -1.5]];
        let pet = [[true, true, false], [false, true, false], [true, false, false]];
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut ll = 0.0;
        for i in 0..3 {
            let mut x = [k[i][1] * thetas[i][0], k[i][1] * thetas[i][1]];
            if let Some(dp) = dps[i] {
                x[0] += k[i][2] * dp[0];
                x[1] += k[i][2] * dp[1];
            }
            if let Some(dr) = drs[i] {
                x[0] += k[i][3] * dr[0];
                x[1] += k[i][3] * dr[1];
            }
            for j in 0..3 {
                let l = k[i][0] + psi[j][0] * x[0] + psi[j][1] * x[1];
                ll += if pet[i][j] { sig(l).ln() } else { (1.0 - sig(l)).ln() };
            }
            if utility_terms {
                for (is_pet, delta) in briefs[i] {
                    let c = if *is_pet { k[i][2] } else { k[i][3] };
                    let mut ev = 0.0;
                    for j in 0..3 {
                        let l = k[i][0]
                            + psi[j][0] * (k[i][1] * thetas[i][0] + c * delta[0])
                            + psi[j][1] * (k[i][1] * thetas[i][1] + c * delta[1]);
                        ev += if *is_pet { sig(l) } else { 1.0 - sig(l) };
                    }
                    let d2 = (delta[0] - thetas[i][0]).powi(2) + (delta[1] - thetas[i][1]).powi(2);
                    ll += eta * (ev + xi * (1.0 - 0.5 * d2)).ln();
                }
            }
        }
        ll
    }

    #[test]
    fn log_likelihood_matches_independent_oracle() {
        let (corpus, mix, psi, kappas) = fixture();
        let hyper = Hyperparams { eta: 0.7, xi: 1.3, ..Hyperparams::default() };
        let amici = log_likelihood(&corpus, &mix, &psi, &kappas, &hyper, ModelKind::Amici).unwrap();
        assert!((amici - oracle_ll(0.7, 1.3, false)).abs() < 1e-10);
        let ru = log_likelihood(&corpus, &mix, &psi, &kappas, &hyper, ModelKind::RandomUtility).unwrap();
        assert!((ru - oracle_ll(0.7, 1.3, true)).abs() < 1e-10);
    }

    #[test]
    fn eta_zero_annihilates_utility_terms() {
        let (corpus, mix, psi, kappas) = fixture();
        let hyper = Hyperparams { eta: 0.0, ..Hyperparams::default() };
        let amici = log_likelihood(&corpus, &mix, &psi, &kappas, &hyper, ModelKind::Amici).unwrap();
        let ru = log_likelihood(&corpus, &mix, &psi, &kappas, &hyper, ModelKind::RandomUtility).unwrap();
        assert_eq!(amici, ru);
    }

    #[test]
    fn single_vote_at_zero_logit() {
        let vocab = Vocabulary::new(vec!["x".into()]).unwrap();
        let case = Case {
            id: "c".into(),
            merits: Document::from_tokens([0]),
            briefs: vec![],
            votes: BTreeMap::from([(0, Side::Respondent)]),
        };
        let corpus = Corpus::new(vocab, vec!["A".into(), "B".into()], vec![case]).unwrap();
        let mix = Mixtures {
            num_topics: 1,
            cases: vec![CaseMixtures { case_id: "c".into(), theta: vec![1.0], briefs: vec![] }],
        };
        let psi = vec![JusticeParams::zeros(1); 2];
        let ll = log_likelihood(&corpus, &mix, &psi, &[CaseParams::default()], &Hyperparams::default(), ModelKind::Issues)
            .unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn flipping_a_vote_against_the_model_lowers_likelihood() {
        let (mut corpus, mix, psi, kappas) = fixture();
        let hyper = Hyperparams::default();
        let base = log_likelihood(&corpus, &mix, &psi, &kappas, &hyper, ModelKind::Amici).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let m = &mix.cases[i];
                let l = vote_logit(
                    &psi[j].psi,
                    &m.theta,
                    m.side_mean(Side::Petitioner).as_deref(),
                    m.side_mean(Side::Respondent).as_deref(),
                    &kappas[i],
                    ModelKind::Amici,
                )
                .unwrap();
                let preferred = if l >= 0.0 { Side::Petitioner } else { Side::Respondent };
                if corpus.cases[i].votes[&j] == preferred {
                    corpus.cases[i].votes.insert(j, preferred.flip());
                    let flipped = log_likelihood(&corpus, &mix, &psi, &kappas, &hyper, ModelKind::Amici).unwrap();
                    assert!(flipped < base);
                    corpus.cases[i].votes.insert(j, preferred);
                }
            }
        }
    }

    #[test]
    fn log_likelihood_rejects_bad_inputs() {
        let (corpus, mix, psi, mut kappas) = fixture();
        let hyper = Hyperparams::default();
        let short = Mixtures { num_topics: 2, cases: mix.cases[..2].to_vec() };
        assert!(log_likelihood(&corpus, &short, &psi, &kappas, &hyper, ModelKind::Amici).is_err());
        kappas[0].a = f64::NAN;
        assert!(log_likelihood(&corpus, &mix, &psi, &kappas, &hyper, ModelKind::Amici).is_err());
    }
}
