//! Stage-two estimation: Metropolis-within-Gibbs over case parameters,
//! justice ideal points, and the shared prior covariance ρ.
//!
//! Each block runs a short random-walk Metropolis chain and the block is set
//! to the mean of its thinned post-burn-in states. Case blocks are
//! conditionally independent given the ideal points and run in parallel,
//! each on its own RNG stream, so results do not depend on thread count.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Side};
use crate::error::{Error, Result};
use crate::ipmodel::{log_prior_case, log_prior_justice, CaseParams, Hyperparams, JusticeParams, ModelKind, UTILITY_FLOOR};
use crate::math::{dot, log_sigmoid, sigmoid, sq_dist, standard_normal};
use crate::rng;
use crate::topics::{read_json, write_json, Mixtures};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub gibbs_iters: usize,
    pub mh_steps: usize,
    pub mh_burn_in: usize,
    pub mh_thin: usize,
    pub target_accept_low: f64,
    pub target_accept_high: f64,
    pub init_proposal_scale: f64,
    pub adapt_factor: f64,
    /// Standard deviation of the random initial ideal points and case parameters.
    pub init_scale: f64,
    /// Taken from the run seed, never from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            gibbs_iters: 2000,
            mh_steps: 500,
            mh_burn_in: 250,
            mh_thin: 10,
            target_accept_low: 0.15,
            target_accept_high: 0.45,
            init_proposal_scale: 0.3,
            adapt_factor: 1.1,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gibbs_iters == 0 {
            return Err(Error::invalid("gibbs_iters must be positive"));
        }
        if self.mh_burn_in >= self.mh_steps {
            return Err(Error::invalid("MH burn-in must be shorter than the MH chain"));
        }
        if self.mh_thin == 0 {
            return Err(Error::invalid("mh_thin must be positive"));
        }
        if !(0.0 < self.target_accept_low
            && self.target_accept_low < self.target_accept_high
            && self.target_accept_high < 1.0)
        {
            return Err(Error::invalid("acceptance targets must satisfy 0 < low < high < 1"));
        }
        if !(self.init_proposal_scale > 0.0 && self.adapt_factor > 0.0 && self.init_scale >= 0.0) {
            return Err(Error::invalid("proposal and initialization scales must be positive"));
        }
        Ok(())
    }

    /// Iteration at which proposal adaptation stops.
    pub fn freeze_at(&self) -> usize {
        self.gibbs_iters / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhOutcome {
    pub estimate: Vec<f64>,
    pub accept_rate: f64,
}

/// Random-walk Metropolis with independent Gaussian proposals per dimension.
///
/// Returns the mean of every `thin`-th state after `burn_in` together with
/// the acceptance rate over all `steps`.
pub fn mh_block<F, R>(
    current: &[f64],
    log_target: F,
    scales: &[f64],
    steps: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<MhOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    run_chain(current, log_target, scales, steps, burn_in, thin, rng, None)
}

/// Like [`mh_block`], also returning every kept state.
pub fn mh_block_states<F, R>(
    current: &[f64],
    log_target: F,
    scales: &[f64],
    steps: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<(MhOutcome, Vec<Vec<f64>>)>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut states = Vec::new();
    let out = run_chain(current, log_target, scales, steps, burn_in, thin, rng, Some(&mut states))?;
    Ok((out, states))
}

#[allow(clippy::too_many_arguments)]
fn run_chain<F, R>(
    current: &[f64],
    mut log_target: F,
    scales: &[f64],
    steps: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
    mut states: Option<&mut Vec<Vec<f64>>>,
) -> Result<MhOutcome>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if burn_in >= steps || thin == 0 {
        return Err(Error::invalid("MH chain needs steps > burn_in and thin > 0"));
    }
    if scales.len() != current.len() {
        return Err(Error::DimensionMismatch { expected: current.len(), got: scales.len() });
    }
    let mut x = current.to_vec();
    let mut fx = log_target(&x);
    if !fx.is_finite() {
        return Err(Error::Numeric(format!("log target is {fx} at the starting state")));
    }
    let mut proposal = x.clone();
    let mut sum = vec![0.0; x.len()];
    let mut kept = 0usize;
    let mut accepted = 0usize;
    for step in 0..steps {
        for ((p, xi), s) in proposal.iter_mut().zip(&x).zip(scales) {
            *p = xi + s * standard_normal(rng);
        }
        let fp = log_target(&proposal);
        if fp.is_nan() {
            return Err(Error::Numeric(format!("log target is NaN at {proposal:?}")));
        }
        let u: f64 = rng.random();
        if fp > f64::NEG_INFINITY && u.ln() < fp - fx {
            x.copy_from_slice(&proposal);
            fx = fp;
            accepted += 1;
        }
        if step >= burn_in && (step - burn_in).is_multiple_of(thin) {
            for (s, xi) in sum.iter_mut().zip(&x) {
                *s += xi;
            }
            kept += 1;
            if let Some(st) = states.as_deref_mut() {
                st.push(x.clone());
            }
        }
    }
    Ok(MhOutcome {
        estimate: sum.iter().map(|s| s / kept as f64).collect(),
        accept_rate: accepted as f64 / steps as f64,
    })
}

/// Widens the proposal when acceptance is too high, narrows it when too low.
pub fn adapt_scale(scale: f64, accept_rate: f64, cfg: &SamplerConfig) -> f64 {
    if accept_rate > cfg.target_accept_high {
        scale * cfg.adapt_factor
    } else if accept_rate < cfg.target_accept_low {
        scale / cfg.adapt_factor
    } else {
        scale
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Log posterior after each Gibbs iteration.
    pub log_posterior: Vec<f64>,
    /// Mean acceptance of the case blocks, the justice blocks, and ρ per iteration.
    pub accept_trace: Vec<[f64; 3]>,
    /// Per-block acceptance averaged over the iterations after adaptation froze.
    pub kappa_accept: Vec<f64>,
    pub psi_accept: Vec<f64>,
    pub rho_accept: f64,
    pub best_iteration: usize,
    pub best_log_posterior: f64,
}

impl Diagnostics {
    pub fn all_block_rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.kappa_accept
            .iter()
            .chain(&self.psi_accept)
            .copied()
            .chain(std::iter::once(self.rho_accept))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: ModelKind,
    pub hyper: Hyperparams,
    pub num_topics: usize,
    pub justices: Vec<String>,
    pub psi_hat: Vec<JusticeParams>,
    pub case_ids: Vec<String>,
    pub kappa_hat: Vec<CaseParams>,
    pub rho_hat: f64,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub fn kappa_for(&self, case_id: &str) -> Option<&CaseParams> {
        self.case_ids.iter().position(|c| c == case_id).map(|i| &self.kappa_hat[i])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

/// A brief's contribution to a case's expected-utility terms.
struct BriefTerm {
    sign: f64,
    side: Side,
    mixture: Vec<f64>,
    /// ξ(1 − ½‖Δ − θ‖²), constant in every sampled parameter.
    cost_term: f64,
}

struct CaseData {
    theta: Vec<f64>,
    delta_p: Option<Vec<f64>>,
    delta_r: Option<Vec<f64>>,
    /// (justice, +1 for petitioner / −1 for respondent)
    votes: Vec<(usize, f64)>,
    presiding: Vec<usize>,
    briefs: Vec<BriefTerm>,
}

impl CaseData {
    /// Effective case position b·θ + c_p·Δp + c_r·Δr, in ideal-point space.
    fn position(&self, kappa: &CaseParams, kind: ModelKind) -> Vec<f64> {
        if kind == ModelKind::Unidimensional {
            return vec![kappa.b];
        }
        let mut x: Vec<f64> = self.theta.iter().map(|t| kappa.b * t).collect();
        if kind.has_amici() {
            for (delta, c) in [(&self.delta_p, kappa.c_p), (&self.delta_r, kappa.c_r)] {
                if let Some(d) = delta {
                    for (xi, di) in x.iter_mut().zip(d) {
                        *xi += c * di;
                    }
                }
            }
        }
        x
    }

    fn brief_position(&self, kappa: &CaseParams, brief: &BriefTerm) -> Vec<f64> {
        let c = kappa.c(brief.side);
        self.theta
            .iter()
            .zip(&brief.mixture)
            .map(|(t, d)| kappa.b * t + c * d)
            .collect()
    }
}

struct Model<'a> {
    kind: ModelKind,
    hyper: &'a Hyperparams,
    cases: Vec<CaseData>,
    /// Cases each justice votes in.
    justice_cases: Vec<Vec<usize>>,
    /// Cases each justice presides over (for utility terms).
    justice_presides: Vec<Vec<usize>>,
    dim: usize,
}

fn utility_log(eta: f64, factor: f64) -> f64 {
    eta * factor.max(UTILITY_FLOOR).ln()
}

impl<'a> Model<'a> {
    fn new(corpus: &Corpus, mixtures: &Mixtures, kind: ModelKind, hyper: &'a Hyperparams) -> Result<Self> {
        let aligned = mixtures.aligned(corpus)?;
        let n_j = corpus.justices.len();
        let mut justice_cases = vec![Vec::new(); n_j];
        let mut justice_presides = vec![Vec::new(); n_j];
        let mut cases = Vec::with_capacity(corpus.cases.len());
        for (i, (case, mix)) in corpus.cases.iter().zip(aligned).enumerate() {
            if mix.theta.len() != mixtures.num_topics {
                return Err(Error::DimensionMismatch { expected: mixtures.num_topics, got: mix.theta.len() });
            }
            let votes: Vec<(usize, f64)> = case
                .votes
                .iter()
                .map(|(&j, &s)| (j, if s == Side::Petitioner { 1.0 } else { -1.0 }))
                .collect();
            for &(j, _) in &votes {
                justice_cases[j].push(i);
            }
            let presiding = crate::ipmodel::presiding(case, n_j);
            let briefs = if kind == ModelKind::RandomUtility {
                for &j in &presiding {
                    justice_presides[j].push(i);
                }
                mix.briefs
                    .iter()
                    .map(|b| BriefTerm {
                        sign: if b.side == Side::Petitioner { 1.0 } else { -1.0 },
                        side: b.side,
                        mixture: b.mixture.clone(),
                        cost_term: hyper.xi * (1.0 - 0.5 * sq_dist(&b.mixture, &mix.theta)),
                    })
                    .collect()
            } else {
                Vec::new()
            };
            cases.push(CaseData {
                theta: mix.theta.clone(),
                delta_p: mix.side_mean(Side::Petitioner),
                delta_r: mix.side_mean(Side::Respondent),
                votes,
                presiding,
                briefs,
            });
        }
        Ok(Model {
            kind,
            hyper,
            cases,
            justice_cases,
            justice_presides,
            dim: kind.psi_dim(mixtures.num_topics),
        })
    }

    fn theta_dot(&self, psi: &[f64], case: &CaseData) -> f64 {
        if self.kind == ModelKind::Unidimensional {
            psi[0]
        } else {
            dot(psi, &case.theta)
        }
    }

    /// Log target for case `i`'s parameters given fixed ideal points.
    fn case_target(&self, i: usize, psi: &[JusticeParams]) -> impl Fn(&[f64]) -> f64 + '_ {
        let case = &self.cases[i];
        let amici = self.kind.has_amici();
        let proj = |d: &Option<Vec<f64>>, p: &[f64]| d.as_ref().map_or(0.0, |d| dot(p, d));
        // (sign, ψ·θ, ψ·Δp, ψ·Δr) per vote
        let vote_terms: Vec<[f64; 4]> = case
            .votes
            .iter()
            .map(|&(j, sign)| {
                let p = &psi[j].psi;
                let (pp, pr) = if amici { (proj(&case.delta_p, p), proj(&case.delta_r, p)) } else { (0.0, 0.0) };
                [sign, self.theta_dot(p, case), pp, pr]
            })
            .collect();
        // per brief: (ψ·θ, ψ·Δ_k) for each presiding justice
        let brief_terms: Vec<Vec<(f64, f64)>> = case
            .briefs
            .iter()
            .map(|b| {
                case.presiding
                    .iter()
                    .map(|&j| (dot(&psi[j].psi, &case.theta), dot(&psi[j].psi, &b.mixture)))
                    .collect()
            })
            .collect();
        let kind = self.kind;
        let hyper = self.hyper;
        move |v: &[f64]| {
            let k = CaseParams::from_active(kind, v);
            let mut lp = log_prior_case(&k, hyper.sigma_kappa, kind);
            for t in &vote_terms {
                lp += log_sigmoid(t[0] * (k.a + k.b * t[1] + k.c_p * t[2] + k.c_r * t[3]));
            }
            for (b, terms) in case.briefs.iter().zip(&brief_terms) {
                let c = k.c(b.side);
                let ev: f64 = terms.iter().map(|(pt, pk)| sigmoid(b.sign * (k.a + k.b * pt + c * pk))).sum();
                lp += utility_log(hyper.eta, ev + b.cost_term);
            }
            lp
        }
    }

    /// Log target for justice `j`'s ideal point given everything else.
    fn justice_target(
        &self,
        j: usize,
        psi: &[JusticeParams],
        kappas: &[CaseParams],
        rho: f64,
    ) -> impl Fn(&[f64]) -> f64 + '_ {
        // (sign, a, position) per vote
        let vote_terms: Vec<(f64, f64, Vec<f64>)> = self.justice_cases[j]
            .iter()
            .map(|&i| {
                let case = &self.cases[i];
                let sign = case.votes.iter().find(|(jj, _)| *jj == j).map(|v| v.1).unwrap();
                (sign, kappas[i].a, case.position(&kappas[i], self.kind))
            })
            .collect();
        // (sign, a, brief position, others' σ sum + cost term) per brief
        let mut brief_terms: Vec<(f64, f64, Vec<f64>, f64)> = Vec::new();
        for &i in &self.justice_presides[j] {
            let case = &self.cases[i];
            for b in &case.briefs {
                let y = case.brief_position(&kappas[i], b);
                let others: f64 = case
                    .presiding
                    .iter()
                    .filter(|&&jj| jj != j)
                    .map(|&jj| sigmoid(b.sign * (kappas[i].a + dot(&psi[jj].psi, &y))))
                    .sum();
                brief_terms.push((b.sign, kappas[i].a, y, others + b.cost_term));
            }
        }
        let lambda = self.hyper.lambda;
        let eta = self.hyper.eta;
        move |p: &[f64]| {
            let mut lp = log_prior_justice(p, lambda, rho);
            for (sign, a, x) in &vote_terms {
                lp += log_sigmoid(sign * (a + dot(p, x)));
            }
            for (sign, a, y, rest) in &brief_terms {
                lp += utility_log(eta, rest + sigmoid(sign * (a + dot(p, y))));
            }
            lp
        }
    }

    fn log_posterior(&self, psi: &[JusticeParams], kappas: &[CaseParams], rho: f64) -> f64 {
        let mut lp: f64 = psi.iter().map(|p| log_prior_justice(&p.psi, self.hyper.lambda, rho)).sum();
        for (case, k) in self.cases.iter().zip(kappas) {
            lp += log_prior_case(k, self.hyper.sigma_kappa, self.kind);
            let x = case.position(k, self.kind);
            for &(j, sign) in &case.votes {
                lp += log_sigmoid(sign * (k.a + dot(&psi[j].psi, &x)));
            }
            for b in &case.briefs {
                let y = case.brief_position(k, b);
                let ev: f64 = case
                    .presiding
                    .iter()
                    .map(|&j| sigmoid(b.sign * (k.a + dot(&psi[j].psi, &y))))
                    .sum();
                lp += utility_log(self.hyper.eta, ev + b.cost_term);
            }
        }
        lp
    }
}

/// Estimates ideal points, case parameters, and ρ with mixtures held fixed.
pub fn fit(
    corpus: &Corpus,
    mixtures: &Mixtures,
    kind: ModelKind,
    hyper: &Hyperparams,
    cfg: &SamplerConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    hyper.validate()?;
    if corpus.num_votes() == 0 {
        return Err(Error::invalid("corpus has no votes to fit"));
    }
    let model = Model::new(corpus, mixtures, kind, hyper)?;
    let n_cases = corpus.cases.len();
    let n_j = corpus.justices.len();
    let dim = model.dim;
    let n_params = kind.num_case_params();

    let mut init = rng::derived(cfg.seed, u64::MAX, 0);
    let mut psi: Vec<JusticeParams> = (0..n_j)
        .map(|_| JusticeParams::new((0..dim).map(|_| cfg.init_scale * standard_normal(&mut init)).collect()))
        .collect();
    let mut kappas: Vec<CaseParams> = (0..n_cases)
        .map(|_| {
            let v: Vec<f64> = (0..n_params).map(|_| cfg.init_scale * standard_normal(&mut init)).collect();
            CaseParams::from_active(kind, &v)
        })
        .collect();
    let mut rho = hyper.rho;

    let lp0 = model.log_posterior(&psi, &kappas, rho);
    if !lp0.is_finite() {
        return Err(Error::Numeric(format!("log posterior is {lp0} at initialization")));
    }

    let mut kappa_scales = vec![cfg.init_proposal_scale; n_cases];
    let mut psi_scales = vec![cfg.init_proposal_scale; n_j];
    let mut rho_scale = cfg.init_proposal_scale.min(0.5);
    let mut kappa_acc_sum = vec![0.0; n_cases];
    let mut psi_acc_sum = vec![0.0; n_j];
    let mut rho_acc_sum = 0.0;
    let mut frozen_iters = 0usize;
    let freeze = cfg.freeze_at();

    let mut diag = Diagnostics {
        best_log_posterior: f64::NEG_INFINITY,
        ..Diagnostics::default()
    };

    for it in 0..cfg.gibbs_iters {
        let adapt = it < freeze;

        // case blocks
        let updates: Vec<Result<MhOutcome>> = (0..n_cases)
            .into_par_iter()
            .map(|i| {
                let target = model.case_target(i, &psi);
                let mut r = rng::derived(cfg.seed, it as u64, i as u64);
                let scales = vec![kappa_scales[i]; n_params];
                mh_block(&kappas[i].active(kind), target, &scales, cfg.mh_steps, cfg.mh_burn_in, cfg.mh_thin, &mut r)
            })
            .collect();
        let mut kappa_rate = 0.0;
        for (i, u) in updates.into_iter().enumerate() {
            let u = u?;
            kappas[i] = CaseParams::from_active(kind, &u.estimate);
            kappa_rate += u.accept_rate;
            if adapt {
                kappa_scales[i] = adapt_scale(kappa_scales[i], u.accept_rate, cfg);
            } else {
                kappa_acc_sum[i] += u.accept_rate;
            }
        }

        // justice blocks, sequential since utility terms couple justices
        let mut psi_rate = 0.0;
        for j in 0..n_j {
            let target = model.justice_target(j, &psi, &kappas, rho);
            let mut r = rng::derived(cfg.seed, it as u64, (n_cases + j) as u64);
            let scales = vec![psi_scales[j]; dim];
            let u = mh_block(&psi[j].psi, target, &scales, cfg.mh_steps, cfg.mh_burn_in, cfg.mh_thin, &mut r)?;
            psi[j] = JusticeParams::new(u.estimate);
            psi_rate += u.accept_rate;
            if adapt {
                psi_scales[j] = adapt_scale(psi_scales[j], u.accept_rate, cfg);
            } else {
                psi_acc_sum[j] += u.accept_rate;
            }
        }

        // ρ, whose likelihood involves only the ideal-point prior
        let lambda = hyper.lambda;
        let psi_ref = &psi;
        let rho_target = |v: &[f64]| {
            let r = v[0];
            if !(r > 0.0 && r < 1.0) {
                return f64::NEG_INFINITY;
            }
            psi_ref.iter().map(|p| log_prior_justice(&p.psi, lambda, r)).sum()
        };
        let mut r = rng::derived(cfg.seed, it as u64, (n_cases + n_j) as u64);
        let u = mh_block(&[rho], rho_target, &[rho_scale], cfg.mh_steps, cfg.mh_burn_in, cfg.mh_thin, &mut r)?;
        rho = u.estimate[0];
        if adapt {
            rho_scale = adapt_scale(rho_scale, u.accept_rate, cfg);
        } else {
            rho_acc_sum += u.accept_rate;
            frozen_iters += 1;
        }

        let lp = model.log_posterior(&psi, &kappas, rho);
        if !lp.is_finite() {
            return Err(Error::Numeric(format!("log posterior became {lp} at iteration {it}")));
        }
        if lp > diag.best_log_posterior {
            diag.best_log_posterior = lp;
            diag.best_iteration = it;
        }
        diag.log_posterior.push(lp);
        diag.accept_trace.push([
            kappa_rate / n_cases.max(1) as f64,
            psi_rate / n_j as f64,
            u.accept_rate,
        ]);
        log::debug!("gibbs iteration {it}: log posterior {lp:.3}, rho {rho:.3}");
    }

    let denom = frozen_iters.max(1) as f64;
    diag.kappa_accept = kappa_acc_sum.iter().map(|s| s / denom).collect();
    diag.psi_accept = psi_acc_sum.iter().map(|s| s / denom).collect();
    diag.rho_accept = rho_acc_sum / denom;

    Ok(FitResult {
        kind,
        hyper: *hyper,
        num_topics: mixtures.num_topics,
        justices: corpus.justices.clone(),
        psi_hat: psi,
        case_ids: corpus.cases.iter().map(|c| c.id.clone()).collect(),
        kappa_hat: kappas,
        rho_hat: rho,
        diagnostics: diag,
    })
}
