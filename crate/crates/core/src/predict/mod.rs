//! Held-out vote prediction, the pairwise partition metric, baselines, and
//! the cross-validation harness.

mod cv;
mod logreg;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Case, JusticeId, Side};
use crate::error::{Error, Result};
use crate::ipmodel::{log_vote_prob, putil_factor, vote_logit, CaseParams, JusticeParams, ModelKind, UTILITY_FLOOR};
use crate::math::{log_sum_exp, sigmoid, standard_normal};
use crate::sampler::FitResult;
use crate::topics::CaseMixtures;

pub use cv::{
    cross_validate, cross_validate_detailed, fold_assignment, CvConfig, CvOutcome, CvReport, FoldArtifacts, FoldRow, ModelSummary,
    LOGISTIC, UNANIMOUS,
};
pub use logreg::{case_features, fit_l1_logistic, l1_logreg, JusticeClassifiers, LogRegConfig, LogisticModel, L1_GRID};

/// Largest bench for which vote configurations are enumerated exactly.
pub const MAX_ENUMERATED_JUSTICES: usize = 16;

pub const DEFAULT_KAPPA_SAMPLES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Probability of a petitioner vote per justice.
    pub marginals: BTreeMap<JusticeId, f64>,
    /// Jointly most likely vote configuration.
    pub partition: BTreeMap<JusticeId, Side>,
    pub num_kappa_samples: usize,
    /// Set when every sample weight vanished and uniform weights were used.
    pub uniform_fallback: bool,
}

/// How κ samples are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleWeights {
    /// Product of brief utility factors for `RandomUtility`, uniform otherwise.
    ByKind,
    Uniform,
}

/// Draws `samples` case-parameter vectors from the fit's prior.
pub fn sample_case_params<R: Rng + ?Sized>(fit: &FitResult, samples: usize, rng: &mut R) -> Vec<CaseParams> {
    let sd = fit.hyper.sigma_kappa.sqrt();
    let n = fit.kind.num_case_params();
    (0..samples)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| sd * standard_normal(rng)).collect();
            CaseParams::from_active(fit.kind, &v)
        })
        .collect()
}

/// Most likely vote configuration for a case, integrating over κ by Monte
/// Carlo from its prior.
pub fn predict_votes<R: Rng + ?Sized>(
    fit: &FitResult,
    mix: &CaseMixtures,
    justices: &[JusticeId],
    samples: usize,
    rng: &mut R,
) -> Result<Prediction> {
    if samples < 1 {
        return Err(Error::invalid("at least one kappa sample is required"));
    }
    let kappas = sample_case_params(fit, samples, rng);
    predict_with_kappas(fit, mix, justices, &kappas, SampleWeights::ByKind)
}

/// Prediction from explicit κ samples.
pub fn predict_with_kappas(
    fit: &FitResult,
    mix: &CaseMixtures,
    justices: &[JusticeId],
    kappas: &[CaseParams],
    weights: SampleWeights,
) -> Result<Prediction> {
    if kappas.is_empty() {
        return Err(Error::invalid("at least one kappa sample is required"));
    }
    let n = justices.len();
    if n == 0 || n > MAX_ENUMERATED_JUSTICES {
        return Err(Error::invalid(format!("cannot enumerate votes for {n} justices")));
    }
    let psi: Vec<&JusticeParams> = justices
        .iter()
        .map(|&j| fit.psi_hat.get(j).ok_or_else(|| Error::invalid(format!("justice {j} not in fit"))))
        .collect::<Result<_>>()?;
    let dp = mix.side_mean(Side::Petitioner);
    let dr = mix.side_mean(Side::Respondent);

    let use_utility = weights == SampleWeights::ByKind && fit.kind == ModelKind::RandomUtility;
    let bench: Vec<JusticeParams> = psi.iter().map(|p| (*p).clone()).collect();
    let mut log_w = Vec::with_capacity(kappas.len());
    // (log p(pet), log p(resp)) per sample and justice
    let mut lp = Vec::with_capacity(kappas.len() * n);
    let mut probs = Vec::with_capacity(kappas.len() * n);
    for k in kappas {
        let mut w = 0.0;
        if use_utility {
            for b in &mix.briefs {
                let f = putil_factor(&bench, &mix.theta, &b.mixture, k, b.side, fit.hyper.xi)?;
                w += fit.hyper.eta * f.max(UTILITY_FLOOR).ln();
            }
        }
        log_w.push(w);
        for p in &psi {
            let logit = vote_logit(&p.psi, &mix.theta, dp.as_deref(), dr.as_deref(), k, fit.kind)?;
            lp.push((log_vote_prob(logit, Side::Petitioner), log_vote_prob(logit, Side::Respondent)));
            probs.push(sigmoid(logit));
        }
    }

    let mut uniform_fallback = false;
    let max_w = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max_w.is_finite() {
        log::warn!("all kappa sample weights vanished; using uniform weights");
        uniform_fallback = true;
        log_w.iter_mut().for_each(|w| *w = 0.0);
    } else {
        log_w.iter_mut().for_each(|w| *w -= max_w);
    }
    let w: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
    let w_total: f64 = w.iter().sum();

    let marginals: BTreeMap<JusticeId, f64> = justices
        .iter()
        .enumerate()
        .map(|(jj, &j)| {
            let m: f64 = w.iter().enumerate().map(|(s, ws)| ws * probs[s * n + jj]).sum::<f64>() / w_total;
            (j, m.clamp(0.0, 1.0))
        })
        .collect();

    // bit jj of a configuration set means justice jj votes respondent; the
    // lowest configuration index wins ties, so all-petitioner is preferred.
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut terms = vec![0.0; kappas.len()];
    for config in 0..(1usize << n) {
        for (s, t) in terms.iter_mut().enumerate() {
            let row = &lp[s * n..(s + 1) * n];
            let mut acc = log_w[s];
            for (jj, (pp, pr)) in row.iter().enumerate() {
                acc += if config >> jj & 1 == 1 { pr } else { pp };
            }
            *t = acc;
        }
        let score = log_sum_exp(&terms);
        if score > best.0 {
            best = (score, config);
        }
    }
    let partition = justices
        .iter()
        .enumerate()
        .map(|(jj, &j)| (j, if best.1 >> jj & 1 == 1 { Side::Respondent } else { Side::Petitioner }))
        .collect();
    Ok(Prediction {
        marginals,
        partition,
        num_kappa_samples: kappas.len(),
        uniform_fallback,
    })
}

/// Fraction of justice pairs whose same-side relation agrees between the
/// predicted and actual votes.
pub fn pairwise_partition_accuracy(
    pred: &BTreeMap<JusticeId, Side>,
    actual: &BTreeMap<JusticeId, Side>,
) -> Result<f64> {
    let pk: BTreeSet<_> = pred.keys().collect();
    let ak: BTreeSet<_> = actual.keys().collect();
    if pk != ak {
        return Err(Error::invalid("predicted and actual votes cover different justices"));
    }
    if pred.len() < 2 {
        return Err(Error::invalid("pairwise accuracy needs at least two justices"));
    }
    let p: Vec<Side> = pred.values().copied().collect();
    let a: Vec<Side> = actual.values().copied().collect();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            total += 1;
            if (p[i] == p[j]) == (a[i] == a[j]) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / total as f64)
}

/// Justices to predict for a case: its recorded voters, else the roster.
pub fn bench_for(case: &Case, roster_len: usize) -> Vec<JusticeId> {
    crate::ipmodel::presiding(case, roster_len)
}

/// Everyone votes for the petitioner.
pub fn unanimous_baseline(justices: &[JusticeId]) -> Prediction {
    Prediction {
        marginals: justices.iter().map(|&j| (j, 1.0)).collect(),
        partition: justices.iter().map(|&j| (j, Side::Petitioner)).collect(),
        num_kappa_samples: 0,
        uniform_fallback: false,
    }
}
