//! What-if analyses on a fitted model: ideal-point decomposition, brief
//! removal, the optimal-brief grid, and per-justice amicus influence.

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, JusticeId, Side};
use crate::error::{Error, Result};
use crate::ipmodel::{cost, expected_votes, log_vote_prob, vote_logit, CaseParams};
use crate::math::normalize_in_place;
use crate::predict::{predict_votes, predict_with_kappas, Prediction, SampleWeights};
use crate::sampler::FitResult;
use crate::topics::{CaseMixtures, Mixtures};

/// Vote logits of one justice under successive zeroings of the amicus
/// polarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub justice: JusticeId,
    pub name: String,
    pub issues_only: f64,
    pub with_pet_amici: f64,
    pub with_resp_amici: f64,
    pub full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpDecomposition {
    pub case_id: String,
    pub rows: Vec<DecompositionRow>,
}

impl IpDecomposition {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_rows(path.as_ref(), &self.rows)
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fitted_kappa<'a>(fit: &'a FitResult, case_id: &str) -> Result<&'a CaseParams> {
    fit.kappa_for(case_id)
        .ok_or_else(|| Error::invalid(format!("case {case_id:?} has no fitted parameters")))
}

/// Logits for every justice with both amicus polarities zeroed, each one
/// zeroed in turn, and neither.
pub fn decompose_ip(fit: &FitResult, mix: &CaseMixtures) -> Result<IpDecomposition> {
    if !fit.kind.has_amici() {
        return Err(Error::invalid(format!("{} fits have no amicus parameters", fit.kind)));
    }
    let k = fitted_kappa(fit, &mix.case_id)?;
    let dp = mix.side_mean(Side::Petitioner);
    let dr = mix.side_mean(Side::Respondent);
    let zeroed = |cp: bool, cr: bool| CaseParams {
        c_p: if cp { k.c_p } else { 0.0 },
        c_r: if cr { k.c_r } else { 0.0 },
        ..*k
    };
    let variants = [zeroed(false, false), zeroed(true, false), zeroed(false, true), zeroed(true, true)];
    let rows = fit
        .psi_hat
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut l = [0.0; 4];
            for (out, kv) in l.iter_mut().zip(&variants) {
                *out = vote_logit(&p.psi, &mix.theta, dp.as_deref(), dr.as_deref(), kv, fit.kind)?;
            }
            Ok(DecompositionRow {
                justice: j,
                name: fit.justices[j].clone(),
                issues_only: l[0],
                with_pet_amici: l[1],
                with_resp_amici: l[2],
                full: l[3],
            })
        })
        .collect::<Result<_>>()?;
    Ok(IpDecomposition { case_id: mix.case_id.clone(), rows })
}

/// Which amicus sides to keep in a hypothetical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keep {
    None,
    PetitionerOnly,
    RespondentOnly,
    #[default]
    All,
}

impl FromStr for Keep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Keep::None),
            "pet" | "petitioner" => Ok(Keep::PetitionerOnly),
            "resp" | "respondent" => Ok(Keep::RespondentOnly),
            "all" => Ok(Keep::All),
            other => Err(Error::invalid(format!("unknown keep option {other:?}"))),
        }
    }
}

impl Keep {
    fn sides(self) -> (bool, bool) {
        match self {
            Keep::None => (false, false),
            Keep::PetitionerOnly => (true, false),
            Keep::RespondentOnly => (false, true),
            Keep::All => (true, true),
        }
    }
}

/// Prediction with the dropped side's briefs treated as never filed.
pub fn drop_amici_predict<R: Rng + ?Sized>(
    fit: &FitResult,
    mix: &CaseMixtures,
    justices: &[JusticeId],
    keep: Keep,
    samples: usize,
    rng: &mut R,
) -> Result<Prediction> {
    let (p, r) = keep.sides();
    predict_votes(fit, &mix.keeping(p, r), justices, samples, rng)
}

/// [`drop_amici_predict`] over explicit κ samples.
pub fn drop_amici_with_kappas(
    fit: &FitResult,
    mix: &CaseMixtures,
    justices: &[JusticeId],
    keep: Keep,
    kappas: &[CaseParams],
) -> Result<Prediction> {
    let (p, r) = keep.sides();
    predict_with_kappas(fit, &mix.keeping(p, r), justices, kappas, SampleWeights::ByKind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityPoint {
    pub proportion_a: f64,
    pub expected_votes: f64,
    pub cost: f64,
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityCurve {
    pub grid: Vec<UtilityPoint>,
    pub argmax: usize,
}

impl UtilityCurve {
    pub fn argmax_point(&self) -> &UtilityPoint {
        &self.grid[self.argmax]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_rows(path.as_ref(), &self.grid)
    }
}

pub const DEFAULT_GRID_STEP: f64 = 0.1;
pub const DEFAULT_GRID_FLOOR: f64 = 1e-8;

/// Brief mixture with `p` on topic `a`, `1 − p` on topic `b`, and `floor`
/// elsewhere, renormalized onto the simplex.
pub fn two_topic_mixture(dim: usize, a: usize, b: usize, p: f64, floor: f64) -> Vec<f64> {
    let mut delta = vec![floor; dim];
    delta[a] = p.max(floor);
    delta[b] = (1.0 - p).max(floor);
    normalize_in_place(&mut delta);
    delta
}

/// A filer's expected votes, cost, and net utility as its brief moves
/// between two topics, using the case's fitted parameters.
#[allow(clippy::too_many_arguments)]
pub fn best_brief_grid(
    fit: &FitResult,
    case_id: &str,
    theta: &[f64],
    side: Side,
    topic_a: usize,
    topic_b: usize,
    step: f64,
    floor: f64,
) -> Result<UtilityCurve> {
    let dim = theta.len();
    if topic_a == topic_b || topic_a >= dim || topic_b >= dim {
        return Err(Error::invalid(format!("invalid topic pair ({topic_a}, {topic_b}) for {dim} topics")));
    }
    let intervals = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (intervals * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {step} must divide 1")));
    }
    if !(floor > 0.0 && floor < 0.5) {
        return Err(Error::invalid("grid floor must be in (0, 0.5)"));
    }
    let kappa = fitted_kappa(fit, case_id)?;
    let xi = fit.hyper.xi;
    let grid = (0..=intervals as usize)
        .map(|k| {
            let p = k as f64 / intervals;
            let delta = two_topic_mixture(dim, topic_a, topic_b, p, floor);
            let ev = expected_votes(&fit.psi_hat, theta, &delta, kappa, side)?;
            let c = cost(&delta, theta, xi)?;
            Ok(UtilityPoint { proportion_a: p, expected_votes: ev, cost: c, net: ev - c })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut argmax = 0;
    for (i, g) in grid.iter().enumerate() {
        if g.net > grid[argmax].net {
            argmax = i;
        }
    }
    Ok(UtilityCurve { grid, argmax })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRow {
    pub justice: JusticeId,
    pub name: String,
    pub rms: f64,
    pub num_votes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Influence {
    /// Sorted by descending RMS.
    pub ranked: Vec<InfluenceRow>,
    /// Justices with no votes, left out of the ranking.
    pub omitted: Vec<JusticeId>,
}

impl Influence {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_rows(path.as_ref(), &self.ranked)
    }
}

/// Root-mean-square difference in per-vote log-likelihood between a
/// utility-model fit and an issues-model fit, per justice.
pub fn amici_influence(
    fit_issues: &FitResult,
    fit_utility: &FitResult,
    corpus: &Corpus,
    mixtures: &Mixtures,
) -> Result<Influence> {
    if fit_issues.justices != corpus.justices || fit_utility.justices != corpus.justices {
        return Err(Error::invalid("fits and corpus have different justice rosters"));
    }
    let aligned = mixtures.aligned(corpus)?;
    let n = corpus.justices.len();
    let mut sum_sq = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (case, mix) in corpus.cases.iter().zip(aligned) {
        let ki = fitted_kappa(fit_issues, &case.id)?;
        let ku = fitted_kappa(fit_utility, &case.id)?;
        let dp = mix.side_mean(Side::Petitioner);
        let dr = mix.side_mean(Side::Respondent);
        let ll = |fit: &FitResult, k: &CaseParams, j: JusticeId, v: Side| -> Result<f64> {
            let logit = vote_logit(&fit.psi_hat[j].psi, &mix.theta, dp.as_deref(), dr.as_deref(), k, fit.kind)?;
            Ok(log_vote_prob(logit, v))
        };
        for (&j, &v) in &case.votes {
            let d = ll(fit_utility, ku, j, v)? - ll(fit_issues, ki, j, v)?;
            sum_sq[j] += d * d;
            counts[j] += 1;
        }
    }
    let mut ranked = Vec::new();
    let mut omitted = Vec::new();
    for j in 0..n {
        if counts[j] == 0 {
            omitted.push(j);
        } else {
            ranked.push(InfluenceRow {
                justice: j,
                name: corpus.justices[j].clone(),
                rms: (sum_sq[j] / counts[j] as f64).sqrt(),
                num_votes: counts[j],
            });
        }
    }
    if !omitted.is_empty() {
        log::warn!("{} justices have no votes and were omitted", omitted.len());
    }
    ranked.sort_by(|a, b| b.rms.total_cmp(&a.rms).then(a.justice.cmp(&b.justice)));
    Ok(Influence { ranked, omitted })
}

/// Justice ids of a fit's roster.
pub fn roster(fit: &FitResult) -> Vec<JusticeId> {
    (0..fit.psi_hat.len()).collect()
}
