//! Synthetic corpora sampled from the models' own generative story.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AmicusBrief, Case, Corpus, Document, Side, Vocabulary};
use crate::error::{Error, Result};
use crate::ipmodel::{putil_factor, vote_logit, CaseParams, JusticeParams, ModelKind};
use crate::math::{cumulative, sample_cumulative, sample_dirichlet, standard_normal};
use crate::rng;
use crate::topics::{BriefMixture, CaseMixtures, Mixtures};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_cases: usize,
    pub num_justices: usize,
    pub num_topics: usize,
    pub vocab_size: usize,
    pub tokens_per_doc: usize,
    /// Inclusive range of briefs per case.
    pub briefs_per_case: (usize, usize),
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub rho: f64,
    /// Prior variances of `a, b, c_p, c_r`.
    pub sigma_kappa: [f64; 4],
    pub xi: f64,
    pub utility_briefs: bool,
    /// Dirichlet candidates per brief when `utility_briefs` is set.
    pub num_candidates: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_cases: 200,
            num_justices: 9,
            num_topics: 5,
            vocab_size: 500,
            tokens_per_doc: 200,
            briefs_per_case: (0, 4),
            alpha: 0.1,
            beta: 0.01,
            lambda: 1.0,
            rho: 0.5,
            sigma_kappa: [4.0; 4],
            xi: 1.0,
            utility_briefs: false,
            num_candidates: 100,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if self.num_cases == 0 || self.tokens_per_doc == 0 || self.num_candidates == 0 {
            return bad("case, token, and candidate counts must be positive");
        }
        if self.num_justices < 2 {
            return bad("at least two justices are required");
        }
        if self.num_topics < 2 {
            return bad("at least two topics are required");
        }
        if self.vocab_size < self.num_topics {
            return bad("vocabulary must be at least as large as the topic count");
        }
        if self.briefs_per_case.0 > self.briefs_per_case.1 {
            return bad("briefs_per_case range is empty");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        let positive = [self.alpha, self.beta, self.lambda, self.xi];
        if positive.iter().chain(&self.sigma_kappa).any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("alpha, beta, lambda, xi, and sigma_kappa must be positive");
        }
        Ok(())
    }
}

/// Every latent value behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub phi: Vec<Vec<f64>>,
    /// Merits mixture per case.
    pub theta: Vec<Vec<f64>>,
    /// Mixture per brief, grouped by case.
    pub delta: Vec<Vec<Vec<f64>>>,
    pub psi: Vec<JusticeParams>,
    pub kappa: Vec<CaseParams>,
    pub rho: f64,
}

impl GroundTruth {
    /// The true mixtures in the form the vote models consume.
    pub fn mixtures(&self, corpus: &Corpus) -> Mixtures {
        Mixtures {
            num_topics: self.phi.len(),
            cases: corpus
                .cases
                .iter()
                .zip(&self.theta)
                .zip(&self.delta)
                .map(|((case, theta), deltas)| CaseMixtures {
                    case_id: case.id.clone(),
                    theta: theta.clone(),
                    briefs: case
                        .briefs
                        .iter()
                        .zip(deltas)
                        .map(|(b, d)| BriefMixture { side: b.side, mixture: d.clone() })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::topics::write_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        crate::topics::read_json(path.as_ref())
    }
}

/// Draws a brief mixture from the random-utility density by importance
/// resampling: `num_candidates` Dirichlet(`alpha`) draws weighted by their
/// utility factor.
#[allow(clippy::too_many_arguments)]
pub fn sample_brief_mixture<R: Rng + ?Sized>(
    theta: &[f64],
    psi_all: &[JusticeParams],
    kappa: &CaseParams,
    side: Side,
    xi: f64,
    alpha: f64,
    num_candidates: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if num_candidates == 0 {
        return Err(Error::invalid("num_candidates must be at least 1"));
    }
    let d = theta.len();
    let mut candidates = Vec::with_capacity(num_candidates);
    let mut weights = Vec::with_capacity(num_candidates);
    for _ in 0..num_candidates {
        let c = sample_dirichlet(d, alpha, rng);
        weights.push(putil_factor(psi_all, theta, &c, kappa, side, xi)?);
        candidates.push(c);
    }
    if num_candidates == 1 {
        return Ok(candidates.pop().unwrap());
    }
    if weights.iter().sum::<f64>() <= 0.0 || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numeric("all candidate utility weights are zero".into()));
    }
    let idx = sample_cumulative(&cumulative(&weights), rng);
    Ok(candidates.swap_remove(idx))
}

fn sample_document<R: Rng + ?Sized>(mixture: &[f64], phi: &[Vec<f64>], n: usize, rng: &mut R) -> Document {
    // token distribution p(w) = Σ_d mixture_d φ_dw
    let v = phi[0].len();
    let mut word = vec![0.0; v];
    for (m, row) in mixture.iter().zip(phi) {
        if *m > 0.0 {
            for (w, p) in word.iter_mut().zip(row) {
                *w += m * p;
            }
        }
    }
    let cum = cumulative(&word);
    Document::from_tokens((0..n).map(|_| sample_cumulative(&cum, rng) as u32))
}

/// Samples a corpus and its latent values. Deterministic in `seed`.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<(Corpus, GroundTruth)> {
    cfg.validate()?;
    let mut rng = rng::seeded(seed);
    let d = cfg.num_topics;

    let phi: Vec<Vec<f64>> = (0..d).map(|_| sample_dirichlet(cfg.vocab_size, cfg.beta, &mut rng)).collect();

    // ψ_j = √λ z + √ρ u 𝟙 has covariance λI + ρ𝟙𝟙ᵀ
    let psi: Vec<JusticeParams> = (0..cfg.num_justices)
        .map(|_| {
            let shared = cfg.rho.sqrt() * standard_normal(&mut rng);
            JusticeParams::new(
                (0..d)
                    .map(|_| cfg.lambda.sqrt() * standard_normal(&mut rng) + shared)
                    .collect(),
            )
        })
        .collect();

    let sd: Vec<f64> = cfg.sigma_kappa.iter().map(|v| v.sqrt()).collect();
    let mut thetas = Vec::with_capacity(cfg.num_cases);
    let mut deltas = Vec::with_capacity(cfg.num_cases);
    let mut kappas = Vec::with_capacity(cfg.num_cases);
    let mut cases = Vec::with_capacity(cfg.num_cases);
    let width = cfg.num_cases.to_string().len();
    for i in 0..cfg.num_cases {
        let theta = sample_dirichlet(d, cfg.alpha, &mut rng);
        let kappa = CaseParams::new(
            sd[0] * standard_normal(&mut rng),
            sd[1] * standard_normal(&mut rng),
            sd[2] * standard_normal(&mut rng),
            sd[3] * standard_normal(&mut rng),
        );
        let nbriefs = rng.random_range(cfg.briefs_per_case.0..=cfg.briefs_per_case.1);
        let mut briefs = Vec::with_capacity(nbriefs);
        let mut case_deltas = Vec::with_capacity(nbriefs);
        for _ in 0..nbriefs {
            let side = if rng.random::<bool>() { Side::Petitioner } else { Side::Respondent };
            let delta = if cfg.utility_briefs {
                sample_brief_mixture(&theta, &psi, &kappa, side, cfg.xi, cfg.alpha, cfg.num_candidates, &mut rng)?
            } else {
                sample_dirichlet(d, cfg.alpha, &mut rng)
            };
            case_deltas.push(delta);
            briefs.push(side);
        }

        let merits = sample_document(&theta, &phi, cfg.tokens_per_doc, &mut rng);
        let brief_docs: Vec<AmicusBrief> = briefs
            .iter()
            .zip(&case_deltas)
            .map(|(&side, delta)| AmicusBrief {
                doc: sample_document(delta, &phi, cfg.tokens_per_doc, &mut rng),
                side,
            })
            .collect();

        let mix = CaseMixtures {
            case_id: String::new(),
            theta: theta.clone(),
            briefs: briefs
                .iter()
                .zip(&case_deltas)
                .map(|(&side, m)| BriefMixture { side, mixture: m.clone() })
                .collect(),
        };
        let dp = mix.side_mean(Side::Petitioner);
        let dr = mix.side_mean(Side::Respondent);
        let mut votes = BTreeMap::new();
        for (j, p) in psi.iter().enumerate() {
            let logit = vote_logit(&p.psi, &theta, dp.as_deref(), dr.as_deref(), &kappa, ModelKind::Amici)?;
            let pet = rng.random::<f64>() < crate::math::sigmoid(logit);
            votes.insert(j, if pet { Side::Petitioner } else { Side::Respondent });
        }

        cases.push(Case {
            id: format!("case-{i:0width$}"),
            merits,
            briefs: brief_docs,
            votes,
        });
        thetas.push(theta);
        deltas.push(case_deltas);
        kappas.push(kappa);
    }

    let vocab = Vocabulary::new((0..cfg.vocab_size).map(|w| format!("phrase_{w}")).collect())?;
    let justices = (0..cfg.num_justices).map(|j| format!("J{}", j + 1)).collect();
    let corpus = Corpus::new(vocab, justices, cases)?;
    Ok((
        corpus,
        GroundTruth {
            phi,
            theta: thetas,
            delta: deltas,
            psi,
            kappa: kappas,
            rho: cfg.rho,
        },
    ))
}
