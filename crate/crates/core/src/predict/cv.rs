//! K-fold cross-validation of the vote models against the unanimous and
//! logistic-regression baselines.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logreg::{case_features, l1_logreg, LogRegConfig, L1_GRID};
use super::{bench_for, pairwise_partition_accuracy, predict_votes, unanimous_baseline, Prediction, DEFAULT_KAPPA_SAMPLES};
use crate::corpus::{Case, Corpus};
use crate::error::{Error, Result};
use crate::ipmodel::{Hyperparams, ModelKind};
use crate::rng;
use crate::sampler::{self, FitResult, SamplerConfig};
use crate::topics::{corpus_documents, fit_lda, infer_corpus_mixtures, CaseMixtures, LdaConfig, Mixtures, TopicModel};

pub const UNANIMOUS: &str = "unanimous";
pub const LOGISTIC: &str = "logistic_regression";

// Seed namespaces for the per-fold components.
const NS_FOLDS: u64 = 0;
const NS_LDA: u64 = 1;
const NS_FOLDIN: u64 = 2;
const NS_SAMPLER: u64 = 3;
const NS_PREDICT: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub kinds: Vec<ModelKind>,
    pub folds: usize,
    pub kappa_samples: usize,
    /// Whether to pick the L1 penalty from [`L1_GRID`] on an inner split.
    pub tune_l1: bool,
    pub logreg: LogRegConfig,
    pub lda: LdaConfig,
    pub sampler: SamplerConfig,
    pub hyper: Hyperparams,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            kinds: vec![ModelKind::RandomUtility],
            folds: 5,
            kappa_samples: DEFAULT_KAPPA_SAMPLES,
            tune_l1: true,
            logreg: LogRegConfig::default(),
            lda: LdaConfig::default(),
            sampler: SamplerConfig::default(),
            hyper: Hyperparams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold: usize,
    pub model: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub mean: f64,
    pub stdev: f64,
    pub folds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub rows: Vec<FoldRow>,
    pub models: Vec<ModelSummary>,
}

impl CvReport {
    fn from_rows(rows: Vec<FoldRow>) -> Self {
        let mut names: Vec<String> = Vec::new();
        for r in &rows {
            if !names.contains(&r.model) {
                names.push(r.model.clone());
            }
        }
        let models = names
            .into_iter()
            .map(|model| {
                let folds: Vec<f64> = rows.iter().filter(|r| r.model == model).map(|r| r.accuracy).collect();
                let n = folds.len() as f64;
                let mean = folds.iter().sum::<f64>() / n;
                let stdev = if folds.len() > 1 {
                    (folds.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                ModelSummary { model, mean, stdev, folds }
            })
            .collect();
        Self { rows, models }
    }

    pub fn summary(&self, model: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == model)
    }

    /// Writes `fold,model,accuracy` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Writes mean and standard deviation per model as JSON.
    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::topics::write_json(&self.models, path.as_ref())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

/// Everything trained on one fold, kept for inspection.
#[derive(Debug, Clone)]
pub struct FoldArtifacts {
    pub test_cases: Vec<usize>,
    pub topic_model: TopicModel,
    pub fits: Vec<FitResult>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub report: CvReport,
    pub folds: Vec<FoldArtifacts>,
}

/// Shuffles case indices by seed and deals them round-robin into folds.
pub fn fold_assignment(num_cases: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    if num_cases < folds {
        return Err(Error::invalid(format!("{num_cases} cases cannot fill {folds} folds")));
    }
    let mut order: Vec<usize> = (0..num_cases).collect();
    order.shuffle(&mut rng::derived(seed, NS_FOLDS, 0));
    let mut out = vec![Vec::new(); folds];
    for (k, i) in order.into_iter().enumerate() {
        out[k % folds].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

pub fn cross_validate(corpus: &Corpus, cfg: &CvConfig) -> Result<CvReport> {
    cross_validate_detailed(corpus, cfg).map(|o| o.report)
}

/// Like [`cross_validate`], also returning each fold's trained models.
pub fn cross_validate_detailed(corpus: &Corpus, cfg: &CvConfig) -> Result<CvOutcome> {
    cfg.lda.validate()?;
    cfg.sampler.validate()?;
    cfg.hyper.validate()?;
    cfg.logreg.validate()?;
    if cfg.kappa_samples == 0 {
        return Err(Error::invalid("kappa_samples must be positive"));
    }
    let folds = fold_assignment(corpus.cases.len(), cfg.folds, cfg.seed)?;
    let results: Vec<(Vec<FoldRow>, FoldArtifacts)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| run_fold(corpus, cfg, f, test))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for (r, a) in results {
        rows.extend(r);
        artifacts.push(a);
    }
    Ok(CvOutcome {
        report: CvReport::from_rows(rows),
        folds: artifacts,
    })
}

fn scorable(case: &Case) -> bool {
    case.votes.len() >= 2
}

fn mean_accuracy(cases: &[&Case], preds: &[Prediction]) -> Result<f64> {
    let mut total = 0.0;
    for (case, p) in cases.iter().zip(preds) {
        total += pairwise_partition_accuracy(&p.partition, &case.votes)?;
    }
    Ok(total / cases.len() as f64)
}

fn run_fold(corpus: &Corpus, cfg: &CvConfig, f: usize, test: &[usize]) -> Result<(Vec<FoldRow>, FoldArtifacts)> {
    if test.is_empty() {
        return Err(Error::invalid(format!("fold {f} has no cases")));
    }
    let train: Vec<usize> = (0..corpus.cases.len()).filter(|i| test.binary_search(i).is_err()).collect();
    let train_corpus = corpus.subset(&train);
    let test_corpus = corpus.subset(test);
    let fold = f as u64;

    let docs = corpus_documents(&train_corpus);
    let topic_model = fit_lda(&docs, corpus.vocabulary.len(), &cfg.lda, rng::derive_seed(cfg.seed, NS_LDA, fold))?;
    let foldin_seed = rng::derive_seed(cfg.seed, NS_FOLDIN, fold);
    let train_mix = infer_corpus_mixtures(&topic_model, &train_corpus, &cfg.lda, foldin_seed, false)?;
    let test_mix = infer_corpus_mixtures(&topic_model, &test_corpus, &cfg.lda, foldin_seed ^ 1, true)?;

    let scored: Vec<(&Case, &CaseMixtures)> = test_corpus
        .cases
        .iter()
        .zip(&test_mix.cases)
        .filter(|(c, _)| scorable(c))
        .collect();
    if scored.is_empty() {
        return Err(Error::invalid(format!("fold {f} has no test case with two or more votes")));
    }
    let scored_cases: Vec<&Case> = scored.iter().map(|(c, _)| *c).collect();
    let roster = corpus.justices.len();
    let mut rows = Vec::new();

    let unanimous: Vec<Prediction> = scored_cases.iter().map(|c| unanimous_baseline(&bench_for(c, roster))).collect();
    rows.push(FoldRow { fold: f, model: UNANIMOUS.into(), accuracy: mean_accuracy(&scored_cases, &unanimous)? });

    let classifiers = train_logreg(&train_corpus, &train_mix, cfg)?;
    let lr: Vec<Prediction> = scored
        .iter()
        .map(|(c, m)| classifiers.predict(&case_features(m), &bench_for(c, roster)))
        .collect();
    rows.push(FoldRow { fold: f, model: LOGISTIC.into(), accuracy: mean_accuracy(&scored_cases, &lr)? });

    let mut fits = Vec::with_capacity(cfg.kinds.len());
    for (ki, &kind) in cfg.kinds.iter().enumerate() {
        let scfg = SamplerConfig {
            seed: rng::derive_seed(cfg.seed, NS_SAMPLER, fold),
            ..cfg.sampler
        };
        let fit = sampler::fit(&train_corpus, &train_mix, kind, &cfg.hyper, &scfg)?;
        let pred_seed = rng::derive_seed(cfg.seed, NS_PREDICT, fold);
        let preds: Vec<Prediction> = scored
            .par_iter()
            .enumerate()
            .map(|(i, (c, m))| {
                let mut r = rng::derived(pred_seed, i as u64, ki as u64);
                predict_votes(&fit, m, &bench_for(c, roster), cfg.kappa_samples, &mut r)
            })
            .collect::<Result<_>>()?;
        rows.push(FoldRow { fold: f, model: kind.as_str().into(), accuracy: mean_accuracy(&scored_cases, &preds)? });
        fits.push(fit);
    }
    log::info!("fold {f}: {} test cases scored", scored_cases.len());
    Ok((rows, FoldArtifacts { test_cases: test.to_vec(), topic_model, fits }))
}

fn train_logreg(train: &Corpus, mix: &Mixtures, cfg: &CvConfig) -> Result<super::JusticeClassifiers> {
    let feats: Vec<Vec<f64>> = mix.cases.iter().map(case_features).collect();
    let labels: Vec<_> = train.cases.iter().map(|c| c.votes.clone()).collect();
    let n_j = train.justices.len();
    let mut lcfg = cfg.logreg;
    let holdout = train.cases.len() / 5;
    if cfg.tune_l1 && holdout >= 1 {
        let split = train.cases.len() - holdout;
        let roster = n_j;
        let mut best = (f64::NEG_INFINITY, lcfg.lambda1);
        for &lambda1 in &L1_GRID {
            let c = l1_logreg(&feats[..split], &labels[..split], n_j, &LogRegConfig { lambda1, ..lcfg })?;
            let mut total = 0.0;
            let mut n = 0usize;
            for (case, x) in train.cases[split..].iter().zip(&feats[split..]) {
                if scorable(case) {
                    let p = c.predict(x, &bench_for(case, roster));
                    total += pairwise_partition_accuracy(&p.partition, &case.votes)?;
                    n += 1;
                }
            }
            let acc = if n > 0 { total / n as f64 } else { 0.0 };
            if acc > best.0 {
                best = (acc, lambda1);
            }
        }
        lcfg.lambda1 = best.1;
    }
    l1_logreg(&feats, &labels, n_j, &lcfg)
}
