//! Stage-one text model: collapsed Gibbs LDA shared by merits and amicus
//! documents, plus fold-in for held-out documents.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::{brief_key, merits_key, Case, Corpus, Document, Side};
use crate::error::{Error, Result};
use crate::math::sample_cumulative;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub foldin_iters: usize,
    pub foldin_burn_in: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            num_topics: 30,
            alpha: 0.1,
            beta: 0.001,
            iters: 1000,
            burn_in: 500,
            thin: 10,
            foldin_iters: 200,
            foldin_burn_in: 100,
        }
    }
}

impl LdaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_topics == 0 {
            return Err(Error::invalid("number of topics must be positive"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::invalid("alpha and beta must be positive"));
        }
        if self.iters <= self.burn_in {
            return Err(Error::invalid("LDA iterations must exceed burn-in"));
        }
        if self.foldin_iters <= self.foldin_burn_in {
            return Err(Error::invalid("fold-in iterations must exceed burn-in"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Posterior-mean topic-word distributions, one row per topic.
    pub phi: Vec<Vec<f64>>,
    pub doc_mixtures: BTreeMap<String, Vec<f64>>,
}

impl TopicModel {
    pub fn vocab_size(&self) -> usize {
        self.phi.first().map_or(0, Vec::len)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BriefMixture {
    pub side: Side,
    pub mixture: Vec<f64>,
}

/// Fixed text evidence for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMixtures {
    pub case_id: String,
    pub theta: Vec<f64>,
    pub briefs: Vec<BriefMixture>,
}

impl CaseMixtures {
    /// Mean mixture of the briefs supporting `side`, or `None` without any.
    pub fn side_mean(&self, side: Side) -> Option<Vec<f64>> {
        mean_of(self.briefs.iter().filter(|b| b.side == side).map(|b| b.mixture.as_slice()))
    }

    pub fn has_side(&self, side: Side) -> bool {
        self.briefs.iter().any(|b| b.side == side)
    }

    /// Copy without the briefs of the sides not kept.
    pub fn keeping(&self, keep_pet: bool, keep_resp: bool) -> CaseMixtures {
        CaseMixtures {
            case_id: self.case_id.clone(),
            theta: self.theta.clone(),
            briefs: self
                .briefs
                .iter()
                .filter(|b| match b.side {
                    Side::Petitioner => keep_pet,
                    Side::Respondent => keep_resp,
                })
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixtures {
    pub num_topics: usize,
    pub cases: Vec<CaseMixtures>,
}

impl Mixtures {
    pub fn get(&self, case_id: &str) -> Option<&CaseMixtures> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }

    /// Mixtures in corpus case order; errors if any case is missing or its
    /// brief list disagrees with the corpus.
    pub fn aligned<'a>(&'a self, corpus: &Corpus) -> Result<Vec<&'a CaseMixtures>> {
        let by_id: BTreeMap<&str, &CaseMixtures> =
            self.cases.iter().map(|c| (c.case_id.as_str(), c)).collect();
        corpus
            .cases
            .iter()
            .map(|case| {
                let m = by_id
                    .get(case.id.as_str())
                    .ok_or_else(|| Error::invalid(format!("missing mixture for case {:?}", case.id)))?;
                if m.briefs.len() != case.briefs.len() {
                    return Err(Error::invalid(format!(
                        "case {:?}: {} brief mixtures for {} briefs",
                        case.id,
                        m.briefs.len(),
                        case.briefs.len()
                    )));
                }
                Ok(*m)
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn mean_of<'a>(mut it: impl Iterator<Item = &'a [f64]>) -> Option<Vec<f64>> {
    let first = it.next()?;
    let mut acc = first.to_vec();
    let mut n = 1.0;
    for m in it {
        for (a, x) in acc.iter_mut().zip(m) {
            *a += x;
        }
        n += 1.0;
    }
    for a in &mut acc {
        *a /= n;
    }
    Some(acc)
}

/// Mean mixture of a case's briefs on `side`, looked up by document key.
pub fn mean_side_mixture(
    case: &Case,
    mixtures: &BTreeMap<String, Vec<f64>>,
    side: Side,
) -> Result<Option<Vec<f64>>> {
    let mut found = Vec::new();
    for (k, _) in case.briefs_on(side) {
        let key = brief_key(&case.id, k);
        let m = mixtures
            .get(&key)
            .ok_or_else(|| Error::invalid(format!("no mixture for document {key:?}")))?;
        found.push(m.as_slice());
    }
    Ok(mean_of(found.into_iter()))
}

/// Every merits and brief document of the corpus with its key.
pub fn corpus_documents(corpus: &Corpus) -> Vec<(String, &Document)> {
    let mut docs = Vec::new();
    for case in &corpus.cases {
        docs.push((merits_key(&case.id), &case.merits));
        for (k, b) in case.briefs.iter().enumerate() {
            docs.push((brief_key(&case.id, k), &b.doc));
        }
    }
    docs
}

/// Collapsed Gibbs state over token-topic assignments.
pub(crate) struct GibbsLda {
    num_topics: usize,
    vocab: usize,
    alpha: f64,
    beta: f64,
    tokens: Vec<Vec<u32>>,
    assignments: Vec<Vec<u32>>,
    /// word-major: `word_topic[w * D + d]`
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
    doc_topic: Vec<Vec<u32>>,
    weights: Vec<f64>,
}

impl GibbsLda {
    pub(crate) fn new<R: Rng>(
        docs: &[&Document],
        vocab: usize,
        num_topics: usize,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> Self {
        let d = num_topics;
        let mut s = GibbsLda {
            num_topics: d,
            vocab,
            alpha,
            beta,
            tokens: docs.iter().map(|doc| doc.tokens().collect()).collect(),
            assignments: Vec::with_capacity(docs.len()),
            word_topic: vec![0; vocab * d],
            topic_total: vec![0; d],
            doc_topic: vec![vec![0; d]; docs.len()],
            weights: vec![0.0; d],
        };
        for (m, toks) in s.tokens.iter().enumerate() {
            let z: Vec<u32> = toks
                .iter()
                .map(|&w| {
                    let t = rng.random_range(0..d);
                    s.word_topic[w as usize * d + t] += 1;
                    s.topic_total[t] += 1;
                    s.doc_topic[m][t] += 1;
                    t as u32
                })
                .collect();
            s.assignments.push(z);
        }
        s
    }

    #[allow(clippy::needless_range_loop)]
    pub(crate) fn sweep<R: Rng>(&mut self, rng: &mut R) {
        let d = self.num_topics;
        let vbeta = self.vocab as f64 * self.beta;
        for m in 0..self.tokens.len() {
            for n in 0..self.tokens[m].len() {
                let w = self.tokens[m][n] as usize;
                let old = self.assignments[m][n] as usize;
                self.word_topic[w * d + old] -= 1;
                self.topic_total[old] -= 1;
                self.doc_topic[m][old] -= 1;

                let row = &self.word_topic[w * d..(w + 1) * d];
                let mut acc = 0.0;
                for t in 0..d {
                    acc += (self.doc_topic[m][t] as f64 + self.alpha) * (row[t] as f64 + self.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    self.weights[t] = acc;
                }
                let new = sample_cumulative(&self.weights, rng);

                self.word_topic[w * d + new] += 1;
                self.topic_total[new] += 1;
                self.doc_topic[m][new] += 1;
                self.assignments[m][n] = new as u32;
            }
        }
    }

    /// Recounts every table from the assignments and compares.
    pub(crate) fn audit(&self) -> bool {
        let d = self.num_topics;
        let mut wt = vec![0u32; self.vocab * d];
        let mut tt = vec![0u32; d];
        for (m, (toks, z)) in self.tokens.iter().zip(&self.assignments).enumerate() {
            let mut dt = vec![0u32; d];
            for (&w, &t) in toks.iter().zip(z) {
                wt[w as usize * d + t as usize] += 1;
                tt[t as usize] += 1;
                dt[t as usize] += 1;
            }
            if dt != self.doc_topic[m] {
                return false;
            }
        }
        wt == self.word_topic && tt == self.topic_total
    }

    /// log p(w, z) with φ and θ integrated out.
    pub(crate) fn log_joint(&self) -> f64 {
        let d = self.num_topics;
        let v = self.vocab as f64;
        let mut lp = d as f64 * (ln_gamma(v * self.beta) - v * ln_gamma(self.beta));
        let lg_beta = ln_gamma(self.beta);
        for t in 0..d {
            for w in 0..self.vocab {
                let c = self.word_topic[w * d + t];
                if c > 0 {
                    lp += ln_gamma(c as f64 + self.beta) - lg_beta;
                }
            }
            lp -= ln_gamma(self.topic_total[t] as f64 + v * self.beta);
        }
        let da = d as f64 * self.alpha;
        let lg_alpha = ln_gamma(self.alpha);
        for (m, dt) in self.doc_topic.iter().enumerate() {
            lp += ln_gamma(da) - d as f64 * lg_alpha;
            for &c in dt {
                lp += ln_gamma(c as f64 + self.alpha);
            }
            lp -= ln_gamma(self.tokens[m].len() as f64 + da);
        }
        lp
    }

    fn accumulate(&self, phi: &mut [Vec<f64>], mixtures: &mut [Vec<f64>]) {
        let d = self.num_topics;
        let vbeta = self.vocab as f64 * self.beta;
        for (t, row) in phi.iter_mut().enumerate() {
            let denom = self.topic_total[t] as f64 + vbeta;
            for (w, p) in row.iter_mut().enumerate() {
                *p += (self.word_topic[w * d + t] as f64 + self.beta) / denom;
            }
        }
        let da = d as f64 * self.alpha;
        for (m, mix) in mixtures.iter_mut().enumerate() {
            let denom = self.tokens[m].len() as f64 + da;
            for (t, x) in mix.iter_mut().enumerate() {
                *x += (self.doc_topic[m][t] as f64 + self.alpha) / denom;
            }
        }
    }
}

/// Fits LDA and also returns the per-sweep log joint trace.
pub fn fit_lda_traced(
    docs: &[(String, &Document)],
    vocab_size: usize,
    cfg: &LdaConfig,
    seed: u64,
) -> Result<(TopicModel, Vec<f64>)> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::invalid("no documents to fit"));
    }
    let mut distinct = std::collections::BTreeSet::new();
    for (key, doc) in docs {
        if doc.is_empty() {
            return Err(Error::invalid(format!("document {key:?} has no tokens")));
        }
        if let Some(t) = doc.max_token() {
            if t as usize >= vocab_size {
                return Err(Error::invalid(format!("document {key:?}: token {t} outside vocabulary")));
            }
        }
        distinct.extend(doc.counts().keys().copied());
    }
    if cfg.num_topics > distinct.len() {
        return Err(Error::invalid(format!(
            "{} topics exceed the {} distinct tokens",
            cfg.num_topics,
            distinct.len()
        )));
    }

    let mut rng = rng::seeded(seed);
    let refs: Vec<&Document> = docs.iter().map(|(_, d)| *d).collect();
    let mut state = GibbsLda::new(&refs, vocab_size, cfg.num_topics, cfg.alpha, cfg.beta, &mut rng);
    let mut phi = vec![vec![0.0; vocab_size]; cfg.num_topics];
    let mut mixtures = vec![vec![0.0; cfg.num_topics]; docs.len()];
    let mut kept = 0usize;
    let mut trace = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        state.sweep(&mut rng);
        trace.push(state.log_joint());
        if it >= cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            state.accumulate(&mut phi, &mut mixtures);
            kept += 1;
        }
    }
    debug_assert!(state.audit());
    let scale = 1.0 / kept as f64;
    for row in phi.iter_mut().chain(mixtures.iter_mut()) {
        for x in row.iter_mut() {
            *x *= scale;
        }
        crate::math::normalize_in_place(row);
    }
    let doc_mixtures = docs.iter().map(|(k, _)| k.clone()).zip(mixtures).collect();
    Ok((
        TopicModel {
            num_topics: cfg.num_topics,
            alpha: cfg.alpha,
            beta: cfg.beta,
            phi,
            doc_mixtures,
        },
        trace,
    ))
}

/// Collapsed Gibbs LDA; mixtures and φ are posterior means over thinned
/// post-burn-in sweeps.
pub fn fit_lda(docs: &[(String, &Document)], vocab_size: usize, cfg: &LdaConfig, seed: u64) -> Result<TopicModel> {
    fit_lda_traced(docs, vocab_size, cfg, seed).map(|(m, _)| m)
}

/// Topic mixture of a held-out document with φ frozen.
pub fn infer_mixture<R: Rng>(
    model: &TopicModel,
    doc: &Document,
    iters: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if doc.is_empty() {
        return Err(Error::invalid("cannot infer a mixture for an empty document"));
    }
    if iters <= burn_in {
        return Err(Error::invalid("fold-in iterations must exceed burn-in"));
    }
    let v = model.vocab_size();
    if let Some(t) = doc.max_token() {
        if t as usize >= v {
            return Err(Error::invalid(format!("token id {t} outside vocabulary of size {v}")));
        }
    }
    let d = model.num_topics;
    let tokens: Vec<u32> = doc.tokens().collect();
    let mut counts = vec![0u32; d];
    let mut z: Vec<usize> = tokens
        .iter()
        .map(|_| {
            let t = rng.random_range(0..d);
            counts[t] += 1;
            t
        })
        .collect();
    let mut weights = vec![0.0; d];
    let mut acc = vec![0.0; d];
    let denom = tokens.len() as f64 + d as f64 * model.alpha;
    for it in 0..iters {
        for (n, &w) in tokens.iter().enumerate() {
            counts[z[n]] -= 1;
            let mut c = 0.0;
            for t in 0..d {
                c += (counts[t] as f64 + model.alpha) * model.phi[t][w as usize];
                weights[t] = c;
            }
            z[n] = sample_cumulative(&weights, rng);
            counts[z[n]] += 1;
        }
        if it >= burn_in {
            for t in 0..d {
                acc[t] += (counts[t] as f64 + model.alpha) / denom;
            }
        }
    }
    crate::math::normalize_in_place(&mut acc);
    Ok(acc)
}

/// Mixtures for every case of `corpus`.
///
/// Documents whose key is already in the model reuse the fitted mixture
/// unless `refold` is set; the rest are folded in, each from its own RNG
/// stream so the result does not depend on thread scheduling.
pub fn infer_corpus_mixtures(
    model: &TopicModel,
    corpus: &Corpus,
    cfg: &LdaConfig,
    seed: u64,
    refold: bool,
) -> Result<Mixtures> {
    let cases: Result<Vec<CaseMixtures>> = corpus
        .cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let doc_mix = |key: String, doc: &Document, k: u64| -> Result<Vec<f64>> {
                if !refold {
                    if let Some(m) = model.doc_mixtures.get(&key) {
                        return Ok(m.clone());
                    }
                }
                let mut r = rng::derived(seed, i as u64, k);
                infer_mixture(model, doc, cfg.foldin_iters, cfg.foldin_burn_in, &mut r)
            };
            let theta = doc_mix(merits_key(&case.id), &case.merits, 0)?;
            let briefs = case
                .briefs
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    Ok(BriefMixture {
                        side: b.side,
                        mixture: doc_mix(brief_key(&case.id, k), &b.doc, k as u64 + 1)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CaseMixtures {
                case_id: case.id.clone(),
                theta,
                briefs,
            })
        })
        .collect();
    Ok(Mixtures {
        num_topics: model.num_topics,
        cases: cases?,
    })
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Greedy one-to-one matching of estimated topics to reference topics by
/// total variation; returns `(estimated, reference, tv)` triples. Ties go
/// to the lowest indices.
pub fn greedy_topic_alignment(estimated: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (r, rr) in reference.iter().enumerate() {
        for (e, er) in estimated.iter().enumerate() {
            pairs.push((total_variation(er, rr), r, e));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; estimated.len()];
    let mut used_r = vec![false; reference.len()];
    let mut out = Vec::new();
    for (tv, r, e) in pairs {
        if !used_e[e] && !used_r[r] {
            used_e[e] = true;
            used_r[r] = true;
            out.push((e, r, tv));
        }
    }
    out.sort_by_key(|&(_, r, _)| r);
    out
}
