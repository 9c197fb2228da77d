//! Cases, documents, and votes over a shared phrase vocabulary.

mod io;
pub mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use synth::{generate_synthetic, sample_brief_mixture, GroundTruth, SynthConfig};

/// Roster index of a justice.
pub type JusticeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Petitioner,
    Respondent,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Petitioner, Side::Respondent];

    pub fn flip(self) -> Side {
        match self {
            Side::Petitioner => Side::Respondent,
            Side::Respondent => Side::Petitioner,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Petitioner => "petitioner",
            Side::Respondent => "respondent",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "petitioner" | "pet" | "p" => Ok(Side::Petitioner),
            "respondent" | "resp" | "r" => Ok(Side::Respondent),
            other => Err(Error::invalid(format!(
                "side must be petitioner or respondent, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary term {t:?}")));
            }
        }
        Ok(Vocabulary { terms, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn lookup(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Sparse bag of token ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    counts: BTreeMap<u32, u32>,
    total: u64,
}

impl Document {
    pub fn from_counts(counts: BTreeMap<u32, u32>) -> Result<Self> {
        if let Some((id, _)) = counts.iter().find(|(_, &c)| c == 0) {
            return Err(Error::invalid(format!("token {id} has zero count")));
        }
        let total = counts.values().map(|&c| c as u64).sum();
        Ok(Document { counts, total })
    }

    pub fn from_tokens(tokens: impl IntoIterator<Item = u32>) -> Self {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
            total += 1;
        }
        Document { counts, total }
    }

    pub fn counts(&self) -> &BTreeMap<u32, u32> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn max_token(&self) -> Option<u32> {
        self.counts.keys().next_back().copied()
    }

    /// Tokens expanded in ascending id order.
    pub fn tokens(&self) -> impl Iterator<Item = u32> + '_ {
        self.counts
            .iter()
            .flat_map(|(&t, &c)| std::iter::repeat_n(t, c as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmicusBrief {
    pub doc: Document,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub id: String,
    pub merits: Document,
    pub briefs: Vec<AmicusBrief>,
    pub votes: BTreeMap<JusticeId, Side>,
}

impl Case {
    pub fn briefs_on(&self, side: Side) -> impl Iterator<Item = (usize, &AmicusBrief)> {
        self.briefs
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.side == side)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub justices: Vec<String>,
    pub cases: Vec<Case>,
}

impl Corpus {
    /// Builds a corpus after checking every type invariant.
    pub fn new(vocabulary: Vocabulary, justices: Vec<String>, cases: Vec<Case>) -> Result<Self> {
        let corpus = Corpus {
            vocabulary,
            justices,
            cases,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        if self.justices.len() < 2 {
            return Err(Error::invalid("roster must contain at least two justices"));
        }
        let mut seen = HashSet::new();
        for j in &self.justices {
            if !seen.insert(j.as_str()) {
                return Err(Error::invalid(format!("duplicate justice id {j:?}")));
            }
        }
        let v = self.vocabulary.len() as u32;
        let mut ids = HashSet::new();
        for case in &self.cases {
            if !ids.insert(case.id.as_str()) {
                return Err(Error::invalid(format!("duplicate case id {:?}", case.id)));
            }
            if case.merits.is_empty() {
                return Err(Error::invalid(format!("case {:?} has empty merits", case.id)));
            }
            let docs = std::iter::once(&case.merits).chain(case.briefs.iter().map(|b| &b.doc));
            for doc in docs {
                if let Some(t) = doc.max_token() {
                    if t >= v {
                        return Err(Error::invalid(format!(
                            "case {:?}: token id {t} outside vocabulary of size {v}",
                            case.id
                        )));
                    }
                }
            }
            if let Some(&j) = case.votes.keys().find(|&&j| j >= self.justices.len()) {
                return Err(Error::invalid(format!(
                    "case {:?}: justice index {j} outside roster",
                    case.id
                )));
            }
        }
        Ok(())
    }

    pub fn justice_index(&self, name: &str) -> Option<JusticeId> {
        self.justices.iter().position(|j| j == name)
    }

    pub fn case_index(&self, id: &str) -> Option<usize> {
        self.cases.iter().position(|c| c.id == id)
    }

    pub fn num_votes(&self) -> usize {
        self.cases.iter().map(|c| c.votes.len()).sum()
    }

    /// Sub-corpus holding the given cases, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            vocabulary: self.vocabulary.clone(),
            justices: self.justices.clone(),
            cases: indices.iter().map(|&i| self.cases[i].clone()).collect(),
        }
    }
}

/// Document key for a case's merits text.
pub fn merits_key(case_id: &str) -> String {
    format!("{case_id}/merits")
}

/// Document key for the `k`-th amicus brief of a case.
pub fn brief_key(case_id: &str, k: usize) -> String {
    format!("{case_id}/brief/{k}")
}
