//! JSONL corpus format: a header line followed by one case object per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AmicusBrief, Case, Corpus, Document, Side, Vocabulary};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    vocabulary: Vec<String>,
    justices: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseRecord {
    id: String,
    merits: BTreeMap<u32, u32>,
    #[serde(default)]
    briefs: Vec<BriefRecord>,
    votes: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BriefRecord {
    side: String,
    tokens: BTreeMap<u32, u32>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_corpus<R: Read>(reader: R) -> Result<Corpus> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header_line = loop {
        match lines.next() {
            None => return Err(parse_err(1, "missing header line")),
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io("<corpus>", e))?;
                if !line.trim().is_empty() {
                    break (i + 1, line);
                }
            }
        }
    };
    let header: Header = serde_json::from_str(&header_line.1)
        .map_err(|e| parse_err(header_line.0, format!("malformed header: {e}")))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(parse_err(
            header_line.0,
            format!("unsupported schema_version {}", header.schema_version),
        ));
    }
    let vocabulary = Vocabulary::new(header.vocabulary).map_err(|e| parse_err(header_line.0, e.to_string()))?;
    let roster: BTreeMap<&str, usize> = header
        .justices
        .iter()
        .enumerate()
        .map(|(i, j)| (j.as_str(), i))
        .collect();

    let mut cases = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CaseRecord = serde_json::from_str(&line)
            .map_err(|e| parse_err(lineno, format!("malformed case record: {e}")))?;
        let merits = Document::from_counts(rec.merits).map_err(|e| parse_err(lineno, e.to_string()))?;
        let mut briefs = Vec::with_capacity(rec.briefs.len());
        for b in rec.briefs {
            // Briefs whose side could not be determined carry no usable evidence.
            if matches!(b.side.as_str(), "neither" | "unknown") {
                log::warn!("line {lineno}: dropping brief with side {:?}", b.side);
                continue;
            }
            let side: Side = b.side.parse().map_err(|e: Error| parse_err(lineno, e.to_string()))?;
            let doc = Document::from_counts(b.tokens).map_err(|e| parse_err(lineno, e.to_string()))?;
            briefs.push(AmicusBrief { doc, side });
        }
        let mut votes = BTreeMap::new();
        for (justice, vote) in rec.votes {
            let &j = roster
                .get(justice.as_str())
                .ok_or_else(|| parse_err(lineno, format!("unknown justice id {justice:?}")))?;
            let side = match vote.as_str() {
                "petitioner" => Side::Petitioner,
                "respondent" => Side::Respondent,
                other => {
                    return Err(parse_err(
                        lineno,
                        format!("vote value {other:?} is not petitioner or respondent"),
                    ))
                }
            };
            votes.insert(j, side);
        }
        cases.push(Case {
            id: rec.id,
            merits,
            briefs,
            votes,
        });
    }
    Corpus::new(vocabulary, header.justices, cases)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    let io = |e| Error::io("<corpus>", e);
    let header = Header {
        schema_version: SCHEMA_VERSION,
        vocabulary: corpus.vocabulary.terms().to_vec(),
        justices: corpus.justices.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for case in &corpus.cases {
        let rec = CaseRecord {
            id: case.id.clone(),
            merits: case.merits.counts().clone(),
            briefs: case
                .briefs
                .iter()
                .map(|b| BriefRecord {
                    side: b.side.as_str().to_string(),
                    tokens: b.doc.counts().clone(),
                })
                .collect(),
            votes: case
                .votes
                .iter()
                .map(|(&j, s)| (corpus.justices[j].clone(), s.as_str().to_string()))
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}
