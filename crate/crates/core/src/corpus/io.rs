use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{split_words, truncate_bounds, Corpus, Document, Query, Vocabulary};
use crate::error::{Error, Result};

/// One JSONL line of a corpus or query file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
}

/// Graded judgement, serialized as `query_id doc_id grade`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Qrel {
    pub query_id: String,
    pub doc_id: String,
    pub grade: u8,
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text)
}

pub(crate) fn parse_records(text: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: n + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Tokenizes, truncates to `max_doc_len` and builds the vocabulary from the
/// truncated documents. Deterministic in the record order.
pub fn ingest_records(records: &[Record], max_doc_len: usize) -> Result<Corpus> {
    if max_doc_len == 0 {
        return Err(Error::InvalidParameter("max_doc_len must be positive".into()));
    }
    let mut seen = HashSet::new();
    let mut split = Vec::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
        let (mut words, bounds) = split_words(&r.text);
        if words.is_empty() {
            return Err(Error::EmptyDocument(r.id.clone()));
        }
        words.truncate(max_doc_len);
        let bounds = truncate_bounds(&bounds, words.len());
        split.push((words, bounds));
    }
    let vocab = Vocabulary::from_words(
        split
            .iter()
            .map(|(words, _)| words.iter().map(String::as_str)),
    );
    let docs = records
        .iter()
        .zip(split)
        .map(|(r, (words, bounds))| Document {
            id: r.id.clone(),
            text: r.text.clone(),
            tokens: words.iter().map(|w| vocab.id(w)).collect(),
            sentence_bounds: bounds,
        })
        .collect();
    Corpus::new(vocab, docs)
}

pub fn ingest_corpus(path: &Path, max_doc_len: usize) -> Result<Corpus> {
    let records = read_records(path)?;
    ingest_records(&records, max_doc_len)
}

pub fn queries_from_records(records: &[Record], vocab: &Vocabulary) -> Result<Vec<Query>> {
    let mut seen = HashSet::new();
    records
        .iter()
        .map(|r| {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            Query::new(r.id.clone(), r.text.clone(), vocab)
        })
        .collect()
}

pub fn load_queries(path: &Path, vocab: &Vocabulary) -> Result<Vec<Query>> {
    queries_from_records(&read_records(path)?, vocab)
}

pub fn load_qrels(path: &Path) -> Result<Vec<Qrel>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |reason: &str| Error::MalformedLine {
            line: n + 1,
            reason: reason.to_string(),
        };
        if fields.len() != 3 {
            return Err(bad("expected `query_id doc_id grade`"));
        }
        let grade = fields[2].parse().map_err(|_| bad("grade is not an integer"))?;
        out.push(Qrel {
            query_id: fields[0].to_string(),
            doc_id: fields[1].to_string(),
            grade,
        });
    }
    Ok(out)
}

pub fn write_qrels(path: &Path, qrels: &[Qrel]) -> Result<()> {
    let mut out = String::new();
    for q in qrels {
        out.push_str(&format!("{} {} {}\n", q.query_id, q.doc_id, q.grade));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
