//! Document collection, inverted index, and BM25 first-stage retrieval.
//!
//! The corpus is built once, is immutable afterwards, and may be shared
//! freely across threads for concurrent retrieval.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Flagged, GffError, Result};

/// Lowercase a text into Unicode-alphanumeric terms.
///
/// Splits on every non-alphanumeric character, drops empty segments, and
/// lowercases the rest. No stemming, no stopword removal; duplicates are
/// preserved in order.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// One text unit in the collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Token count of `text` under [`tokenize`].
    pub length: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let length = tokenize(&text).len();
        Document { id: id.into(), text, length }
    }
}

/// An identified search request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
}

impl Query {
    /// Build a query, rejecting text that is empty after trimming.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(GffError::EmptyQueryText(id));
        }
        Ok(Query { id, text })
    }
}

/// An ordered list of `(doc_id, score)` entries, the currency between
/// retrieval, reranking, and fusion stages.
///
/// Scores are non-increasing, doc ids unique, and the rank of entry `i`
/// is `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<(String, f64)>,
    /// Label of the stage that produced the list (e.g. "bm25", "rerank").
    pub tag: String,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, entries: Vec<(String, f64)>, tag: impl Into<String>) -> Self {
        RankedList { query_id: query_id.into(), entries, tag: tag.into() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of a document, if present.
    pub fn rank_of(&self, doc_id: &str) -> Option<usize> {
        self.entries.iter().position(|(d, _)| d == doc_id).map(|i| i + 1)
    }

    pub fn score_of(&self, doc_id: &str) -> Option<f64> {
        self.entries.iter().find(|(d, _)| d == doc_id).map(|&(_, s)| s)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(d, _)| d.as_str())
    }

    /// Check the ordering, uniqueness, and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let mut prev = f64::INFINITY;
        for (doc_id, score) in &self.entries {
            if !score.is_finite() {
                return Err(GffError::InvalidRankedList(format!(
                    "non-finite score for {doc_id:?} in query {:?}",
                    self.query_id
                )));
            }
            if *score > prev {
                return Err(GffError::InvalidRankedList(format!(
                    "scores increase at {doc_id:?} in query {:?}",
                    self.query_id
                )));
            }
            prev = *score;
            if !seen.insert(doc_id.as_str()) {
                return Err(GffError::InvalidRankedList(format!(
                    "duplicate doc id {doc_id:?} in query {:?}",
                    self.query_id
                )));
            }
        }
        Ok(())
    }
}

/// Sort `(doc_id, score)` pairs by descending score, ties by ascending doc id.
pub(crate) fn sort_desc_by_score(entries: &mut [(String, f64)]) {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// BM25 parameters (Robertson/Okapi form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

/// An immutable document collection with an inverted index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    /// Document id -> position in `documents`.
    id_to_idx: BTreeMap<String, usize>,
    /// Term -> postings as (document index, term frequency), tf >= 1.
    postings: HashMap<String, Vec<(u32, u32)>>,
    avg_doc_length: f64,
}

impl Corpus {
    /// Build the inverted index over a document list.
    ///
    /// Rejects duplicate document ids, naming the offender.
    pub fn build_index(documents: Vec<Document>) -> Result<Self> {
        let mut id_to_idx = BTreeMap::new();
        for (idx, doc) in documents.iter().enumerate() {
            if id_to_idx.insert(doc.id.clone(), idx).is_some() {
                return Err(GffError::DuplicateDocId(doc.id.clone()));
            }
        }

        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (idx, doc) in documents.iter().enumerate() {
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for term in tokenize(&doc.text) {
                *counts.entry(term).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push((idx as u32, tf));
            }
        }

        let avg_doc_length = if documents.is_empty() {
            0.0
        } else {
            documents.iter().map(|d| d.length as f64).sum::<f64>() / documents.len() as f64
        };

        Ok(Corpus { documents, id_to_idx, postings, avg_doc_length })
    }

    pub fn doc_count(&self) -> usize {
        self.documents.len()
    }

    /// Number of distinct indexed terms.
    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.id_to_idx.get(id).map(|&idx| &self.documents[idx])
    }

    /// All documents, in insertion order.
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Number of documents containing `term`.
    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Postings for `term` as `(doc_id, term_frequency)` pairs.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (&str, u32)> {
        self.postings
            .get(term)
            .into_iter()
            .flatten()
            .map(|&(idx, tf)| (self.documents[idx as usize].id.as_str(), tf))
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.document_frequency(term) as f64;
        if df == 0.0 {
            return 0.0;
        }
        // Lucene-style idf: strictly positive for df >= 1, so common terms
        // never contribute negative scores.
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 similarity of one document to a query token bag.
    ///
    /// score(q, d) = sum over query tokens t of
    ///   idf(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
    ///
    /// with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)). Query tokens are
    /// summed with multiplicity.
    pub fn bm25_score(&self, query_tokens: &[String], doc_id: &str, params: &Bm25Params) -> f64 {
        let Some(&idx) = self.id_to_idx.get(doc_id) else { return 0.0 };
        let doc = &self.documents[idx];
        let norm = if self.avg_doc_length > 0.0 {
            1.0 - params.b + params.b * doc.length as f64 / self.avg_doc_length
        } else {
            1.0 - params.b
        };
        let mut score = 0.0;
        for term in query_tokens {
            let tf = self
                .postings
                .get(term)
                .and_then(|list| list.iter().find(|&&(i, _)| i as usize == idx))
                .map_or(0.0, |&(_, tf)| tf as f64);
            if tf == 0.0 {
                continue;
            }
            score += self.idf(term) * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
        score
    }

    /// Top-`depth` documents by BM25 score.
    ///
    /// Documents scoring exactly zero are excluded; ties are broken by
    /// ascending doc id. A query that tokenizes to nothing yields an empty
    /// list flagged with a warning.
    pub fn bm25_retrieve(&self, query: &Query, depth: usize, params: &Bm25Params) -> Result<Flagged<RankedList>> {
        if depth == 0 {
            return Err(GffError::InvalidConfig("retrieval depth must be >= 1".into()));
        }
        let tokens = tokenize(&query.text);
        if tokens.is_empty() {
            let list = RankedList::new(query.id.clone(), Vec::new(), "bm25");
            return Ok(Flagged::flagged(list, format!("query {:?} tokenizes to empty", query.id)));
        }

        // Accumulate per document over the postings of each query token.
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &tokens {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            if idf == 0.0 {
                continue;
            }
            for &(idx, tf) in list {
                let doc = &self.documents[idx as usize];
                let norm = if self.avg_doc_length > 0.0 {
                    1.0 - params.b + params.b * doc.length as f64 / self.avg_doc_length
                } else {
                    1.0 - params.b
                };
                let tf = tf as f64;
                let contribution = idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
                *scores.entry(idx).or_insert(0.0) += contribution;
            }
        }

        let mut entries: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(idx, s)| (self.documents[idx as usize].id.clone(), s))
            .collect();
        sort_desc_by_score(&mut entries);
        entries.truncate(depth);
        Ok(Flagged::clean(RankedList::new(query.id.clone(), entries, "bm25")))
    }
}

#[derive(Deserialize)]
struct JsonlDoc {
    #[serde(rename = "_id")]
    id: String,
    text: String,
}

/// Read a BEIR-style JSON-lines corpus: one object per line with `_id` and
/// `text` fields. Unknown fields are ignored; blank lines are skipped.
pub fn read_corpus_jsonl(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| GffError::io(path, e))?;
    let mut docs = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GffError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonlDoc = serde_json::from_str(&line).map_err(|e| GffError::MalformedLine {
            path: path.display().to_string(),
            line: line_no + 1,
            msg: e.to_string(),
        })?;
        docs.push(Document::new(parsed.id, parsed.text));
    }
    Ok(docs)
}

/// Read queries from TSV lines of `query_id<TAB>text`.
pub fn read_queries_tsv(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| GffError::io(path, e))?;
    let mut queries = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GffError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: &str| GffError::MalformedLine {
            path: path.display().to_string(),
            line: line_no + 1,
            msg: msg.to_string(),
        };
        let (id, text) = line.split_once('\t').ok_or_else(|| malformed("expected query_id<TAB>text"))?;
        if id.is_empty() {
            return Err(malformed("empty query id"));
        }
        queries.push(Query::new(id, text).map_err(|_| malformed("empty query text"))?);
    }
    Ok(queries)
}
