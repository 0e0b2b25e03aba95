//! Deterministic local reranker: an idf-weighted term-overlap proxy.
//!
//! A stand-in for a neural cross-encoder that keeps end-to-end runs cheap
//! and exactly reproducible. The score is the sum of idf(t) over the unique
//! terms shared by the question and document segments, so it is monotone in
//! shared-term count; expansion keywords influence it because they are part
//! of the question segment.

use std::collections::HashSet;

use crate::corpus::{tokenize, Corpus};
use crate::error::{GffError, Result};
use crate::rerank::Reranker;

const QUESTION_MARKER: &str = "Question: ";
const DOCUMENT_MARKER: &str = " Document: ";

/// Term-overlap scorer. Corpus-backed mode weights each shared term by
/// ln(1 + N / max(df, 1)); uniform mode weights every term 1.
pub struct LexicalStandin<'a> {
    corpus: Option<&'a Corpus>,
}

impl<'a> LexicalStandin<'a> {
    /// Weight shared terms by inverse document frequency in `corpus`.
    /// Terms unseen in the corpus weigh as df = 1.
    pub fn corpus_backed(corpus: &'a Corpus) -> Self {
        LexicalStandin { corpus: Some(corpus) }
    }

    /// Weight every shared term equally (idf = 1): pure overlap count.
    pub fn uniform() -> LexicalStandin<'static> {
        LexicalStandin { corpus: None }
    }

    fn idf(&self, term: &str) -> f64 {
        match self.corpus {
            None => 1.0,
            Some(corpus) => {
                let df = corpus.document_frequency(term).max(1) as f64;
                (1.0 + corpus.doc_count() as f64 / df).ln()
            }
        }
    }
}

fn split_segments(input: &str) -> Result<(&str, &str)> {
    let rest = input
        .strip_prefix(QUESTION_MARKER)
        .ok_or_else(|| GffError::Reranker(format!("input lacks the {QUESTION_MARKER:?} marker")))?;
    let split = rest
        .find(DOCUMENT_MARKER)
        .ok_or_else(|| GffError::Reranker(format!("input lacks the {DOCUMENT_MARKER:?} marker")))?;
    Ok((&rest[..split], &rest[split + DOCUMENT_MARKER.len()..]))
}

impl Reranker for LexicalStandin<'_> {
    fn score(&self, concatenated_input: &str) -> Result<f64> {
        let (question, document) = split_segments(concatenated_input)?;
        let q_terms: HashSet<String> = tokenize(question).into_iter().collect();
        let d_terms: HashSet<String> = tokenize(document).into_iter().collect();
        // Sorted summation order keeps the float result bit-stable; hash
        // iteration order varies per process and per call.
        let mut shared: Vec<&String> = q_terms.intersection(&d_terms).collect();
        shared.sort();
        Ok(shared.into_iter().map(|t| self.idf(t)).sum())
    }
}
