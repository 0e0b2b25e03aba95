//! RM3 pseudo-relevance feedback.
//!
//! Estimates a relevance-model term distribution from the top BM25
//! documents and interpolates it with the query's own unigram
//! distribution. Used both as a classical expansion baseline and as the
//! keyword source for the PRF-weighted filter path.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Bm25Params, Corpus, Query};
use crate::error::{Flagged, GffError, Result};
use crate::filter::Keyword;

/// A term with a probability mass in [0, 1].
///
/// Within one expansion result the weights sum to 1 (within 1e-9).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

impl WeightedTerm {
    pub fn new(term: impl Into<String>, weight: f64) -> Self {
        WeightedTerm { term: term.into(), weight }
    }
}

/// Maximum-likelihood unigram distribution of a token sequence.
fn unigram_mle(tokens: &[String]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.clone()).or_insert(0.0) += 1.0;
    }
    let total = tokens.len() as f64;
    for v in counts.values_mut() {
        *v /= total;
    }
    counts
}

/// Sort descending by weight, ties ascending by term, truncate to `k`, and
/// renormalize the survivors to sum to 1.
fn truncate_and_renormalize(dist: BTreeMap<String, f64>, k: usize) -> Vec<WeightedTerm> {
    let mut terms: Vec<WeightedTerm> =
        dist.into_iter().map(|(term, weight)| WeightedTerm { term, weight }).collect();
    terms.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
    terms.truncate(k);
    let sum: f64 = terms.iter().map(|t| t.weight).sum();
    if sum > 0.0 {
        for t in &mut terms {
            t.weight /= sum;
        }
    }
    terms
}

/// RM3 expansion: relevance model over the top `fb_docs` BM25 documents,
/// interpolated with the query distribution at weight `lambda`.
///
/// The relevance model uses maximum-likelihood document language models
/// (tf / length) and document priors proportional to the min-max-normalized
/// BM25 scores of the feedback documents (uniform when all scores tie). The
/// interpolated distribution `lambda * P(w|q) + (1 - lambda) * P(w|R)` is
/// truncated to the `fb_terms` heaviest terms (ties by ascending term) and
/// renormalized to sum to 1.
///
/// When retrieval returns nothing the query's own unigram distribution is
/// returned with a warning.
pub fn rm3_expand(
    corpus: &Corpus,
    query: &Query,
    fb_docs: usize,
    fb_terms: usize,
    lambda: f64,
    params: &Bm25Params,
) -> Result<Flagged<Vec<WeightedTerm>>> {
    if fb_docs == 0 || fb_terms == 0 {
        return Err(GffError::InvalidConfig("fb_docs and fb_terms must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(GffError::InvalidConfig(format!("lambda must lie in [0, 1], got {lambda}")));
    }

    let query_dist = unigram_mle(&tokenize(&query.text));
    let feedback = corpus.bm25_retrieve(query, fb_docs, params)?.value;

    if feedback.is_empty() {
        let terms = truncate_and_renormalize(query_dist, fb_terms);
        return Ok(Flagged::flagged(
            terms,
            format!("no feedback documents for query {:?}; using the query distribution", query.id),
        ));
    }

    // Document priors: min-max-normalized BM25 scores, uniform when degenerate.
    let scores: Vec<f64> = feedback.entries.iter().map(|&(_, s)| s).collect();
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = if max > min {
        scores.iter().map(|s| (s - min) / (max - min)).collect()
    } else {
        vec![1.0; scores.len()]
    };
    let prior_sum: f64 = raw.iter().sum();
    let priors: Vec<f64> = if prior_sum > 0.0 {
        raw.iter().map(|p| p / prior_sum).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    };

    // Relevance model: P(w|R) ∝ Σ_d prior(d) * tf(w, d) / |d|.
    let mut relevance: BTreeMap<String, f64> = BTreeMap::new();
    for ((doc_id, _), prior) in feedback.entries.iter().zip(&priors) {
        let doc = corpus
            .document(doc_id)
            .ok_or_else(|| GffError::MissingDocument(doc_id.clone()))?;
        let len = doc.length as f64;
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokenize(&doc.text) {
            *counts.entry(t).or_insert(0.0) += 1.0;
        }
        for (t, tf) in counts {
            *relevance.entry(t).or_insert(0.0) += prior * tf / len;
        }
    }
    let rel_sum: f64 = relevance.values().sum();
    if rel_sum > 0.0 {
        for v in relevance.values_mut() {
            *v /= rel_sum;
        }
    }

    // Interpolate, dropping zero-mass terms so endpoint cases stay clean.
    let mut combined: BTreeMap<String, f64> = BTreeMap::new();
    for (t, p) in &query_dist {
        *combined.entry(t.clone()).or_insert(0.0) += lambda * p;
    }
    for (t, p) in &relevance {
        *combined.entry(t.clone()).or_insert(0.0) += (1.0 - lambda) * p;
    }
    combined.retain(|_, w| *w > 0.0);

    Ok(Flagged::clean(truncate_and_renormalize(combined, fb_terms)))
}

/// Top-`k` expansion terms by weight, skipping terms that already occur in
/// the tokenized query. Ties break by ascending term order. Fewer than `k`
/// survivors is not an error.
///
/// The `votes` field of each returned keyword carries its 1-based rank by
/// weight, not a vote count.
pub fn rm3_keywords(expansion: &[WeightedTerm], k: usize, query: &Query) -> Result<Vec<Keyword>> {
    if k == 0 {
        return Err(GffError::InvalidConfig("keyword count k must be >= 1".into()));
    }
    let query_terms: std::collections::HashSet<String> = tokenize(&query.text).into_iter().collect();
    let mut candidates: Vec<&WeightedTerm> =
        expansion.iter().filter(|t| !query_terms.contains(&t.term.to_lowercase())).collect();
    candidates.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
    candidates.truncate(k);
    Ok(candidates
        .into_iter()
        .enumerate()
        .map(|(i, t)| Keyword::new(t.term.clone(), i + 1))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn corpus(texts: &[(&str, &str)]) -> Corpus {
        let docs = texts.iter().map(|&(id, text)| Document::new(id, text)).collect();
        Corpus::build_index(docs).unwrap()
    }

    fn weights_sum_to_one(terms: &[WeightedTerm]) {
        let sum: f64 = terms.iter().map(|t| t.weight).sum();
        assert!((sum - 1.0).abs() < 1e-9, "weights sum to {sum}");
        assert!(terms.iter().all(|t| t.weight >= 0.0 && t.weight <= 1.0 + 1e-12));
    }

    #[test]
    fn lambda_one_is_query_distribution() {
        let corpus = corpus(&[("d1", "alpha noise"), ("d2", "beta other")]);
        let query = Query::new("q", "alpha beta alpha").unwrap();
        let out = rm3_expand(&corpus, &query, 10, 10, 1.0, &Bm25Params::default()).unwrap().value;
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].term, "alpha");
        assert!((out[0].weight - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(out[1].term, "beta");
        assert!((out[1].weight - 1.0 / 3.0).abs() < 1e-9);
        weights_sum_to_one(&out);
    }

    #[test]
    fn lambda_zero_single_doc_is_doc_distribution() {
        let corpus = corpus(&[("d1", "hpv hpv strains")]);
        let query = Query::new("q", "hpv").unwrap();
        let out = rm3_expand(&corpus, &query, 10, 2, 0.0, &Bm25Params::default()).unwrap();
        assert!(!out.is_flagged());
        let out = out.value;
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].term, "hpv");
        assert!((out[0].weight - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(out[1].term, "strains");
        assert!((out[1].weight - 1.0 / 3.0).abs() < 1e-9);
        weights_sum_to_one(&out);
    }

    #[test]
    fn empty_retrieval_falls_back_to_query_distribution() {
        let corpus = corpus(&[("d1", "alpha"), ("d2", "beta")]);
        let query = Query::new("q", "zeta zeta eta").unwrap();
        let out = rm3_expand(&corpus, &query, 10, 10, 0.5, &Bm25Params::default()).unwrap();
        assert!(out.is_flagged());
        let terms = out.value;
        assert_eq!(terms[0].term, "zeta");
        assert!((terms[0].weight - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(terms[1].term, "eta");
        weights_sum_to_one(&terms);
    }

    #[test]
    fn truncation_renormalizes() {
        // d1 only: distribution {a: 1/2, b: 1/4, c: 1/4} truncated to 2 terms
        // keeps a and b (tie a-b broken by weight, b-c by term order), then
        // renormalizes to {a: 2/3, b: 1/3}.
        let corpus = corpus(&[("d1", "a a b c")]);
        let query = Query::new("q", "a").unwrap();
        let out = rm3_expand(&corpus, &query, 10, 2, 0.0, &Bm25Params::default()).unwrap().value;
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].term, "a");
        assert!((out[0].weight - (0.5 / 0.75)).abs() < 1e-9);
        assert_eq!(out[1].term, "b");
        assert!((out[1].weight - (0.25 / 0.75)).abs() < 1e-9);
        weights_sum_to_one(&out);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let corpus = corpus(&[("d1", "x")]);
        let query = Query::new("q", "x").unwrap();
        let p = Bm25Params::default();
        assert!(rm3_expand(&corpus, &query, 0, 10, 0.5, &p).is_err());
        assert!(rm3_expand(&corpus, &query, 10, 0, 0.5, &p).is_err());
        assert!(rm3_expand(&corpus, &query, 10, 10, 1.5, &p).is_err());
        assert!(rm3_expand(&corpus, &query, 10, 10, -0.1, &p).is_err());
    }

    #[test]
    fn keywords_take_top_k_by_weight() {
        let expansion = vec![
            WeightedTerm::new("a", 0.5),
            WeightedTerm::new("b", 0.3),
            WeightedTerm::new("c", 0.2),
        ];
        let query = Query::new("q", "unrelated").unwrap();
        let ks = rm3_keywords(&expansion, 2, &query).unwrap();
        let terms: Vec<_> = ks.iter().map(|k| k.surface.as_str()).collect();
        assert_eq!(terms, vec!["a", "b"]);
        assert_eq!(ks[0].votes, 1);
        assert_eq!(ks[1].votes, 2);
    }

    #[test]
    fn keywords_exclude_query_terms() {
        let expansion = vec![WeightedTerm::new("a", 0.5), WeightedTerm::new("b", 0.3)];
        let query = Query::new("q", "a").unwrap();
        let ks = rm3_keywords(&expansion, 2, &query).unwrap();
        let terms: Vec<_> = ks.iter().map(|k| k.surface.as_str()).collect();
        assert_eq!(terms, vec!["b"]);
    }

    #[test]
    fn keywords_k_beyond_available_returns_all() {
        let expansion = vec![WeightedTerm::new("a", 0.6), WeightedTerm::new("b", 0.4)];
        let query = Query::new("q", "unrelated").unwrap();
        let ks = rm3_keywords(&expansion, 10, &query).unwrap();
        assert_eq!(ks.len(), 2);
    }

    #[test]
    fn keyword_weight_ties_break_by_term() {
        let expansion = vec![WeightedTerm::new("zeta", 0.5), WeightedTerm::new("alpha", 0.5)];
        let query = Query::new("q", "unrelated").unwrap();
        let ks = rm3_keywords(&expansion, 1, &query).unwrap();
        assert_eq!(ks[0].surface, "alpha");
    }
}
