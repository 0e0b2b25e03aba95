//! Cross-encoder reranking behind a pluggable scoring interface.
//!
//! Rerankers see one concatenated string per (query, document) pair:
//! `Question: {q} Document: {d}`, or `Question: {q} {w} Document: {d}` when
//! an expansion keyword is in play. The keyword slot always receives exactly
//! one string; multi-keyword baselines join their keywords into it.

pub mod lexical;
pub mod remote;

pub use lexical::LexicalStandin;
pub use remote::RemoteReranker;

use crate::corpus::{sort_desc_by_score, Corpus, Query, RankedList};
use crate::error::{GffError, Result};
use crate::filter::Keyword;

/// The two concatenation formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcatTemplate {
    /// `Question: {q} Document: {d}`
    Plain,
    /// `Question: {q} {w} Document: {d}`
    Expanded,
}

impl ConcatTemplate {
    /// Render the concatenated reranker input. Byte-deterministic; the
    /// expanded form requires a keyword, the plain form rejects one.
    pub fn render(&self, query: &Query, keyword: Option<&str>, doc_text: &str) -> Result<String> {
        match (self, keyword) {
            (ConcatTemplate::Plain, None) => {
                Ok(format!("Question: {} Document: {}", query.text, doc_text))
            }
            (ConcatTemplate::Expanded, Some(w)) => {
                Ok(format!("Question: {} {} Document: {}", query.text, w, doc_text))
            }
            (ConcatTemplate::Plain, Some(_)) => {
                Err(GffError::Reranker("plain concat format takes no keyword".into()))
            }
            (ConcatTemplate::Expanded, None) => {
                Err(GffError::Reranker("expanded concat format requires a keyword".into()))
            }
        }
    }
}

/// A similarity scorer over concatenated (query, document) inputs.
///
/// Scores must be finite. The local stand-in is deterministic per input;
/// remote implementations carry no such guarantee.
pub trait Reranker: Send + Sync {
    fn score(&self, concatenated_input: &str) -> Result<f64>;

    /// Score a batch, order-aligned with `inputs`. The default maps
    /// [`Reranker::score`]; remote implementations override it to batch
    /// requests.
    fn score_batch(&self, inputs: &[String]) -> Result<Vec<f64>> {
        inputs.iter().map(|i| self.score(i)).collect()
    }
}

/// Cut `text` after its first `max_tokens` tokens, keeping the original
/// bytes up to the end of the last kept token. Shorter texts pass through
/// unchanged.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> &str {
    if max_tokens == 0 {
        return "";
    }
    let mut completed = 0;
    let mut in_token = false;
    for (i, c) in text.char_indices() {
        let alnum = c.is_alphanumeric();
        if alnum && !in_token {
            in_token = true;
        } else if !alnum && in_token {
            in_token = false;
            completed += 1;
            if completed == max_tokens {
                return &text[..i];
            }
        }
    }
    text
}

/// Rescore a candidate list for one (query, optional keyword) pair.
///
/// Every candidate is rendered through the appropriate concat template
/// (documents truncated to `max_doc_tokens` tokens first) and scored in one
/// batch. Output carries the same doc set, sorted by descending score with
/// ties broken by ascending doc id. Any scoring failure fails the whole
/// list; partial lists are never produced.
pub fn rerank_list(
    reranker: &dyn Reranker,
    corpus: &Corpus,
    query: &Query,
    keyword: Option<&Keyword>,
    candidates: &RankedList,
    max_doc_tokens: usize,
) -> Result<RankedList> {
    if candidates.is_empty() {
        return Err(GffError::EmptyCandidates(query.id.clone()));
    }
    let template = if keyword.is_some() { ConcatTemplate::Expanded } else { ConcatTemplate::Plain };
    let keyword_str = keyword.map(|k| k.surface.as_str());

    let inputs: Vec<String> = candidates
        .doc_ids()
        .map(|doc_id| {
            let doc = corpus
                .document(doc_id)
                .ok_or_else(|| GffError::MissingDocument(doc_id.to_string()))?;
            template.render(query, keyword_str, truncate_tokens(&doc.text, max_doc_tokens))
        })
        .collect::<Result<_>>()?;

    let scores = reranker.score_batch(&inputs)?;
    if scores.len() != inputs.len() {
        return Err(GffError::ScoreCountMismatch { expected: inputs.len(), got: scores.len() });
    }

    let mut entries: Vec<(String, f64)> = Vec::with_capacity(scores.len());
    for ((doc_id, _), score) in candidates.entries.iter().zip(scores) {
        if !score.is_finite() {
            return Err(GffError::NonFiniteScore(doc_id.clone()));
        }
        entries.push((doc_id.clone(), score));
    }
    sort_desc_by_score(&mut entries);

    let tag = match keyword {
        Some(k) => format!("rerank:{}", k.canonical),
        None => "rerank".to_string(),
    };
    Ok(RankedList::new(query.id.clone(), entries, tag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    struct ConstantReranker(f64);
    impl Reranker for ConstantReranker {
        fn score(&self, _input: &str) -> Result<f64> {
            Ok(self.0)
        }
    }

    /// Scores by recorded rule, capturing inputs.
    struct RecordingReranker {
        inputs: std::sync::Mutex<Vec<String>>,
    }
    impl RecordingReranker {
        fn new() -> Self {
            RecordingReranker { inputs: std::sync::Mutex::new(Vec::new()) }
        }
    }
    impl Reranker for RecordingReranker {
        fn score(&self, input: &str) -> Result<f64> {
            let mut inputs = self.inputs.lock().unwrap();
            inputs.push(input.to_string());
            Ok(inputs.len() as f64)
        }
    }

    struct NanReranker;
    impl Reranker for NanReranker {
        fn score(&self, _input: &str) -> Result<f64> {
            Ok(f64::NAN)
        }
    }

    fn corpus() -> Corpus {
        Corpus::build_index(vec![
            Document::new("d1", "first document text"),
            Document::new("d2", "second document text"),
            Document::new("d3", "third document text"),
        ])
        .unwrap()
    }

    fn candidates() -> RankedList {
        RankedList::new(
            "q",
            vec![("d2".into(), 3.0), ("d1".into(), 2.0), ("d3".into(), 1.0)],
            "bm25",
        )
    }

    fn query() -> Query {
        Query::new("q", "some question").unwrap()
    }

    #[test]
    fn plain_template_used_without_keyword() {
        let reranker = RecordingReranker::new();
        rerank_list(&reranker, &corpus(), &query(), None, &candidates(), 512).unwrap();
        let inputs = reranker.inputs.lock().unwrap();
        assert_eq!(inputs[0], "Question: some question Document: second document text");
        assert!(inputs.iter().all(|i| i.starts_with("Question: some question Document: ")));
    }

    #[test]
    fn expanded_template_inserts_the_keyword() {
        let reranker = RecordingReranker::new();
        let kw = Keyword::new("Immune System", 2);
        rerank_list(&reranker, &corpus(), &query(), Some(&kw), &candidates(), 512).unwrap();
        let inputs = reranker.inputs.lock().unwrap();
        assert_eq!(
            inputs[0],
            "Question: some question Immune System Document: second document text"
        );
    }

    #[test]
    fn constant_scores_order_by_ascending_doc_id() {
        let out =
            rerank_list(&ConstantReranker(1.0), &corpus(), &query(), None, &candidates(), 512)
                .unwrap();
        let ids: Vec<_> = out.doc_ids().collect();
        assert_eq!(ids, vec!["d1", "d2", "d3"]);
    }

    #[test]
    fn output_doc_set_equals_input_doc_set() {
        let out =
            rerank_list(&ConstantReranker(2.5), &corpus(), &query(), None, &candidates(), 512)
                .unwrap();
        let mut input_ids: Vec<_> = candidates().doc_ids().map(str::to_string).collect();
        let mut output_ids: Vec<_> = out.doc_ids().map(str::to_string).collect();
        input_ids.sort();
        output_ids.sort();
        assert_eq!(input_ids, output_ids);
        out.validate().unwrap();
    }

    #[test]
    fn empty_candidates_are_rejected() {
        let empty = RankedList::new("q", vec![], "bm25");
        let err =
            rerank_list(&ConstantReranker(1.0), &corpus(), &query(), None, &empty, 512).unwrap_err();
        assert!(matches!(err, GffError::EmptyCandidates(_)));
    }

    #[test]
    fn unresolvable_doc_fails_the_list() {
        let bad = RankedList::new("q", vec![("ghost".into(), 1.0)], "bm25");
        let err =
            rerank_list(&ConstantReranker(1.0), &corpus(), &query(), None, &bad, 512).unwrap_err();
        assert!(matches!(err, GffError::MissingDocument(_)));
    }

    #[test]
    fn non_finite_score_fails_the_whole_list() {
        let err = rerank_list(&NanReranker, &corpus(), &query(), None, &candidates(), 512)
            .unwrap_err();
        assert!(matches!(err, GffError::NonFiniteScore(_)));
    }

    #[test]
    fn truncation_keeps_leading_tokens_verbatim() {
        assert_eq!(truncate_tokens("one two three four", 2), "one two");
        assert_eq!(truncate_tokens("one, two! three", 2), "one, two");
        assert_eq!(truncate_tokens("short text", 512), "short text");
        assert_eq!(truncate_tokens("exact fit", 2), "exact fit");
        assert_eq!(truncate_tokens("anything", 0), "");
    }

    #[test]
    fn concat_render_rejects_mismatched_keyword_use() {
        let q = query();
        assert!(ConcatTemplate::Plain.render(&q, Some("kw"), "d").is_err());
        assert!(ConcatTemplate::Expanded.render(&q, None, "d").is_err());
    }
}
