//! Keyword generation strategies over a pluggable text generator.
//!
//! Q2K asks the generator for keywords directly; Q2D asks for a whole
//! passage; Q2D2K chains the two (generate documents, then extract keywords
//! from each); PRF+D2K replaces the generated documents with BM25-retrieved
//! ones. Every generator call is recorded as a [`GenerationTranscript`] and
//! can be cached on disk.

pub mod cache;
pub mod mock;
pub mod prompt;
pub mod remote;

pub use cache::TranscriptCache;
pub use mock::ScriptedGenerator;
pub use prompt::{PromptTemplate, PromptTemplates, TemplateName};
pub use remote::RemoteGenerator;

use serde::{Deserialize, Serialize};

use crate::corpus::{Bm25Params, Corpus, Query};
use crate::error::{GffError, Result};
use cache::CacheKey;
use prompt::{parse_keywords, parse_passage, render_prompt};

/// What a generator call was asked to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptKind {
    Keywords,
    Document,
}

/// Record of one generator call: the raw output plus what the parser made
/// of it. Parsed fields are re-derivable from `raw_output` (keyword lists
/// after applying `keyword_cap`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTranscript {
    pub query_id: String,
    pub strategy: String,
    /// 1-based self-consistency round.
    pub round: u32,
    /// 0-based call index within the round.
    pub slot: u32,
    pub kind: TranscriptKind,
    pub raw_output: String,
    pub parsed_keywords: Vec<String>,
    pub parsed_documents: Vec<String>,
    /// Keywords-per-call cap in force when `parsed_keywords` was produced.
    pub keyword_cap: Option<usize>,
    /// True when the endpoint failed after exhausting retries; such
    /// transcripts are never cached.
    pub failed: bool,
}

/// A text generator. Implementations decide what, if anything, the seed
/// means; the scripted mock uses it to vary output across rounds the way
/// temperature sampling would.
pub trait GeneratorEndpoint: Send + Sync {
    fn generate(&self, prompt: &str, sample_seed: u64) -> Result<String>;
}

/// One configured generation run: endpoint, optional transcript cache,
/// templates, seeding, and retry policy.
pub struct Generation<'a> {
    endpoint: &'a dyn GeneratorEndpoint,
    cache: Option<&'a TranscriptCache>,
    templates: PromptTemplates,
    base_seed: u64,
    max_retries: u32,
}

struct CallSpec<'a> {
    strategy: &'a str,
    round: u32,
    slot: u32,
    kind: TranscriptKind,
    keyword_cap: Option<usize>,
    prompt: String,
    seed: u64,
}

impl<'a> Generation<'a> {
    pub fn new(endpoint: &'a dyn GeneratorEndpoint) -> Self {
        Generation {
            endpoint,
            cache: None,
            templates: PromptTemplates::default(),
            base_seed: 0,
            max_retries: 2,
        }
    }

    pub fn with_cache(mut self, cache: &'a TranscriptCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_templates(mut self, templates: PromptTemplates) -> Self {
        self.templates = templates;
        self
    }

    /// Base of the per-call seed sequence. Each call's seed is
    /// `base + positional index`, where the index enumerates the strategy's
    /// calls in round order, so seeds depend only on call position.
    pub fn with_seed(mut self, base_seed: u64) -> Self {
        self.base_seed = base_seed;
        self
    }

    /// Extra attempts after a failed endpoint call (same prompt and seed).
    pub fn with_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    /// Run one generator call through the cache and retry policy and parse
    /// the result. Exhausted retries produce a `failed` transcript rather
    /// than an error.
    fn execute(&self, query: &Query, spec: CallSpec<'_>) -> Result<GenerationTranscript> {
        let key = CacheKey::new(spec.strategy, &query.id, spec.round, spec.slot, &spec.prompt);
        if let Some(cache) = self.cache {
            if let Some(hit) = cache.load(&key)? {
                return Ok(hit);
            }
        }

        let mut raw = None;
        for _ in 0..=self.max_retries {
            if let Ok(text) = self.endpoint.generate(&spec.prompt, spec.seed) {
                raw = Some(text);
                break;
            }
        }

        let transcript = match raw {
            Some(raw_output) => {
                let (parsed_keywords, parsed_documents) = match spec.kind {
                    TranscriptKind::Keywords => {
                        let mut keywords = parse_keywords(&raw_output).value;
                        if let Some(cap) = spec.keyword_cap {
                            keywords.truncate(cap);
                        }
                        (keywords, Vec::new())
                    }
                    TranscriptKind::Document => {
                        let passage = parse_passage(&raw_output).value;
                        (Vec::new(), passage.into_iter().collect())
                    }
                };
                GenerationTranscript {
                    query_id: query.id.clone(),
                    strategy: spec.strategy.to_string(),
                    round: spec.round,
                    slot: spec.slot,
                    kind: spec.kind,
                    raw_output,
                    parsed_keywords,
                    parsed_documents,
                    keyword_cap: spec.keyword_cap,
                    failed: false,
                }
            }
            None => GenerationTranscript {
                query_id: query.id.clone(),
                strategy: spec.strategy.to_string(),
                round: spec.round,
                slot: spec.slot,
                kind: spec.kind,
                raw_output: String::new(),
                parsed_keywords: Vec::new(),
                parsed_documents: Vec::new(),
                keyword_cap: spec.keyword_cap,
                failed: true,
            },
        };

        if !transcript.failed {
            if let Some(cache) = self.cache {
                cache.store(&key, &transcript)?;
            }
        }
        Ok(transcript)
    }

    fn single_template_rounds(
        &self,
        strategy: &str,
        template: &PromptTemplate,
        kind: TranscriptKind,
        keyword_cap: Option<usize>,
        query: &Query,
        rounds: usize,
    ) -> Result<Vec<GenerationTranscript>> {
        if rounds == 0 {
            return Err(GffError::InvalidConfig("rounds must be >= 1".into()));
        }
        let prompt = render_prompt(template, query, None)?;
        let mut transcripts = Vec::with_capacity(rounds);
        for round in 1..=rounds as u32 {
            let spec = CallSpec {
                strategy,
                round,
                slot: 0,
                kind,
                keyword_cap,
                prompt: prompt.clone(),
                seed: self.base_seed + (round as u64 - 1),
            };
            transcripts.push(self.execute(query, spec)?);
        }
        Ok(transcripts)
    }

    /// Ask directly for keywords, once per round.
    pub fn q2k(&self, query: &Query, rounds: usize) -> Result<Vec<GenerationTranscript>> {
        self.single_template_rounds("q2k", &self.templates.q2k, TranscriptKind::Keywords, None, query, rounds)
    }

    /// Ask for a whole passage, once per round. The passage itself is the
    /// expansion (concat baseline); `parsed_keywords` stays empty.
    pub fn q2d(&self, query: &Query, rounds: usize) -> Result<Vec<GenerationTranscript>> {
        self.single_template_rounds("q2d", &self.templates.q2d, TranscriptKind::Document, None, query, rounds)
    }

    /// Chained generation: per round, `docs_per_round` Q2D calls, then one
    /// D2K call per generated document asking for `keywords_per_doc`
    /// keywords. Defaults (2, 5, 3 rounds) give 30 keyword slots. A failed
    /// or empty Q2D leaves its D2K slot as a failed transcript without
    /// calling the endpoint.
    ///
    /// Seeds are positional: round r uses `base + (r-1)*2*docs + slot` for
    /// Q2D and `base + (r-1)*2*docs + docs + slot` for D2K.
    pub fn q2d2k(
        &self,
        query: &Query,
        docs_per_round: usize,
        keywords_per_doc: usize,
        rounds: usize,
    ) -> Result<Vec<GenerationTranscript>> {
        if docs_per_round == 0 || keywords_per_doc == 0 || rounds == 0 {
            return Err(GffError::InvalidConfig(
                "docs_per_round, keywords_per_doc, and rounds must be >= 1".into(),
            ));
        }
        let q2d_prompt = render_prompt(&self.templates.q2d, query, None)?;
        let round_stride = 2 * docs_per_round as u64;
        let mut transcripts = Vec::with_capacity(rounds * docs_per_round * 2);

        for round in 1..=rounds as u32 {
            let round_base = self.base_seed + (round as u64 - 1) * round_stride;
            let mut passages: Vec<Option<String>> = Vec::with_capacity(docs_per_round);
            for slot in 0..docs_per_round as u32 {
                let t = self.execute(
                    query,
                    CallSpec {
                        strategy: "q2d2k",
                        round,
                        slot,
                        kind: TranscriptKind::Document,
                        keyword_cap: None,
                        prompt: q2d_prompt.clone(),
                        seed: round_base + slot as u64,
                    },
                )?;
                passages.push(t.parsed_documents.first().cloned());
                transcripts.push(t);
            }
            for (slot, passage) in passages.iter().enumerate() {
                let slot = slot as u32;
                match passage {
                    Some(passage) => {
                        let prompt = render_prompt(&self.templates.d2k, query, Some(passage))?;
                        let t = self.execute(
                            query,
                            CallSpec {
                                strategy: "q2d2k",
                                round,
                                slot,
                                kind: TranscriptKind::Keywords,
                                keyword_cap: Some(keywords_per_doc),
                                prompt,
                                seed: round_base + docs_per_round as u64 + slot as u64,
                            },
                        )?;
                        transcripts.push(t);
                    }
                    None => transcripts.push(GenerationTranscript {
                        query_id: query.id.clone(),
                        strategy: "q2d2k".into(),
                        round,
                        slot,
                        kind: TranscriptKind::Keywords,
                        raw_output: String::new(),
                        parsed_keywords: Vec::new(),
                        parsed_documents: Vec::new(),
                        keyword_cap: Some(keywords_per_doc),
                        failed: true,
                    }),
                }
            }
        }
        Ok(transcripts)
    }

    /// D2K over BM25-retrieved passages instead of generated ones: per
    /// round, one D2K call per top-`docs` retrieved document, the passage
    /// filled verbatim with the document text. Empty retrieval falls back
    /// to Q2K for every round, recorded with strategy `"Q2K-fallback"`.
    ///
    /// Seeds are positional: round r, slot s uses `base + (r-1)*docs + s`.
    pub fn prf_d2k(
        &self,
        corpus: &Corpus,
        query: &Query,
        docs: usize,
        keywords_per_doc: usize,
        rounds: usize,
        bm25: &Bm25Params,
    ) -> Result<Vec<GenerationTranscript>> {
        if docs == 0 || keywords_per_doc == 0 || rounds == 0 {
            return Err(GffError::InvalidConfig(
                "docs, keywords_per_doc, and rounds must be >= 1".into(),
            ));
        }
        let retrieved = corpus.bm25_retrieve(query, docs, bm25)?.value;

        if retrieved.is_empty() {
            return self.single_template_rounds(
                "Q2K-fallback",
                &self.templates.q2k,
                TranscriptKind::Keywords,
                Some(keywords_per_doc),
                query,
                rounds,
            );
        }

        let passages: Vec<&str> = retrieved
            .doc_ids()
            .map(|id| {
                corpus
                    .document(id)
                    .map(|d| d.text.as_str())
                    .ok_or_else(|| GffError::MissingDocument(id.to_string()))
            })
            .collect::<Result<_>>()?;

        let mut transcripts = Vec::with_capacity(rounds * passages.len());
        for round in 1..=rounds as u32 {
            let round_base = self.base_seed + (round as u64 - 1) * docs as u64;
            for (slot, passage) in passages.iter().enumerate() {
                let prompt = render_prompt(&self.templates.d2k, query, Some(passage))?;
                let t = self.execute(
                    query,
                    CallSpec {
                        strategy: "prf_d2k",
                        round,
                        slot: slot as u32,
                        kind: TranscriptKind::Keywords,
                        keyword_cap: Some(keywords_per_doc),
                        prompt,
                        seed: round_base + slot as u64,
                    },
                )?;
                transcripts.push(t);
            }
        }
        Ok(transcripts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use mock::ScriptedGenerator;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Counts endpoint invocations, delegating to an inner endpoint.
    struct CountingGenerator<'a> {
        inner: &'a dyn GeneratorEndpoint,
        calls: AtomicUsize,
    }

    impl<'a> CountingGenerator<'a> {
        fn new(inner: &'a dyn GeneratorEndpoint) -> Self {
            CountingGenerator { inner, calls: AtomicUsize::new(0) }
        }
        fn calls(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl GeneratorEndpoint for CountingGenerator<'_> {
        fn generate(&self, prompt: &str, seed: u64) -> Result<String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.generate(prompt, seed)
        }
    }

    /// Fails the first `failures` calls, then succeeds.
    struct FlakyGenerator {
        failures: usize,
        calls: AtomicUsize,
    }

    impl GeneratorEndpoint for FlakyGenerator {
        fn generate(&self, _prompt: &str, _seed: u64) -> Result<String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(GffError::Generator("scripted outage".into()))
            } else {
                Ok("recovered, keywords".into())
            }
        }
    }

    /// Records every prompt it sees.
    struct RecordingGenerator {
        prompts: std::sync::Mutex<Vec<String>>,
    }

    impl RecordingGenerator {
        fn new() -> Self {
            RecordingGenerator { prompts: std::sync::Mutex::new(Vec::new()) }
        }
    }

    impl GeneratorEndpoint for RecordingGenerator {
        fn generate(&self, prompt: &str, _seed: u64) -> Result<String> {
            self.prompts.lock().unwrap().push(prompt.to_string());
            Ok("some, keywords".into())
        }
    }

    fn query() -> Query {
        Query::new("q1", "what is hpv").unwrap()
    }

    #[test]
    fn q2k_produces_one_transcript_per_round() {
        let mock = ScriptedGenerator::constant("HPV, papillomavirus, immune system, strains");
        let out = Generation::new(&mock).q2k(&query(), 3).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.iter().map(|t| t.round).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(
            out[0].parsed_keywords,
            vec!["HPV", "papillomavirus", "immune system", "strains"]
        );
        assert!(out.iter().all(|t| t.kind == TranscriptKind::Keywords && !t.failed));
    }

    #[test]
    fn q2d_stores_passage_and_no_keywords() {
        let mock = ScriptedGenerator::constant("A long generated passage about HPV.");
        let out = Generation::new(&mock).q2d(&query(), 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind, TranscriptKind::Document);
        assert_eq!(out[0].parsed_documents, vec!["A long generated passage about HPV."]);
        assert!(out[0].parsed_keywords.is_empty());
    }

    #[test]
    fn q2d2k_minimal_counts_two_calls() {
        let mock = ScriptedGenerator::constant("one output fits all");
        let counting = CountingGenerator::new(&mock);
        let out = Generation::new(&counting).q2d2k(&query(), 1, 1, 1).unwrap();
        assert_eq!(counting.calls(), 2);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].kind, TranscriptKind::Document);
        assert_eq!(out[1].kind, TranscriptKind::Keywords);
    }

    #[test]
    fn q2d2k_defaults_give_thirty_keyword_slots() {
        let mock = ScriptedGenerator::constant("k1, k2, k3, k4, k5, k6, k7");
        let counting = CountingGenerator::new(&mock);
        let out = Generation::new(&counting).q2d2k(&query(), 2, 5, 3).unwrap();
        assert_eq!(counting.calls(), 12);
        let keyword_transcripts: Vec<_> =
            out.iter().filter(|t| t.kind == TranscriptKind::Keywords).collect();
        assert_eq!(keyword_transcripts.len(), 6);
        let slots: usize =
            keyword_transcripts.iter().map(|t| t.keyword_cap.unwrap()).sum();
        assert_eq!(slots, 30);
        // The cap also bounds what was actually parsed.
        assert!(keyword_transcripts.iter().all(|t| t.parsed_keywords.len() <= 5));
    }

    #[test]
    fn q2d2k_is_deterministic_with_the_mock() {
        let mock = ScriptedGenerator::constant("alpha, beta");
        let a = Generation::new(&mock).q2d2k(&query(), 2, 5, 3).unwrap();
        let b = Generation::new(&mock).q2d2k(&query(), 2, 5, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transcripts_reparse_to_stored_fields() {
        let mock = ScriptedGenerator::constant("HPV, hpv, strains, virus, cells, immune, extra");
        let out = Generation::new(&mock).q2d2k(&query(), 2, 5, 3).unwrap();
        for t in out {
            match t.kind {
                TranscriptKind::Keywords => {
                    let mut reparsed = parse_keywords(&t.raw_output).value;
                    if let Some(cap) = t.keyword_cap {
                        reparsed.truncate(cap);
                    }
                    assert_eq!(reparsed, t.parsed_keywords);
                }
                TranscriptKind::Document => {
                    let reparsed: Vec<String> =
                        parse_passage(&t.raw_output).value.into_iter().collect();
                    assert_eq!(reparsed, t.parsed_documents);
                }
            }
        }
    }

    #[test]
    fn retries_cover_transient_failures() {
        let flaky = FlakyGenerator { failures: 2, calls: AtomicUsize::new(0) };
        let out = Generation::new(&flaky).with_retries(2).q2k(&query(), 1).unwrap();
        assert!(!out[0].failed);
        assert_eq!(out[0].parsed_keywords, vec!["recovered", "keywords"]);
    }

    #[test]
    fn exhausted_retries_mark_the_transcript_failed() {
        let flaky = FlakyGenerator { failures: 10, calls: AtomicUsize::new(0) };
        let out = Generation::new(&flaky).with_retries(1).q2k(&query(), 1).unwrap();
        assert!(out[0].failed);
        assert!(out[0].parsed_keywords.is_empty());
    }

    #[test]
    fn cache_hits_skip_the_endpoint() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranscriptCache::open(dir.path()).unwrap();
        let mock = ScriptedGenerator::constant("cached, keywords");

        let counting = CountingGenerator::new(&mock);
        let cold = Generation::new(&counting).with_cache(&cache).q2d2k(&query(), 2, 5, 3).unwrap();
        assert_eq!(counting.calls(), 12);

        let counting = CountingGenerator::new(&mock);
        let warm = Generation::new(&counting).with_cache(&cache).q2d2k(&query(), 2, 5, 3).unwrap();
        assert_eq!(counting.calls(), 0);
        assert_eq!(cold, warm);
    }

    #[test]
    fn prf_d2k_prompts_embed_retrieved_passages_verbatim() {
        let corpus = Corpus::build_index(vec![
            Document::new("d1", "hpv is a common viral infection"),
            Document::new("d2", "hpv vaccines prevent infection"),
            Document::new("d3", "unrelated text about weather"),
        ])
        .unwrap();
        let recording = RecordingGenerator::new();
        let out = Generation::new(&recording)
            .prf_d2k(&corpus, &query(), 2, 5, 1, &Bm25Params::default())
            .unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|t| t.strategy == "prf_d2k"));
        let prompts = recording.prompts.lock().unwrap();
        assert!(prompts[0].contains("<PASSAGE>: hpv is a common viral infection"));
        assert!(prompts[1].contains("<PASSAGE>: hpv vaccines prevent infection"));
    }

    #[test]
    fn prf_d2k_empty_retrieval_falls_back_to_q2k() {
        let corpus = Corpus::build_index(vec![Document::new("d1", "completely unrelated")]).unwrap();
        let mock = ScriptedGenerator::constant("fallback, keywords");
        let out = Generation::new(&mock)
            .prf_d2k(&corpus, &query(), 2, 5, 3, &Bm25Params::default())
            .unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|t| t.strategy == "Q2K-fallback"));
        assert_eq!(out[0].parsed_keywords, vec!["fallback", "keywords"]);
    }
}
