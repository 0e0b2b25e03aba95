//! Keyword selection: self-consistency majority voting over generation
//! transcripts, plus the RM3-weight path for PRF keywords.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Query};
use crate::error::{Flagged, GffError, Result};
use crate::keygen::GenerationTranscript;
use crate::prf::WeightedTerm;

/// One expansion keyword.
///
/// `canonical` is the case-folded form used for vote counting and
/// deduplication; `surface` is the first-seen original spelling, which is
/// what gets concatenated into reranker inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    pub canonical: String,
    pub surface: String,
    /// Transcript count for majority-vote keywords; 1-based weight rank for
    /// RM3 keywords.
    pub votes: usize,
}

impl Keyword {
    pub fn new(surface: impl Into<String>, votes: usize) -> Self {
        let surface = surface.into();
        Keyword { canonical: surface.to_lowercase(), surface, votes }
    }
}

/// The filtered keywords chosen for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionSet {
    pub query_id: String,
    /// At most the configured top-k keywords, ordered by the producing
    /// filter (descending votes for self-consistency, descending weight for
    /// RM3).
    pub keywords: Vec<Keyword>,
    pub source_strategy: String,
}

impl ExpansionSet {
    pub fn empty(query_id: impl Into<String>, source_strategy: impl Into<String>) -> Self {
        ExpansionSet {
            query_id: query_id.into(),
            keywords: Vec::new(),
            source_strategy: source_strategy.into(),
        }
    }
}

/// Majority-vote keyword selection across self-consistency rounds.
///
/// Each canonical (case-folded) keyword is counted once per transcript it
/// appears in, so one repetitive generation cannot dominate the vote. The
/// top `top_k` keywords by vote survive; ties break by first occurrence
/// with transcripts taken in (round, slot) order. Keywords identical to a
/// query token are excluded after voting. Zero candidate keywords produce
/// an empty set with a warning rather than an error.
pub fn self_consistency_filter(
    transcripts: &[GenerationTranscript],
    query: &Query,
    top_k: usize,
) -> Result<Flagged<ExpansionSet>> {
    if top_k == 0 {
        return Err(GffError::InvalidConfig("filter top_k must be >= 1".into()));
    }

    let mut ordered: Vec<&GenerationTranscript> = transcripts.iter().collect();
    ordered.sort_by_key(|t| (t.round, t.slot));

    let mut votes: HashMap<String, usize> = HashMap::new();
    let mut surface: HashMap<String, String> = HashMap::new();
    let mut first_seen: HashMap<String, (usize, usize)> = HashMap::new();
    for (t_idx, transcript) in ordered.iter().enumerate() {
        let mut seen_here: HashSet<String> = HashSet::new();
        for (pos, kw) in transcript.parsed_keywords.iter().enumerate() {
            let canonical = kw.to_lowercase();
            surface.entry(canonical.clone()).or_insert_with(|| kw.clone());
            first_seen.entry(canonical.clone()).or_insert((t_idx, pos));
            if seen_here.insert(canonical.clone()) {
                *votes.entry(canonical).or_insert(0) += 1;
            }
        }
    }

    let query_tokens: HashSet<String> = tokenize(&query.text).into_iter().collect();
    let mut keywords: Vec<Keyword> = votes
        .into_iter()
        .filter(|(canonical, _)| !query_tokens.contains(canonical))
        .map(|(canonical, votes)| Keyword {
            surface: surface[&canonical].clone(),
            canonical,
            votes,
        })
        .collect();
    keywords.sort_by(|a, b| {
        b.votes.cmp(&a.votes).then_with(|| first_seen[&a.canonical].cmp(&first_seen[&b.canonical]))
    });
    keywords.truncate(top_k);

    let source_strategy =
        transcripts.first().map_or_else(|| "none".to_string(), |t| t.strategy.clone());
    let set = ExpansionSet { query_id: query.id.clone(), keywords, source_strategy };
    if set.keywords.is_empty() {
        let warning = format!("no expansion keywords survived filtering for query {:?}", query.id);
        return Ok(Flagged::flagged(set, warning));
    }
    Ok(Flagged::clean(set))
}

/// Wrap the top RM3 terms as an ExpansionSet.
///
/// Delegates to [`crate::prf::rm3_keywords`]; the `votes` field of each
/// keyword carries its 1-based weight rank rather than a vote count. Empty
/// input produces an empty set with a warning.
pub fn rm3_weight_filter(
    weighted_terms: &[WeightedTerm],
    top_k: usize,
    query: &Query,
) -> Result<Flagged<ExpansionSet>> {
    let keywords = crate::prf::rm3_keywords(weighted_terms, top_k, query)?;
    let set = ExpansionSet { query_id: query.id.clone(), keywords, source_strategy: "rm3".into() };
    if set.keywords.is_empty() {
        let warning = format!("no RM3 keywords for query {:?}", query.id);
        return Ok(Flagged::flagged(set, warning));
    }
    Ok(Flagged::clean(set))
}
