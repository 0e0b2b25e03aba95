//! Weighted score fusion of per-keyword reranked lists.
//!
//! Each kept keyword yields its own reranking of the shared candidate set.
//! Fusion min-max normalizes every list, weights each expansion list by how
//! much it agrees with the original query's reranking (by default, the
//! reciprocal rank at which it places the original top-1 document), averages
//! the weighted scores, and mixes the result back with the original list
//! under a coefficient `beta`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{sort_desc_by_score, RankedList};
use crate::error::{GffError, Result};
use crate::filter::Keyword;

/// How each expansion list's fusion weight is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// 1 / (c + rank of the anchor document in the expansion list).
    ReciprocalRank,
    /// Uniform 1/n pooling.
    Mean,
    /// Top-k document overlap with the original list.
    TopkOverlap,
    /// Inverted entropy of the expansion's score distribution.
    Entropy,
    /// Inverted KL divergence from the original's score distribution.
    Kl,
    /// Inverted 1-D Wasserstein distance between the score distributions.
    Wasserstein,
}

impl Weighting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Weighting::ReciprocalRank => "reciprocal_rank",
            Weighting::Mean => "mean",
            Weighting::TopkOverlap => "topk_overlap",
            Weighting::Entropy => "entropy",
            Weighting::Kl => "kl",
            Weighting::Wasserstein => "wasserstein",
        }
    }

    pub const ALL: [Weighting; 6] = [
        Weighting::ReciprocalRank,
        Weighting::Mean,
        Weighting::TopkOverlap,
        Weighting::Entropy,
        Weighting::Kl,
        Weighting::Wasserstein,
    ];
}

impl std::str::FromStr for Weighting {
    type Err = GffError;

    fn from_str(s: &str) -> Result<Self> {
        Weighting::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| GffError::InvalidConfig(format!("unknown weighting {s:?}")))
    }
}

/// How the expansion aggregate and the original list are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// (1 - beta) * s_exp + beta * s_orig.
    Convex,
    /// s_exp + beta * s_orig.
    Additive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub weighting: Weighting,
    /// Additive smoothing constant `c` in 1/(c + rank); 0 disables smoothing.
    pub smoothing_c: f64,
    /// Mixing coefficient `beta` for the original list, in [0, 1].
    pub original_coefficient: f64,
    /// Cutoff for the top-k overlap weighting.
    pub overlap_k: usize,
    pub combine: CombineMode,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            weighting: Weighting::ReciprocalRank,
            smoothing_c: 0.0,
            original_coefficient: 0.3,
            overlap_k: 10,
            combine: CombineMode::Convex,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.smoothing_c.is_finite() || self.smoothing_c < 0.0 {
            return Err(GffError::InvalidConfig(format!(
                "smoothing_c must be finite and non-negative, got {}",
                self.smoothing_c
            )));
        }
        if !self.original_coefficient.is_finite()
            || !(0.0..=1.0).contains(&self.original_coefficient)
        {
            return Err(GffError::InvalidConfig(format!(
                "original_coefficient must lie in [0, 1], got {}",
                self.original_coefficient
            )));
        }
        if self.overlap_k == 0 {
            return Err(GffError::InvalidConfig("overlap_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// The lists entering fusion for one query.
///
/// Construction validates the shared-document invariant, so a `FusionInput`
/// always holds an original list plus expansion lists over one doc-id set,
/// with the anchor (the original's top-1 document) present everywhere.
#[derive(Debug, Clone)]
pub struct FusionInput {
    original_list: RankedList,
    expansion_lists: Vec<(Keyword, RankedList)>,
    anchor_doc: String,
}

impl FusionInput {
    pub fn new(
        original_list: RankedList,
        expansion_lists: Vec<(Keyword, RankedList)>,
    ) -> Result<Self> {
        original_list.validate()?;
        if original_list.entries.is_empty() {
            return Err(GffError::InvalidRankedList("original list is empty".into()));
        }
        let doc_set: BTreeSet<&str> = original_list.doc_ids().collect();
        for (keyword, list) in &expansion_lists {
            list.validate()?;
            let expansion_set: BTreeSet<&str> = list.doc_ids().collect();
            if expansion_set != doc_set {
                return Err(GffError::DocSetMismatch(format!(
                    "expansion {:?} ranks a different document set than the original list",
                    keyword.surface
                )));
            }
        }
        let anchor_doc = original_list.entries[0].0.clone();
        Ok(FusionInput { original_list, expansion_lists, anchor_doc })
    }

    pub fn original_list(&self) -> &RankedList {
        &self.original_list
    }

    pub fn expansion_lists(&self) -> &[(Keyword, RankedList)] {
        &self.expansion_lists
    }

    /// Doc id of the original list's rank-1 document (d+).
    pub fn anchor_doc(&self) -> &str {
        &self.anchor_doc
    }
}

/// Min-max normalizes scores into [0, 1] without changing the order.
///
/// Constant-score lists map to all-0.5 so downstream mixing still sees a
/// usable signal instead of a divide-by-zero.
pub fn normalize_scores(list: &RankedList) -> RankedList {
    let scores: Vec<f64> = list.entries.iter().map(|&(_, s)| s).collect();
    let normalized = minmax(&scores);
    let entries = list
        .doc_ids()
        .zip(normalized)
        .map(|(d, s)| (d.to_string(), s))
        .collect();
    RankedList::new(&list.query_id, entries, &list.tag)
}

fn minmax(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min <= 0.0 {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|&s| (s - min) / (max - min)).collect()
}

/// Weight of one expansion list: 1 / (smoothing_c + rank of the anchor),
/// ranks 1-based.
pub fn reciprocal_rank_weight(
    expansion_list: &RankedList,
    anchor_doc: &str,
    smoothing_c: f64,
) -> Result<f64> {
    let rank = expansion_list
        .rank_of(anchor_doc)
        .ok_or_else(|| GffError::AnchorMissing(anchor_doc.to_string()))?;
    Ok(1.0 / (smoothing_c + rank as f64))
}

/// Softmax over the values, shifted by the max for stability.
fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|&(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Softmax distribution over a list's min-max-normalized scores.
///
/// Normalizing first makes the distribution (and every weight built on it)
/// invariant under positive affine transforms of the raw scores.
fn score_distribution(list: &RankedList) -> Vec<f64> {
    let scores: Vec<f64> = list.entries.iter().map(|&(_, s)| s).collect();
    softmax(&minmax(&scores))
}

/// One of the alternative (non-rank) weightings of an expansion list.
///
/// Divergence-style measures (entropy, KL, Wasserstein) grow with
/// disagreement, so they are inverted as 1/(1 + measure) to act as weights.
pub fn alt_weight(
    expansion_list: &RankedList,
    original_list: &RankedList,
    method: Weighting,
    config: &FusionConfig,
) -> Result<f64> {
    let expansion_set: BTreeSet<&str> = expansion_list.doc_ids().collect();
    let original_set: BTreeSet<&str> = original_list.doc_ids().collect();
    if expansion_set != original_set {
        return Err(GffError::DocSetMismatch(
            "alt_weight requires both lists to rank the same documents".into(),
        ));
    }
    match method {
        Weighting::ReciprocalRank | Weighting::Mean => Err(GffError::InvalidConfig(format!(
            "{} is not an alternative weighting",
            method.as_str()
        ))),
        Weighting::TopkOverlap => {
            let k = config.overlap_k.min(original_list.entries.len());
            let top_exp: BTreeSet<&str> = expansion_list.doc_ids().take(k).collect();
            let top_orig: BTreeSet<&str> = original_list.doc_ids().take(k).collect();
            Ok(top_exp.intersection(&top_orig).count() as f64 / k as f64)
        }
        Weighting::Entropy => {
            let p = score_distribution(expansion_list);
            Ok(1.0 / (1.0 + entropy(&p)))
        }
        Weighting::Kl => {
            let p = score_distribution(expansion_list);
            let q = score_distribution(original_list);
            // Align the original's mass by doc id before comparing.
            let q_by_doc: HashMap<&str, f64> = original_list.doc_ids().zip(q).collect();
            let q_aligned: Vec<f64> =
                expansion_list.doc_ids().map(|d| q_by_doc[d]).collect();
            Ok(1.0 / (1.0 + kl_divergence(&p, &q_aligned)))
        }
        Weighting::Wasserstein => {
            let mut x: Vec<f64> = minmax(
                &expansion_list.entries.iter().map(|&(_, s)| s).collect::<Vec<_>>(),
            );
            let mut y: Vec<f64> = minmax(
                &original_list.entries.iter().map(|&(_, s)| s).collect::<Vec<_>>(),
            );
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            let w1: f64 = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / x.len() as f64;
            Ok(1.0 / (1.0 + w1))
        }
    }
}

/// Fuses the expansion lists with the original list.
///
/// Weighted scores are divided by the weight sum, so `beta` means the same
/// thing regardless of how many expansions survive filtering. An empty
/// expansion set returns the original list unchanged.
pub fn fuse(input: &FusionInput, config: &FusionConfig) -> Result<RankedList> {
    config.validate()?;
    let original = &input.original_list;
    if input.expansion_lists.is_empty() {
        return Ok(original.clone());
    }

    let n = input.expansion_lists.len();
    let mut weights = Vec::with_capacity(n);
    for (_, list) in &input.expansion_lists {
        let weight = match config.weighting {
            Weighting::ReciprocalRank => {
                reciprocal_rank_weight(list, &input.anchor_doc, config.smoothing_c)?
            }
            Weighting::Mean => 1.0 / n as f64,
            method => alt_weight(list, original, method, config)?,
        };
        weights.push(weight);
    }
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum <= 0.0 {
        return Err(GffError::ZeroWeightSum);
    }

    let mut expansion_score: HashMap<&str, f64> =
        original.doc_ids().map(|d| (d, 0.0)).collect();
    for ((_, list), &weight) in input.expansion_lists.iter().zip(&weights) {
        let normalized = normalize_scores(list);
        for (doc_id, score) in &normalized.entries {
            *expansion_score.get_mut(doc_id.as_str()).unwrap() += weight * score;
        }
    }

    let beta = config.original_coefficient;
    let normalized_original = normalize_scores(original);
    let mut entries: Vec<(String, f64)> = normalized_original
        .entries
        .iter()
        .map(|(doc_id, orig_score)| {
            let s_exp = expansion_score[doc_id.as_str()] / weight_sum;
            let fused = match config.combine {
                CombineMode::Convex => (1.0 - beta) * s_exp + beta * orig_score,
                CombineMode::Additive => s_exp + beta * orig_score,
            };
            (doc_id.clone(), fused)
        })
        .collect();
    sort_desc_by_score(&mut entries);
    Ok(RankedList::new(&original.query_id, entries, "fusion"))
}
