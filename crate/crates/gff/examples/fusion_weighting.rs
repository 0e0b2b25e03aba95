//! Score fusion: per-keyword reranked lists merged back into one ranking,
//! compared across every list-weighting scheme.
//!
//! Run with: cargo run --example fusion_weighting

use gff::corpus::{read_corpus_jsonl, read_queries_tsv};
use gff::filter::Keyword;
use gff::fusion::{fuse, reciprocal_rank_weight, FusionConfig, FusionInput, Weighting};
use gff::rerank::{rerank_list, LexicalStandin};
use gff::{Bm25Params, Corpus};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let corpus = Corpus::build_index(read_corpus_jsonl(format!("{data}/corpus.jsonl"))?)?;
    let queries = read_queries_tsv(format!("{data}/queries.tsv"))?;
    let query = &queries[0];
    let reranker = LexicalStandin::corpus_backed(&corpus);

    let candidates = corpus.bm25_retrieve(query, 100, &Bm25Params::default())?.value;
    let original = rerank_list(&reranker, &corpus, query, None, &candidates, 512)?;
    println!("{}  {:?}", query.id, query.text);
    let order: Vec<&str> = original.doc_ids().collect();
    println!("original rerank: {order:?}");

    // One helpful keyword, one that rewards the off-topic document.
    let mut expansions = Vec::new();
    for surface in ["zooxanthellae recolonization", "snorkeling daytrips"] {
        let keyword = Keyword::new(surface, 1);
        let list = rerank_list(&reranker, &corpus, query, Some(&keyword), &candidates, 512)?;
        let order: Vec<&str> = list.doc_ids().collect();
        println!("  {surface:<28} ranks {order:?}");
        expansions.push((keyword, list));
    }

    // The anchor is the original top-1; a list that buries it gets a small
    // reciprocal-rank weight and drags the fused ranking less.
    let input = FusionInput::new(original, expansions)?;
    println!("\nanchor document: {}", input.anchor_doc());
    for (keyword, list) in input.expansion_lists() {
        let weight = reciprocal_rank_weight(list, input.anchor_doc(), 0.0)?;
        println!("  weight {weight:.3}  {}", keyword.surface);
    }

    println!("\nfused scores under each weighting:");
    for weighting in Weighting::ALL {
        let config = FusionConfig { weighting, ..FusionConfig::default() };
        let fused = fuse(&input, &config)?;
        let scores: Vec<String> =
            fused.entries.iter().map(|(d, s)| format!("{d} {s:.4}")).collect();
        println!("  {:<16} {}", weighting.as_str(), scores.join("  "));
    }
    Ok(())
}
