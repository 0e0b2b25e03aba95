//! Majority-vote filtering: sampled keyword lists disagree, and the vote
//! separates stable keywords from one-off noise.
//!
//! Run with: cargo run --example self_consistency

use gff::corpus::read_queries_tsv;
use gff::filter::self_consistency_filter;
use gff::keygen::{Generation, ScriptedGenerator};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let endpoint = ScriptedGenerator::from_file(format!("{data}/generator_script.json"))?;
    let queries = read_queries_tsv(format!("{data}/queries.tsv"))?;
    let query = &queries[0];

    let transcripts = Generation::new(&endpoint).with_seed(7).q2d2k(query, 2, 5, 5)?;
    println!("{}  {:?}", query.id, query.text);
    for t in transcripts.iter().filter(|t| !t.parsed_keywords.is_empty()) {
        println!("  sample r{} s{}: {}", t.round, t.slot, t.parsed_keywords.join(" | "));
    }

    // One vote per transcript a keyword appears in; ties break by first
    // occurrence, so the ordering is deterministic.
    let filtered = self_consistency_filter(&transcripts, query, 10)?;
    println!("\nvotes across {} keyword samples:", 10);
    for kw in &filtered.value.keywords {
        println!("  {:>2}  {}", kw.votes, kw.surface);
    }

    // A smaller cutoff is a prefix of a larger one, never a reshuffle.
    let top3 = self_consistency_filter(&transcripts, query, 3)?;
    assert_eq!(top3.value.keywords, filtered.value.keywords[..3]);
    let kept: Vec<&str> = top3.value.keywords.iter().map(|k| k.surface.as_str()).collect();
    println!("\ntop_k = 3 keeps {kept:?}");
    Ok(())
}
