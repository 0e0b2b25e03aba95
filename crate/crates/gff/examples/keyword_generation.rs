//! Keyword generation strategies against the scripted generator: the
//! prompt/seed mechanics behind q2k and the chained q2d2k flow.
//!
//! Run with: cargo run --example keyword_generation

use gff::corpus::read_queries_tsv;
use gff::keygen::{Generation, ScriptedGenerator, TranscriptKind};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let endpoint = ScriptedGenerator::from_file(format!("{data}/generator_script.json"))?;
    let queries = read_queries_tsv(format!("{data}/queries.tsv"))?;
    let query = &queries[0];

    // Chained generation: each round samples passages from the query (q2d),
    // then extracts keywords from each passage (d2k). Seeds are positional,
    // so a different round or slot reads a different script variant.
    let generation = Generation::new(&endpoint).with_seed(7);
    let transcripts = generation.q2d2k(query, 2, 5, 5)?;

    println!("{}  {:?}", query.id, query.text);
    println!("{} transcripts from 5 rounds x 2 passages:\n", transcripts.len());
    for t in &transcripts {
        match t.kind {
            TranscriptKind::Document => {
                let preview: String = t.raw_output.chars().take(48).collect();
                println!("  r{} s{} passage   {preview}...", t.round, t.slot);
            }
            TranscriptKind::Keywords => {
                println!("  r{} s{} keywords  {:?}", t.round, t.slot, t.parsed_keywords);
            }
        }
    }

    // The same strategy is a pure function of (query, seed): rerunning it
    // reproduces every transcript byte for byte.
    let again = generation.q2d2k(query, 2, 5, 5)?;
    assert_eq!(transcripts, again);
    println!("\nrerun with the same seed: identical transcripts");
    Ok(())
}
