//! RM3 pseudo-relevance feedback: expansion term distributions and the
//! keyword sets they induce, no generator involved.
//!
//! Run with: cargo run --example rm3_expansion

use gff::corpus::{read_corpus_jsonl, read_queries_tsv};
use gff::prf::{rm3_expand, rm3_keywords};
use gff::{Bm25Params, Corpus};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let corpus = Corpus::build_index(read_corpus_jsonl(format!("{data}/corpus.jsonl"))?)?;
    let queries = read_queries_tsv(format!("{data}/queries.tsv"))?;
    let params = Bm25Params::default();

    // Interpolation weight on the original query distribution. Lambda 1.0
    // reproduces the query unchanged; lower values lean on feedback docs.
    let (fb_docs, fb_terms, lambda) = (3, 8, 0.5);

    for query in queries.iter().take(3) {
        println!("{}  {:?}", query.id, query.text);
        let expansion = rm3_expand(&corpus, query, fb_docs, fb_terms, lambda, &params)?;
        if let Some(warning) = &expansion.warning {
            eprintln!("warning: {warning}");
        }
        let total: f64 = expansion.value.iter().map(|t| t.weight).sum();
        println!("  interpolated distribution (mass {total:.3}):");
        for term in &expansion.value {
            println!("    {:<14} {:.4}", term.term, term.weight);
        }

        // Keywords drop terms already present in the query. On a corpus
        // this small the leftover mass lands on function words, which is
        // the classic failure mode generative keyword sources avoid.
        let keywords = rm3_keywords(&expansion.value, 3, query)?;
        let surfaces: Vec<&str> = keywords.iter().map(|k| k.surface.as_str()).collect();
        println!("  top-3 novel keywords: {surfaces:?}\n");
    }
    Ok(())
}
