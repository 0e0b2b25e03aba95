//! Second-stage reranking with the lexical stand-in: how one expansion
//! keyword changes candidate scores relative to the plain query.
//!
//! Run with: cargo run --example rerank_lexical

use gff::corpus::{read_corpus_jsonl, read_queries_tsv};
use gff::filter::Keyword;
use gff::rerank::{rerank_list, LexicalStandin};
use gff::{Bm25Params, Corpus};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let corpus = Corpus::build_index(read_corpus_jsonl(format!("{data}/corpus.jsonl"))?)?;
    let queries = read_queries_tsv(format!("{data}/queries.tsv"))?;
    let query = &queries[0];
    let reranker = LexicalStandin::corpus_backed(&corpus);

    let candidates = corpus.bm25_retrieve(query, 100, &Bm25Params::default())?.value;
    println!("{}  {:?}  ({} candidates)\n", query.id, query.text, candidates.len());

    let plain = rerank_list(&reranker, &corpus, query, None, &candidates, 512)?;
    println!("plain rerank:");
    for (doc_id, score) in &plain.entries {
        println!("  {doc_id}  {score:.4}");
    }

    // The keyword joins the question segment of the cross-encoder input, so
    // documents containing it gain score and the rest keep theirs.
    for surface in ["zooxanthellae recolonization", "snorkeling daytrips"] {
        let keyword = Keyword::new(surface, 1);
        let expanded = rerank_list(&reranker, &corpus, query, Some(&keyword), &candidates, 512)?;
        println!("\nwith keyword {surface:?} (tag {}):", expanded.tag);
        for (doc_id, score) in &expanded.entries {
            let delta = score - plain.score_of(doc_id).expect("same doc set");
            println!("  {doc_id}  {score:.4}  ({delta:+.4})");
        }
    }
    Ok(())
}
