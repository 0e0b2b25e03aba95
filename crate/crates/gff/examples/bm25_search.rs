//! First-stage retrieval: index the bundled corpus and run BM25 queries.
//!
//! Run with: cargo run --example bm25_search

use gff::corpus::{read_corpus_jsonl, read_queries_tsv};
use gff::{Bm25Params, Corpus};

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let corpus = Corpus::build_index(read_corpus_jsonl(format!("{data}/corpus.jsonl"))?)?;
    println!(
        "indexed {} documents, {} terms, avg length {:.2}",
        corpus.doc_count(),
        corpus.term_count(),
        corpus.avg_doc_length()
    );

    let params = Bm25Params::default();
    println!("bm25 k1={} b={}\n", params.k1, params.b);

    for query in read_queries_tsv(format!("{data}/queries.tsv"))? {
        let retrieved = corpus.bm25_retrieve(&query, 10, &params)?;
        if let Some(warning) = &retrieved.warning {
            eprintln!("warning: {warning}");
        }
        println!("{}  {:?}", query.id, query.text);
        for (rank, (doc_id, score)) in retrieved.value.entries.iter().enumerate() {
            let text = &corpus.document(doc_id).expect("retrieved doc is indexed").text;
            let preview: String = text.chars().take(60).collect();
            println!("  {}. {doc_id}  {score:.4}  {preview}...", rank + 1);
        }
        println!();
    }
    Ok(())
}
