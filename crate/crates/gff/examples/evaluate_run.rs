//! Evaluation: nDCG@k over run files, including the flagged edge cases.
//!
//! Run with: cargo run --example evaluate_run

use gff::eval::{mean_ndcg, ndcg_at_k, read_qrels, read_run, write_run, Run};
use gff::RankedList;

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let qrels = read_qrels(format!("{data}/qrels.txt"))?;
    println!("{} judgments loaded", qrels.len());

    // A run ranking q01's graded documents (grades 2, 3, 0) in corpus order,
    // and one ranking them ideally.
    let mut run = Run::new();
    run.insert(RankedList::new(
        "q01",
        vec![("d011".into(), 3.0), ("d012".into(), 2.0), ("d013".into(), 1.0)],
        "demo",
    ));
    let ranked = run.get("q01").expect("inserted above");
    let scored = ndcg_at_k(ranked, &qrels, 10)?;
    println!("corpus-order ranking: nDCG@10 = {:.5}", scored.value);

    let ideal = RankedList::new(
        "q01",
        vec![("d012".into(), 3.0), ("d011".into(), 2.0), ("d013".into(), 1.0)],
        "demo",
    );
    println!("ideal ranking:        nDCG@10 = {:.5}", ndcg_at_k(&ideal, &qrels, 10)?.value);

    // Queries without positive judgments score zero and carry a warning
    // instead of poisoning the mean.
    let unjudged = RankedList::new("q99", vec![("d011".into(), 1.0)], "demo");
    let flagged = ndcg_at_k(&unjudged, &qrels, 10)?;
    println!(
        "unjudged query:       nDCG@10 = {} ({})",
        flagged.value,
        flagged.warning.as_deref().unwrap_or("clean")
    );

    // Run files round-trip through the six-column format losslessly.
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("demo.run");
    write_run(&run, &path, 1000)?;
    let reread = read_run(&path)?;
    assert_eq!(reread.get("q01").expect("round trip").entries, run.get("q01").unwrap().entries);
    println!("\nwrote and re-read {}", path.display());

    // The mean runs over every judged query; queries absent from the run
    // score zero, so a partial submission cannot inflate the number.
    let mean = mean_ndcg(&reread, &qrels, 10)?;
    println!(
        "mean nDCG@10 = {:.5} ({})",
        mean.value,
        mean.warning.as_deref().unwrap_or("all queries present")
    );
    Ok(())
}
