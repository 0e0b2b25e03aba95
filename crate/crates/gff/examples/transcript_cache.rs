//! Transcript caching: generator calls persist to disk, so reruns cost
//! nothing and survive endpoint outages.
//!
//! Run with: cargo run --example transcript_cache

use std::sync::atomic::{AtomicUsize, Ordering};

use gff::corpus::read_queries_tsv;
use gff::keygen::{Generation, GeneratorEndpoint, ScriptedGenerator, TranscriptCache};
use gff::Result;

/// Wraps an endpoint and counts how often it is actually consulted.
struct Counting {
    inner: ScriptedGenerator,
    calls: AtomicUsize,
}

impl GeneratorEndpoint for Counting {
    fn generate(&self, prompt: &str, sample_seed: u64) -> Result<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.generate(prompt, sample_seed)
    }
}

fn main() -> anyhow::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy");
    let queries = read_queries_tsv(format!("{data}/queries.tsv"))?;
    let query = &queries[0];
    let endpoint = Counting {
        inner: ScriptedGenerator::from_file(format!("{data}/generator_script.json"))?,
        calls: AtomicUsize::new(0),
    };

    let dir = tempfile::tempdir()?;
    let cache = TranscriptCache::open(dir.path())?;

    let generation = Generation::new(&endpoint).with_cache(&cache).with_seed(7);
    let cold = generation.q2d2k(query, 2, 5, 5)?;
    let after_cold = endpoint.calls.load(Ordering::Relaxed);
    println!("cold run: {} transcripts, {} endpoint calls", cold.len(), after_cold);

    // Keys hash the rendered prompt, so the identical request never reaches
    // the endpoint again.
    let warm = generation.q2d2k(query, 2, 5, 5)?;
    let after_warm = endpoint.calls.load(Ordering::Relaxed);
    println!("warm run: {} transcripts, {} endpoint calls", warm.len(), after_warm - after_cold);
    assert_eq!(cold, warm);

    // Keys are per query and per rendered prompt: a new query misses, while
    // the first query's entries stay warm.
    let other = &queries[1];
    generation.q2d2k(other, 2, 5, 5)?;
    let after_other = endpoint.calls.load(Ordering::Relaxed);
    println!("new query {}: {} endpoint calls", other.id, after_other - after_warm);
    Ok(())
}
