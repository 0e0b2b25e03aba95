//! Thin command-line front end over the gff library.
//!
//! Every subcommand reads the same TOML configuration file; flags override
//! individual fields. Remote generator and reranker endpoints authenticate
//! via the GFF_GENERATOR_TOKEN and GFF_RERANKER_TOKEN environment variables.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gff::corpus::{read_corpus_jsonl, read_queries_tsv};
use gff::eval::{mean_ndcg, ndcg_at_k, read_qrels, read_run, write_run, Qrels, Run};
use gff::filter::Keyword;
use gff::fusion::{fuse, FusionInput, Weighting};
use gff::pipeline::{
    expand_queries, run_baseline_concat, run_pipeline, sweep_keyword_count, PipelineConfig,
    PipelineOutcome, Strategy,
};
use gff::Corpus;

/// Writes a stdout line, exiting quietly if the consumer closed the pipe
/// (e.g. `gff expand | head`).
macro_rules! outln {
    ($($arg:tt)*) => {
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    };
}

#[derive(Parser)]
#[command(
    name = "gff",
    version,
    about = "Generate-filter-fuse query expansion for two-stage retrieval",
    after_help = "Remote endpoints read bearer tokens from the \
                  GFF_GENERATOR_TOKEN and GFF_RERANKER_TOKEN environment variables."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML pipeline configuration file.
    #[arg(long, short)]
    config: PathBuf,
}

/// Field overrides applied on top of the configuration file.
#[derive(Args, Default)]
struct Overrides {
    /// Expansion strategy: none, rm3, q2k, q2d, q2d2k, prf_d2k, concat_topk.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Fusion weighting: reciprocal_rank, mean, topk_overlap, entropy, kl,
    /// wasserstein.
    #[arg(long)]
    weighting: Option<Weighting>,
    /// Original-list mixing coefficient in [0, 1].
    #[arg(long)]
    beta: Option<f64>,
    /// Keywords kept by the filter.
    #[arg(long)]
    top_k: Option<usize>,
    /// First-stage retrieval depth.
    #[arg(long)]
    candidate_depth: Option<usize>,
    /// Generator sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent query workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Output run file path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// TSV report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Cache directory root.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Dataset label for report rows.
    #[arg(long)]
    dataset: Option<String>,
    /// Evaluation cutoff.
    #[arg(long)]
    ndcg_k: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(strategy) = self.strategy {
            config.strategy = strategy;
        }
        if let Some(weighting) = self.weighting {
            config.fusion.weighting = weighting;
        }
        if let Some(beta) = self.beta {
            config.fusion.original_coefficient = beta;
        }
        if let Some(top_k) = self.top_k {
            config.top_k = top_k;
        }
        if let Some(depth) = self.candidate_depth {
            config.candidate_depth = depth;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(output) = &self.output {
            config.output_run = output.clone();
        }
        if let Some(report) = &self.report {
            config.report = Some(report.clone());
        }
        if let Some(cache_dir) = &self.cache_dir {
            config.cache_dir = cache_dir.clone();
        }
        if let Some(dataset) = &self.dataset {
            config.dataset = dataset.clone();
        }
        if let Some(k) = self.ndcg_k {
            config.ndcg_k = k;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the BM25 index and print corpus statistics.
    Index {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write first-stage BM25 candidates as a run file.
    Retrieve {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rerank the BM25 candidates with the plain query (no expansion).
    Rerank {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate and filter expansion keywords, one TSV row per keyword.
    Expand {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fuse an original run file with expansion run files.
    Fuse {
        #[command(flatten)]
        config: ConfigArgs,
        /// Fusion weighting override.
        #[arg(long)]
        weighting: Option<Weighting>,
        /// Original-list mixing coefficient in [0, 1].
        #[arg(long)]
        beta: Option<f64>,
        /// Run file holding the original lists.
        #[arg(long)]
        original: PathBuf,
        /// Expansion run file; repeat once per list.
        #[arg(long = "expansion", required = true)]
        expansions: Vec<PathBuf>,
        /// Fused output run file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate a run file against the configured qrels.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run file to score (defaults to the configured output run).
        #[arg(long)]
        run: Option<PathBuf>,
        /// Cutoff (defaults to the configured ndcg_k).
        #[arg(long)]
        k: Option<usize>,
        /// Also print one nDCG row per query.
        #[arg(long)]
        per_query: bool,
    },
    /// Run the configured end-to-end pipeline and print mean nDCG.
    Pipeline {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        overrides: Overrides,
        /// Concat baseline: append the expansion to the query for a single
        /// rerank pass instead of fusing per-keyword lists.
        #[arg(long)]
        concat: bool,
    },
    /// Rerun filtering, fusion, and the concat baseline at several cutoffs.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated keyword cutoffs.
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        k: Vec<usize>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Index { config } => cmd_index(&config),
        Command::Retrieve { config, overrides } => cmd_retrieve(&config, &overrides),
        Command::Rerank { config, overrides } => cmd_rerank(&config, &overrides),
        Command::Expand { config, overrides } => cmd_expand(&config, &overrides),
        Command::Fuse { config, weighting, beta, original, expansions, output } => {
            cmd_fuse(&config, weighting, beta, &original, &expansions, &output)
        }
        Command::Eval { config, run, k, per_query } => cmd_eval(&config, run, k, per_query),
        Command::Pipeline { config, overrides, concat } => {
            cmd_pipeline(&config, &overrides, concat)
        }
        Command::Sweep { config, overrides, k } => cmd_sweep(&config, &overrides, &k),
    }
}

fn load(args: &ConfigArgs, overrides: &Overrides) -> anyhow::Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    overrides.apply(&mut config);
    Ok(config)
}

fn report_mean(run: &Run, qrels: &Qrels, k: usize) -> anyhow::Result<()> {
    let mean = mean_ndcg(run, qrels, k)?;
    if let Some(warning) = &mean.warning {
        eprintln!("warning: {warning}");
    }
    outln!("mean nDCG@{k} = {}", mean.value);
    Ok(())
}

fn cmd_index(args: &ConfigArgs) -> anyhow::Result<()> {
    let config = load(args, &Overrides::default())?;
    let corpus = Corpus::build_index(read_corpus_jsonl(&config.corpus)?)?;
    outln!("documents\t{}", corpus.doc_count());
    outln!("terms\t{}", corpus.term_count());
    outln!("avg_doc_length\t{}", corpus.avg_doc_length());
    Ok(())
}

fn cmd_retrieve(args: &ConfigArgs, overrides: &Overrides) -> anyhow::Result<()> {
    let config = load(args, overrides)?;
    let corpus = Corpus::build_index(read_corpus_jsonl(&config.corpus)?)?;
    let queries = read_queries_tsv(&config.queries)?;
    let qrels = read_qrels(&config.qrels)?;
    let mut run = Run::new();
    for query in &queries {
        let flagged = corpus.bm25_retrieve(query, config.candidate_depth, &config.bm25)?;
        if let Some(warning) = &flagged.warning {
            eprintln!("query {}: warning: {warning}", query.id);
        }
        run.insert(flagged.value);
    }
    if let Some(parent) = config.output_run.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_run(&run, &config.output_run, config.run_depth)?;
    outln!("run written to {} ({} queries)", config.output_run.display(), run.len());
    report_mean(&run, &qrels, config.ndcg_k)
}

fn cmd_rerank(args: &ConfigArgs, overrides: &Overrides) -> anyhow::Result<()> {
    let mut config = load(args, overrides)?;
    config.strategy = Strategy::None;
    print_outcome(&config, run_pipeline(&config)?)
}

fn cmd_expand(args: &ConfigArgs, overrides: &Overrides) -> anyhow::Result<()> {
    let config = load(args, overrides)?;
    outln!("query_id\tkeyword\tvotes");
    for (query_id, result) in expand_queries(&config)? {
        match result {
            Ok(flagged) => {
                if let Some(warning) = &flagged.warning {
                    eprintln!("query {query_id}: warning: {warning}");
                }
                for keyword in &flagged.value.keywords {
                    outln!("{query_id}\t{}\t{}", keyword.surface, keyword.votes);
                }
            }
            Err(error) => eprintln!("query {query_id}: {error}"),
        }
    }
    Ok(())
}

fn cmd_fuse(
    args: &ConfigArgs,
    weighting: Option<Weighting>,
    beta: Option<f64>,
    original: &Path,
    expansions: &[PathBuf],
    output: &Path,
) -> anyhow::Result<()> {
    let mut config = load(args, &Overrides::default())?;
    if let Some(weighting) = weighting {
        config.fusion.weighting = weighting;
    }
    if let Some(beta) = beta {
        config.fusion.original_coefficient = beta;
    }
    let original_run =
        read_run(original).with_context(|| format!("reading {}", original.display()))?;
    let mut expansion_runs = Vec::with_capacity(expansions.len());
    for path in expansions {
        expansion_runs.push(read_run(path).with_context(|| format!("reading {}", path.display()))?);
    }

    let mut fused_run = Run::new();
    for list in original_run.lists() {
        let query_id = &list.query_id;
        let mut pairs = Vec::new();
        for run in &expansion_runs {
            match run.get(query_id) {
                Some(expansion) => {
                    pairs.push((Keyword::new(expansion.tag.clone(), 1), expansion.clone()));
                }
                None => eprintln!("query {query_id}: absent from an expansion run, list skipped"),
            }
        }
        let fused = FusionInput::new(list.clone(), pairs)
            .and_then(|input| fuse(&input, &config.fusion));
        match fused {
            Ok(fused_list) => {
                fused_run.insert(fused_list);
            }
            Err(error) => {
                eprintln!("query {query_id}: {error}; original list kept");
                fused_run.insert(list.clone());
            }
        }
    }
    if let Some(parent) = output.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_run(&fused_run, output, config.run_depth)?;
    outln!("run written to {} ({} queries)", output.display(), fused_run.len());
    let qrels = read_qrels(&config.qrels)?;
    report_mean(&fused_run, &qrels, config.ndcg_k)
}

fn cmd_eval(
    args: &ConfigArgs,
    run: Option<PathBuf>,
    k: Option<usize>,
    per_query: bool,
) -> anyhow::Result<()> {
    let config = load(args, &Overrides::default())?;
    let run_path = run.unwrap_or_else(|| config.output_run.clone());
    let k = k.unwrap_or(config.ndcg_k);
    let run = read_run(&run_path).with_context(|| format!("reading {}", run_path.display()))?;
    let qrels = read_qrels(&config.qrels)?;
    if per_query {
        for list in run.lists() {
            let flagged = ndcg_at_k(list, &qrels, k)?;
            outln!("{}\t{}", list.query_id, flagged.value);
        }
    }
    report_mean(&run, &qrels, k)
}

fn cmd_pipeline(args: &ConfigArgs, overrides: &Overrides, concat: bool) -> anyhow::Result<()> {
    let config = load(args, overrides)?;
    let outcome = if concat { run_baseline_concat(&config)? } else { run_pipeline(&config)? };
    print_outcome(&config, outcome)
}

fn cmd_sweep(args: &ConfigArgs, overrides: &Overrides, k: &[usize]) -> anyhow::Result<()> {
    let config = load(args, overrides)?;
    let report = sweep_keyword_count(&config, k)?;
    if write!(std::io::stdout(), "{}", report.tsv()).is_err() {
        std::process::exit(0);
    }
    if let Some(path) = &config.report {
        eprintln!("report written to {}", path.display());
    }
    Ok(())
}

fn print_outcome(config: &PipelineConfig, outcome: PipelineOutcome) -> anyhow::Result<()> {
    let report = &outcome.report;
    for query in &report.queries {
        if let Some(error) = &query.error {
            eprintln!("query {}: {error}", query.query_id);
        }
        for warning in &query.warnings {
            eprintln!("query {}: warning: {warning}", query.query_id);
        }
    }
    if let Some(warning) = &report.warning {
        eprintln!("warning: {warning}");
    }
    outln!(
        "run written to {} ({} queries, {} failures)",
        config.output_run.display(),
        report.queries.len(),
        report.failures()
    );
    if let Some(path) = &config.report {
        outln!("report written to {}", path.display());
    }
    outln!("strategy {} weighting {}", report.strategy, report.weighting);
    outln!("mean nDCG@{} = {}", report.ndcg_k, report.mean_ndcg);
    Ok(())
}
