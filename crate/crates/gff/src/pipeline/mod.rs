//! End-to-end orchestration: retrieve, rerank the plain query, generate and
//! filter keywords, rerank per keyword, fuse, and evaluate.
//!
//! Queries are processed concurrently by a fixed worker pool; stages within
//! one query run sequentially. A hard error in any stage aborts that query
//! and is recorded, and the query falls back to the best earlier list (plain
//! rerank, then raw retrieval), so one generator outage cannot void an
//! evaluation. Candidate lists, generation transcripts, expansion sets, and
//! per-keyword reranks all persist under the cache directory; warm reruns
//! reuse them and produce byte-identical output.

pub mod config;

pub use config::{
    GenerationConfig, GeneratorKind, PipelineConfig, RerankerKind, Rm3Config, Strategy,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::corpus::{read_corpus_jsonl, read_queries_tsv, Corpus, Query, RankedList};
use crate::error::{Flagged, GffError, Result};
use crate::eval::{mean_ndcg, ndcg_at_k, read_qrels, write_run, Qrels, Run};
use crate::filter::{rm3_weight_filter, self_consistency_filter, ExpansionSet, Keyword};
use crate::fusion::{fuse, FusionInput};
use crate::keygen::cache::sha256_hex;
use crate::keygen::{Generation, GeneratorEndpoint, TranscriptCache};
use crate::prf::rm3_expand;
use crate::rerank::{rerank_list, Reranker};

/// What happened to one query.
#[derive(Debug, Clone, Serialize)]
pub struct QueryReport {
    pub query_id: String,
    /// Tag of the list that entered the run: "fusion", "rerank", "concat",
    /// or "bm25" (fallback).
    pub result: String,
    /// Kept keyword surfaces (or the single concat expansion string).
    pub keywords: Vec<String>,
    /// Hard error that forced a fallback, if any.
    pub error: Option<String>,
    /// Non-fatal degradations.
    pub warnings: Vec<String>,
    pub ndcg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub dataset: String,
    pub strategy: String,
    /// Fusion weighting label, or "-" on non-fusing paths.
    pub weighting: String,
    pub ndcg_k: usize,
    pub mean_ndcg: f64,
    pub warning: Option<String>,
    pub queries: Vec<QueryReport>,
}

impl PipelineReport {
    pub fn failures(&self) -> usize {
        self.queries.iter().filter(|q| q.error.is_some()).count()
    }

    /// One header line plus one summary row.
    pub fn summary_tsv(&self) -> String {
        format!(
            "dataset\tstrategy\tweighting\tndcg_k\tmean_ndcg\tqueries\tfailures\n{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            self.dataset,
            self.strategy,
            self.weighting,
            self.ndcg_k,
            self.mean_ndcg,
            self.queries.len(),
            self.failures()
        )
    }
}

pub struct PipelineOutcome {
    pub run: Run,
    pub report: PipelineReport,
}

/// Full pipeline: the configured strategy feeds the filter-and-fuse path
/// (keyword strategies) or the single-rerank concat path (`q2d`,
/// `concat_topk`). Writes the run file and, when configured, the TSV report.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    run_with_mode(config, false)
}

/// Baseline: the strategy's expansion is appended to the query for one
/// rerank pass; no fusion. `strategy = "none"` degenerates to plain rerank.
pub fn run_baseline_concat(config: &PipelineConfig) -> Result<PipelineOutcome> {
    run_with_mode(config, true)
}

/// How one query flows after the plain rerank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QueryPath {
    Plain,
    Fuse(Strategy),
    Concat(Strategy),
}

fn dispatch(strategy: Strategy, concat_override: bool, concat_source: Strategy) -> QueryPath {
    let source = if strategy == Strategy::ConcatTopk { concat_source } else { strategy };
    match strategy {
        Strategy::None => QueryPath::Plain,
        _ if concat_override => QueryPath::Concat(source),
        Strategy::Q2d | Strategy::ConcatTopk => QueryPath::Concat(source),
        other => QueryPath::Fuse(other),
    }
}

struct CacheDirs {
    candidates: PathBuf,
    reranks: PathBuf,
    expansions: PathBuf,
}

impl CacheDirs {
    fn create(root: &Path) -> Result<Self> {
        let dirs = CacheDirs {
            candidates: root.join("candidates"),
            reranks: root.join("reranks"),
            expansions: root.join("expansions"),
        };
        for dir in [&dirs.candidates, &dirs.reranks, &dirs.expansions] {
            std::fs::create_dir_all(dir).map_err(|e| GffError::io(dir, e))?;
        }
        Ok(dirs)
    }
}

struct QueryEnv<'a> {
    config: &'a PipelineConfig,
    corpus: &'a Corpus,
    qrels: &'a Qrels,
    reranker: &'a dyn Reranker,
    generator: Option<&'a dyn GeneratorEndpoint>,
    transcripts: &'a TranscriptCache,
    dirs: &'a CacheDirs,
    path_kind: QueryPath,
}

impl<'a> QueryEnv<'a> {
    fn generation(&self) -> Result<Generation<'a>> {
        let endpoint = self.generator.ok_or_else(|| {
            GffError::InvalidConfig("strategy requires a generator endpoint".into())
        })?;
        Ok(Generation::new(endpoint)
            .with_cache(self.transcripts)
            .with_seed(self.config.seed)
            .with_retries(self.config.generation.max_retries))
    }
}

struct QueryOutcome {
    list: RankedList,
    report: QueryReport,
}

fn run_with_mode(config: &PipelineConfig, concat_override: bool) -> Result<PipelineOutcome> {
    config.validate()?;
    let corpus = Corpus::build_index(read_corpus_jsonl(&config.corpus)?)?;
    let queries = read_queries_tsv(&config.queries)?;
    let qrels = read_qrels(&config.qrels)?;
    let path_kind = dispatch(config.strategy, concat_override, config.concat_source);
    let needs_generator = match path_kind {
        QueryPath::Plain => false,
        QueryPath::Fuse(source) | QueryPath::Concat(source) => source.needs_generator(),
    };
    let generator = if needs_generator { Some(config.build_generator()?) } else { None };
    let reranker = config.build_reranker(&corpus)?;
    let dirs = CacheDirs::create(&config.cache_dir)?;
    let transcripts = TranscriptCache::open(config.cache_dir.join("transcripts"))?;

    let env = QueryEnv {
        config,
        corpus: &corpus,
        qrels: &qrels,
        reranker: reranker.as_ref(),
        generator: generator.as_deref(),
        transcripts: &transcripts,
        dirs: &dirs,
        path_kind,
    };
    let outcomes = parallel_map(&queries, config.workers, |query| process_query(&env, query));

    let mut run = Run::new();
    let mut reports = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        run.insert(outcome.list);
        reports.push(outcome.report);
    }
    if let Some(parent) = config.output_run.parent() {
        std::fs::create_dir_all(parent).map_err(|e| GffError::io(parent, e))?;
    }
    write_run(&run, &config.output_run, config.run_depth)?;

    let mean = mean_ndcg(&run, &qrels, config.ndcg_k)?;
    let strategy_label = if concat_override && config.strategy != Strategy::None {
        format!("concat_{}", config.effective_concat_source().as_str())
    } else {
        config.strategy.as_str().to_string()
    };
    let weighting = match path_kind {
        QueryPath::Fuse(_) => config.fusion.weighting.as_str().to_string(),
        _ => "-".to_string(),
    };
    let report = PipelineReport {
        dataset: config.dataset.clone(),
        strategy: strategy_label,
        weighting,
        ndcg_k: config.ndcg_k,
        mean_ndcg: mean.value,
        warning: mean.warning,
        queries: reports,
    };
    if let Some(path) = &config.report {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| GffError::io(parent, e))?;
        }
        std::fs::write(path, report.summary_tsv()).map_err(|e| GffError::io(path, e))?;
    }
    Ok(PipelineOutcome { run, report })
}

fn process_query(env: &QueryEnv<'_>, query: &Query) -> QueryOutcome {
    let mut warnings = Vec::new();
    let candidates = match env.corpus.bm25_retrieve(
        query,
        env.config.candidate_depth,
        &env.config.bm25,
    ) {
        Ok(flagged) => {
            if let Some(w) = flagged.warning {
                warnings.push(w);
            }
            flagged.value
        }
        Err(e) => {
            let empty = RankedList::new(query.id.clone(), Vec::new(), "bm25");
            return finish(env, query, empty, Vec::new(), Some(format!("retrieval: {e}")), warnings);
        }
    };
    if let Err(e) = persist_json(&env.dirs.candidates, &query.id, &candidates) {
        warnings.push(format!("candidate artifact not persisted: {e}"));
    }
    if candidates.entries.is_empty() {
        warnings.push("retrieval produced no candidates".into());
        return finish(env, query, candidates, Vec::new(), None, warnings);
    }

    let fingerprint = rerank_fingerprint(env, query, &candidates);
    let plain = match cached_rerank(env, query, None, &candidates, &fingerprint, &mut warnings) {
        Ok(list) => list,
        Err(e) => {
            return finish(
                env,
                query,
                candidates,
                Vec::new(),
                Some(format!("plain rerank: {e}")),
                warnings,
            );
        }
    };

    match env.path_kind {
        QueryPath::Plain => finish(env, query, plain, Vec::new(), None, warnings),
        QueryPath::Fuse(source) => {
            fuse_path(env, query, &candidates, plain, source, &fingerprint, warnings)
        }
        QueryPath::Concat(source) => {
            concat_path(env, query, &candidates, plain, source, &fingerprint, warnings)
        }
    }
}

fn fuse_path(
    env: &QueryEnv<'_>,
    query: &Query,
    candidates: &RankedList,
    plain: RankedList,
    source: Strategy,
    fingerprint: &str,
    mut warnings: Vec<String>,
) -> QueryOutcome {
    let filtered = match generate_and_filter(env, query, source, env.config.top_k) {
        Ok(flagged) => flagged,
        Err(e) => {
            return finish(env, query, plain, Vec::new(), Some(format!("expansion: {e}")), warnings);
        }
    };
    if let Some(w) = filtered.warning {
        warnings.push(w);
    }
    let set = filtered.value;
    if let Err(e) = persist_json(&env.dirs.expansions, &query.id, &set) {
        warnings.push(format!("expansion artifact not persisted: {e}"));
    }
    let surfaces: Vec<String> = set.keywords.iter().map(|k| k.surface.clone()).collect();
    if set.keywords.is_empty() {
        return finish(env, query, plain, surfaces, None, warnings);
    }

    let mut expansions = Vec::with_capacity(set.keywords.len());
    for keyword in &set.keywords {
        match cached_rerank(env, query, Some(keyword), candidates, fingerprint, &mut warnings) {
            Ok(list) => expansions.push((keyword.clone(), list)),
            Err(e) => {
                return finish(
                    env,
                    query,
                    plain,
                    surfaces,
                    Some(format!("rerank for {:?}: {e}", keyword.surface)),
                    warnings,
                );
            }
        }
    }
    let fused = FusionInput::new(plain.clone(), expansions)
        .and_then(|input| fuse(&input, &env.config.fusion));
    match fused {
        Ok(list) => finish(env, query, list, surfaces, None, warnings),
        Err(e) => finish(env, query, plain, surfaces, Some(format!("fusion: {e}")), warnings),
    }
}

fn concat_path(
    env: &QueryEnv<'_>,
    query: &Query,
    candidates: &RankedList,
    plain: RankedList,
    source: Strategy,
    fingerprint: &str,
    mut warnings: Vec<String>,
) -> QueryOutcome {
    let expansion = match concat_expansion(env, query, source) {
        Ok(flagged) => {
            if let Some(w) = flagged.warning {
                warnings.push(w);
            }
            flagged.value
        }
        Err(e) => {
            return finish(env, query, plain, Vec::new(), Some(format!("expansion: {e}")), warnings);
        }
    };
    let Some(keyword) = expansion else {
        return finish(env, query, plain, Vec::new(), None, warnings);
    };
    match cached_rerank(env, query, Some(&keyword), candidates, fingerprint, &mut warnings) {
        Ok(mut list) => {
            list.tag = "concat".into();
            finish(env, query, list, vec![keyword.surface], None, warnings)
        }
        Err(e) => finish(
            env,
            query,
            plain,
            vec![keyword.surface],
            Some(format!("concat rerank: {e}")),
            warnings,
        ),
    }
}

/// The single expansion string for the concat path: top-k keyword surfaces
/// joined with spaces, or the first generated passage for q2d.
fn concat_expansion(
    env: &QueryEnv<'_>,
    query: &Query,
    source: Strategy,
) -> Result<Flagged<Option<Keyword>>> {
    if source == Strategy::Q2d {
        let transcripts = env.generation()?.q2d(query, env.config.generation.rounds)?;
        let passage = transcripts
            .iter()
            .filter(|t| !t.failed)
            .find_map(|t| t.parsed_documents.first());
        return Ok(match passage {
            Some(text) => Flagged::clean(Some(Keyword::new(text.clone(), 1))),
            None => Flagged::flagged(
                None,
                format!("no passage generated for query {:?}", query.id),
            ),
        });
    }
    let filtered = generate_and_filter(env, query, source, env.config.top_k)?;
    let mut warning = filtered.warning;
    if let Err(e) = persist_json(&env.dirs.expansions, &query.id, &filtered.value) {
        let note = format!("expansion artifact not persisted: {e}");
        warning = Some(warning.map_or(note.clone(), |w| format!("{w}; {note}")));
    }
    let keywords = &filtered.value.keywords;
    if keywords.is_empty() {
        return Ok(Flagged { value: None, warning });
    }
    let joined =
        keywords.iter().map(|k| k.surface.as_str()).collect::<Vec<_>>().join(" ");
    Ok(Flagged { value: Some(Keyword::new(joined, 1)), warning })
}

fn generate_and_filter(
    env: &QueryEnv<'_>,
    query: &Query,
    source: Strategy,
    top_k: usize,
) -> Result<Flagged<ExpansionSet>> {
    let shape = &env.config.generation;
    match source {
        Strategy::Rm3 => {
            let rm3 = &env.config.rm3;
            let expansion = rm3_expand(
                env.corpus,
                query,
                rm3.fb_docs,
                rm3.fb_terms,
                rm3.lambda,
                &env.config.bm25,
            )?;
            let filtered = rm3_weight_filter(&expansion.value, top_k, query)?;
            Ok(merge_warning(filtered, expansion.warning))
        }
        Strategy::Q2k => {
            let transcripts = env.generation()?.q2k(query, shape.rounds)?;
            self_consistency_filter(&transcripts, query, top_k)
        }
        Strategy::Q2d2k => {
            let transcripts = env.generation()?.q2d2k(
                query,
                shape.docs_per_round,
                shape.keywords_per_doc,
                shape.rounds,
            )?;
            self_consistency_filter(&transcripts, query, top_k)
        }
        Strategy::PrfD2k => {
            let transcripts = env.generation()?.prf_d2k(
                env.corpus,
                query,
                shape.prf_docs,
                shape.keywords_per_doc,
                shape.rounds,
                &env.config.bm25,
            )?;
            self_consistency_filter(&transcripts, query, top_k)
        }
        other => Err(GffError::InvalidConfig(format!(
            "strategy {} does not produce keywords",
            other.as_str()
        ))),
    }
}

fn merge_warning<T>(mut flagged: Flagged<T>, extra: Option<String>) -> Flagged<T> {
    flagged.warning = match (flagged.warning.take(), extra) {
        (Some(a), Some(b)) => Some(format!("{a}; {b}")),
        (a, b) => a.or(b),
    };
    flagged
}

fn finish(
    env: &QueryEnv<'_>,
    query: &Query,
    list: RankedList,
    keywords: Vec<String>,
    error: Option<String>,
    mut warnings: Vec<String>,
) -> QueryOutcome {
    let ndcg = match ndcg_at_k(&list, env.qrels, env.config.ndcg_k) {
        Ok(flagged) => {
            if let Some(w) = flagged.warning {
                warnings.push(w);
            }
            flagged.value
        }
        Err(e) => {
            warnings.push(format!("evaluation: {e}"));
            0.0
        }
    };
    let report = QueryReport {
        query_id: query.id.clone(),
        result: list.tag.clone(),
        keywords,
        error,
        warnings,
        ndcg,
    };
    QueryOutcome { list, report }
}

/// Content hash over everything a rerank's scores can depend on for this
/// query: scoring function, token cap, query text, and the candidate
/// documents' ids and texts. Cached lists keyed by it survive any amount of
/// unrelated churn but never outlive a data change.
fn rerank_fingerprint(env: &QueryEnv<'_>, query: &Query, candidates: &RankedList) -> String {
    let mut material = String::new();
    material.push_str(&env.config.reranker_label());
    material.push('\u{1e}');
    material.push_str(&env.config.max_doc_tokens.to_string());
    material.push('\u{1e}');
    material.push_str(&query.id);
    material.push('\u{1f}');
    material.push_str(&query.text);
    for doc_id in candidates.doc_ids() {
        material.push('\u{1e}');
        material.push_str(doc_id);
        material.push('\u{1f}');
        if let Some(doc) = env.corpus.document(doc_id) {
            material.push_str(&doc.text);
        }
    }
    sha256_hex(&material)
}

/// Rerank through the on-disk cache. A hit skips scoring entirely, which is
/// what lets `sweep` reuse per-keyword lists across cutoffs and warm reruns
/// skip remote traffic.
fn cached_rerank(
    env: &QueryEnv<'_>,
    query: &Query,
    keyword: Option<&Keyword>,
    candidates: &RankedList,
    fingerprint: &str,
    warnings: &mut Vec<String>,
) -> Result<RankedList> {
    let (slug, keyword_material) = match keyword {
        None => ("plain".to_string(), String::new()),
        Some(kw) => (slug_of(&kw.canonical), format!("{}\u{1f}{}", kw.canonical, kw.surface)),
    };
    let key = sha256_hex(&format!("{fingerprint}\u{1e}{keyword_material}"));
    let file = env
        .dirs
        .reranks
        .join(format!("{}-{}-{}.json", slug_of(&query.id), slug, &key[..16]));
    if let Ok(text) = std::fs::read_to_string(&file) {
        if let Ok(list) = serde_json::from_str::<RankedList>(&text) {
            return Ok(list);
        }
    }
    let list = rerank_list(
        env.reranker,
        env.corpus,
        query,
        keyword,
        candidates,
        env.config.max_doc_tokens,
    )?;
    match serde_json::to_string_pretty(&list) {
        Ok(json) => {
            if let Err(e) = std::fs::write(&file, json) {
                warnings.push(format!("rerank cache not persisted: {e}"));
            }
        }
        Err(e) => warnings.push(format!("rerank cache not persisted: {e}")),
    }
    Ok(list)
}

fn persist_json<T: Serialize>(dir: &Path, id: &str, value: &T) -> Result<()> {
    let file = dir.join(format!("{}.json", artifact_stem(id)));
    let json = serde_json::to_string_pretty(value).map_err(|e| GffError::json(&file, e))?;
    std::fs::write(&file, json).map_err(|e| GffError::io(&file, e))
}

/// Filesystem-safe stem: sanitized id plus a short hash so distinct ids that
/// sanitize identically cannot collide.
fn artifact_stem(id: &str) -> String {
    format!("{}-{}", slug_of(id), &sha256_hex(id)[..8])
}

fn slug_of(part: &str) -> String {
    let slug: String = part
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .take(24)
        .collect();
    if slug.is_empty() { "x".to_string() } else { slug }
}

/// Apply `f` to every item on a pool of `workers` threads, preserving input
/// order in the result.
fn parallel_map<'a, T, R, F>(items: &'a [T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&'a T) -> R + Sync,
{
    if items.is_empty() {
        return Vec::new();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let worker_count = workers.clamp(1, items.len());
    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(index) else { break };
                *slots[index].lock().unwrap() = Some(f(item));
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub top_k: usize,
    pub fusion_ndcg: f64,
    pub concat_ndcg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub dataset: String,
    pub strategy: String,
    pub ndcg_k: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn tsv(&self) -> String {
        let mut out = String::from("dataset\tstrategy\ttop_k\tfusion_ndcg\tconcat_ndcg\n");
        for row in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                self.dataset, self.strategy, row.top_k, row.fusion_ndcg, row.concat_ndcg
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Generate and filter keywords for every query without reranking anything.
/// One entry per query in input order; a per-query hard error rides in that
/// query's result rather than aborting the batch.
pub fn expand_queries(
    config: &PipelineConfig,
) -> Result<Vec<(String, Result<Flagged<ExpansionSet>>)>> {
    config.validate()?;
    let source = config.effective_concat_source();
    if !source.produces_keywords() {
        return Err(GffError::InvalidConfig(format!(
            "strategy {} does not produce keywords",
            config.strategy.as_str()
        )));
    }
    let corpus = Corpus::build_index(read_corpus_jsonl(&config.corpus)?)?;
    let queries = read_queries_tsv(&config.queries)?;
    let qrels = read_qrels(&config.qrels)?;
    let generator =
        if source.needs_generator() { Some(config.build_generator()?) } else { None };
    let reranker = config.build_reranker(&corpus)?;
    let dirs = CacheDirs::create(&config.cache_dir)?;
    let transcripts = TranscriptCache::open(config.cache_dir.join("transcripts"))?;
    let env = QueryEnv {
        config,
        corpus: &corpus,
        qrels: &qrels,
        reranker: reranker.as_ref(),
        generator: generator.as_deref(),
        transcripts: &transcripts,
        dirs: &dirs,
        path_kind: QueryPath::Fuse(source),
    };
    Ok(parallel_map(&queries, config.workers, |query| {
        (query.id.clone(), generate_and_filter(&env, query, source, config.top_k))
    }))
}

/// Everything reusable across cutoffs for one query: the keyword pool is
/// filtered once at the largest k, and smaller cutoffs take prefixes (the
/// filter orders keywords deterministically, so a prefix equals filtering at
/// the smaller k directly).
struct KeywordPool<'a> {
    query: &'a Query,
    candidates: RankedList,
    fingerprint: String,
    plain: Option<RankedList>,
    expansions: Vec<(Keyword, RankedList)>,
}

/// Reruns filtering, fusion, and the concat baseline at several keyword
/// cutoffs, reusing cached transcripts and per-keyword reranks. Returns one
/// row per cutoff with both paths' mean nDCG.
pub fn sweep_keyword_count(config: &PipelineConfig, k_values: &[usize]) -> Result<SweepReport> {
    if k_values.is_empty() {
        return Err(GffError::InvalidConfig("sweep needs at least one top_k value".into()));
    }
    if k_values.contains(&0) {
        return Err(GffError::InvalidConfig("sweep top_k values must be >= 1".into()));
    }
    config.validate()?;
    let source = config.effective_concat_source();
    if !source.produces_keywords() {
        return Err(GffError::InvalidConfig(format!(
            "sweep requires a keyword-producing strategy, got {}",
            config.strategy.as_str()
        )));
    }

    let corpus = Corpus::build_index(read_corpus_jsonl(&config.corpus)?)?;
    let queries = read_queries_tsv(&config.queries)?;
    let qrels = read_qrels(&config.qrels)?;
    let generator =
        if source.needs_generator() { Some(config.build_generator()?) } else { None };
    let reranker = config.build_reranker(&corpus)?;
    let dirs = CacheDirs::create(&config.cache_dir)?;
    let transcripts = TranscriptCache::open(config.cache_dir.join("transcripts"))?;
    let env = QueryEnv {
        config,
        corpus: &corpus,
        qrels: &qrels,
        reranker: reranker.as_ref(),
        generator: generator.as_deref(),
        transcripts: &transcripts,
        dirs: &dirs,
        path_kind: QueryPath::Fuse(source),
    };

    let max_k = k_values.iter().copied().max().unwrap();
    let pools =
        parallel_map(&queries, config.workers, |query| build_pool(&env, query, source, max_k));

    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut fusion_run = Run::new();
        let mut concat_run = Run::new();
        for pool in &pools {
            fusion_run.insert(fused_at(&env, pool, k));
            concat_run.insert(concat_at(&env, pool, k));
        }
        let fusion_ndcg = mean_ndcg(&fusion_run, &qrels, config.ndcg_k)?.value;
        let concat_ndcg = mean_ndcg(&concat_run, &qrels, config.ndcg_k)?.value;
        rows.push(SweepRow { top_k: k, fusion_ndcg, concat_ndcg });
    }

    let report = SweepReport {
        dataset: config.dataset.clone(),
        strategy: source.as_str().to_string(),
        ndcg_k: config.ndcg_k,
        rows,
    };
    if let Some(path) = &config.report {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| GffError::io(parent, e))?;
        }
        std::fs::write(path, report.tsv()).map_err(|e| GffError::io(path, e))?;
    }
    Ok(report)
}

fn build_pool<'a>(
    env: &QueryEnv<'_>,
    query: &'a Query,
    source: Strategy,
    max_k: usize,
) -> KeywordPool<'a> {
    let mut warnings = Vec::new();
    let candidates = env
        .corpus
        .bm25_retrieve(query, env.config.candidate_depth, &env.config.bm25)
        .map(Flagged::into_value)
        .unwrap_or_else(|_| RankedList::new(query.id.clone(), Vec::new(), "bm25"));
    let fingerprint = rerank_fingerprint(env, query, &candidates);
    let mut pool = KeywordPool {
        query,
        candidates,
        fingerprint,
        plain: None,
        expansions: Vec::new(),
    };
    if pool.candidates.entries.is_empty() {
        return pool;
    }
    let Ok(plain) =
        cached_rerank(env, query, None, &pool.candidates, &pool.fingerprint, &mut warnings)
    else {
        return pool;
    };
    pool.plain = Some(plain);
    let Ok(filtered) = generate_and_filter(env, query, source, max_k) else {
        return pool;
    };
    for keyword in filtered.value.keywords {
        let Ok(list) = cached_rerank(
            env,
            query,
            Some(&keyword),
            &pool.candidates,
            &pool.fingerprint,
            &mut warnings,
        ) else {
            break;
        };
        pool.expansions.push((keyword, list));
    }
    pool
}

fn fused_at(env: &QueryEnv<'_>, pool: &KeywordPool<'_>, k: usize) -> RankedList {
    let Some(plain) = &pool.plain else { return pool.candidates.clone() };
    let kept: Vec<(Keyword, RankedList)> = pool.expansions.iter().take(k).cloned().collect();
    if kept.is_empty() {
        return plain.clone();
    }
    FusionInput::new(plain.clone(), kept)
        .and_then(|input| fuse(&input, &env.config.fusion))
        .unwrap_or_else(|_| plain.clone())
}

fn concat_at(env: &QueryEnv<'_>, pool: &KeywordPool<'_>, k: usize) -> RankedList {
    let Some(plain) = &pool.plain else { return pool.candidates.clone() };
    let surfaces: Vec<&str> =
        pool.expansions.iter().take(k).map(|(kw, _)| kw.surface.as_str()).collect();
    if surfaces.is_empty() {
        return plain.clone();
    }
    let keyword = Keyword::new(surfaces.join(" "), 1);
    match cached_rerank(
        env,
        pool.query,
        Some(&keyword),
        &pool.candidates,
        &pool.fingerprint,
        &mut Vec::new(),
    ) {
        Ok(mut list) => {
            list.tag = "concat".into();
            list
        }
        Err(_) => plain.clone(),
    }
}
