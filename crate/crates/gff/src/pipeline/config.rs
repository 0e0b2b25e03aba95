//! Pipeline configuration: one TOML file describing data paths, the
//! expansion strategy, endpoint choices, and fusion settings.
//!
//! Relative paths in a loaded file resolve against the file's directory, so
//! a config can travel with its fixture data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Bm25Params, Corpus};
use crate::error::{GffError, Result};
use crate::fusion::FusionConfig;
use crate::keygen::{GeneratorEndpoint, RemoteGenerator, ScriptedGenerator};
use crate::rerank::{LexicalStandin, RemoteReranker, Reranker};

/// Which expansion signal feeds the reranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Plain rerank of the retrieved candidates; no expansion.
    None,
    /// RM3 feedback terms as keywords.
    Rm3,
    /// Keywords generated straight from the query.
    Q2k,
    /// A generated passage appended to the query (concat only).
    Q2d,
    /// Keywords extracted from generated passages.
    Q2d2k,
    /// Keywords extracted from retrieved feedback passages.
    PrfD2k,
    /// Filtered keywords joined into one expansion string (concat only).
    ConcatTopk,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Rm3 => "rm3",
            Strategy::Q2k => "q2k",
            Strategy::Q2d => "q2d",
            Strategy::Q2d2k => "q2d2k",
            Strategy::PrfD2k => "prf_d2k",
            Strategy::ConcatTopk => "concat_topk",
        }
    }

    /// Strategies whose output is a votable keyword set, eligible for the
    /// filter-and-fuse path and for `concat_source`.
    pub fn produces_keywords(self) -> bool {
        matches!(self, Strategy::Rm3 | Strategy::Q2k | Strategy::Q2d2k | Strategy::PrfD2k)
    }

    pub(crate) fn needs_generator(self) -> bool {
        matches!(self, Strategy::Q2k | Strategy::Q2d | Strategy::Q2d2k | Strategy::PrfD2k)
    }
}

impl std::str::FromStr for Strategy {
    type Err = GffError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "rm3" => Ok(Strategy::Rm3),
            "q2k" => Ok(Strategy::Q2k),
            "q2d" => Ok(Strategy::Q2d),
            "q2d2k" => Ok(Strategy::Q2d2k),
            "prf_d2k" => Ok(Strategy::PrfD2k),
            "concat_topk" => Ok(Strategy::ConcatTopk),
            other => Err(GffError::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Deterministic file-scripted generator (offline runs, tests).
    Scripted,
    /// HTTP endpoint.
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankerKind {
    /// Idf-weighted lexical overlap stand-in.
    Lexical,
    /// Unweighted lexical overlap stand-in.
    LexicalUniform,
    /// HTTP cross-encoder endpoint.
    Remote,
}

impl RerankerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RerankerKind::Lexical => "lexical",
            RerankerKind::LexicalUniform => "lexical_uniform",
            RerankerKind::Remote => "remote",
        }
    }
}

/// RM3 expansion settings (strategy `rm3`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rm3Config {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub lambda: f64,
}

impl Default for Rm3Config {
    fn default() -> Self {
        Rm3Config { fb_docs: 10, fb_terms: 10, lambda: 0.5 }
    }
}

/// Sampling shape for the generation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Self-consistency rounds per strategy.
    pub rounds: usize,
    /// Passages sampled per round (q2d2k).
    pub docs_per_round: usize,
    /// Keyword cap per extraction call (q2d2k, prf_d2k).
    pub keywords_per_doc: usize,
    /// Feedback passages fed to prf_d2k.
    pub prf_docs: usize,
    /// Extra attempts after a failed endpoint call.
    pub max_retries: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            rounds: 5,
            docs_per_round: 2,
            keywords_per_doc: 5,
            prf_docs: 3,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    /// First-stage retrieval depth; the rerank and fusion stages operate on
    /// exactly this candidate pool.
    pub candidate_depth: usize,
    /// Entries written per query in the output run file.
    pub run_depth: usize,
    pub strategy: Strategy,
    /// Keywords kept by the filter.
    pub top_k: usize,
    /// Base seed for generator sampling.
    pub seed: u64,
    /// Concurrent query workers.
    pub workers: usize,
    /// Document token cap for reranker inputs.
    pub max_doc_tokens: usize,
    /// Evaluation cutoff.
    pub ndcg_k: usize,
    /// Label for report rows.
    pub dataset: String,
    pub generator: GeneratorKind,
    /// Script file for the scripted generator.
    pub generator_script: Option<PathBuf>,
    /// Endpoint URL for the remote generator.
    pub generator_url: Option<String>,
    pub reranker: RerankerKind,
    /// Endpoint URL for the remote reranker.
    pub reranker_url: Option<String>,
    /// Root for transcripts, candidate lists, per-keyword reranks, and
    /// expansion sets.
    pub cache_dir: PathBuf,
    pub output_run: PathBuf,
    /// Optional TSV report destination.
    pub report: Option<PathBuf>,
    /// Keyword source for the concat_topk strategy.
    pub concat_source: Strategy,
    pub bm25: Bm25Params,
    pub rm3: Rm3Config,
    pub generation: GenerationConfig,
    pub fusion: FusionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::from("corpus.jsonl"),
            queries: PathBuf::from("queries.tsv"),
            qrels: PathBuf::from("qrels.txt"),
            candidate_depth: 1000,
            run_depth: 1000,
            strategy: Strategy::None,
            top_k: 3,
            seed: 7,
            workers: 4,
            max_doc_tokens: 512,
            ndcg_k: 10,
            dataset: "default".into(),
            generator: GeneratorKind::Scripted,
            generator_script: None,
            generator_url: None,
            reranker: RerankerKind::Lexical,
            reranker_url: None,
            cache_dir: PathBuf::from(".gff-cache"),
            output_run: PathBuf::from("gff.run"),
            report: None,
            concat_source: Strategy::Q2d2k,
            bm25: Bm25Params::default(),
            rm3: Rm3Config::default(),
            generation: GenerationConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parse a TOML config file and resolve its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GffError::io(path, e))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| GffError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    /// Rebase every relative path onto `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        rebase(&mut self.corpus);
        rebase(&mut self.queries);
        rebase(&mut self.qrels);
        rebase(&mut self.cache_dir);
        rebase(&mut self.output_run);
        if let Some(script) = &mut self.generator_script {
            rebase(script);
        }
        if let Some(report) = &mut self.report {
            rebase(report);
        }
    }

    /// The strategy actually supplying keywords on the concat path.
    pub fn effective_concat_source(&self) -> Strategy {
        if self.strategy == Strategy::ConcatTopk {
            self.concat_source
        } else {
            self.strategy
        }
    }

    pub(crate) fn generator_required(&self) -> bool {
        self.strategy.needs_generator()
            || (self.strategy == Strategy::ConcatTopk && self.concat_source.needs_generator())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("candidate_depth", self.candidate_depth),
            ("run_depth", self.run_depth),
            ("top_k", self.top_k),
            ("workers", self.workers),
            ("max_doc_tokens", self.max_doc_tokens),
            ("ndcg_k", self.ndcg_k),
            ("generation.rounds", self.generation.rounds),
            ("generation.docs_per_round", self.generation.docs_per_round),
            ("generation.keywords_per_doc", self.generation.keywords_per_doc),
            ("generation.prf_docs", self.generation.prf_docs),
            ("rm3.fb_docs", self.rm3.fb_docs),
            ("rm3.fb_terms", self.rm3.fb_terms),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(GffError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.rm3.lambda) {
            return Err(GffError::InvalidConfig(format!(
                "rm3.lambda must lie in [0, 1], got {}",
                self.rm3.lambda
            )));
        }
        self.fusion.validate()?;
        for (name, path) in
            [("corpus", &self.corpus), ("queries", &self.queries), ("qrels", &self.qrels)]
        {
            if !path.exists() {
                return Err(GffError::InvalidConfig(format!(
                    "{name} file {} does not exist",
                    path.display()
                )));
            }
        }
        if self.strategy == Strategy::ConcatTopk && !self.concat_source.produces_keywords() {
            return Err(GffError::InvalidConfig(format!(
                "concat_source must produce keywords, got {:?}",
                self.concat_source.as_str()
            )));
        }
        if self.generator_required() {
            match self.generator {
                GeneratorKind::Scripted => match &self.generator_script {
                    Some(script) if script.exists() => {}
                    Some(script) => {
                        return Err(GffError::InvalidConfig(format!(
                            "generator_script {} does not exist",
                            script.display()
                        )));
                    }
                    None => {
                        return Err(GffError::InvalidConfig(
                            "scripted generator requires generator_script".into(),
                        ));
                    }
                },
                GeneratorKind::Remote => {
                    if self.generator_url.is_none() {
                        return Err(GffError::InvalidConfig(
                            "remote generator requires generator_url".into(),
                        ));
                    }
                }
            }
        }
        if self.reranker == RerankerKind::Remote && self.reranker_url.is_none() {
            return Err(GffError::InvalidConfig(
                "remote reranker requires reranker_url".into(),
            ));
        }
        Ok(())
    }

    pub fn build_generator(&self) -> Result<Box<dyn GeneratorEndpoint>> {
        match self.generator {
            GeneratorKind::Scripted => {
                let script = self.generator_script.as_ref().ok_or_else(|| {
                    GffError::InvalidConfig("scripted generator requires generator_script".into())
                })?;
                Ok(Box::new(ScriptedGenerator::from_file(script)?))
            }
            GeneratorKind::Remote => {
                let url = self.generator_url.as_ref().ok_or_else(|| {
                    GffError::InvalidConfig("remote generator requires generator_url".into())
                })?;
                Ok(Box::new(RemoteGenerator::new(url)))
            }
        }
    }

    pub fn build_reranker<'a>(&self, corpus: &'a Corpus) -> Result<Box<dyn Reranker + 'a>> {
        match self.reranker {
            RerankerKind::Lexical => Ok(Box::new(LexicalStandin::corpus_backed(corpus))),
            RerankerKind::LexicalUniform => Ok(Box::new(LexicalStandin::uniform())),
            RerankerKind::Remote => {
                let url = self.reranker_url.as_ref().ok_or_else(|| {
                    GffError::InvalidConfig("remote reranker requires reranker_url".into())
                })?;
                Ok(Box::new(RemoteReranker::new(url)))
            }
        }
    }

    /// Identifies the scoring function for rerank-cache keys.
    pub(crate) fn reranker_label(&self) -> String {
        match (&self.reranker, &self.reranker_url) {
            (RerankerKind::Remote, Some(url)) => format!("remote:{url}"),
            (kind, _) => kind.as_str().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_yields_defaults() {
        let config: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(config.candidate_depth, 1000);
        assert_eq!(config.top_k, 3);
        assert_eq!(config.strategy, Strategy::None);
        assert_eq!(config.fusion.original_coefficient, 0.3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<PipelineConfig>("candidate_dpeth = 5").unwrap_err();
        assert!(err.to_string().contains("candidate_dpeth"));
    }

    #[test]
    fn load_resolves_paths_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.toml");
        std::fs::write(&config_path, "corpus = \"data/c.jsonl\"\noutput_run = \"/abs/run\"\n")
            .unwrap();
        let config = PipelineConfig::load(&config_path).unwrap();
        assert_eq!(config.corpus, dir.path().join("data/c.jsonl"));
        assert_eq!(config.output_run, PathBuf::from("/abs/run"));
    }

    #[test]
    fn strategy_names_round_trip() {
        for strategy in [
            Strategy::None,
            Strategy::Rm3,
            Strategy::Q2k,
            Strategy::Q2d,
            Strategy::Q2d2k,
            Strategy::PrfD2k,
            Strategy::ConcatTopk,
        ] {
            let parsed: Strategy = strategy.as_str().parse().unwrap();
            assert_eq!(parsed, strategy);
        }
        assert!("xyz".parse::<Strategy>().is_err());
    }

    #[test]
    fn toml_strategy_spelling_matches_from_str() {
        let config: PipelineConfig = toml::from_str("strategy = \"prf_d2k\"").unwrap();
        assert_eq!(config.strategy, Strategy::PrfD2k);
    }

    #[test]
    fn validation_requires_existing_inputs() {
        let config = PipelineConfig {
            corpus: PathBuf::from("/nonexistent/corpus.jsonl"),
            ..PipelineConfig::default()
        };
        let err = config.validate().unwrap_err();
        assert!(matches!(err, GffError::InvalidConfig(_)));
    }

    #[test]
    fn validation_rejects_zero_depth() {
        let config = PipelineConfig { candidate_depth: 0, ..PipelineConfig::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn concat_source_must_produce_keywords() {
        let dir = tempfile::tempdir().unwrap();
        for (name, content) in
            [("c.jsonl", "{\"_id\": \"d1\", \"text\": \"x\"}\n"), ("q.tsv", "q1\tx\n"), ("r.txt", "q1 0 d1 1\n")]
        {
            std::fs::write(dir.path().join(name), content).unwrap();
        }
        let config = PipelineConfig {
            corpus: dir.path().join("c.jsonl"),
            queries: dir.path().join("q.tsv"),
            qrels: dir.path().join("r.txt"),
            strategy: Strategy::ConcatTopk,
            concat_source: Strategy::Q2d,
            ..PipelineConfig::default()
        };
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("concat_source"));
    }

    #[test]
    fn generator_is_only_demanded_when_a_strategy_uses_it() {
        let dir = tempfile::tempdir().unwrap();
        for (name, content) in
            [("c.jsonl", "{\"_id\": \"d1\", \"text\": \"x\"}\n"), ("q.tsv", "q1\tx\n"), ("r.txt", "q1 0 d1 1\n")]
        {
            std::fs::write(dir.path().join(name), content).unwrap();
        }
        let base = PipelineConfig {
            corpus: dir.path().join("c.jsonl"),
            queries: dir.path().join("q.tsv"),
            qrels: dir.path().join("r.txt"),
            ..PipelineConfig::default()
        };
        // rm3 never touches the generator, so a missing script is fine.
        let rm3 = PipelineConfig { strategy: Strategy::Rm3, ..base.clone() };
        rm3.validate().unwrap();
        let q2k = PipelineConfig { strategy: Strategy::Q2k, ..base };
        let err = q2k.validate().unwrap_err();
        assert!(err.to_string().contains("generator_script"));
    }
}
