//! Generate-filter-fuse query expansion for two-stage retrieval.
//!
//! A first-stage lexical retriever (BM25) produces candidate documents; a
//! cross-encoder reranker reorders them. This crate improves the reranking
//! stage without touching either model: it *generates* expansion keywords
//! from the query and its top retrieved documents, *filters* them by
//! self-consistency voting across repeated samples, reranks the candidates
//! once per surviving keyword, and *fuses* the resulting ranked lists with
//! weights that reward lists agreeing with the original ranking.
//!
//! Modules follow the stage order:
//!
//! * [`corpus`]: documents, inverted index, BM25 retrieval
//! * [`prf`]: RM3 pseudo-relevance feedback (keyword source and baseline)
//! * [`keygen`]: prompt rendering, keyword sampling strategies, transcript cache
//! * [`filter`]: self-consistency majority vote over sampled keywords
//! * [`rerank`]: query+keyword document scoring (local stand-in or HTTP)
//! * [`fusion`]: score normalization, list weighting, weighted fusion
//! * [`eval`]: nDCG@k, qrels and run file formats
//! * [`pipeline`]: end-to-end orchestration, config, sweeps

pub mod corpus;
pub mod error;
pub mod eval;
pub mod filter;
pub mod fusion;
pub mod keygen;
pub mod pipeline;
pub mod prf;
pub mod rerank;

pub use corpus::{tokenize, Bm25Params, Corpus, Document, Query, RankedList};
pub use error::{Flagged, GffError, Result};
