//! On-disk transcript cache.
//!
//! One JSON file per cache key. A hit skips the generator endpoint, which
//! makes reruns free and exactly reproducible. Keys hash the fully rendered
//! prompt, so any change to a template, the query, or an upstream passage
//! invalidates the entry.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{GffError, Result};
use crate::keygen::GenerationTranscript;

/// Identity of one generator call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheKey {
    pub strategy: String,
    pub query_id: String,
    pub round: u32,
    /// 0-based call index within the round; distinguishes the calls of one
    /// round (e.g. the per-document D2K calls).
    pub slot: u32,
    /// Hex SHA-256 of the rendered prompt.
    pub prompt_hash: String,
}

impl CacheKey {
    pub fn new(
        strategy: impl Into<String>,
        query_id: impl Into<String>,
        round: u32,
        slot: u32,
        prompt: &str,
    ) -> Self {
        CacheKey {
            strategy: strategy.into(),
            query_id: query_id.into(),
            round,
            slot,
            prompt_hash: sha256_hex(prompt),
        }
    }

    /// Stable file name: readable prefix plus enough hash to be collision-safe
    /// after id sanitization.
    fn file_name(&self) -> String {
        let qid = sanitize(&self.query_id);
        let qid_hash = &sha256_hex(&self.query_id)[..8];
        format!(
            "{}-{}-{}-r{}-s{}-{}.json",
            sanitize(&self.strategy),
            qid,
            qid_hash,
            self.round,
            self.slot,
            &self.prompt_hash[..16]
        )
    }
}

pub fn sha256_hex(input: &str) -> String {
    let digest = Sha256::digest(input.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn sanitize(part: &str) -> String {
    part.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Directory of cached transcripts.
#[derive(Debug, Clone)]
pub struct TranscriptCache {
    dir: PathBuf,
}

impl TranscriptCache {
    /// Open (creating if needed) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| GffError::io(&dir, e))?;
        Ok(TranscriptCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn load(&self, key: &CacheKey) -> Result<Option<GenerationTranscript>> {
        let path = self.dir.join(key.file_name());
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GffError::io(&path, e)),
        };
        let transcript = serde_json::from_slice(&bytes).map_err(|e| GffError::json(&path, e))?;
        Ok(Some(transcript))
    }

    /// Store a transcript atomically (temp file + rename), so concurrent
    /// writers of one key can never expose a torn file.
    pub fn store(&self, key: &CacheKey, transcript: &GenerationTranscript) -> Result<()> {
        let path = self.dir.join(key.file_name());
        let tmp = self.dir.join(format!(
            ".{}.tmp-{}",
            key.file_name(),
            std::process::id()
        ));
        let bytes = serde_json::to_vec_pretty(transcript).map_err(|e| GffError::json(&path, e))?;
        std::fs::write(&tmp, bytes).map_err(|e| GffError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| GffError::io(&path, e))?;
        Ok(())
    }
}
