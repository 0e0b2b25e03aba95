//! nDCG@k evaluation and run/qrels file I/O.
//!
//! Gains are exponential, (2^rel - 1) / log2(rank + 1), normalized by the
//! ideal ordering of the query's judged grades. Files use the standard
//! whitespace-separated layouts: qrels lines are `query_id 0 doc_id grade`,
//! run lines are `query_id Q0 doc_id rank score tag`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::RankedList;
use crate::error::{Flagged, GffError, Result};

/// Relevance judgments: one integer grade per (query, document) pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Qrels::default()
    }

    /// Records a grade, returning any previous grade for the pair.
    pub fn insert(
        &mut self,
        query_id: impl Into<String>,
        doc_id: impl Into<String>,
        grade: u32,
    ) -> Option<u32> {
        self.judgments.entry(query_id.into()).or_default().insert(doc_id.into(), grade)
    }

    /// Grade for the pair; unjudged pairs count as 0.
    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|docs| docs.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn grades_for(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    /// Total number of judgments across all queries.
    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }
}

/// One ranked list per query.
#[derive(Debug, Clone, Default)]
pub struct Run {
    lists: BTreeMap<String, RankedList>,
}

impl Run {
    pub fn new() -> Self {
        Run::default()
    }

    /// Adds a list keyed by its query id, returning any list it replaces.
    pub fn insert(&mut self, list: RankedList) -> Option<RankedList> {
        self.lists.insert(list.query_id.clone(), list)
    }

    pub fn get(&self, query_id: &str) -> Option<&RankedList> {
        self.lists.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }

    pub fn lists(&self) -> impl Iterator<Item = &RankedList> {
        self.lists.values()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }
}

fn dcg(grades: impl Iterator<Item = u32>, k: usize) -> f64 {
    grades
        .take(k)
        .enumerate()
        .map(|(i, grade)| ((2.0f64).powi(grade as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG@k of one list against the judgments for its query.
///
/// A query with no positively graded document cannot be ranked well or badly;
/// it scores 0 and carries a warning.
pub fn ndcg_at_k(list: &RankedList, qrels: &Qrels, k: usize) -> Result<Flagged<f64>> {
    if k == 0 {
        return Err(GffError::InvalidConfig("ndcg cutoff k must be at least 1".into()));
    }
    let mut ideal_grades: Vec<u32> = qrels
        .grades_for(&list.query_id)
        .map(|docs| docs.values().copied().collect())
        .unwrap_or_default();
    ideal_grades.sort_unstable_by(|a, b| b.cmp(a));
    let ideal = dcg(ideal_grades.into_iter(), k);
    if ideal <= 0.0 {
        return Ok(Flagged::flagged(
            0.0,
            format!("query {:?} has no positively graded document", list.query_id),
        ));
    }
    let gained = dcg(list.doc_ids().map(|d| qrels.grade(&list.query_id, d)), k);
    Ok(Flagged::clean(gained / ideal))
}

/// Mean nDCG@k over every query in the qrels.
///
/// Queries missing from the run contribute 0 rather than being skipped, so a
/// partial run cannot inflate the mean.
pub fn mean_ndcg(run: &Run, qrels: &Qrels, k: usize) -> Result<Flagged<f64>> {
    if qrels.is_empty() {
        return Err(GffError::EmptyQrels);
    }
    let mut total = 0.0;
    let mut queries = 0usize;
    let mut missing = 0usize;
    let mut unjudgeable = 0usize;
    for query_id in qrels.query_ids() {
        queries += 1;
        match run.get(query_id) {
            Some(list) => {
                let score = ndcg_at_k(list, qrels, k)?;
                if score.is_flagged() {
                    unjudgeable += 1;
                }
                total += score.value;
            }
            None => missing += 1,
        }
    }
    let mean = total / queries as f64;
    let mut warnings = Vec::new();
    if missing > 0 {
        warnings.push(format!("{missing} of {queries} queries missing from the run"));
    }
    if unjudgeable > 0 {
        warnings.push(format!("{unjudgeable} queries have no positive judgments"));
    }
    if warnings.is_empty() {
        Ok(Flagged::clean(mean))
    } else {
        Ok(Flagged::flagged(mean, warnings.join("; ")))
    }
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> GffError {
    GffError::MalformedLine { path: path.display().to_string(), line, msg: msg.into() }
}

/// Reads whitespace-separated `query_id 0 doc_id grade` judgments.
pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| GffError::io(path, e))?;
    let mut qrels = Qrels::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(malformed(path, line_no, "expected 4 fields: query 0 doc grade"));
        }
        let grade: u32 = fields[3]
            .parse()
            .map_err(|_| malformed(path, line_no, "grade is not a non-negative integer"))?;
        if qrels.insert(fields[0], fields[2], grade).is_some() {
            return Err(malformed(
                path,
                line_no,
                format!("duplicate judgment for ({}, {})", fields[0], fields[2]),
            ));
        }
    }
    Ok(qrels)
}

/// Reads whitespace-separated `query_id Q0 doc_id rank score tag` lines.
///
/// Lines for one query must be contiguous with ranks counting up from 1 and
/// non-increasing scores.
pub fn read_run(path: impl AsRef<Path>) -> Result<Run> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| GffError::io(path, e))?;
    let mut run = Run::new();
    let mut current: Option<RankedList> = None;
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(malformed(
                path,
                line_no,
                "expected 6 fields: query Q0 doc rank score tag",
            ));
        }
        let (query_id, doc_id, tag) = (fields[0], fields[2], fields[5]);
        let rank: usize =
            fields[3].parse().map_err(|_| malformed(path, line_no, "rank is not an integer"))?;
        let score: f64 =
            fields[4].parse().map_err(|_| malformed(path, line_no, "score is not a number"))?;
        let switch = current.as_ref().map_or(true, |list| list.query_id != query_id);
        if switch {
            if let Some(done) = current.take() {
                flush_list(done, &mut run, path, line_no)?;
            }
            current = Some(RankedList::new(query_id, Vec::new(), tag));
        }
        let list = current.as_mut().unwrap();
        if rank != list.entries.len() + 1 {
            return Err(malformed(
                path,
                line_no,
                format!("rank {rank} out of sequence, expected {}", list.entries.len() + 1),
            ));
        }
        list.entries.push((doc_id.to_string(), score));
    }
    if let Some(done) = current.take() {
        let line_no = content.lines().count();
        flush_list(done, &mut run, path, line_no)?;
    }
    Ok(run)
}

fn flush_list(list: RankedList, run: &mut Run, path: &Path, line_no: usize) -> Result<()> {
    list.validate()
        .map_err(|e| malformed(path, line_no, format!("invalid list: {e}")))?;
    if run.insert(list).is_some() {
        return Err(malformed(path, line_no, "query appears in two separate blocks"));
    }
    Ok(())
}

/// Writes a run file, keeping at most `depth` entries per query.
///
/// Scores use the shortest decimal form that parses back to the same float,
/// so write → read → write is byte-stable.
pub fn write_run(run: &Run, path: impl AsRef<Path>, depth: usize) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for list in run.lists.values() {
        let tag = sanitize_field(&list.tag);
        for (i, (doc_id, score)) in list.entries.iter().take(depth).enumerate() {
            for field in [list.query_id.as_str(), doc_id.as_str()] {
                if field.is_empty() || field.chars().any(char::is_whitespace) {
                    return Err(GffError::InvalidRankedList(format!(
                        "id {field:?} cannot be written as a whitespace-separated field"
                    )));
                }
            }
            writeln!(out, "{} Q0 {} {} {} {}", list.query_id, doc_id, i + 1, score, tag)
                .expect("writing to a String cannot fail");
        }
    }
    std::fs::write(path, out).map_err(|e| GffError::io(path, e))
}

/// Replaces whitespace so a free-text tag stays a single field.
fn sanitize_field(field: &str) -> String {
    if field.is_empty() {
        return "gff".to_string();
    }
    field
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}
