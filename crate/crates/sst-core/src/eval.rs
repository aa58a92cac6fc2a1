//! Classification and ranking metrics, TREC run files, receptive-field
//! truncation, and the adjusted Rand index used to score clustering recovery.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Qrels};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions ({0}) and labels ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("run query {0} missing from qrels")]
    MissingQuery(String),
    #[error("run line malformed: {0}")]
    MalformedRun(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Confusion-matrix metrics; a score at or above `threshold` predicts the
/// positive class. Precision/recall/F1 fall back to 0 when undefined.
pub fn classification_metrics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<ClassificationReport, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        let pred = s >= threshold;
        match (pred, l != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = scores.len() as f64;
    let accuracy = if total > 0.0 { (tp + tn) as f64 / total } else { 0.0 };
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassificationReport { accuracy, precision, recall, f1, tp, fp, tn, fn_ })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// Cutoff k -> mean NDCG@k over queries.
    pub ndcg_at: BTreeMap<usize, f64>,
}

/// One line of a TREC run: `qid Q0 docid rank score tag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub qid: String,
    pub docid: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// Ranked candidate lists, grouped by query in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    pub entries: Vec<RunEntry>,
}

impl RunFile {
    pub fn push(&mut self, entry: RunEntry) {
        self.entries.push(entry);
    }

    /// Per-query entries, ordered by the stored rank field.
    pub fn by_query(&self) -> BTreeMap<&str, Vec<&RunEntry>> {
        let mut map: BTreeMap<&str, Vec<&RunEntry>> = BTreeMap::new();
        for e in &self.entries {
            map.entry(e.qid.as_str()).or_default().push(e);
        }
        for list in map.values_mut() {
            list.sort_by_key(|e| e.rank);
        }
        map
    }

    pub fn write_trec(&self, w: &mut impl Write) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(w, "{} Q0 {} {} {} {}", e.qid, e.docid, e.rank, e.score, e.tag)?;
        }
        Ok(())
    }

    pub fn parse_trec(lines: impl Iterator<Item = String>) -> Result<Self, EvalError> {
        let mut run = RunFile::default();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(EvalError::MalformedRun(line));
            }
            run.push(RunEntry {
                qid: f[0].to_string(),
                docid: f[2].to_string(),
                rank: f[3].parse().map_err(|_| EvalError::MalformedRun(line.clone()))?,
                score: f[4].parse().map_err(|_| EvalError::MalformedRun(line.clone()))?,
                tag: f[5].to_string(),
            });
        }
        Ok(run)
    }
}

fn dcg(grades: &[u32], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// Mean NDCG at each cutoff, linear gain. Queries whose judgments hold no
/// relevant document contribute 0 and stay in the mean.
pub fn ndcg(run: &RunFile, qrels: &Qrels, cutoffs: &[usize]) -> Result<RankingReport, EvalError> {
    let by_query = run.by_query();
    for qid in by_query.keys() {
        if !qrels.contains_query(qid) {
            return Err(EvalError::MissingQuery(qid.to_string()));
        }
    }
    let mut ndcg_at = BTreeMap::new();
    for &k in cutoffs {
        let mut total = 0.0;
        let mut count = 0usize;
        for (qid, entries) in &by_query {
            let ranked_grades: Vec<u32> =
                entries.iter().map(|e| qrels.grade(qid, &e.docid)).collect();
            let mut ideal: Vec<u32> = qrels
                .query_grades(qid)
                .map(|m| m.values().copied().collect())
                .unwrap_or_default();
            ideal.sort_unstable_by(|a, b| b.cmp(a));
            let idcg = dcg(&ideal, k);
            total += if idcg > 0.0 { dcg(&ranked_grades, k) / idcg } else { 0.0 };
            count += 1;
        }
        ndcg_at.insert(k, if count > 0 { total / count as f64 } else { 0.0 });
    }
    Ok(RankingReport { ndcg_at })
}

/// Keep the first `limit` sentences (head truncation).
pub fn truncate_receptive_field(doc: &Document, limit: usize) -> Document {
    Document {
        id: doc.id.clone(),
        sentences: doc.sentences.iter().take(limit.max(1)).cloned().collect(),
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut row: BTreeMap<usize, u64> = BTreeMap::new();
    let mut col: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *row.entry(x).or_insert(0) += 1;
        *col.entry(y).or_insert(0) += 1;
    }
    let choose2 = |c: u64| (c * c.saturating_sub(1)) as f64 / 2.0;
    let sum_table: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_row: f64 = row.values().map(|&c| choose2(c)).sum();
    let sum_col: f64 = col.values().map(|&c| choose2(c)).sum();
    let total = choose2(n as u64);
    let expected = sum_row * sum_col / total;
    let max_index = 0.5 * (sum_row + sum_col);
    if (max_index - expected).abs() < 1e-15 {
        return 1.0;
    }
    (sum_table - expected) / (max_index - expected)
}
