//! File loaders: JSONL pair files and TREC-style ranking tasks.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{CorpusError, Document, DocumentPair, Tokenizer};

#[derive(Deserialize)]
struct PairRecord {
    query_id: String,
    cand_id: String,
    #[serde(default)]
    query_text: Option<String>,
    #[serde(default)]
    cand_text: Option<String>,
    #[serde(default)]
    query_sentences: Option<Vec<String>>,
    #[serde(default)]
    cand_sentences: Option<Vec<String>>,
    label: i64,
}

fn build_doc(
    id: &str,
    text: Option<&String>,
    sentences: Option<&Vec<String>>,
    tok: &Tokenizer,
    line: usize,
) -> Result<Document, CorpusError> {
    match (sentences, text) {
        // Pre-split sentences are taken verbatim, never re-segmented.
        (Some(parts), _) if !parts.is_empty() => {
            Ok(Document::from_sentence_texts(id, parts, tok))
        }
        (_, Some(text)) => Document::from_text(id, text, tok).map_err(|_| CorpusError::Parse {
            line,
            msg: format!("document {id} has no sentences"),
        }),
        _ => Err(CorpusError::Parse {
            line,
            msg: format!("document {id} has neither text nor sentences"),
        }),
    }
}

/// Load labeled classification pairs from a JSONL file, one object per line
/// with fields `query_id`, `query_text`, `cand_id`, `cand_text`, `label`.
/// Optional `query_sentences`/`cand_sentences` arrays override segmentation.
pub fn load_pairs(path: impl AsRef<Path>, tok: &Tokenizer) -> Result<Vec<DocumentPair>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if rec.label != 0 && rec.label != 1 {
            return Err(CorpusError::Label { line: line_no, value: rec.label });
        }
        let query = build_doc(
            &rec.query_id,
            rec.query_text.as_ref(),
            rec.query_sentences.as_ref(),
            tok,
            line_no,
        )?;
        let candidate = build_doc(
            &rec.cand_id,
            rec.cand_text.as_ref(),
            rec.cand_sentences.as_ref(),
            tok,
            line_no,
        )?;
        pairs.push(DocumentPair { query, candidate, label: Some(rec.label as u8) });
    }
    Ok(pairs)
}

/// Graded relevance judgments: query id -> doc id -> grade.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn insert(&mut self, qid: &str, docid: &str, grade: u32) {
        self.grades
            .entry(qid.to_string())
            .or_default()
            .insert(docid.to_string(), grade);
    }

    pub fn grade(&self, qid: &str, docid: &str) -> u32 {
        self.grades
            .get(qid)
            .and_then(|m| m.get(docid))
            .copied()
            .unwrap_or(0)
    }

    pub fn contains_query(&self, qid: &str) -> bool {
        self.grades.contains_key(qid)
    }

    /// All grades recorded for one query.
    pub fn query_grades(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.grades.get(qid)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// A retrieval task: query documents, a candidate pool, and judgments.
#[derive(Debug, Clone)]
pub struct RankingTask {
    pub queries: Vec<Document>,
    pub candidates: Vec<Document>,
    pub qrels: Qrels,
}

#[derive(Deserialize)]
struct DocRecord {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    sentences: Option<Vec<String>>,
}

fn load_docs(path: impl AsRef<Path>, tok: &Tokenizer) -> Result<Vec<Document>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        docs.push(build_doc(&rec.id, rec.text.as_ref(), rec.sentences.as_ref(), tok, line_no)?);
    }
    Ok(docs)
}

/// Parse whitespace-separated TREC qrels lines: `qid 0 docid grade`.
/// A duplicate (qid, docid) line overwrites the earlier grade with a warning.
pub fn parse_qrels(lines: impl Iterator<Item = String>) -> Result<Qrels, CorpusError> {
    let mut qrels = Qrels::default();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(CorpusError::Parse {
                line: line_no,
                msg: format!("expected 4 whitespace-separated fields, got {}", fields.len()),
            });
        }
        let grade: u32 = fields[3].parse().map_err(|_| CorpusError::Parse {
            line: line_no,
            msg: format!("bad grade {:?}", fields[3]),
        })?;
        let key = (fields[0].to_string(), fields[2].to_string());
        if !seen.insert(key) {
            log::warn!(
                "duplicate qrels line {line_no} for ({}, {}); last grade wins",
                fields[0],
                fields[2]
            );
        }
        qrels.insert(fields[0], fields[2], grade);
    }
    if qrels.is_empty() {
        return Err(CorpusError::EmptyJudgments);
    }
    Ok(qrels)
}

/// Load a ranking task from a topics file, a candidates file (both JSONL
/// `{id, text}` or `{id, sentences}`), and a TREC qrels file.
pub fn load_ranking_task(
    topics_path: impl AsRef<Path>,
    candidates_path: impl AsRef<Path>,
    qrels_path: impl AsRef<Path>,
    tok: &Tokenizer,
) -> Result<RankingTask, CorpusError> {
    let queries = load_docs(topics_path, tok)?;
    let candidates = load_docs(candidates_path, tok)?;
    let reader = BufReader::new(File::open(qrels_path)?);
    let qrels = parse_qrels(reader.lines().map_while(Result::ok))?;

    let known: BTreeSet<&str> = candidates.iter().map(|d| d.id.as_str()).collect();
    for qid in qrels.queries() {
        for docid in qrels.query_grades(qid).into_iter().flat_map(|m| m.keys()) {
            if !known.contains(docid.as_str()) {
                return Err(CorpusError::UnknownDocId(docid.clone()));
            }
        }
    }
    Ok(RankingTask { queries, candidates, qrels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_pairs_well_formed() {
        let f = write_tmp(concat!(
            "{\"query_id\":\"q1\",\"query_text\":\"A cat. A dog.\",\"cand_id\":\"d1\",\"cand_text\":\"A bird.\",\"label\":1}\n",
            "{\"query_id\":\"q2\",\"query_text\":\"Hello there.\",\"cand_id\":\"d2\",\"cand_text\":\"Bye now.\",\"label\":0}\n",
        ));
        let pairs = load_pairs(f.path(), &Tokenizer::default()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].query.len(), 2);
        assert_eq!(pairs[0].label, Some(1));
        assert_eq!(pairs[1].label, Some(0));
    }

    #[test]
    fn load_pairs_missing_label_is_parse_error_with_line() {
        let f = write_tmp("{\"query_id\":\"q1\",\"query_text\":\"X.\",\"cand_id\":\"d1\",\"cand_text\":\"Y.\"}\n");
        match load_pairs(f.path(), &Tokenizer::default()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_pairs_bad_label_value() {
        let f = write_tmp("{\"query_id\":\"q1\",\"query_text\":\"X.\",\"cand_id\":\"d1\",\"cand_text\":\"Y.\",\"label\":2}\n");
        match load_pairs(f.path(), &Tokenizer::default()) {
            Err(CorpusError::Label { line, value }) => {
                assert_eq!(line, 1);
                assert_eq!(value, 2);
            }
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn load_pairs_presplit_sentences_taken_verbatim() {
        let f = write_tmp(
            "{\"query_id\":\"q1\",\"query_sentences\":[\"First. still first\",\"Second\"],\"cand_id\":\"d1\",\"cand_text\":\"Z.\",\"label\":1}\n",
        );
        let pairs = load_pairs(f.path(), &Tokenizer::default()).unwrap();
        let texts: Vec<&str> = pairs[0].query.sentences.iter().map(|s| s.text.as_str()).collect();
        // No re-segmentation: the embedded terminal does not split.
        assert_eq!(texts, vec!["First. still first", "Second"]);
    }

    #[test]
    fn qrels_line_round_trips() {
        let qrels = parse_qrels(["q1 0 d3 2".to_string()].into_iter()).unwrap();
        assert_eq!(qrels.grade("q1", "d3"), 2);
    }

    #[test]
    fn qrels_duplicate_last_wins() {
        let qrels = parse_qrels(
            ["q1 0 d3 2".to_string(), "q1 0 d3 1".to_string()].into_iter(),
        )
        .unwrap();
        assert_eq!(qrels.grade("q1", "d3"), 1);
    }

    #[test]
    fn qrels_empty_is_an_error() {
        assert!(matches!(
            parse_qrels(std::iter::empty()),
            Err(CorpusError::EmptyJudgments)
        ));
    }

    #[test]
    fn ranking_task_rejects_unknown_doc_id() {
        let topics = write_tmp("{\"id\":\"q1\",\"text\":\"A query.\"}\n");
        let cands = write_tmp("{\"id\":\"d1\",\"text\":\"A doc.\"}\n");
        let qrels = write_tmp("q1 0 d9 1\n");
        match load_ranking_task(topics.path(), cands.path(), qrels.path(), &Tokenizer::default()) {
            Err(CorpusError::UnknownDocId(id)) => assert_eq!(id, "d9"),
            other => panic!("expected unknown doc id, got {other:?}"),
        }
    }
}
