//! Document ingestion: sentence segmentation, tokenization, dataset loaders,
//! and the planted-subtopic synthetic corpus used as a ground-truth oracle.

mod loader;
mod synthetic;

pub use loader::{load_pairs, load_ranking_task, Qrels, RankingTask};
pub use synthetic::{generate_ranking_task, generate_synthetic, SyntheticSpec, TopicMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document contains no sentences")]
    EmptyDocument,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid label {value} at line {line}: expected 0 or 1")]
    Label { line: usize, value: i64 },
    #[error("qrels reference unknown doc id {0}")]
    UnknownDocId(String),
    #[error("qrels file contains no judgments")]
    EmptyJudgments,
    #[error("infeasible synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single sentence: raw text plus its normalized token list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// 0-based position within the owning document.
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

/// An ordered, non-empty list of sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    /// Segment and tokenize raw text into a document.
    pub fn from_text(id: impl Into<String>, text: &str, tok: &Tokenizer) -> Result<Self, CorpusError> {
        let parts = segment(text)?;
        Ok(Self::from_sentence_texts(id, &parts, tok))
    }

    /// Build from pre-split sentence strings, taken verbatim (no re-segmentation).
    pub fn from_sentence_texts(id: impl Into<String>, parts: &[String], tok: &Tokenizer) -> Self {
        let sentences = parts
            .iter()
            .enumerate()
            .map(|(index, text)| Sentence {
                index,
                text: text.clone(),
                tokens: tok.tokenize(text),
            })
            .collect();
        Self { id: id.into(), sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Tokens of all sentences in order, flattened.
    pub fn all_tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str))
    }
}

/// A labeled (query, candidate) pair. `label` is 1 for relevant, 0 for not;
/// `None` for unlabeled inference records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPair {
    pub query: Document,
    pub candidate: Document,
    pub label: Option<u8>,
}

impl DocumentPair {
    pub fn pair_id(&self) -> String {
        format!("{}:{}", self.query.id, self.candidate.id)
    }

    /// Combined sentence count over both documents.
    pub fn combined_len(&self) -> usize {
        self.query.len() + self.candidate.len()
    }
}

/// Split raw text into sentences.
///
/// A Latin terminal (`.` `!` `?`) ends a sentence when followed by whitespace
/// or end of text; a CJK terminal (`。` `！` `？`) ends one unconditionally,
/// since CJK prose carries no inter-sentence spacing. Text without any
/// terminal mark is a single sentence.
pub fn segment(raw_text: &str) -> Result<Vec<String>, CorpusError> {
    let chars: Vec<char> = raw_text.chars().collect();
    let mut sentences = Vec::new();
    let mut current = String::new();

    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        current.push(c);
        let latin_terminal = matches!(c, '.' | '!' | '?');
        let cjk_terminal = matches!(c, '。' | '！' | '？');
        let at_boundary = if cjk_terminal {
            true
        } else if latin_terminal {
            chars.get(i + 1).is_none_or(|n| n.is_whitespace())
        } else {
            false
        };
        if at_boundary {
            let trimmed = current.trim();
            if !trimmed.is_empty() {
                sentences.push(trimmed.to_string());
            }
            current.clear();
        }
        i += 1;
    }
    let trailing = current.trim();
    if !trailing.is_empty() {
        sentences.push(trailing.to_string());
    }

    if sentences.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    Ok(sentences)
}

/// Tokenization options. Suffix stripping is a light rule-based normalizer
/// standing in for lemmatization; off by default.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Tokenizer {
    pub suffix_strip: bool,
}

impl Tokenizer {
    pub fn new(suffix_strip: bool) -> Self {
        Self { suffix_strip }
    }

    /// Lowercase, split on non-alphanumeric runs, drop empties.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.suffix_strip {
                    strip_suffix(t)
                } else {
                    t.to_string()
                }
            })
            .collect()
    }
}

/// Convenience: tokenize with default options (no suffix stripping).
pub fn tokenize(text: &str) -> Vec<String> {
    Tokenizer::default().tokenize(text)
}

const SUFFIXES: &[&str] = &["ingly", "edly", "ing", "ed", "es", "ly", "s"];

fn strip_suffix(token: &str) -> String {
    for suf in SUFFIXES {
        if let Some(stem) = token.strip_suffix(suf) {
            if stem.chars().count() >= 3 {
                return stem.to_string();
            }
        }
    }
    token.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_two_terminal_marks() {
        let s = segment("A cat. A dog!").unwrap();
        assert_eq!(s, vec!["A cat.", "A dog!"]);
    }

    #[test]
    fn segment_without_terminal_keeps_whole_text() {
        let s = segment("One sentence").unwrap();
        assert_eq!(s, vec!["One sentence"]);
    }

    #[test]
    fn segment_three_terminals_indexes_in_order() {
        let tok = Tokenizer::default();
        let doc = Document::from_text("d", "X. Y? Z!", &tok).unwrap();
        assert_eq!(doc.len(), 3);
        let indices: Vec<usize> = doc.sentences.iter().map(|s| s.index).collect();
        assert_eq!(indices, vec![0, 1, 2]);
    }

    #[test]
    fn segment_cjk_terminals_split_without_whitespace() {
        let s = segment("你好。世界！再见？").unwrap();
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn segment_empty_input_is_an_error() {
        assert!(matches!(segment("   "), Err(CorpusError::EmptyDocument)));
    }

    #[test]
    fn segment_join_is_idempotent() {
        let once = segment("First one. Second one! Third? Tail without mark").unwrap();
        let joined = once.join(" ");
        let twice = segment(&joined).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn tokenize_strips_punctuation() {
        assert_eq!(tokenize("The cat, sat."), vec!["the", "cat", "sat"]);
    }

    #[test]
    fn tokenize_empty_is_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_case_folds() {
        assert_eq!(tokenize("Cats cats CATS"), vec!["cats", "cats", "cats"]);
    }

    #[test]
    fn tokenize_suffix_strip_is_optional() {
        let plain = Tokenizer::new(false);
        let strip = Tokenizer::new(true);
        assert_eq!(plain.tokenize("running cats"), vec!["running", "cats"]);
        assert_eq!(strip.tokenize("running cats"), vec!["runn", "cat"]);
    }

    #[test]
    fn tokenize_matches_uppercased_input() {
        let texts = ["Mixed CASE text", "a,b;C", "Ünïcode Wörds"];
        for t in texts {
            assert_eq!(tokenize(t), tokenize(&t.to_uppercase()));
        }
    }
}
