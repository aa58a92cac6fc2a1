//! Sentence-similarity matrices over the combined sentence set of a pair:
//! word-overlap similarity, a deterministic bag-of-words encoder with random
//! projection, dot-product similarity, and adjacency normalization /
//! sparsification for the adaptive clustering head.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::seedstream::fnv1a64;

#[derive(Debug, Error)]
pub enum SimGraphError {
    #[error("need at least 2 sentences, got {0}")]
    TooFewSentences(usize),
    #[error("corpus has no tokens")]
    EmptyVocabulary,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

const LOG_DENOM_FLOOR: f64 = 1e-9;

/// Symmetric nonnegative sentence-similarity scores for a document pair.
/// `split` is the index of the first candidate sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
    split: usize,
}

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>, split: usize) -> Self {
        debug_assert_eq!(values.nrows(), values.ncols());
        Self { values, split }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Debug dump: one header line `n,l_q`, then the n x n values as CSV.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{},{}", self.n(), self.split)?;
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// One row per sentence of the combined set, in order (query first).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn from_values(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Word-overlap similarity: shared distinct word types over the summed log
/// sentence lengths (token counts with multiplicity), natural log, denominator
/// floored at 1e-9, diagonal zero. Computed once per unordered pair, so the
/// result is exactly symmetric.
pub fn lexical_similarity(
    token_lists: &[&[String]],
    split: usize,
) -> Result<SimilarityMatrix, SimGraphError> {
    let n = token_lists.len();
    if n < 2 {
        return Err(SimGraphError::TooFewSentences(n));
    }
    let type_sets: Vec<BTreeSet<&str>> = token_lists
        .iter()
        .map(|t| t.iter().map(String::as_str).collect())
        .collect();
    let log_lens: Vec<f64> = token_lists
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.len() <= 1 {
                log::warn!("degenerate sentence {i} with {} token(s); log-length floor applies", t.len());
            }
            (t.len() as f64).ln()
        })
        .collect();

    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let shared = type_sets[i].intersection(&type_sets[j]).count() as f64;
            let denom = (log_lens[i] + log_lens[j]).max(LOG_DENOM_FLOOR);
            let sim = shared / denom;
            values[[i, j]] = sim;
            values[[j, i]] = sim;
        }
    }
    Ok(SimilarityMatrix::new(values, split))
}

/// Corpus-level term statistics used for TF-IDF weights and language models.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    /// Documents containing each word type.
    pub doc_freq: BTreeMap<String, usize>,
    /// Total occurrences of each word across the corpus.
    pub term_counts: BTreeMap<String, u64>,
    pub total_terms: u64,
}

impl CorpusStats {
    pub fn from_documents<'a>(docs: impl Iterator<Item = &'a Document>) -> Self {
        let mut stats = CorpusStats::default();
        for doc in docs {
            stats.doc_count += 1;
            let mut seen = BTreeSet::new();
            for tok in doc.all_tokens() {
                *stats.term_counts.entry(tok.to_string()).or_insert(0) += 1;
                stats.total_terms += 1;
                seen.insert(tok);
            }
            for tok in seen {
                *stats.doc_freq.entry(tok.to_string()).or_insert(0) += 1;
            }
        }
        stats
    }

    /// Smoothed inverse document frequency.
    pub fn idf(&self, word: &str) -> f64 {
        let df = self.doc_freq.get(word).copied().unwrap_or(0);
        (((1 + self.doc_count) as f64) / ((1 + df) as f64)).ln() + 1.0
    }

    /// Corpus unigram probability.
    pub fn unigram(&self, word: &str) -> f64 {
        if self.total_terms == 0 {
            return 0.0;
        }
        self.term_counts.get(word).copied().unwrap_or(0) as f64 / self.total_terms as f64
    }

    pub fn is_empty(&self) -> bool {
        self.total_terms == 0
    }

    /// Mean tokens per sentence over the corpus; used by the token-budget
    /// view-size mode.
    pub fn mean_sentence_len<'a>(docs: impl Iterator<Item = &'a Document>) -> f64 {
        let mut tokens = 0usize;
        let mut sentences = 0usize;
        for doc in docs {
            sentences += doc.len();
            tokens += doc.sentences.iter().map(|s| s.tokens.len()).sum::<usize>();
        }
        if sentences == 0 {
            0.0
        } else {
            tokens as f64 / sentences as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub dim: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { dim: 64, seed: 0 }
    }
}

/// Deterministic word direction: a Rademacher row of the random projection,
/// derived from the encoder seed and the word itself.
fn word_direction(word: &str, cfg: &EncoderConfig) -> Vec<f64> {
    let h = fnv1a64(&[&cfg.seed.to_le_bytes(), word.as_bytes()]);
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let scale = 1.0 / (cfg.dim as f64).sqrt();
    (0..cfg.dim)
        .map(|_| if rng.random::<bool>() { scale } else { -scale })
        .collect()
}

/// Embed one token bag: TF-IDF weights pushed through the seeded random
/// projection, then L2-normalized.
pub fn embed_tokens(
    tokens: &[String],
    stats: &CorpusStats,
    cfg: &EncoderConfig,
) -> Result<Vec<f64>, SimGraphError> {
    if stats.is_empty() {
        return Err(SimGraphError::EmptyVocabulary);
    }
    let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
    for t in tokens {
        *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    let mut vec = vec![0.0f64; cfg.dim];
    for (word, count) in tf {
        let weight = count * stats.idf(word);
        let dir = word_direction(word, cfg);
        for (acc, d) in vec.iter_mut().zip(dir) {
            *acc += weight * d;
        }
    }
    let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut vec {
            *x /= norm;
        }
    }
    Ok(vec)
}

/// Embed every sentence of the combined set.
pub fn embed_sentences(
    token_lists: &[&[String]],
    stats: &CorpusStats,
    cfg: &EncoderConfig,
) -> Result<EmbeddingMatrix, SimGraphError> {
    let n = token_lists.len();
    let mut values = Array2::<f64>::zeros((n, cfg.dim));
    for (i, tokens) in token_lists.iter().enumerate() {
        let row = embed_tokens(tokens, stats, cfg)?;
        for (j, v) in row.into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Ok(EmbeddingMatrix { values })
}

/// Dot-product similarity with negatives clamped to zero and zero diagonal.
pub fn dot_similarity(emb: &EmbeddingMatrix, split: usize) -> SimilarityMatrix {
    let n = emb.n();
    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: f64 = emb.row(i).dot(&emb.row(j));
            let sim = dot.max(0.0);
            values[[i, j]] = sim;
            values[[j, i]] = sim;
        }
    }
    SimilarityMatrix::new(values, split)
}

/// Per row keep the `keep_top` largest off-diagonal entries (ties to the
/// lower index), zero the rest, re-symmetrize with max, give isolated rows a
/// unit self-loop, then symmetric-normalize `D^{-1/2} A D^{-1/2}`.
pub fn normalize_sparsify(a: &SimilarityMatrix, keep_top: usize) -> SimilarityMatrix {
    let n = a.n();
    let mut kept = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut entries: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i && a.get(i, j) > 0.0)
            .map(|j| (j, a.get(i, j)))
            .collect();
        entries.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        for &(j, v) in entries.iter().take(keep_top) {
            kept[[i, j]] = v;
        }
    }

    let mut sym = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sym[[i, j]] = kept[[i, j]].max(kept[[j, i]]);
        }
    }
    for i in 0..n {
        if sym.row(i).sum() == 0.0 {
            sym[[i, i]] = 1.0;
        }
    }

    let degrees = crate::linalg::row_sums(&sym);
    let inv_sqrt: Vec<f64> = degrees.iter().map(|&d| 1.0 / d.sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            sym[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    SimilarityMatrix::new(sym, a.split())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_radius_symmetric;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn sim(lists: &[Vec<String>]) -> SimilarityMatrix {
        let refs: Vec<&[String]> = lists.iter().map(|l| l.as_slice()).collect();
        lexical_similarity(&refs, 1).unwrap()
    }

    #[test]
    fn lexical_similarity_hand_value() {
        let lists = vec![toks(&["the", "cat", "sat"]), toks(&["the", "cat", "ran"])];
        let m = sim(&lists);
        assert!((m.get(0, 1) - 0.910_239_226_626_837_3).abs() < 1e-9);
    }

    #[test]
    fn lexical_similarity_disjoint_is_zero() {
        let lists = vec![toks(&["aa", "bb"]), toks(&["cc", "dd"])];
        assert_eq!(sim(&lists).get(0, 1), 0.0);
    }

    #[test]
    fn lexical_similarity_duplicate_sentences() {
        let lists = vec![toks(&["a", "b", "c"]), toks(&["a", "b", "c"])];
        let m = sim(&lists);
        assert!((m.get(0, 1) - 1.365_358_839_940_256).abs() < 1e-9);
        assert_eq!(m.get(0, 0), 0.0, "diagonal stays zero");
    }

    #[test]
    fn lexical_similarity_single_token_sentences_floor() {
        // ln(1) + ln(1) = 0 -> floored denominator, large finite value.
        let lists = vec![toks(&["hi"]), toks(&["hi"])];
        let m = sim(&lists);
        assert!(m.get(0, 1).is_finite());
        assert!(m.get(0, 1) > 0.0);
    }

    #[test]
    fn lexical_similarity_needs_two_sentences() {
        let lists = vec![toks(&["a"])];
        let refs: Vec<&[String]> = lists.iter().map(|l| l.as_slice()).collect();
        assert!(matches!(
            lexical_similarity(&refs, 0),
            Err(SimGraphError::TooFewSentences(1))
        ));
    }

    #[test]
    fn lexical_numerator_counts_types_not_tokens() {
        let a = toks(&["cat", "cat", "dog"]);
        let b = toks(&["cat", "dog", "dog"]);
        let m = sim(&[a, b]);
        // 2 shared types over ln3 + ln3.
        assert!((m.get(0, 1) - 2.0 / (2.0 * 3.0f64.ln())).abs() < 1e-12);
    }

    fn tiny_stats() -> CorpusStats {
        use crate::corpus::{Document, Tokenizer};
        let tok = Tokenizer::default();
        let docs = vec![
            Document::from_text("a", "alpha beta gamma. delta epsilon.", &tok).unwrap(),
            Document::from_text("b", "zeta eta theta. iota kappa.", &tok).unwrap(),
        ];
        CorpusStats::from_documents(docs.iter())
    }

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let stats = tiny_stats();
        let cfg = EncoderConfig::default();
        let tokens = toks(&["alpha", "beta"]);
        let a = embed_tokens(&tokens, &stats, &cfg).unwrap();
        let b = embed_tokens(&tokens, &stats, &cfg).unwrap();
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_sentences_have_unit_dot() {
        let stats = tiny_stats();
        let cfg = EncoderConfig::default();
        let lists = vec![toks(&["alpha", "beta"]), toks(&["alpha", "beta"])];
        let refs: Vec<&[String]> = lists.iter().map(|l| l.as_slice()).collect();
        let emb = embed_sentences(&refs, &stats, &cfg).unwrap();
        let dot: f64 = emb.row(0).dot(&emb.row(1));
        assert!((dot - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_vocab_dots_stay_small_on_average() {
        let stats = tiny_stats();
        let mut total = 0.0;
        for seed in 0..1000u64 {
            let cfg = EncoderConfig { dim: 64, seed };
            let a = embed_tokens(&toks(&["alpha", "beta", "gamma"]), &stats, &cfg).unwrap();
            let b = embed_tokens(&toks(&["zeta", "eta", "theta"]), &stats, &cfg).unwrap();
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            total += dot.abs();
        }
        let mean = total / 1000.0;
        assert!(mean <= 0.2, "mean |dot| {mean} exceeds the projection bound");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let stats = CorpusStats::default();
        let cfg = EncoderConfig::default();
        assert!(matches!(
            embed_tokens(&toks(&["x"]), &stats, &cfg),
            Err(SimGraphError::EmptyVocabulary)
        ));
    }

    #[test]
    fn dot_similarity_hand_values() {
        let values = ndarray::array![[0.6, 0.8], [0.8, 0.6]];
        let emb = EmbeddingMatrix { values };
        let m = dot_similarity(&emb, 1);
        assert!((m.get(0, 1) - 0.96).abs() < 1e-12);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn dot_similarity_clamps_negatives() {
        let values = ndarray::array![[1.0, 0.0], [-1.0, 0.0]];
        let emb = EmbeddingMatrix { values };
        let m = dot_similarity(&emb, 1);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn sparsify_zeroes_below_top_k() {
        // Row 0 has off-diagonal entries 0.9, 0.5, 0.1; keep_top = 2 drops the
        // 0.1 edge, and node 3 has stronger partners so the max
        // re-symmetrization does not restore it.
        let values = ndarray::array![
            [0.0, 0.9, 0.5, 0.1, 0.0],
            [0.9, 0.0, 0.4, 0.0, 0.0],
            [0.5, 0.4, 0.0, 0.3, 0.0],
            [0.1, 0.0, 0.3, 0.0, 0.8],
            [0.0, 0.0, 0.0, 0.8, 0.0],
        ];
        let a = SimilarityMatrix::new(values, 2);
        let out = normalize_sparsify(&a, 2);
        assert_eq!(out.get(0, 3), 0.0);
        assert_eq!(out.get(3, 0), 0.0);
        assert!(out.get(0, 1) > 0.0);
        // The (2,3) edge survives because row 3 keeps it.
        assert!(out.get(2, 3) > 0.0);
    }

    #[test]
    fn sparsify_isolates_get_self_loops() {
        let values = ndarray::array![
            [0.0, 0.9, 0.0],
            [0.9, 0.0, 0.0],
            [0.0, 0.0, 0.0],
        ];
        let a = SimilarityMatrix::new(values, 1);
        let out = normalize_sparsify(&a, 2);
        assert!((out.get(2, 2) - 1.0).abs() < 1e-12);
        assert_eq!(out.get(0, 0), 0.0);
    }

    #[test]
    fn sparse_input_only_normalized() {
        let values = ndarray::array![[0.0, 2.0], [2.0, 0.0]];
        let a = SimilarityMatrix::new(values, 1);
        let out = normalize_sparsify(&a, 1);
        // D = diag(2, 2); normalized off-diagonal = 2 / sqrt(2*2) = 1.
        assert!((out.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_matrix_gets_unit_self_loops() {
        let a = SimilarityMatrix::new(Array2::zeros((3, 3)), 1);
        let out = normalize_sparsify(&a, 2);
        for i in 0..3 {
            assert!((out.get(i, i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_spectral_radius_at_most_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.random_range(3..12);
            let mut values = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in (i + 1)..n {
                    let v: f64 = rng.random::<f64>();
                    let v = if v < 0.3 { 0.0 } else { v };
                    values[[i, j]] = v;
                    values[[j, i]] = v;
                }
            }
            let out = normalize_sparsify(&SimilarityMatrix::new(values, n / 2), 4);
            let radius = spectral_radius_symmetric(out.values());
            assert!(radius <= 1.0 + 1e-9, "spectral radius {radius} > 1");
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let values = ndarray::array![[0.0, 0.5], [0.5, 0.0]];
        let m = SimilarityMatrix::new(values, 1);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "2,1");
        assert_eq!(lines.len(), 3);
    }
}
