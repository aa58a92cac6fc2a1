//! Pluggable view-pair scorers: a lexical-feature logistic model for
//! classification and a linear projection dual-encoder with a contrastive
//! loss for ranking. Both are convex-ish desk-scale stand-ins behind a
//! stable interface; a heavier encoder can replace them without touching
//! the sampling or aggregation machinery.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simgraph::CorpusStats;

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("view has no tokens")]
    EmptyView,
    #[error("contrastive step needs at least one negative")]
    NoNegatives,
    #[error("embedding dim {0} does not match projection dim {1}")]
    DimensionMismatch(usize, usize),
}

pub const FEATURE_DIM: usize = 6;
pub const DEFAULT_MATCHER_LR: f64 = 1e-5;
pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_NEGATIVES: usize = 7;

/// Fixed-order lexical features of a view pair. All entries are symmetric in
/// the two views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

/// Distinct-type overlap, log-normalized overlap, TF-IDF cosine, Jaccard,
/// min/max length ratio, and a bias term.
pub fn featurize(
    q_tokens: &[String],
    d_tokens: &[String],
    stats: &CorpusStats,
) -> Result<FeatureVector, MatcherError> {
    if q_tokens.is_empty() || d_tokens.is_empty() {
        return Err(MatcherError::EmptyView);
    }
    let q_types: BTreeSet<&str> = q_tokens.iter().map(String::as_str).collect();
    let d_types: BTreeSet<&str> = d_tokens.iter().map(String::as_str).collect();
    let shared = q_types.intersection(&d_types).count() as f64;
    let union = q_types.union(&d_types).count() as f64;

    let log_norm = {
        let denom = ((q_tokens.len() as f64).ln() + (d_tokens.len() as f64).ln()).max(1e-9);
        shared / denom
    };
    let jaccard = if union > 0.0 { shared / union } else { 0.0 };

    let cosine = {
        let weight = |types: &BTreeSet<&str>, tokens: &[String], w: &str| -> f64 {
            if !types.contains(w) {
                return 0.0;
            }
            let count = tokens.iter().filter(|t| t.as_str() == w).count() as f64;
            count * stats.idf(w)
        };
        let mut dot = 0.0;
        for w in q_types.intersection(&d_types) {
            dot += weight(&q_types, q_tokens, w) * weight(&d_types, d_tokens, w);
        }
        let norm = |types: &BTreeSet<&str>, tokens: &[String]| -> f64 {
            types
                .iter()
                .map(|w| {
                    let v = weight(types, tokens, w);
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        };
        let nq = norm(&q_types, q_tokens);
        let nd = norm(&d_types, d_tokens);
        if nq > 0.0 && nd > 0.0 {
            dot / (nq * nd)
        } else {
            0.0
        }
    };

    let len_ratio = {
        let (a, b) = (q_tokens.len() as f64, d_tokens.len() as f64);
        a.min(b) / a.max(b)
    };

    Ok(FeatureVector([shared, log_norm, cosine, jaccard, len_ratio, 1.0]))
}

/// Score with a calibration flag: calibrated scores live in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub value: f64,
    pub calibrated: bool,
}

/// Logistic scorer over the lexical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub weights: [f64; FEATURE_DIM],
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self { weights: [0.0; FEATURE_DIM] }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn score_features(features: &FeatureVector, params: &ClassifyParams) -> MatchScore {
    let z: f64 = features.0.iter().zip(&params.weights).map(|(f, w)| f * w).sum();
    MatchScore { value: sigmoid(z), calibrated: true }
}

pub fn score_classify(
    q_tokens: &[String],
    d_tokens: &[String],
    stats: &CorpusStats,
    params: &ClassifyParams,
) -> Result<MatchScore, MatcherError> {
    Ok(score_features(&featurize(q_tokens, d_tokens, stats)?, params))
}

/// Mean binary cross-entropy over the batch and its gradient; one descent
/// step at `lr`. Returns the loss before the update.
pub fn train_step_classify(
    batch: &[(FeatureVector, u8)],
    params: &mut ClassifyParams,
    lr: f64,
) -> f64 {
    assert!(!batch.is_empty(), "empty training batch");
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = [0.0f64; FEATURE_DIM];
    for (features, label) in batch {
        let p = score_features(features, params).value;
        let y = f64::from(*label);
        // Clamp avoids -inf on saturated predictions.
        let p_safe = p.clamp(1e-12, 1.0 - 1e-12);
        loss += -(y * p_safe.ln() + (1.0 - y) * (1.0 - p_safe).ln());
        for (g, f) in grad.iter_mut().zip(&features.0) {
            *g += (p - y) * f;
        }
    }
    loss /= n;
    for (w, g) in params.weights.iter_mut().zip(&grad) {
        *w -= lr * g / n;
    }
    loss
}

/// Linear dual-encoder: a learned square projection applied to both view
/// embeddings, scored by dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankParams {
    pub dim: usize,
    /// Row-major dim x dim projection.
    pub projection: Vec<f64>,
}

impl RankParams {
    pub fn identity(dim: usize) -> Self {
        let mut projection = vec![0.0; dim * dim];
        for i in 0..dim {
            projection[i * dim + i] = 1.0;
        }
        Self { dim, projection }
    }

    fn view(&self) -> ndarray::ArrayView2<'_, f64> {
        ndarray::ArrayView2::from_shape((self.dim, self.dim), &self.projection).unwrap()
    }
}

fn check_dim(params: &RankParams, emb: &[f64]) -> Result<(), MatcherError> {
    if emb.len() != params.dim {
        return Err(MatcherError::DimensionMismatch(emb.len(), params.dim));
    }
    Ok(())
}

/// (P e_q) . (P e_d); unbounded real.
pub fn score_rank(q_emb: &[f64], d_emb: &[f64], params: &RankParams) -> Result<MatchScore, MatcherError> {
    check_dim(params, q_emb)?;
    check_dim(params, d_emb)?;
    let p = params.view();
    let pq = p.dot(&Array1::from_vec(q_emb.to_vec()));
    let pd = p.dot(&Array1::from_vec(d_emb.to_vec()));
    Ok(MatchScore { value: pq.dot(&pd), calibrated: false })
}

/// Contrastive step: softmax over the positive and negative scores at
/// `temperature`, loss = -ln p(positive), analytic gradient descent on the
/// projection. Returns the loss before the update.
pub fn train_step_rank(
    q_emb: &[f64],
    pos_emb: &[f64],
    neg_embs: &[Vec<f64>],
    params: &mut RankParams,
    temperature: f64,
    lr: f64,
) -> Result<f64, MatcherError> {
    if neg_embs.is_empty() {
        return Err(MatcherError::NoNegatives);
    }
    let dim = params.dim;
    let mut cands: Vec<&[f64]> = Vec::with_capacity(neg_embs.len() + 1);
    cands.push(pos_emb);
    for n in neg_embs {
        cands.push(n.as_slice());
    }
    let scores: Vec<f64> = cands
        .iter()
        .map(|c| score_rank(q_emb, c, params).map(|s| s.value))
        .collect::<Result<_, _>>()?;

    let max_s = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max_s) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let loss = -probs[0].ln();

    // dL/ds_c = (p_c - y_c)/tau; ds_c/dP = P (e_q e_c^T + e_c e_q^T).
    let p = params.view().to_owned();
    let q = Array1::from_vec(q_emb.to_vec());
    let pq = p.dot(&q);
    let mut grad = Array2::<f64>::zeros((dim, dim));
    for (c, cand) in cands.iter().enumerate() {
        let coeff = (probs[c] - if c == 0 { 1.0 } else { 0.0 }) / temperature;
        if coeff == 0.0 {
            continue;
        }
        let e_c = Array1::from_vec(cand.to_vec());
        let pc = p.dot(&e_c);
        // coeff * (P e_c) q^T + coeff * (P e_q) e_c^T
        for i in 0..dim {
            for j in 0..dim {
                grad[[i, j]] += coeff * (pc[i] * q[j] + pq[i] * e_c[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            params.projection[i * dim + j] -= lr * grad[[i, j]];
        }
    }
    Ok(loss)
}
