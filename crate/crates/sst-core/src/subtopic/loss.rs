//! Adaptive clustering losses and head training.
//!
//! Positive pairs minimize a symmetrized KL divergence between the
//! max-pooled query and candidate cluster distributions; negative pairs an
//! orthogonality penalty on the soft assignment. Training applies each loss
//! to pairs of its own label, balanced per step, with plain gradient descent.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentPair;
use crate::simgraph::{
    dot_similarity, embed_sentences, normalize_sparsify, CorpusStats, EmbeddingMatrix,
    EncoderConfig, SimilarityMatrix,
};

use super::head::{backward, forward, ClusterHeadParams, HeadGrads};
use super::{choose_cluster_count, SoftAssignment, SubtopicError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLossConfig {
    /// Weight on the negative-pair orthogonality loss.
    pub lambda: f64,
    /// Smoothing added to pooled distributions before the divergence.
    pub epsilon_js: f64,
    pub enable_lp: bool,
    pub enable_ln: bool,
}

impl Default for AdaptiveLossConfig {
    fn default() -> Self {
        Self { lambda: 1.0, epsilon_js: 1e-6, enable_lp: true, enable_ln: true }
    }
}

/// Max-pool the rows of one document side into a smoothed distribution over
/// clusters. Returns (distribution, argmax column per row, normalizer).
fn pooled_distribution(
    b: &Array2<f64>,
    rows: std::ops::Range<usize>,
    eps: f64,
) -> (Vec<f64>, Vec<usize>, f64) {
    let m = b.ncols();
    let mut pooled = vec![0.0f64; m];
    let mut argmaxes = Vec::with_capacity(rows.len());
    for r in rows {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for c in 0..m {
            if b[[r, c]] > best_val {
                best_val = b[[r, c]];
                best = c;
            }
        }
        pooled[best] += best_val;
        argmaxes.push(best);
    }
    let total: f64 = pooled.iter().sum::<f64>() + eps * m as f64;
    let dist: Vec<f64> = pooled.iter().map(|&v| (v + eps) / total).collect();
    (dist, argmaxes, total)
}

fn symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| 0.5 * (pi * (pi / qi).ln() + qi * (qi / pi).ln()))
        .sum()
}

/// Positive-pair loss: symmetrized KL between the max-pooled query and
/// candidate cluster distributions.
pub fn positive_loss(b: &SoftAssignment, l_q: usize, l_d: usize, epsilon_js: f64) -> f64 {
    assert_eq!(l_q + l_d, b.n(), "row count must equal l_q + l_d");
    let (pq, _, _) = pooled_distribution(b.values(), 0..l_q, epsilon_js);
    let (pd, _, _) = pooled_distribution(b.values(), l_q..l_q + l_d, epsilon_js);
    symmetric_kl(&pq, &pd)
}

/// Positive-pair loss plus its gradient with respect to B. The max-pooling
/// routes gradient only through each row's argmax entry.
pub fn positive_loss_grad(
    b: &SoftAssignment,
    l_q: usize,
    l_d: usize,
    epsilon_js: f64,
) -> (f64, Array2<f64>) {
    let values = b.values();
    let m = values.ncols();
    let (pq, arg_q, sum_q) = pooled_distribution(values, 0..l_q, epsilon_js);
    let (pd, arg_d, sum_d) = pooled_distribution(values, l_q..l_q + l_d, epsilon_js);
    let loss = symmetric_kl(&pq, &pd);

    // dJ/dp_i and dJ/dq_i of the symmetrized KL.
    let d_pq: Vec<f64> = pq
        .iter()
        .zip(&pd)
        .map(|(&p, &q)| 0.5 * ((p / q).ln() + 1.0 - q / p))
        .collect();
    let d_pd: Vec<f64> = pq
        .iter()
        .zip(&pd)
        .map(|(&p, &q)| 0.5 * ((q / p).ln() + 1.0 - p / q))
        .collect();

    // Through the renormalization: dJ/dV_k = (dJ/dp_k - sum_i dJ/dp_i p_i)/S.
    let dot_q: f64 = d_pq.iter().zip(&pq).map(|(d, p)| d * p).sum();
    let dot_d: f64 = d_pd.iter().zip(&pd).map(|(d, p)| d * p).sum();
    let d_vq: Vec<f64> = (0..m).map(|k| (d_pq[k] - dot_q) / sum_q).collect();
    let d_vd: Vec<f64> = (0..m).map(|k| (d_pd[k] - dot_d) / sum_d).collect();

    let mut d_b = Array2::<f64>::zeros(values.raw_dim());
    for (r, &c) in arg_q.iter().enumerate() {
        d_b[[r, c]] = d_vq[c];
    }
    for (r, &c) in arg_d.iter().enumerate() {
        d_b[[l_q + r, c]] = d_vd[c];
    }
    (loss, d_b)
}

/// Negative-pair loss: Frobenius norm of (B^T B - I).
pub fn negative_loss(b: &SoftAssignment) -> f64 {
    frobenius_loss(b.values())
}

fn frobenius_loss(b: &Array2<f64>) -> f64 {
    let m = b.ncols();
    let gram = b.t().dot(b);
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            let v = gram[[i, j]] - if i == j { 1.0 } else { 0.0 };
            acc += v * v;
        }
    }
    acc.sqrt()
}

/// Negative-pair loss plus its gradient with respect to B:
/// d||B^T B - I||_F / dB = 2 B (B^T B - I) / ||B^T B - I||_F.
pub fn negative_loss_grad(b: &SoftAssignment) -> (f64, Array2<f64>) {
    let values = b.values();
    let m = values.ncols();
    let mut gram = values.t().dot(values);
    for i in 0..m {
        gram[[i, i]] -= 1.0;
    }
    let norm = gram.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (0.0, Array2::zeros(values.raw_dim()));
    }
    let d_b = values.dot(&gram).mapv(|v| 2.0 * v / norm);
    (norm, d_b)
}

/// Architecture and optimizer settings for head pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTrainConfig {
    pub loss: AdaptiveLossConfig,
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub m_max: usize,
    pub expected_cluster_size: usize,
    pub keep_top: usize,
    pub encoder: EncoderConfig,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        Self {
            loss: AdaptiveLossConfig::default(),
            learning_rate: 1e-3,
            epochs: 3,
            hidden_dim: 16,
            m_max: 16,
            expected_cluster_size: 6,
            keep_top: 10,
            encoder: EncoderConfig::default(),
        }
    }
}

/// Precomputed per-pair inputs for the head.
pub(crate) struct PairInputs {
    pub a_norm: SimilarityMatrix,
    pub emb: EmbeddingMatrix,
    pub m: usize,
    pub l_q: usize,
    pub l_d: usize,
    pub label: u8,
}

pub(crate) fn prepare_pair(
    pair: &DocumentPair,
    stats: &CorpusStats,
    cfg: &HeadTrainConfig,
) -> Result<PairInputs, SubtopicError> {
    let token_lists: Vec<&[String]> = pair
        .query
        .sentences
        .iter()
        .chain(pair.candidate.sentences.iter())
        .map(|s| s.tokens.as_slice())
        .collect();
    let l_q = pair.query.len();
    let l_d = pair.candidate.len();
    let emb = embed_sentences(&token_lists, stats, &cfg.encoder)?;
    let a = dot_similarity(&emb, l_q);
    let a_norm = normalize_sparsify(&a, cfg.keep_top);
    let m = choose_cluster_count(l_q, l_d, cfg.expected_cluster_size).min(cfg.m_max);
    Ok(PairInputs { a_norm, emb, m, l_q, l_d, label: pair.label.unwrap_or(0) })
}

/// Loss and parameter gradients for one pair under the label-dependent loss:
/// positives contribute the divergence term, negatives lambda times the
/// orthogonality term.
pub fn pair_loss_and_grad(
    params: &ClusterHeadParams,
    a_norm: &SimilarityMatrix,
    emb: &EmbeddingMatrix,
    m: usize,
    l_q: usize,
    l_d: usize,
    label: u8,
    cfg: &AdaptiveLossConfig,
) -> Result<(f64, HeadGrads), SubtopicError> {
    let cache = forward(a_norm, emb, params, m)?;
    let b = SoftAssignment::from_softmax(cache.b.clone());
    let (loss, d_b) = if label != 0 {
        positive_loss_grad(&b, l_q, l_d, cfg.epsilon_js)
    } else {
        let (l, g) = negative_loss_grad(&b);
        (cfg.lambda * l, g.mapv(|v| cfg.lambda * v))
    };
    let grads = backward(&cache, emb, params, &d_b);
    Ok((loss, grads))
}

/// Forward-only counterpart of [`pair_loss_and_grad`], used by gradient checks.
pub fn pair_loss(
    params: &ClusterHeadParams,
    a_norm: &SimilarityMatrix,
    emb: &EmbeddingMatrix,
    m: usize,
    l_q: usize,
    l_d: usize,
    label: u8,
    cfg: &AdaptiveLossConfig,
) -> Result<f64, SubtopicError> {
    let b = super::assign_soft(a_norm, emb, params, m)?;
    Ok(if label != 0 {
        positive_loss(&b, l_q, l_d, cfg.epsilon_js)
    } else {
        cfg.lambda * negative_loss(&b)
    })
}

/// Pretrain the clustering head on labeled pairs. Each step pairs one
/// positive with one negative (balanced classes) and averages their
/// label-dependent losses; updates use plain gradient descent at a fixed
/// learning rate. The returned params carry the frozen flag.
pub fn train_head(
    pairs: &[DocumentPair],
    stats: &CorpusStats,
    cfg: &HeadTrainConfig,
    seed: u64,
) -> Result<ClusterHeadParams, SubtopicError> {
    if !cfg.loss.enable_lp && !cfg.loss.enable_ln {
        return Err(SubtopicError::NoLossEnabled);
    }
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for pair in pairs {
        let inputs = prepare_pair(pair, stats, cfg)?;
        if inputs.label != 0 {
            positives.push(inputs);
        } else {
            negatives.push(inputs);
        }
    }
    if cfg.loss.enable_lp && positives.is_empty() {
        return Err(SubtopicError::NoPositivePairs);
    }
    if cfg.loss.enable_ln && negatives.is_empty() {
        return Err(SubtopicError::NoNegativePairs);
    }

    let mut params = ClusterHeadParams::init(cfg.encoder.dim, cfg.hidden_dim, cfg.m_max, seed);
    for epoch in 0..cfg.epochs {
        let mut pos_order: Vec<usize> = (0..positives.len()).collect();
        let mut neg_order: Vec<usize> = (0..negatives.len()).collect();
        let mut rng = crate::seedstream::step_stream(seed, "head-epoch", epoch as u64);
        use rand::seq::SliceRandom;
        pos_order.shuffle(&mut rng);
        neg_order.shuffle(&mut rng);

        let steps = match (cfg.loss.enable_lp, cfg.loss.enable_ln) {
            (true, true) => pos_order.len().min(neg_order.len()),
            (true, false) => pos_order.len(),
            (false, true) => neg_order.len(),
            (false, false) => unreachable!(),
        };
        for step in 0..steps {
            let mut batch: Vec<&PairInputs> = Vec::with_capacity(2);
            if cfg.loss.enable_lp {
                batch.push(&positives[pos_order[step]]);
            }
            if cfg.loss.enable_ln {
                batch.push(&negatives[neg_order[step]]);
            }
            let mut total = HeadGrads::zeros_like(&params);
            for inputs in &batch {
                let (_, grads) = pair_loss_and_grad(
                    &params,
                    &inputs.a_norm,
                    &inputs.emb,
                    inputs.m,
                    inputs.l_q,
                    inputs.l_d,
                    inputs.label,
                    &cfg.loss,
                )?;
                total.add_assign(&grads);
            }
            total.scale(1.0 / batch.len() as f64);
            params.apply_grads(&total, cfg.learning_rate);
        }
    }
    params.frozen = true;
    Ok(params)
}

/// Mean positive loss over a pair set with the given params; used by
/// training-curve checks and the sweep harness.
pub fn mean_positive_loss(
    params: &ClusterHeadParams,
    pairs: &[DocumentPair],
    stats: &CorpusStats,
    cfg: &HeadTrainConfig,
) -> Result<f64, SubtopicError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for pair in pairs.iter().filter(|p| p.label == Some(1)) {
        let inputs = prepare_pair(pair, stats, cfg)?;
        let b = super::assign_soft(&inputs.a_norm, &inputs.emb, params, inputs.m)?;
        total += positive_loss(&b, inputs.l_q, inputs.l_d, cfg.loss.epsilon_js);
        count += 1;
    }
    if count == 0 {
        return Err(SubtopicError::NoPositivePairs);
    }
    Ok(total / count as f64)
}

impl HeadGrads {
    fn zeros_like(params: &ClusterHeadParams) -> Self {
        Self {
            transform: vec![0.0; params.transform.len()],
            attn_src: vec![0.0; params.attn_src.len()],
            attn_dst: vec![0.0; params.attn_dst.len()],
            proj: vec![0.0; params.proj.len()],
        }
    }

    fn add_assign(&mut self, other: &HeadGrads) {
        for (a, b) in self.transform.iter_mut().zip(&other.transform) {
            *a += b;
        }
        for (a, b) in self.attn_src.iter_mut().zip(&other.attn_src) {
            *a += b;
        }
        for (a, b) in self.attn_dst.iter_mut().zip(&other.attn_dst) {
            *a += b;
        }
        for (a, b) in self.proj.iter_mut().zip(&other.proj) {
            *a += b;
        }
    }

    fn scale(&mut self, factor: f64) {
        for part in [
            &mut self.transform,
            &mut self.attn_src,
            &mut self.attn_dst,
            &mut self.proj,
        ] {
            for v in part.iter_mut() {
                *v *= factor;
            }
        }
    }
}
