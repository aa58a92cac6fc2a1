//! Temporal aggregation: per-epoch view scheduling during training, pooled
//! multi-view inference, query-likelihood view scoring, and the
//! range-sampling analysis schedule.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, DocumentPair};
use crate::eval::{RunEntry, RunFile};
use crate::matcher::{
    featurize, score_features, score_rank, train_step_classify, train_step_rank, ClassifyParams,
    MatchScore, MatcherError, RankParams,
};
use crate::sampling::{build_inference_pool, SamplerKind, SamplingError, ViewPool};
use crate::seedstream::{pair_stream, step_stream};
use crate::simgraph::{embed_tokens, CorpusStats, EncoderConfig, SimGraphError};
use crate::subtopic::SubtopicPartition;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("pool for pair {pair_id} has {got} entries, expected {expected}")]
    PoolLengthMismatch { pair_id: String, expected: usize, got: usize },
    #[error("pair {0} has no label")]
    MissingLabel(String),
    #[error("inference pooling must be {expected} for this task")]
    InvalidPooling { expected: &'static str },
    #[error(transparent)]
    Matcher(#[from] MatcherError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    SimGraph(#[from] SimGraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Max,
    Mean,
}

/// Inference-time view pool settings: pool size n and the pooling operator
/// (max for classification, mean for ranking).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub n: usize,
    pub pooling: Pooling,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { n: 3, pooling: Pooling::Max }
    }
}

/// The per-epoch pair visiting order, drawn from the seed stream. Public so
/// equivalence oracles can replay training exactly.
pub fn epoch_shuffle(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = step_stream(seed, "epoch-shuffle", epoch as u64);
    order.shuffle(&mut rng);
    order
}

fn check_pools(pools: &[ViewPool], epochs: usize) -> Result<(), AggregateError> {
    for pool in pools {
        if pool.len() != epochs {
            return Err(AggregateError::PoolLengthMismatch {
                pair_id: pool.pair_id.clone(),
                expected: epochs,
                got: pool.len(),
            });
        }
    }
    Ok(())
}

/// Per-feature affine standardization, fitted on the first epoch's views.
/// The optimizer runs in standardized space (well-conditioned regardless of
/// raw feature scales) and the learned weights are folded back into plain
/// weights over the raw features, so the returned params are an ordinary
/// linear model. Constant features (the bias) pass through untouched.
#[derive(Debug, Clone)]
struct FeatureScaler {
    mean: [f64; crate::matcher::FEATURE_DIM],
    scale: [f64; crate::matcher::FEATURE_DIM],
}

impl FeatureScaler {
    fn fit(features: &[crate::matcher::FeatureVector]) -> Self {
        let dim = crate::matcher::FEATURE_DIM;
        let n = features.len().max(1) as f64;
        let mut mean = [0.0; crate::matcher::FEATURE_DIM];
        let mut scale = [1.0; crate::matcher::FEATURE_DIM];
        for f in features {
            for j in 0..dim {
                mean[j] += f.0[j];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for j in 0..dim {
            let var: f64 = features.iter().map(|f| (f.0[j] - mean[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd < 1e-9 {
                mean[j] = 0.0;
                scale[j] = 1.0;
            } else {
                scale[j] = sd;
            }
        }
        Self { mean, scale }
    }

    fn apply(&self, f: &crate::matcher::FeatureVector) -> crate::matcher::FeatureVector {
        let mut out = [0.0; crate::matcher::FEATURE_DIM];
        for j in 0..crate::matcher::FEATURE_DIM {
            out[j] = (f.0[j] - self.mean[j]) / self.scale[j];
        }
        crate::matcher::FeatureVector(out)
    }

    /// Fold standardized-space weights into raw-feature weights. The bias
    /// column (constant 1, untouched by fit) absorbs the mean shifts.
    fn fold(&self, params: &ClassifyParams) -> ClassifyParams {
        let dim = crate::matcher::FEATURE_DIM;
        let mut weights = [0.0; crate::matcher::FEATURE_DIM];
        let mut bias_shift = 0.0;
        for j in 0..dim {
            weights[j] = params.weights[j] / self.scale[j];
            bias_shift += params.weights[j] * self.mean[j] / self.scale[j];
        }
        weights[dim - 1] -= bias_shift;
        ClassifyParams { weights }
    }
}

/// Train the classification matcher, presenting entry t of every pair's pool
/// in epoch t: the shuffled pair order is chunked into minibatches of
/// `batch_size`. Returns the trained params (plain weights over the raw
/// features) and the per-epoch mean loss curve.
pub fn temporal_train_classify(
    pairs: &[DocumentPair],
    pools: &[ViewPool],
    stats: &CorpusStats,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<(ClassifyParams, Vec<f64>), AggregateError> {
    assert_eq!(pairs.len(), pools.len(), "one pool per pair");
    check_pools(pools, epochs)?;
    let batch_size = batch_size.max(1);

    // Featurize every epoch's views up front; fit the scaler on epoch 0.
    let mut all_features: Vec<Vec<crate::matcher::FeatureVector>> = Vec::with_capacity(epochs);
    let mut labels = Vec::with_capacity(pairs.len());
    for pair in pairs {
        labels.push(pair.label.ok_or_else(|| AggregateError::MissingLabel(pair.pair_id()))?);
    }
    for epoch in 0..epochs {
        let mut row = Vec::with_capacity(pairs.len());
        for (pair, pool) in pairs.iter().zip(pools) {
            let (vq, vd) = &pool.entries[epoch];
            row.push(featurize(&vq.tokens(&pair.query), &vd.tokens(&pair.candidate), stats)?);
        }
        all_features.push(row);
    }
    let scaler = FeatureScaler::fit(&all_features[0]);

    let mut params = ClassifyParams::default();
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let order = epoch_shuffle(seed, epoch, pairs.len());
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(crate::matcher::FeatureVector, u8)> = chunk
                .iter()
                .map(|&i| (scaler.apply(&all_features[epoch][i]), labels[i]))
                .collect();
            epoch_loss += train_step_classify(&batch, &mut params, lr);
            batches += 1;
        }
        curve.push(epoch_loss / batches.max(1) as f64);
    }
    Ok((scaler.fold(&params), curve))
}

/// Static (no temporal aggregation) reference trainer: one fixed view pair
/// per document pair, re-presented every epoch. Written as an independent
/// code path; with constant pools the temporal trainer must match it bit
/// for bit.
pub fn static_train_classify(
    pairs: &[DocumentPair],
    views: &[(crate::sampling::View, crate::sampling::View)],
    stats: &CorpusStats,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<(ClassifyParams, Vec<f64>), AggregateError> {
    assert_eq!(pairs.len(), views.len(), "one view pair per document pair");
    let batch_size = batch_size.max(1);
    let mut features = Vec::with_capacity(pairs.len());
    let mut labels = Vec::with_capacity(pairs.len());
    for (pair, (vq, vd)) in pairs.iter().zip(views) {
        labels.push(pair.label.ok_or_else(|| AggregateError::MissingLabel(pair.pair_id()))?);
        features.push(featurize(&vq.tokens(&pair.query), &vd.tokens(&pair.candidate), stats)?);
    }
    let scaler = FeatureScaler::fit(&features);
    let standardized: Vec<crate::matcher::FeatureVector> =
        features.iter().map(|f| scaler.apply(f)).collect();

    let mut params = ClassifyParams::default();
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let order = epoch_shuffle(seed, epoch, pairs.len());
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(crate::matcher::FeatureVector, u8)> =
                chunk.iter().map(|&i| (standardized[i], labels[i])).collect();
            epoch_loss += train_step_classify(&batch, &mut params, lr);
            batches += 1;
        }
        curve.push(epoch_loss / batches.max(1) as f64);
    }
    Ok((scaler.fold(&params), curve))
}

/// Train the ranking matcher with a contrastive step per query: the
/// positive is the pair's own epoch view, negatives are the candidate views
/// of the following `negatives` pairs (cyclic in-batch negatives).
#[allow(clippy::too_many_arguments)]
pub fn temporal_train_rank(
    pairs: &[DocumentPair],
    pools: &[ViewPool],
    stats: &CorpusStats,
    encoder: &EncoderConfig,
    epochs: usize,
    lr: f64,
    temperature: f64,
    negatives: usize,
    seed: u64,
) -> Result<(RankParams, Vec<f64>), AggregateError> {
    assert_eq!(pairs.len(), pools.len(), "one pool per pair");
    check_pools(pools, epochs)?;
    let n = pairs.len();
    let mut params = RankParams::identity(encoder.dim);
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        // Embed every view of this epoch once.
        let mut q_embs = Vec::with_capacity(n);
        let mut d_embs = Vec::with_capacity(n);
        for (pair, pool) in pairs.iter().zip(pools) {
            let (vq, vd) = &pool.entries[epoch];
            q_embs.push(embed_tokens(&vq.tokens(&pair.query), stats, encoder)?);
            d_embs.push(embed_tokens(&vd.tokens(&pair.candidate), stats, encoder)?);
        }
        let order = epoch_shuffle(seed, epoch, n);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let neg_count = negatives.min(n.saturating_sub(1)).max(1);
            let negs: Vec<Vec<f64>> =
                (1..=neg_count).map(|step| d_embs[(i + step) % n].clone()).collect();
            epoch_loss +=
                train_step_rank(&q_embs[i], &d_embs[i], &negs, &mut params, temperature, lr)?;
        }
        curve.push(epoch_loss / n.max(1) as f64);
    }
    Ok((params, curve))
}

/// Max of component scores (exact: the maximum element itself).
pub fn pool_max(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean of component scores with a canonical summation order, so any
/// permutation of the same multiset produces the identical bit pattern.
pub fn pool_mean(scores: &[f64]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Classification inference: score `cfg.n` fresh view pairs and keep the max.
#[allow(clippy::too_many_arguments)]
pub fn infer_classify(
    pair: &DocumentPair,
    partition: &SubtopicPartition,
    kind: SamplerKind,
    k: usize,
    cfg: &InferenceConfig,
    params: &ClassifyParams,
    stats: &CorpusStats,
    seed: u64,
) -> Result<MatchScore, AggregateError> {
    if cfg.pooling != Pooling::Max {
        return Err(AggregateError::InvalidPooling { expected: "max" });
    }
    let pool = build_inference_pool(pair, partition, kind, k, cfg.n, seed)?;
    let scores = score_pool_classify(pair, &pool, params, stats)?;
    Ok(MatchScore { value: pool_max(&scores), calibrated: true })
}

/// Component scores of every entry in a pool under the classification matcher.
pub fn score_pool_classify(
    pair: &DocumentPair,
    pool: &ViewPool,
    params: &ClassifyParams,
    stats: &CorpusStats,
) -> Result<Vec<f64>, AggregateError> {
    pool.entries
        .iter()
        .map(|(vq, vd)| {
            let f = featurize(&vq.tokens(&pair.query), &vd.tokens(&pair.candidate), stats)?;
            Ok(score_features(&f, params).value)
        })
        .collect()
}

/// Ranking inference: per candidate, mean of `cfg.n` view-pair scores;
/// candidates sorted by score descending, ties by doc id ascending.
#[allow(clippy::too_many_arguments)]
pub fn infer_rank(
    query: &Document,
    candidates: &[(Document, SubtopicPartition)],
    kind: SamplerKind,
    k: usize,
    cfg: &InferenceConfig,
    params: &RankParams,
    stats: &CorpusStats,
    encoder: &EncoderConfig,
    seed: u64,
    tag: &str,
) -> Result<RunFile, AggregateError> {
    if cfg.pooling != Pooling::Mean {
        return Err(AggregateError::InvalidPooling { expected: "mean" });
    }
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(candidates.len());
    for (cand, partition) in candidates {
        let pair = DocumentPair { query: query.clone(), candidate: cand.clone(), label: None };
        let pool = build_inference_pool(&pair, partition, kind, k, cfg.n, seed)?;
        let mut scores = Vec::with_capacity(pool.len());
        for (vq, vd) in &pool.entries {
            let qe = embed_tokens(&vq.tokens(query), stats, encoder)?;
            let de = embed_tokens(&vd.tokens(cand), stats, encoder)?;
            scores.push(score_rank(&qe, &de, params)?.value);
        }
        scored.push((cand.id.clone(), pool_mean(&scores)));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut run = RunFile::default();
    for (rank, (docid, score)) in scored.into_iter().enumerate() {
        run.push(RunEntry {
            qid: query.id.clone(),
            docid,
            rank: rank + 1,
            score,
            tag: tag.to_string(),
        });
    }
    Ok(run)
}

/// Query-likelihood of a view under the document's Dirichlet-smoothed
/// unigram model. With `mu = 0` a view word absent from the document yields
/// negative infinity (ranked last). With `mu > 0` a word unseen in the whole
/// corpus gets an epsilon background probability and a warning.
pub fn ql_similarity(view_tokens: &[String], doc: &Document, mu: f64, stats: &CorpusStats) -> f64 {
    use std::collections::BTreeMap;
    let mut doc_counts: BTreeMap<&str, f64> = BTreeMap::new();
    let mut doc_len = 0.0;
    for t in doc.all_tokens() {
        *doc_counts.entry(t).or_insert(0.0) += 1.0;
        doc_len += 1.0;
    }
    let mut view_counts: BTreeMap<&str, f64> = BTreeMap::new();
    for t in view_tokens {
        *view_counts.entry(t.as_str()).or_insert(0.0) += 1.0;
    }

    let mut score = 0.0;
    for (word, count) in view_counts {
        let tf = doc_counts.get(word).copied().unwrap_or(0.0);
        let mut background = stats.unigram(word);
        if mu > 0.0 && background == 0.0 {
            log::warn!("view word {word:?} has zero corpus probability; flooring");
            background = 1e-12;
        }
        let numer = tf + mu * background;
        if numer <= 0.0 {
            return f64::NEG_INFINITY;
        }
        score += count * (numer / (doc_len + mu)).ln();
    }
    score
}

/// Settings of the reordered-view analysis: a pool of `pool_size` views is
/// sorted by query likelihood, split into `epochs` contiguous rank ranges,
/// and one view is drawn per range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeScheduleSpec {
    pub pool_size: usize,
    pub epochs: usize,
    pub mu: f64,
}

impl Default for RangeScheduleSpec {
    fn default() -> Self {
        Self { pool_size: 40, epochs: 10, mu: 100.0 }
    }
}

/// Rank boundaries of the even range partition: bin b covers sorted ranks
/// [floor(b P / E), floor((b+1) P / E)).
pub fn range_bins(pool_size: usize, epochs: usize) -> Vec<(usize, usize)> {
    (0..epochs)
        .map(|b| (b * pool_size / epochs, (b + 1) * pool_size / epochs))
        .collect()
}

/// Reorder a sampled pool by query likelihood (descending; a view pair's key
/// is the sum of both sides' scores) and draw one view pair per rank range.
/// The result is an epoch-length schedule, bin order preserved.
pub fn range_schedule(
    pool: &ViewPool,
    pair: &DocumentPair,
    spec: &RangeScheduleSpec,
    stats: &CorpusStats,
    seed: u64,
) -> Result<ViewPool, AggregateError> {
    if pool.len() != spec.pool_size {
        return Err(AggregateError::PoolLengthMismatch {
            pair_id: pool.pair_id.clone(),
            expected: spec.pool_size,
            got: pool.len(),
        });
    }
    let mut keyed: Vec<(usize, f64)> = pool
        .entries
        .iter()
        .enumerate()
        .map(|(i, (vq, vd))| {
            let score = ql_similarity(&vq.tokens(&pair.query), &pair.query, spec.mu, stats)
                + ql_similarity(&vd.tokens(&pair.candidate), &pair.candidate, spec.mu, stats);
            (i, score)
        })
        .collect();
    keyed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut rng = pair_stream(seed, &pool.pair_id, "range");
    let mut entries = Vec::with_capacity(spec.epochs);
    for (lo, hi) in range_bins(spec.pool_size, spec.epochs) {
        use rand::Rng;
        let pick = rng.random_range(lo..hi.max(lo + 1));
        entries.push(pool.entries[keyed[pick].0].clone());
    }
    Ok(ViewPool { pair_id: pool.pair_id.clone(), entries })
}

/// Reference spatial-aggregation scorer for the ablation harness: a
/// softmax-weighted mean over per-view logits with learned slot weights,
/// trained jointly with the matcher by cross-entropy on the pooled score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialAttentionPool {
    pub slot_weights: Vec<f64>,
}

impl SpatialAttentionPool {
    pub fn new(slots: usize) -> Self {
        Self { slot_weights: vec![0.0; slots] }
    }

    pub fn attention(&self) -> Vec<f64> {
        let max = self.slot_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.slot_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Pooled probability from per-view logits.
    pub fn pooled_probability(&self, view_logits: &[f64]) -> f64 {
        let attn = self.attention();
        let z: f64 = attn.iter().zip(view_logits).map(|(a, l)| a * l).sum();
        1.0 / (1.0 + (-z).exp())
    }
}

/// One joint gradient step of the spatial-attention baseline: all views of a
/// pair are integrated simultaneously through the attention pool.
pub fn train_step_spatial(
    view_features: &[crate::matcher::FeatureVector],
    label: u8,
    params: &mut ClassifyParams,
    pool: &mut SpatialAttentionPool,
    lr: f64,
) -> f64 {
    assert_eq!(view_features.len(), pool.slot_weights.len());
    let logits: Vec<f64> = view_features
        .iter()
        .map(|f| f.0.iter().zip(&params.weights).map(|(x, w)| x * w).sum())
        .collect();
    let attn = pool.attention();
    let z: f64 = attn.iter().zip(&logits).map(|(a, l)| a * l).sum();
    let p = 1.0 / (1.0 + (-z).exp());
    let y = f64::from(label);
    let p_safe = p.clamp(1e-12, 1.0 - 1e-12);
    let loss = -(y * p_safe.ln() + (1.0 - y) * (1.0 - p_safe).ln());

    let dz = p - y;
    // Matcher weights: dz/dw = sum_i a_i f_i.
    for (slot, f) in view_features.iter().enumerate() {
        for (w, x) in params.weights.iter_mut().zip(&f.0) {
            *w -= lr * dz * attn[slot] * x;
        }
    }
    // Slot weights through the softmax: dz/ds_j = a_j (l_j - z).
    for (j, s) in pool.slot_weights.iter_mut().enumerate() {
        *s -= lr * dz * attn[j] * (logits[j] - z);
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticSpec, Tokenizer};
    use crate::sampling::{build_view_pool, View};
    use crate::subtopic::{choose_cluster_count, spectral_cluster};

    fn synthetic_setup(
        pairs: usize,
        seed: u64,
    ) -> (Vec<DocumentPair>, Vec<SubtopicPartition>, CorpusStats) {
        let spec = SyntheticSpec { seed, ..SyntheticSpec::default() };
        let (pair_list, _) = generate_synthetic(&spec, pairs).unwrap();
        let stats = CorpusStats::from_documents(
            pair_list.iter().flat_map(|p| [&p.query, &p.candidate]),
        );
        let partitions: Vec<SubtopicPartition> = pair_list
            .iter()
            .map(|pair| {
                let token_lists: Vec<&[String]> = pair
                    .query
                    .sentences
                    .iter()
                    .chain(pair.candidate.sentences.iter())
                    .map(|s| s.tokens.as_slice())
                    .collect();
                let a = crate::simgraph::lexical_similarity(&token_lists, pair.query.len()).unwrap();
                let m = choose_cluster_count(pair.query.len(), pair.candidate.len(), 6);
                spectral_cluster(&a, m, seed)
            })
            .collect();
        (pair_list, partitions, stats)
    }

    fn pools_for(
        pairs: &[DocumentPair],
        partitions: &[SubtopicPartition],
        kind: SamplerKind,
        k: usize,
        epochs: usize,
        seed: u64,
    ) -> Vec<ViewPool> {
        pairs
            .iter()
            .zip(partitions)
            .map(|(pair, p)| build_view_pool(pair, p, kind, k, epochs, seed).unwrap())
            .collect()
    }

    #[test]
    fn single_epoch_pool_equals_static_training() {
        let (pairs, partitions, stats) = synthetic_setup(12, 3);
        let pools = pools_for(&pairs, &partitions, SamplerKind::Soft, 4, 1, 3);
        let (params, _) = temporal_train_classify(&pairs, &pools, &stats, 1, 0.1, 2, 9).unwrap();

        let views: Vec<_> = pools.iter().map(|p| p.entries[0].clone()).collect();
        let (direct, _) = static_train_classify(&pairs, &views, &stats, 1, 0.1, 2, 9).unwrap();
        assert_eq!(params, direct, "E = 1 must equal static training bit for bit");
    }

    #[test]
    fn identical_pool_entries_match_repeated_static_training() {
        let (pairs, partitions, stats) = synthetic_setup(10, 5);
        let epochs = 4;
        let single = pools_for(&pairs, &partitions, SamplerKind::Uniform, 4, 1, 5);
        let repeated: Vec<ViewPool> = single
            .iter()
            .map(|pool| ViewPool {
                pair_id: pool.pair_id.clone(),
                entries: vec![pool.entries[0].clone(); epochs],
            })
            .collect();
        let (params, _) =
            temporal_train_classify(&pairs, &repeated, &stats, epochs, 0.1, 3, 7).unwrap();

        let views: Vec<_> = single.iter().map(|p| p.entries[0].clone()).collect();
        let (direct, _) = static_train_classify(&pairs, &views, &stats, epochs, 0.1, 3, 7).unwrap();
        assert_eq!(params, direct);
    }

    #[test]
    fn pool_length_mismatch_is_an_error() {
        let (pairs, partitions, stats) = synthetic_setup(4, 1);
        let pools = pools_for(&pairs, &partitions, SamplerKind::Uniform, 4, 2, 1);
        assert!(matches!(
            temporal_train_classify(&pairs, &pools, &stats, 3, 0.1, 1, 0),
            Err(AggregateError::PoolLengthMismatch { .. })
        ));
    }

    #[test]
    fn max_and_mean_pooling_are_exact() {
        let scores = [0.2, 0.9, 0.4];
        assert_eq!(pool_max(&scores), 0.9);
        assert_eq!(pool_mean(&scores), (0.2 + 0.4 + 0.9) / 3.0);
    }

    #[test]
    fn pooling_is_permutation_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let n = rng.random_range(1..8);
            let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut shuffled = scores.clone();
            shuffled.shuffle(&mut rng);
            assert_eq!(pool_max(&scores), pool_max(&shuffled));
            assert_eq!(pool_mean(&scores), pool_mean(&shuffled));
        }
    }

    #[test]
    fn duplicating_entries_preserves_pooled_values() {
        let scores = [0.3, 0.7, 0.5];
        let max = pool_max(&scores);
        let mut with_dup = scores.to_vec();
        with_dup.push(max);
        assert_eq!(pool_max(&with_dup), max);

        let doubled: Vec<f64> = scores.iter().chain(scores.iter()).copied().collect();
        assert!((pool_mean(&doubled) - pool_mean(&scores)).abs() < 1e-12);
    }

    #[test]
    fn classify_inference_needs_max_pooling() {
        let (pairs, partitions, stats) = synthetic_setup(2, 2);
        let cfg = InferenceConfig { n: 3, pooling: Pooling::Mean };
        let err = infer_classify(
            &pairs[0],
            &partitions[0],
            SamplerKind::Soft,
            4,
            &cfg,
            &ClassifyParams::default(),
            &stats,
            0,
        );
        assert!(matches!(err, Err(AggregateError::InvalidPooling { .. })));
    }

    #[test]
    fn classify_inference_bounds_component_scores() {
        let (pairs, partitions, stats) = synthetic_setup(4, 6);
        let cfg = InferenceConfig { n: 3, pooling: Pooling::Max };
        let params = ClassifyParams { weights: [0.3, 0.1, 0.5, 0.2, 0.1, -0.2] };
        let pool =
            build_inference_pool(&pairs[0], &partitions[0], SamplerKind::Soft, 4, 3, 11).unwrap();
        let components = score_pool_classify(&pairs[0], &pool, &params, &stats).unwrap();
        let pooled = infer_classify(
            &pairs[0],
            &partitions[0],
            SamplerKind::Soft,
            4,
            &cfg,
            &params,
            &stats,
            11,
        )
        .unwrap();
        assert_eq!(pooled.value, pool_max(&components));
        for c in components {
            assert!(pooled.value >= c);
        }
    }

    #[test]
    fn single_view_inference_equals_single_score() {
        let (pairs, partitions, stats) = synthetic_setup(4, 7);
        let cfg = InferenceConfig { n: 1, pooling: Pooling::Max };
        let params = ClassifyParams { weights: [0.3, 0.1, 0.5, 0.2, 0.1, -0.2] };
        let pool =
            build_inference_pool(&pairs[1], &partitions[1], SamplerKind::Uniform, 4, 1, 13).unwrap();
        let components = score_pool_classify(&pairs[1], &pool, &params, &stats).unwrap();
        let pooled = infer_classify(
            &pairs[1],
            &partitions[1],
            SamplerKind::Uniform,
            4,
            &cfg,
            &params,
            &stats,
            13,
        )
        .unwrap();
        assert_eq!(pooled.value, components[0]);
    }

    #[test]
    fn rank_ties_break_by_doc_id() {
        // Two identical candidates score identically; order must be id-ascending.
        let tok = Tokenizer::default();
        let query = Document::from_text("q", "alpha beta. gamma delta.", &tok).unwrap();
        let make = |id: &str| Document::from_text(id, "alpha beta. gamma delta.", &tok).unwrap();
        let cands = vec![make("dB"), make("dA")];
        let stats = CorpusStats::from_documents(
            [&query, &cands[0], &cands[1]].into_iter(),
        );
        let partitions: Vec<SubtopicPartition> = cands
            .iter()
            .map(|c| {
                let pair = DocumentPair { query: query.clone(), candidate: c.clone(), label: None };
                let token_lists: Vec<&[String]> = pair
                    .query
                    .sentences
                    .iter()
                    .chain(pair.candidate.sentences.iter())
                    .map(|s| s.tokens.as_slice())
                    .collect();
                let a = crate::simgraph::lexical_similarity(&token_lists, 2).unwrap();
                spectral_cluster(&a, 2, 0)
            })
            .collect();
        let paired: Vec<(Document, SubtopicPartition)> =
            cands.into_iter().zip(partitions).collect();
        let cfg = InferenceConfig { n: 2, pooling: Pooling::Mean };
        let run = infer_rank(
            &query,
            &paired,
            SamplerKind::Uniform,
            2,
            &cfg,
            &RankParams::identity(64),
            &stats,
            &EncoderConfig::default(),
            5,
            "test",
        )
        .unwrap();
        assert_eq!(run.entries[0].docid, "dA");
        assert_eq!(run.entries[1].docid, "dB");
        assert_eq!(run.entries[0].rank, 1);
    }

    #[test]
    fn ql_hand_value() {
        let tok = Tokenizer::default();
        let doc = Document::from_text("d", "a a b.", &tok).unwrap();
        let stats = CorpusStats::from_documents([&doc].into_iter());
        let view = vec!["a".to_string()];
        let score = ql_similarity(&view, &doc, 0.0, &stats);
        assert!((score - (2.0f64 / 3.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn ql_absent_word_without_smoothing_is_neg_infinity() {
        let tok = Tokenizer::default();
        let doc = Document::from_text("d", "a a b.", &tok).unwrap();
        let stats = CorpusStats::from_documents([&doc].into_iter());
        let view = vec!["z".to_string()];
        assert_eq!(ql_similarity(&view, &doc, 0.0, &stats), f64::NEG_INFINITY);
    }

    #[test]
    fn ql_large_mu_approaches_corpus_ordering() {
        let tok = Tokenizer::default();
        // "common" dominates the corpus; "rare" appears once.
        let bg = Document::from_text(
            "bg",
            "common common common common common common common rare.",
            &tok,
        )
        .unwrap();
        let doc = Document::from_text("d", "rare rare rare.", &tok).unwrap();
        let stats = CorpusStats::from_documents([&bg, &doc].into_iter());
        let common = vec!["common".to_string()];
        let rare = vec!["rare".to_string()];
        // In the document itself, "rare" dominates.
        assert!(ql_similarity(&rare, &doc, 0.0, &stats) > ql_similarity(&common, &doc, 1e-9, &stats));
        // As mu grows the corpus model wins: "common" outscores "rare".
        let mu = 1e9;
        assert!(
            ql_similarity(&common, &doc, mu, &stats) > ql_similarity(&rare, &doc, mu, &stats)
        );
    }

    #[test]
    fn range_bins_match_linspace_partition() {
        assert_eq!(range_bins(40, 4), vec![(0, 10), (10, 20), (20, 30), (30, 40)]);
        assert_eq!(range_bins(4, 4), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    fn ql_rank_of(entry: &(View, View), pool: &ViewPool, pair: &DocumentPair, stats: &CorpusStats) -> usize {
        let key = |e: &(View, View)| {
            ql_similarity(&e.0.tokens(&pair.query), &pair.query, 100.0, stats)
                + ql_similarity(&e.1.tokens(&pair.candidate), &pair.candidate, 100.0, stats)
        };
        let mine = key(entry);
        pool.entries.iter().filter(|e| key(e) > mine).count()
    }

    #[test]
    fn degenerate_range_schedule_is_the_sorted_pool() {
        let (pairs, partitions, stats) = synthetic_setup(2, 9);
        let pool = build_view_pool(&pairs[0], &partitions[0], SamplerKind::Random, 3, 4, 1).unwrap();
        let spec = RangeScheduleSpec { pool_size: 4, epochs: 4, mu: 100.0 };
        let schedule = range_schedule(&pool, &pairs[0], &spec, &stats, 2).unwrap();
        assert_eq!(schedule.len(), 4);
        // Singleton bins: epoch t holds the rank-t view.
        for (t, entry) in schedule.entries.iter().enumerate() {
            assert_eq!(ql_rank_of(entry, &pool, &pairs[0], &stats), t);
        }
    }

    #[test]
    fn schedule_entries_stay_in_their_rank_bins() {
        let (pairs, partitions, stats) = synthetic_setup(2, 10);
        let pool =
            build_view_pool(&pairs[1], &partitions[1], SamplerKind::Random, 3, 12, 4).unwrap();
        let spec = RangeScheduleSpec { pool_size: 12, epochs: 3, mu: 100.0 };
        let schedule = range_schedule(&pool, &pairs[1], &spec, &stats, 6).unwrap();
        for (t, entry) in schedule.entries.iter().enumerate() {
            let rank = ql_rank_of(entry, &pool, &pairs[1], &stats);
            let (lo, hi) = range_bins(12, 3)[t];
            assert!(rank >= lo && rank < hi, "epoch {t}: rank {rank} outside [{lo},{hi})");
        }
    }

    #[test]
    fn wrong_pool_size_is_rejected() {
        let (pairs, partitions, stats) = synthetic_setup(2, 11);
        let pool = build_view_pool(&pairs[0], &partitions[0], SamplerKind::Random, 3, 5, 1).unwrap();
        let spec = RangeScheduleSpec { pool_size: 6, epochs: 2, mu: 100.0 };
        assert!(matches!(
            range_schedule(&pool, &pairs[0], &spec, &stats, 0),
            Err(AggregateError::PoolLengthMismatch { .. })
        ));
    }

    #[test]
    fn spatial_attention_gradients_match_finite_differences() {
        use crate::matcher::FeatureVector;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(14);
        for _ in 0..10 {
            let slots = 3;
            let features: Vec<FeatureVector> = (0..slots)
                .map(|_| {
                    let mut f = [0.0; crate::matcher::FEATURE_DIM];
                    for v in &mut f {
                        *v = rng.random::<f64>() - 0.5;
                    }
                    FeatureVector(f)
                })
                .collect();
            let label = u8::from(rng.random::<bool>());
            let mut weights = [0.0; crate::matcher::FEATURE_DIM];
            for w in &mut weights {
                *w = rng.random::<f64>() - 0.5;
            }
            let slot_weights: Vec<f64> = (0..slots).map(|_| rng.random::<f64>() - 0.5).collect();

            let loss_fn = |params: &ClassifyParams, pool: &SpatialAttentionPool| {
                let mut p = params.clone();
                let mut a = pool.clone();
                train_step_spatial(&features, label, &mut p, &mut a, 0.0)
            };
            let params = ClassifyParams { weights };
            let pool = SpatialAttentionPool { slot_weights };

            // Analytic gradients recovered from an lr = 1 step.
            let (mut p1, mut a1) = (params.clone(), pool.clone());
            train_step_spatial(&features, label, &mut p1, &mut a1, 1.0);

            let h = 1e-6;
            for i in 0..crate::matcher::FEATURE_DIM {
                let analytic = params.weights[i] - p1.weights[i];
                let mut plus = params.clone();
                plus.weights[i] += h;
                let mut minus = params.clone();
                minus.weights[i] -= h;
                let fd = (loss_fn(&plus, &pool) - loss_fn(&minus, &pool)) / (2.0 * h);
                let denom = fd.abs().max(analytic.abs()).max(1e-8);
                assert!((fd - analytic).abs() / denom < 1e-4, "weight {i}");
            }
            for j in 0..slots {
                let analytic = pool.slot_weights[j] - a1.slot_weights[j];
                let mut plus = pool.clone();
                plus.slot_weights[j] += h;
                let mut minus = pool.clone();
                minus.slot_weights[j] -= h;
                let fd = (loss_fn(&params, &plus) - loss_fn(&params, &minus)) / (2.0 * h);
                let denom = fd.abs().max(analytic.abs()).max(1e-8);
                assert!((fd - analytic).abs() / denom < 1e-4, "slot {j}");
            }
        }
    }
}
