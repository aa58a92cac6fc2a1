//! End-to-end experiment orchestration: configuration, the classification
//! and ranking pipelines, the lambda sweep, and the reordered-view range
//! analysis. Every run is a pure function of (config, data, seed) at the
//! level of emitted files.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{
    infer_classify, pool_max, range_schedule, score_pool_classify, temporal_train_classify,
    temporal_train_rank, train_step_spatial, InferenceConfig, Pooling, RangeScheduleSpec,
    SpatialAttentionPool,
};
use crate::corpus::{DocumentPair, RankingTask, Tokenizer};
use crate::eval::{classification_metrics, ndcg, ClassificationReport, RankingReport, RunFile};
use crate::matcher::{ClassifyParams, RankParams};
use crate::sampling::{build_inference_pool, build_view_pool, SamplerKind, ViewPool};
use crate::simgraph::{
    dot_similarity, embed_sentences, lexical_similarity, normalize_sparsify, CorpusStats,
    EncoderConfig,
};
use crate::subtopic::{
    assign_soft, choose_cluster_count, harden, spectral_cluster, train_head, AdaptiveLossConfig,
    ClusterHeadParams, HeadTrainConfig, SubtopicPartition,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl ExperimentError {
    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self::Stage { stage, message: err.to_string() }
    }
}

fn at<T, E: std::fmt::Display>(stage: &'static str, r: Result<T, E>) -> Result<T, ExperimentError> {
    r.map_err(|e| ExperimentError::stage(stage, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusteringKind {
    Direct,
    Adaptive,
}

impl std::str::FromStr for ClusteringKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(format!("unknown clustering {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    Temporal,
    /// Reference spatial baseline: all views at once through attention.
    Attention,
}

fn default_receptive_field() -> usize {
    40
}
fn default_cluster_size() -> usize {
    6
}
fn default_inference_views() -> usize {
    3
}
fn default_sampler() -> SamplerKind {
    SamplerKind::Soft
}
fn default_clustering() -> ClusteringKind {
    ClusteringKind::Direct
}
fn default_aggregation() -> AggregationKind {
    AggregationKind::Temporal
}
fn default_lambda() -> f64 {
    1.0
}
fn default_view_size() -> usize {
    8
}
fn default_epochs() -> usize {
    10
}
fn default_matcher_lr() -> f64 {
    crate::matcher::DEFAULT_MATCHER_LR
}
fn default_temperature() -> f64 {
    crate::matcher::DEFAULT_TEMPERATURE
}
fn default_negatives() -> usize {
    crate::matcher::DEFAULT_NEGATIVES
}
fn default_threshold() -> f64 {
    0.5
}
fn default_keep_top() -> usize {
    10
}
fn default_encoder_dim() -> usize {
    64
}
fn default_head_hidden() -> usize {
    16
}
fn default_head_m_max() -> usize {
    16
}
fn default_head_lr() -> f64 {
    1e-3
}
fn default_head_epochs() -> usize {
    3
}
fn default_ndcg_cutoffs() -> Vec<usize> {
    vec![5, 10]
}
fn default_spatial_slots() -> usize {
    3
}
fn default_batch_size() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_receptive_field")]
    pub receptive_field: usize,
    #[serde(default = "default_cluster_size")]
    pub expected_cluster_size: usize,
    /// Inference view-pool size n.
    #[serde(default = "default_inference_views")]
    pub inference_views: usize,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerKind,
    #[serde(default = "default_clustering")]
    pub clustering: ClusteringKind,
    #[serde(default = "default_aggregation")]
    pub aggregation: AggregationKind,
    /// Weight of the negative-pair loss when pretraining the adaptive head.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Sentences per view (k).
    #[serde(default = "default_view_size")]
    pub view_size: usize,
    /// Training epochs E (= training pool length).
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_matcher_lr")]
    pub matcher_lr: f64,
    /// Matcher minibatch size (pairs per gradient step).
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_keep_top")]
    pub keep_top: usize,
    #[serde(default = "default_encoder_dim")]
    pub encoder_dim: usize,
    #[serde(default = "default_head_hidden")]
    pub head_hidden_dim: usize,
    #[serde(default = "default_head_m_max")]
    pub head_m_max: usize,
    #[serde(default = "default_head_lr")]
    pub head_lr: f64,
    #[serde(default = "default_head_epochs")]
    pub head_epochs: usize,
    #[serde(default = "default_ndcg_cutoffs")]
    pub ndcg_cutoffs: Vec<usize>,
    #[serde(default = "default_spatial_slots")]
    pub spatial_slots: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.receptive_field < self.view_size {
            return Err(ExperimentError::stage(
                "config",
                format!(
                    "receptive_field {} must be at least view_size {}",
                    self.receptive_field, self.view_size
                ),
            ));
        }
        if self.epochs == 0 || self.inference_views == 0 {
            return Err(ExperimentError::stage("config", "epochs and inference_views must be >= 1"));
        }
        Ok(())
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig { dim: self.encoder_dim, seed: self.seed }
    }

    pub fn head_train(&self) -> HeadTrainConfig {
        HeadTrainConfig {
            loss: AdaptiveLossConfig { lambda: self.lambda, ..Default::default() },
            learning_rate: self.head_lr,
            epochs: self.head_epochs,
            hidden_dim: self.head_hidden_dim,
            m_max: self.head_m_max,
            expected_cluster_size: self.expected_cluster_size,
            keep_top: self.keep_top,
            encoder: self.encoder(),
        }
    }
}

/// Truncate every document of a pair to the receptive field.
pub fn truncate_pair(pair: &DocumentPair, limit: usize) -> DocumentPair {
    DocumentPair {
        query: crate::eval::truncate_receptive_field(&pair.query, limit),
        candidate: crate::eval::truncate_receptive_field(&pair.candidate, limit),
        label: pair.label,
    }
}

fn pair_token_lists(pair: &DocumentPair) -> Vec<&[String]> {
    pair.query
        .sentences
        .iter()
        .chain(pair.candidate.sentences.iter())
        .map(|s| s.tokens.as_slice())
        .collect()
}

/// Subtopic partition of one pair under the configured clustering variant.
pub fn build_partition(
    pair: &DocumentPair,
    cfg: &ExperimentConfig,
    stats: &CorpusStats,
    head: Option<&ClusterHeadParams>,
    seed: u64,
) -> Result<SubtopicPartition, ExperimentError> {
    let l_q = pair.query.len();
    let l_d = pair.candidate.len();
    let m = choose_cluster_count(l_q, l_d, cfg.expected_cluster_size);
    let token_lists = pair_token_lists(pair);
    match cfg.clustering {
        ClusteringKind::Direct => {
            let a = at("similarity", lexical_similarity(&token_lists, l_q))?;
            Ok(spectral_cluster(&a, m, seed))
        }
        ClusteringKind::Adaptive => {
            let head = head.ok_or_else(|| {
                ExperimentError::stage("cluster", "adaptive clustering needs trained head params")
            })?;
            let emb = at("similarity", embed_sentences(&token_lists, stats, &cfg.encoder()))?;
            let a = dot_similarity(&emb, l_q);
            let a_norm = normalize_sparsify(&a, cfg.keep_top);
            let m = m.min(head.m_max);
            let b = at("cluster", assign_soft(&a_norm, &emb, head, m))?;
            Ok(harden(&b, l_q))
        }
    }
}

fn build_partitions(
    pairs: &[DocumentPair],
    cfg: &ExperimentConfig,
    stats: &CorpusStats,
    head: Option<&ClusterHeadParams>,
) -> Result<Vec<SubtopicPartition>, ExperimentError> {
    pairs
        .par_iter()
        .map(|pair| build_partition(pair, cfg, stats, head, cfg.seed))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationOutcome {
    pub report: ClassificationReport,
    /// (pair id, pooled score, label) per test pair, in input order.
    pub predictions: Vec<(String, f64, u8)>,
    pub loss_curve: Vec<f64>,
    pub matcher: ClassifyParams,
    pub head: Option<ClusterHeadParams>,
}

/// The full classification pipeline: truncate, discover subtopics, build
/// per-epoch pools, train temporally, and run pooled inference on the
/// held-out pairs.
pub fn run_classification(
    train_pairs: &[DocumentPair],
    test_pairs: &[DocumentPair],
    cfg: &ExperimentConfig,
) -> Result<ClassificationOutcome, ExperimentError> {
    cfg.validate()?;
    let train: Vec<DocumentPair> =
        train_pairs.iter().map(|p| truncate_pair(p, cfg.receptive_field)).collect();
    let test: Vec<DocumentPair> =
        test_pairs.iter().map(|p| truncate_pair(p, cfg.receptive_field)).collect();

    let stats = CorpusStats::from_documents(
        train.iter().flat_map(|p| [&p.query, &p.candidate]),
    );
    if stats.is_empty() {
        return Err(ExperimentError::stage("load", "training corpus has no tokens"));
    }

    let head = match cfg.clustering {
        ClusteringKind::Adaptive => Some(at(
            "train-head",
            train_head(&train, &stats, &cfg.head_train(), cfg.seed),
        )?),
        ClusteringKind::Direct => None,
    };

    let train_partitions = build_partitions(&train, cfg, &stats, head.as_ref())?;

    let (matcher, loss_curve) = match cfg.aggregation {
        AggregationKind::Temporal => {
            let pools: Vec<ViewPool> = at(
                "pools",
                train
                    .par_iter()
                    .zip(train_partitions.par_iter())
                    .map(|(pair, p)| {
                        build_view_pool(pair, p, cfg.sampler, cfg.view_size, cfg.epochs, cfg.seed)
                    })
                    .collect::<Result<Vec<_>, _>>(),
            )?;
            at(
                "train",
                temporal_train_classify(
                    &train,
                    &pools,
                    &stats,
                    cfg.epochs,
                    cfg.matcher_lr,
                    cfg.batch_size,
                    cfg.seed,
                ),
            )?
        }
        AggregationKind::Attention => {
            spatial_train_classify(&train, &train_partitions, &stats, cfg)?
        }
    };

    let test_partitions = build_partitions(&test, cfg, &stats, head.as_ref())?;
    let inference = InferenceConfig { n: cfg.inference_views, pooling: Pooling::Max };
    let predictions: Vec<(String, f64, u8)> = at(
        "inference",
        test.par_iter()
            .zip(test_partitions.par_iter())
            .map(|(pair, partition)| {
                let score = infer_classify(
                    pair,
                    partition,
                    cfg.sampler,
                    cfg.view_size,
                    &inference,
                    &matcher,
                    &stats,
                    cfg.seed,
                )?;
                Ok((pair.pair_id(), score.value, pair.label.unwrap_or(0)))
            })
            .collect::<Result<Vec<_>, crate::aggregate::AggregateError>>(),
    )?;

    let scores: Vec<f64> = predictions.iter().map(|(_, s, _)| *s).collect();
    let labels: Vec<u8> = predictions.iter().map(|(_, _, l)| *l).collect();
    let report = at("metrics", classification_metrics(&scores, &labels, cfg.threshold))?;
    Ok(ClassificationOutcome { report, predictions, loss_curve, matcher, head })
}

/// Spatial-aggregation baseline: per pair, a fixed set of views is pooled by
/// attention in every epoch.
fn spatial_train_classify(
    train: &[DocumentPair],
    partitions: &[SubtopicPartition],
    stats: &CorpusStats,
    cfg: &ExperimentConfig,
) -> Result<(ClassifyParams, Vec<f64>), ExperimentError> {
    let slots = cfg.spatial_slots;
    let pools: Vec<ViewPool> = at(
        "pools",
        train
            .par_iter()
            .zip(partitions.par_iter())
            .map(|(pair, p)| {
                build_view_pool(pair, p, cfg.sampler, cfg.view_size, slots, cfg.seed)
            })
            .collect::<Result<Vec<_>, _>>(),
    )?;
    let features: Vec<Vec<crate::matcher::FeatureVector>> = at(
        "pools",
        train
            .par_iter()
            .zip(pools.par_iter())
            .map(|(pair, pool)| {
                pool.entries
                    .iter()
                    .map(|(vq, vd)| {
                        crate::matcher::featurize(
                            &vq.tokens(&pair.query),
                            &vd.tokens(&pair.candidate),
                            stats,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>(),
    )?;

    let mut params = ClassifyParams::default();
    let mut attention = SpatialAttentionPool::new(slots);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = crate::aggregate::epoch_shuffle(cfg.seed, epoch, train.len());
        let mut epoch_loss = 0.0;
        for &i in &order {
            let label = train[i].label.unwrap_or(0);
            epoch_loss += train_step_spatial(
                &features[i],
                label,
                &mut params,
                &mut attention,
                cfg.matcher_lr,
            );
        }
        curve.push(epoch_loss / train.len().max(1) as f64);
    }
    Ok((params, curve))
}

#[derive(Debug, Clone, Serialize)]
pub struct RankingOutcome {
    pub report: RankingReport,
    pub run: RunFile,
    pub loss_curve: Vec<f64>,
    pub matcher: RankParams,
    pub head: Option<ClusterHeadParams>,
}

impl Serialize for RunFile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

/// The ranking pipeline: train the dual-encoder on (query, relevant
/// candidate) pairs with in-batch negatives, then rank every query's
/// candidate pool by mean multi-view score.
pub fn run_ranking(task: &RankingTask, cfg: &ExperimentConfig) -> Result<RankingOutcome, ExperimentError> {
    cfg.validate()?;
    let queries: Vec<_> = task
        .queries
        .iter()
        .map(|d| crate::eval::truncate_receptive_field(d, cfg.receptive_field))
        .collect();
    let candidates: Vec<_> = task
        .candidates
        .iter()
        .map(|d| crate::eval::truncate_receptive_field(d, cfg.receptive_field))
        .collect();

    let stats = CorpusStats::from_documents(queries.iter().chain(candidates.iter()));
    if stats.is_empty() {
        return Err(ExperimentError::stage("load", "ranking corpus has no tokens"));
    }

    // Training pairs: every judged-relevant candidate of each query.
    let mut train_pairs = Vec::new();
    for q in &queries {
        if let Some(grades) = task.qrels.query_grades(&q.id) {
            for (docid, &grade) in grades {
                if grade > 0 {
                    if let Some(cand) = candidates.iter().find(|c| &c.id == docid) {
                        train_pairs.push(DocumentPair {
                            query: q.clone(),
                            candidate: cand.clone(),
                            label: Some(1),
                        });
                    }
                }
            }
        }
    }
    if train_pairs.is_empty() {
        return Err(ExperimentError::stage("load", "no relevant (query, candidate) pairs to train on"));
    }

    let head = match cfg.clustering {
        ClusteringKind::Adaptive => {
            // The head needs both labels; augment with mismatched pairs.
            let mut labeled = train_pairs.clone();
            let n = train_pairs.len();
            for i in 0..n {
                let j = (i + 1) % n;
                if train_pairs[i].query.id != train_pairs[j].query.id {
                    labeled.push(DocumentPair {
                        query: train_pairs[i].query.clone(),
                        candidate: train_pairs[j].candidate.clone(),
                        label: Some(0),
                    });
                }
            }
            Some(at("train-head", train_head(&labeled, &stats, &cfg.head_train(), cfg.seed))?)
        }
        ClusteringKind::Direct => None,
    };

    let train_partitions = build_partitions(&train_pairs, cfg, &stats, head.as_ref())?;
    let pools: Vec<ViewPool> = at(
        "pools",
        train_pairs
            .par_iter()
            .zip(train_partitions.par_iter())
            .map(|(pair, p)| build_view_pool(pair, p, cfg.sampler, cfg.view_size, cfg.epochs, cfg.seed))
            .collect::<Result<Vec<_>, _>>(),
    )?;
    let encoder = cfg.encoder();
    let (matcher, loss_curve) = at(
        "train",
        temporal_train_rank(
            &train_pairs,
            &pools,
            &stats,
            &encoder,
            cfg.epochs,
            cfg.matcher_lr,
            cfg.temperature,
            cfg.negatives,
            cfg.seed,
        ),
    )?;

    // Inference: rank the full candidate pool per query.
    let inference = InferenceConfig { n: cfg.inference_views, pooling: Pooling::Mean };
    let per_query: Vec<RunFile> = at(
        "inference",
        queries
            .par_iter()
            .map(|q| {
                let paired: Vec<(crate::corpus::Document, SubtopicPartition)> = candidates
                    .iter()
                    .map(|c| {
                        let pair =
                            DocumentPair { query: q.clone(), candidate: c.clone(), label: None };
                        let partition = build_partition(&pair, cfg, &stats, head.as_ref(), cfg.seed)?;
                        Ok((c.clone(), partition))
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()?;
                crate::aggregate::infer_rank(
                    q,
                    &paired,
                    cfg.sampler,
                    cfg.view_size,
                    &inference,
                    &matcher,
                    &stats,
                    &encoder,
                    cfg.seed,
                    "run",
                )
                .map_err(|e| ExperimentError::stage("inference", e))
            })
            .collect::<Result<Vec<_>, ExperimentError>>(),
    )?;
    let mut run = RunFile::default();
    for mut r in per_query {
        run.entries.append(&mut r.entries);
    }
    let report = at("metrics", ndcg(&run, &task.qrels, &cfg.ndcg_cutoffs))?;
    Ok(RankingOutcome { report, run, loss_curve, matcher, head })
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Train the adaptive head per lambda (same seed throughout, so only lambda
/// varies) and evaluate the downstream classification pipeline.
pub fn lambda_sweep(
    train_pairs: &[DocumentPair],
    test_pairs: &[DocumentPair],
    cfg: &ExperimentConfig,
    values: &[f64],
) -> Result<Vec<LambdaPoint>, ExperimentError> {
    if values.len() < 2 {
        return Err(ExperimentError::stage("config", "lambda sweep needs at least 2 values"));
    }
    let mut points = Vec::with_capacity(values.len());
    for &lambda in values {
        let run_cfg = ExperimentConfig {
            lambda,
            clustering: ClusteringKind::Adaptive,
            ..cfg.clone()
        };
        let outcome = run_classification(train_pairs, test_pairs, &run_cfg)?;
        points.push(LambdaPoint {
            lambda,
            accuracy: outcome.report.accuracy,
            f1: outcome.report.f1,
        });
    }
    Ok(points)
}

/// Spread (max - min) of a sweep metric.
pub fn sweep_spread(points: &[LambdaPoint]) -> f64 {
    let max = points.iter().map(|p| p.accuracy).fold(f64::NEG_INFINITY, f64::max);
    let min = points.iter().map(|p| p.accuracy).fold(f64::INFINITY, f64::min);
    max - min
}

#[derive(Debug, Clone, Serialize)]
pub struct RangePoint {
    pub pool_size: usize,
    pub accuracy: f64,
    pub f1: f64,
}

/// Reordered-view range analysis: per pool span, sample a random-window pool
/// of that size, sort it by query likelihood, schedule one view per rank
/// range, retrain, and evaluate. Larger spans trade alignment for variety.
pub fn analyze_ranges(
    train_pairs: &[DocumentPair],
    test_pairs: &[DocumentPair],
    cfg: &ExperimentConfig,
    pool_sizes: &[usize],
    mu: f64,
) -> Result<Vec<RangePoint>, ExperimentError> {
    cfg.validate()?;
    let train: Vec<DocumentPair> =
        train_pairs.iter().map(|p| truncate_pair(p, cfg.receptive_field)).collect();
    let test: Vec<DocumentPair> =
        test_pairs.iter().map(|p| truncate_pair(p, cfg.receptive_field)).collect();
    let stats = CorpusStats::from_documents(train.iter().flat_map(|p| [&p.query, &p.candidate]));
    let partitions = build_partitions(&train, cfg, &stats, None)?;
    let test_partitions = build_partitions(&test, cfg, &stats, None)?;

    let mut points = Vec::with_capacity(pool_sizes.len());
    for &pool_size in pool_sizes {
        if pool_size < cfg.epochs {
            return Err(ExperimentError::stage(
                "config",
                format!("pool_size {pool_size} smaller than epochs {}", cfg.epochs),
            ));
        }
        let spec = RangeScheduleSpec { pool_size, epochs: cfg.epochs, mu };
        let schedules: Vec<ViewPool> = at(
            "pools",
            train
                .par_iter()
                .zip(partitions.par_iter())
                .map(|(pair, p)| {
                    let raw = build_view_pool(
                        pair,
                        p,
                        SamplerKind::Random,
                        cfg.view_size,
                        pool_size,
                        cfg.seed,
                    )?;
                    range_schedule(&raw, pair, &spec, &stats, cfg.seed)
                        .map_err(|e| crate::sampling::SamplingError::InvalidDistribution(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>(),
        )?;
        let (matcher, _) = at(
            "train",
            temporal_train_classify(
                &train,
                &schedules,
                &stats,
                cfg.epochs,
                cfg.matcher_lr,
                cfg.batch_size,
                cfg.seed,
            ),
        )?;

        let inference = InferenceConfig { n: cfg.inference_views, pooling: Pooling::Max };
        let mut scores = Vec::with_capacity(test.len());
        let mut labels = Vec::with_capacity(test.len());
        for (pair, partition) in test.iter().zip(&test_partitions) {
            let pool = at(
                "inference",
                build_inference_pool(
                    pair,
                    partition,
                    SamplerKind::Random,
                    cfg.view_size,
                    inference.n,
                    cfg.seed,
                ),
            )?;
            let components = at("inference", score_pool_classify(pair, &pool, &matcher, &stats))?;
            scores.push(pool_max(&components));
            labels.push(pair.label.unwrap_or(0));
        }
        let report = at("metrics", classification_metrics(&scores, &labels, cfg.threshold))?;
        points.push(RangePoint { pool_size, accuracy: report.accuracy, f1: report.f1 });
    }
    Ok(points)
}

/// Paths of a classification experiment's input files.
#[derive(Debug, Clone)]
pub struct ClassificationPaths {
    pub train: std::path::PathBuf,
    pub test: std::path::PathBuf,
}

/// Run the classification pipeline from files and write every artifact
/// (config echo, reports, predictions, loss curve, params, stage summary)
/// into `out_dir`. Output bytes are a pure function of (config, data).
pub fn run_experiment_files(
    cfg: &ExperimentConfig,
    paths: &ClassificationPaths,
    out_dir: &Path,
) -> Result<ClassificationOutcome, ExperimentError> {
    let tok = Tokenizer::default();
    let start = std::time::Instant::now();
    let train = at("load", crate::corpus::load_pairs(&paths.train, &tok))?;
    let test = at("load", crate::corpus::load_pairs(&paths.test, &tok))?;
    log::info!("load: {} train / {} test pairs in {:?}", train.len(), test.len(), start.elapsed());

    let run_start = std::time::Instant::now();
    let outcome = run_classification(&train, &test, cfg)?;
    log::info!("pipeline: finished in {:?}", run_start.elapsed());

    at("write", fs::create_dir_all(out_dir))?;
    write_json(out_dir.join("config.json"), cfg)?;
    write_json(out_dir.join("report.json"), &outcome.report)?;
    write_json(out_dir.join("matcher_params.json"), &outcome.matcher)?;
    if let Some(head) = &outcome.head {
        write_json(out_dir.join("head_params.json"), head)?;
    }
    let mut predictions = String::from("pair_id,score,label\n");
    for (id, score, label) in &outcome.predictions {
        predictions.push_str(&format!("{id},{score},{label}\n"));
    }
    at("write", fs::write(out_dir.join("predictions.csv"), predictions))?;
    let mut curve = String::from("epoch,loss\n");
    for (i, loss) in outcome.loss_curve.iter().enumerate() {
        curve.push_str(&format!("{i},{loss}\n"));
    }
    at("write", fs::write(out_dir.join("loss_curve.csv"), curve))?;
    let stages = format!(
        "stage,items\nload_train,{}\nload_test,{}\ntrain_epochs,{}\n",
        train.len(),
        test.len(),
        outcome.loss_curve.len()
    );
    at("write", fs::write(out_dir.join("stages.csv"), stages))?;
    Ok(outcome)
}

pub(crate) fn write_json<T: Serialize>(path: std::path::PathBuf, value: &T) -> Result<(), ExperimentError> {
    let mut body = at("write", serde_json::to_string_pretty(value))?;
    body.push('\n');
    let mut f = at("write", fs::File::create(path))?;
    at("write", f.write_all(body.as_bytes()))
}
