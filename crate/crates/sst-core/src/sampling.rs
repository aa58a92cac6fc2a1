//! View construction from a subtopic partition: roulette-wheel selection,
//! the uniform / hard / soft samplers, the random-window and small-cluster
//! ablation samplers, and epoch-indexed view pools.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, DocumentPair};
use crate::seedstream::pair_stream;
use crate::subtopic::SubtopicPartition;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("no cluster has any sentence on the requested side")]
    EmptyClusters,
    #[error("no cluster is populated on both sides")]
    NoAlignedCluster,
    #[error("distribution has {probs} entries for {clusters} clusters")]
    DistributionMismatch { clusters: usize, probs: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

/// Cluster-selection probabilities; sums to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    probs: Vec<f64>,
}

impl SamplingDistribution {
    /// Normalize nonnegative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self, SamplingError> {
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(SamplingError::InvalidDistribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(SamplingError::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self { probs: weights.iter().map(|w| w / total).collect() })
    }

    pub fn uniform(m: usize) -> Self {
        Self { probs: vec![1.0 / m as f64; m] }
    }

    /// Probability 1 on a single cluster.
    pub fn point_mass(m: usize, index: usize) -> Self {
        let mut probs = vec![0.0; m];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A sampled document view: sentence indices in original document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct View {
    pub doc_id: String,
    pub indices: Vec<usize>,
    pub k_target: usize,
}

impl View {
    fn new(doc_id: &str, mut indices: Vec<usize>, k_target: usize) -> Self {
        indices.sort_unstable();
        Self { doc_id: doc_id.to_string(), indices, k_target }
    }

    /// Materialize the view as the token bag of its sentences.
    pub fn tokens(&self, doc: &Document) -> Vec<String> {
        self.indices
            .iter()
            .flat_map(|&i| doc.sentences[i].tokens.iter().cloned())
            .collect()
    }

    /// Materialize the view as text (sentences joined in document order).
    pub fn text(&self, doc: &Document) -> String {
        self.indices
            .iter()
            .map(|&i| doc.sentences[i].text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Epoch-indexed pool of view pairs for one document pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPool {
    pub pair_id: String,
    pub entries: Vec<(View, View)>,
}

impl ViewPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Uniform,
    Hard,
    Soft,
    Random,
    Negative,
}

impl std::str::FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "hard" => Ok(Self::Hard),
            "soft" => Ok(Self::Soft),
            "random" => Ok(Self::Random),
            "negative" => Ok(Self::Negative),
            other => Err(format!("unknown sampler {other:?}")),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::Uniform => "uniform",
            Self::Hard => "hard",
            Self::Soft => "soft",
            Self::Random => "random",
            Self::Negative => "negative",
        };
        write!(f, "{name}")
    }
}

/// Roulette-wheel selection: draw clusters i.i.d. from `dist` (repetition
/// allowed), then one sentence uniformly without replacement within each
/// drawn cluster. Exhausted clusters are excluded and the distribution
/// renormalized over the rest; if the remaining mass is zero the draw falls
/// back to uniform over non-exhausted clusters. Stops early when every
/// cluster is exhausted. Returns indices in draw order.
pub fn roulette_select(
    clusters: &[&[usize]],
    k: usize,
    dist: &SamplingDistribution,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, SamplingError> {
    if dist.len() != clusters.len() {
        return Err(SamplingError::DistributionMismatch {
            clusters: clusters.len(),
            probs: dist.len(),
        });
    }
    if clusters.iter().all(|c| c.is_empty()) {
        return Err(SamplingError::EmptyClusters);
    }
    let mut remaining: Vec<Vec<usize>> = clusters.iter().map(|c| c.to_vec()).collect();
    let mut selected = Vec::with_capacity(k);
    while selected.len() < k {
        let active: Vec<usize> = (0..remaining.len()).filter(|&c| !remaining[c].is_empty()).collect();
        if active.is_empty() {
            break;
        }
        let mass: f64 = active.iter().map(|&c| dist.probs[c]).sum();
        let cluster = if mass > 0.0 {
            let mut r = rng.random::<f64>() * mass;
            let mut chosen = *active.last().unwrap();
            for &c in &active {
                r -= dist.probs[c];
                if r <= 0.0 {
                    chosen = c;
                    break;
                }
            }
            chosen
        } else {
            active[rng.random_range(0..active.len())]
        };
        let pick = rng.random_range(0..remaining[cluster].len());
        selected.push(remaining[cluster].swap_remove(pick));
    }
    Ok(selected)
}

fn side_members(p: &SubtopicPartition, query_side: bool) -> Vec<&[usize]> {
    (0..p.m())
        .map(|c| if query_side { p.query_members(c) } else { p.cand_members(c) })
        .collect()
}

/// Uniform weight on every cluster non-empty for the given side.
fn side_uniform(members: &[&[usize]]) -> Result<SamplingDistribution, SamplingError> {
    let weights: Vec<f64> = members.iter().map(|m| if m.is_empty() { 0.0 } else { 1.0 }).collect();
    SamplingDistribution::from_weights(&weights).map_err(|_| SamplingError::EmptyClusters)
}

/// Each subtopic equally likely (side-empty clusters excluded).
pub fn sample_uniform(
    p: &SubtopicPartition,
    ids: (&str, &str),
    k: usize,
    rng: &mut impl Rng,
) -> Result<(View, View), SamplingError> {
    let q_members = side_members(p, true);
    let d_members = side_members(p, false);
    let q = roulette_select(&q_members, k, &side_uniform(&q_members)?, rng)?;
    let d = roulette_select(&d_members, k, &side_uniform(&d_members)?, rng)?;
    Ok((View::new(ids.0, q, k), View::new(ids.1, d, k)))
}

/// Index of the primary cluster: the largest aligned capacity, ties to the
/// lowest id.
pub fn primary_cluster(p: &SubtopicPartition) -> usize {
    let mut best = 0;
    let mut best_min = 0;
    for c in 0..p.m() {
        let m = p.aligned_min(c);
        if m > best_min {
            best_min = m;
            best = c;
        }
    }
    best
}

/// All mass on the primary aligned cluster; when it runs short on a side the
/// roulette's zero-mass fallback fills the rest uniformly from that side's
/// other clusters.
pub fn sample_hard(
    p: &SubtopicPartition,
    ids: (&str, &str),
    k: usize,
    rng: &mut impl Rng,
) -> Result<(View, View), SamplingError> {
    let primary = primary_cluster(p);
    let dist = SamplingDistribution::point_mass(p.m(), primary);
    let q = roulette_select(&side_members(p, true), k, &dist, rng)?;
    let d = roulette_select(&side_members(p, false), k, &dist, rng)?;
    Ok((View::new(ids.0, q, k), View::new(ids.1, d, k)))
}

/// The soft cluster distributions Q for both sides.
pub fn soft_distributions(
    p: &SubtopicPartition,
) -> Result<(SamplingDistribution, SamplingDistribution), SamplingError> {
    let m = p.m();
    let l_q = p.l_q() as f64;
    let l_d = p.l_d() as f64;
    let aligned_total: usize = (0..m).map(|c| p.aligned_min(c)).sum();
    if aligned_total == 0 {
        return Err(SamplingError::NoAlignedCluster);
    }
    let p_a: Vec<f64> = (0..m).map(|c| p.aligned_min(c) as f64 / aligned_total as f64).collect();
    let p_q: Vec<f64> = (0..m).map(|c| p.query_size(c) as f64 / l_q).collect();
    let p_d: Vec<f64> = (0..m).map(|c| p.cand_size(c) as f64 / l_d).collect();
    let wq: Vec<f64> = p_a.iter().zip(&p_q).map(|(a, q)| a * q).collect();
    let wd: Vec<f64> = p_a.iter().zip(&p_d).map(|(a, d)| a * d).collect();
    Ok((
        SamplingDistribution::from_weights(&wq)?,
        SamplingDistribution::from_weights(&wd)?,
    ))
}

/// Clusters weighted by both their aligned capacity and their share of each
/// document (the element-wise product of the two distributions, renormalized).
pub fn sample_soft(
    p: &SubtopicPartition,
    ids: (&str, &str),
    k: usize,
    rng: &mut impl Rng,
) -> Result<(View, View), SamplingError> {
    let (q_dist, d_dist) = soft_distributions(p)?;
    let q = roulette_select(&side_members(p, true), k, &q_dist, rng)?;
    let d = roulette_select(&side_members(p, false), k, &d_dist, rng)?;
    Ok((View::new(ids.0, q, k), View::new(ids.1, d, k)))
}

/// A contiguous window of min(k, len) sentences at a uniform start position.
pub fn sample_random(doc: &Document, k: usize, rng: &mut impl Rng) -> View {
    let len = doc.len();
    let width = k.min(len);
    let start = rng.random_range(0..=len - width);
    View::new(&doc.id, (start..start + width).collect(), k)
}

/// Smallest aligned clusters first: fill from the cluster with the least
/// aligned capacity, cascading to the next-smallest on exhaustion. Clusters
/// with no aligned capacity come last, ordered by side size then id.
pub fn sample_negative(
    p: &SubtopicPartition,
    ids: (&str, &str),
    k: usize,
    rng: &mut impl Rng,
) -> Result<(View, View), SamplingError> {
    let mut aligned: Vec<usize> = (0..p.m()).filter(|&c| p.aligned_min(c) > 0).collect();
    aligned.sort_by_key(|&c| (p.aligned_min(c), c));

    let fill_side = |query_side: bool, rng: &mut dyn rand::RngCore| -> Result<Vec<usize>, SamplingError> {
        let members = side_members(p, query_side);
        if members.iter().all(|m| m.is_empty()) {
            return Err(SamplingError::EmptyClusters);
        }
        let mut rest: Vec<usize> = (0..p.m())
            .filter(|&c| p.aligned_min(c) == 0 && !members[c].is_empty())
            .collect();
        rest.sort_by_key(|&c| (members[c].len(), c));

        let mut selected = Vec::with_capacity(k);
        for &c in aligned.iter().chain(rest.iter()) {
            let mut pool = members[c].to_vec();
            while selected.len() < k && !pool.is_empty() {
                let pick = rng.random_range(0..pool.len());
                selected.push(pool.swap_remove(pick));
            }
            if selected.len() >= k {
                break;
            }
        }
        Ok(selected)
    };

    let q = fill_side(true, rng)?;
    let d = fill_side(false, rng)?;
    Ok((View::new(ids.0, q, k), View::new(ids.1, d, k)))
}

fn sample_once(
    pair: &DocumentPair,
    p: &SubtopicPartition,
    kind: SamplerKind,
    k: usize,
    rng: &mut impl Rng,
) -> Result<(View, View), SamplingError> {
    let ids = (pair.query.id.as_str(), pair.candidate.id.as_str());
    match kind {
        SamplerKind::Uniform => sample_uniform(p, ids, k, rng),
        SamplerKind::Hard => sample_hard(p, ids, k, rng),
        SamplerKind::Soft => match sample_soft(p, ids, k, rng) {
            Err(SamplingError::NoAlignedCluster) => {
                log::warn!(
                    "pair {}: no aligned cluster for soft sampling; falling back to uniform",
                    pair.pair_id()
                );
                sample_uniform(p, ids, k, rng)
            }
            other => other,
        },
        SamplerKind::Random => {
            let q = sample_random(&pair.query, k, rng);
            let d = sample_random(&pair.candidate, k, rng);
            Ok((q, d))
        }
        SamplerKind::Negative => sample_negative(p, ids, k, rng),
    }
}

fn build_pool(
    pair: &DocumentPair,
    p: &SubtopicPartition,
    kind: SamplerKind,
    k: usize,
    pool_size: usize,
    seed: u64,
    purpose: &str,
) -> Result<ViewPool, SamplingError> {
    let pair_id = pair.pair_id();
    let mut rng = pair_stream(seed, &pair_id, purpose);
    let mut entries = Vec::with_capacity(pool_size);
    for _ in 0..pool_size {
        entries.push(sample_once(pair, p, kind, k, &mut rng)?);
    }
    Ok(ViewPool { pair_id, entries })
}

/// Training pool: entry t is the epoch-t view pair, all drawn from one
/// stream keyed by (seed, pair id).
pub fn build_view_pool(
    pair: &DocumentPair,
    p: &SubtopicPartition,
    kind: SamplerKind,
    k: usize,
    pool_size: usize,
    seed: u64,
) -> Result<ViewPool, SamplingError> {
    build_pool(pair, p, kind, k, pool_size, seed, "train")
}

/// Inference pool: an independent stream from the training pool's.
pub fn build_inference_pool(
    pair: &DocumentPair,
    p: &SubtopicPartition,
    kind: SamplerKind,
    k: usize,
    pool_size: usize,
    seed: u64,
) -> Result<ViewPool, SamplingError> {
    build_pool(pair, p, kind, k, pool_size, seed, "infer")
}

/// View size from a token budget: floor(budget / mean sentence length).
pub fn view_size_for_budget(token_budget: usize, mean_sentence_len: f64) -> usize {
    if mean_sentence_len <= 0.0 {
        return 1;
    }
    ((token_budget as f64 / mean_sentence_len).floor() as usize).max(1)
}
