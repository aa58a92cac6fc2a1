//! Subtopic discovery over the combined sentence set of a document pair:
//! direct spectral clustering and an adaptive attention-based clustering
//! head trained with a positive-pair divergence loss and a negative-pair
//! orthogonality loss.

mod head;
mod loss;
mod spectral;

pub use head::{assign_soft, ClusterHeadParams, HeadForward, HeadGrads};
pub use loss::{
    mean_positive_loss, negative_loss, negative_loss_grad, pair_loss, pair_loss_and_grad,
    positive_loss, positive_loss_grad, train_head, AdaptiveLossConfig, HeadTrainConfig,
};
pub use spectral::spectral_cluster;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SubtopicError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no positive pairs available for the enabled positive loss")]
    NoPositivePairs,
    #[error("no negative pairs available for the enabled negative loss")]
    NoNegativePairs,
    #[error("both loss terms disabled")]
    NoLossEnabled,
    #[error(transparent)]
    SimGraph(#[from] crate::simgraph::SimGraphError),
}

/// Cluster count from the expected average cluster size: at least 2, at most
/// the combined sentence count.
pub fn choose_cluster_count(l_q: usize, l_d: usize, expected_cluster_size: usize) -> usize {
    let n = l_q + l_d;
    let size = expected_cluster_size.max(1);
    let m = (n as f64 / size as f64).round() as usize;
    m.max(2).min(n)
}

/// A hard partition of the combined sentence set. Cluster ids are compact
/// (empty clusters dropped) and per-cluster membership is pre-split into
/// query-side and candidate-side document-local sentence indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtopicPartition {
    assignment: Vec<usize>,
    split: usize,
    query_members: Vec<Vec<usize>>,
    cand_members: Vec<Vec<usize>>,
}

impl SubtopicPartition {
    /// Compact raw cluster labels (dropping empty ids, preserving id order)
    /// and split membership by document side.
    pub fn new(raw: Vec<usize>, split: usize) -> Self {
        let max_id = raw.iter().copied().max().map_or(0, |m| m + 1);
        let mut used = vec![false; max_id];
        for &c in &raw {
            used[c] = true;
        }
        let mut remap = vec![usize::MAX; max_id];
        let mut next = 0;
        for (id, &u) in used.iter().enumerate() {
            if u {
                remap[id] = next;
                next += 1;
            }
        }
        let assignment: Vec<usize> = raw.iter().map(|&c| remap[c]).collect();
        let m = next.max(1);
        let mut query_members = vec![Vec::new(); m];
        let mut cand_members = vec![Vec::new(); m];
        for (i, &c) in assignment.iter().enumerate() {
            if i < split {
                query_members[c].push(i);
            } else {
                cand_members[c].push(i - split);
            }
        }
        Self { assignment, split, query_members, cand_members }
    }

    pub fn m(&self) -> usize {
        self.query_members.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn l_q(&self) -> usize {
        self.split
    }

    pub fn l_d(&self) -> usize {
        self.assignment.len() - self.split
    }

    /// Query-side members of cluster `c` (document-local indices).
    pub fn query_members(&self, c: usize) -> &[usize] {
        &self.query_members[c]
    }

    /// Candidate-side members of cluster `c` (document-local indices).
    pub fn cand_members(&self, c: usize) -> &[usize] {
        &self.cand_members[c]
    }

    pub fn query_size(&self, c: usize) -> usize {
        self.query_members[c].len()
    }

    pub fn cand_size(&self, c: usize) -> usize {
        self.cand_members[c].len()
    }

    /// min(|c^q|, |c^d|): the aligned capacity of cluster `c`.
    pub fn aligned_min(&self, c: usize) -> usize {
        self.query_size(c).min(self.cand_size(c))
    }
}

/// Row-stochastic soft assignment of the combined sentences to m clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment {
    b: Array2<f64>,
}

impl SoftAssignment {
    /// Wrap a matrix, checking the row-stochastic invariant.
    pub fn new(b: Array2<f64>) -> Result<Self, SubtopicError> {
        for (i, row) in b.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(SubtopicError::DimensionMismatch(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
            if row.iter().any(|&v| v < 0.0) {
                return Err(SubtopicError::DimensionMismatch(format!(
                    "row {i} has a negative entry"
                )));
            }
        }
        Ok(Self { b })
    }

    pub(crate) fn from_softmax(b: Array2<f64>) -> Self {
        Self { b }
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.b
    }
}

/// Argmax per row (ties to the lowest cluster id), empties dropped.
pub fn harden(b: &SoftAssignment, split: usize) -> SubtopicPartition {
    let raw: Vec<usize> = b
        .values()
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (c, &v) in row.iter().enumerate() {
                if v > best_val {
                    best_val = v;
                    best = c;
                }
            }
            best
        })
        .collect();
    SubtopicPartition::new(raw, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cluster_count_matches_expected_size() {
        assert_eq!(choose_cluster_count(18, 18, 6), 6);
        assert_eq!(choose_cluster_count(3, 2, 6), 2);
        assert_eq!(choose_cluster_count(20, 20, 6), 7);
    }

    #[test]
    fn cluster_count_never_exceeds_sentence_count() {
        assert_eq!(choose_cluster_count(1, 1, 1), 2);
        assert_eq!(choose_cluster_count(2, 1, 1), 3);
    }

    #[test]
    fn partition_compacts_empty_ids() {
        // Labels {0, 3} with 1 and 2 unused -> compacted to {0, 1}.
        let p = SubtopicPartition::new(vec![0, 3, 3, 0], 2);
        assert_eq!(p.m(), 2);
        assert_eq!(p.assignment(), &[0, 1, 1, 0]);
        assert_eq!(p.query_members(0), &[0]);
        assert_eq!(p.cand_members(1), &[0]);
        assert_eq!(p.aligned_min(0), 1);
    }

    #[test]
    fn harden_keeps_one_hot_assignment() {
        let b = SoftAssignment::new(array![
            [1.0, 0.0],
            [0.0, 1.0],
            [0.0, 1.0],
        ])
        .unwrap();
        let p = harden(&b, 1);
        assert_eq!(p.assignment(), &[0, 1, 1]);
    }

    #[test]
    fn harden_breaks_ties_to_lowest_id() {
        let b = SoftAssignment::new(array![[0.5, 0.5]]).unwrap();
        let p = harden(&b, 1);
        assert_eq!(p.assignment(), &[0]);
    }

    #[test]
    fn soft_assignment_rejects_bad_rows() {
        assert!(SoftAssignment::new(array![[0.6, 0.6]]).is_err());
    }
}
