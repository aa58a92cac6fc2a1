//! Adaptive clustering head: one masked attention layer over the sparsified
//! sentence graph followed by a projection and row softmax. Forward and
//! analytic backward passes are hand-written; the gradient suite checks them
//! against central finite differences.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::simgraph::{EmbeddingMatrix, SimilarityMatrix};

use super::{SoftAssignment, SubtopicError};

/// Attention-layer weights plus the output projection to `m_max` clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterHeadParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub m_max: usize,
    /// Per-node transform, hidden_dim x input_dim.
    pub transform: Vec<f64>,
    /// Source / destination halves of the pairwise attention vector.
    pub attn_src: Vec<f64>,
    pub attn_dst: Vec<f64>,
    /// Output projection, hidden_dim x m_max.
    pub proj: Vec<f64>,
    pub frozen: bool,
}

impl ClusterHeadParams {
    pub fn init(input_dim: usize, hidden_dim: usize, m_max: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale_t = 1.0 / (input_dim as f64).sqrt();
        let scale_p = 1.0 / (hidden_dim as f64).sqrt();
        let mut draw = |n: usize, scale: f64| -> Vec<f64> {
            (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect()
        };
        Self {
            input_dim,
            hidden_dim,
            m_max,
            transform: draw(hidden_dim * input_dim, scale_t),
            attn_src: draw(hidden_dim, scale_p),
            attn_dst: draw(hidden_dim, scale_p),
            proj: draw(hidden_dim * m_max, scale_p),
            frozen: false,
        }
    }

    fn w(&self) -> ndarray::ArrayView2<'_, f64> {
        ndarray::ArrayView2::from_shape((self.hidden_dim, self.input_dim), &self.transform).unwrap()
    }

    fn p(&self) -> ndarray::ArrayView2<'_, f64> {
        ndarray::ArrayView2::from_shape((self.hidden_dim, self.m_max), &self.proj).unwrap()
    }

    /// Total number of scalar parameters, flattened in a fixed order
    /// (transform, attn_src, attn_dst, proj). Used by gradient checks.
    pub fn flat_len(&self) -> usize {
        self.transform.len() + self.attn_src.len() + self.attn_dst.len() + self.proj.len()
    }

    pub fn get_flat(&self, i: usize) -> f64 {
        let mut i = i;
        for part in [&self.transform, &self.attn_src, &self.attn_dst, &self.proj] {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        panic!("flat index out of range");
    }

    pub fn set_flat(&mut self, i: usize, v: f64) {
        let mut i = i;
        for part in [
            &mut self.transform,
            &mut self.attn_src,
            &mut self.attn_dst,
            &mut self.proj,
        ] {
            if i < part.len() {
                part[i] = v;
                return;
            }
            i -= part.len();
        }
        panic!("flat index out of range");
    }

    /// One gradient-descent step. Calling this on frozen params is a bug.
    pub fn apply_grads(&mut self, grads: &HeadGrads, lr: f64) {
        assert!(!self.frozen, "attempted to update frozen clustering head");
        for (p, g) in self.transform.iter_mut().zip(&grads.transform) {
            *p -= lr * g;
        }
        for (p, g) in self.attn_src.iter_mut().zip(&grads.attn_src) {
            *p -= lr * g;
        }
        for (p, g) in self.attn_dst.iter_mut().zip(&grads.attn_dst) {
            *p -= lr * g;
        }
        for (p, g) in self.proj.iter_mut().zip(&grads.proj) {
            *p -= lr * g;
        }
    }
}

/// Parameter gradients, same shapes and flat order as the params.
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub transform: Vec<f64>,
    pub attn_src: Vec<f64>,
    pub attn_dst: Vec<f64>,
    pub proj: Vec<f64>,
}

impl HeadGrads {
    fn zeros(params: &ClusterHeadParams) -> Self {
        Self {
            transform: vec![0.0; params.transform.len()],
            attn_src: vec![0.0; params.attn_src.len()],
            attn_dst: vec![0.0; params.attn_dst.len()],
            proj: vec![0.0; params.proj.len()],
        }
    }

    pub fn get_flat(&self, i: usize) -> f64 {
        let mut i = i;
        for part in [&self.transform, &self.attn_src, &self.attn_dst, &self.proj] {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        panic!("flat index out of range");
    }
}

/// Cached activations of one forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct HeadForward {
    pub b: Array2<f64>,
    z: Array2<f64>,
    scores: Array2<f64>,
    alpha: Array2<f64>,
    hidden: Array2<f64>,
    neighbors: Vec<Vec<usize>>,
    m: usize,
}

fn check_dims(
    a_norm: &SimilarityMatrix,
    emb: &EmbeddingMatrix,
    params: &ClusterHeadParams,
    m: usize,
) -> Result<(), SubtopicError> {
    if emb.dim() != params.input_dim {
        return Err(SubtopicError::DimensionMismatch(format!(
            "embedding dim {} != head input dim {}",
            emb.dim(),
            params.input_dim
        )));
    }
    if a_norm.n() != emb.n() {
        return Err(SubtopicError::DimensionMismatch(format!(
            "adjacency n {} != embedding n {}",
            a_norm.n(),
            emb.n()
        )));
    }
    if m > params.m_max || m == 0 {
        return Err(SubtopicError::DimensionMismatch(format!(
            "m {} outside 1..={}",
            m, params.m_max
        )));
    }
    Ok(())
}

/// Forward pass. For node i: a masked softmax over the neighbors given by
/// `a_norm[i][j] > 0` (self always included) weights the transformed
/// neighbor embeddings; the pairwise score is `tanh(a_src.z_i + a_dst.z_j)`.
/// Rows of `b` are the softmax of the hidden state projected onto the first
/// `m` output columns.
pub fn forward(
    a_norm: &SimilarityMatrix,
    emb: &EmbeddingMatrix,
    params: &ClusterHeadParams,
    m: usize,
) -> Result<HeadForward, SubtopicError> {
    check_dims(a_norm, emb, params, m)?;
    let n = emb.n();
    let h = params.hidden_dim;
    let w = params.w();
    let p = params.p();

    // z_i = W x_i
    let z = emb.values().dot(&w.t());

    let u = z.dot(&ndarray::ArrayView1::from(&params.attn_src[..]));
    let v = z.dot(&ndarray::ArrayView1::from(&params.attn_dst[..]));

    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut list: Vec<usize> = (0..n).filter(|&j| i == j || a_norm.get(i, j) > 0.0).collect();
        list.sort_unstable();
        neighbors.push(list);
    }

    let mut scores = Array2::<f64>::zeros((n, n));
    let mut alpha = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut max_s = f64::NEG_INFINITY;
        for &j in &neighbors[i] {
            let s = (u[i] + v[j]).tanh();
            scores[[i, j]] = s;
            max_s = max_s.max(s);
        }
        let mut total = 0.0;
        for &j in &neighbors[i] {
            let e = (scores[[i, j]] - max_s).exp();
            alpha[[i, j]] = e;
            total += e;
        }
        for &j in &neighbors[i] {
            alpha[[i, j]] /= total;
        }
    }

    // g_i = sum_j alpha_ij z_j ; hidden = tanh(g)
    let g = alpha.dot(&z);
    let hidden = g.mapv(f64::tanh);

    // Unused projection columns are masked off before the row softmax.
    let mut logits = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        for c in 0..m {
            let mut acc = 0.0;
            for k in 0..h {
                acc += hidden[[i, k]] * p[[k, c]];
            }
            logits[[i, c]] = acc;
        }
    }
    let mut b = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let row_max = logits.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in 0..m {
            let e = (logits[[i, c]] - row_max).exp();
            b[[i, c]] = e;
            total += e;
        }
        for c in 0..m {
            b[[i, c]] /= total;
        }
    }

    Ok(HeadForward { b, z, scores, alpha, hidden, neighbors, m })
}

/// Soft cluster assignment of the combined sentences.
pub fn assign_soft(
    a_norm: &SimilarityMatrix,
    emb: &EmbeddingMatrix,
    params: &ClusterHeadParams,
    m: usize,
) -> Result<SoftAssignment, SubtopicError> {
    Ok(SoftAssignment::from_softmax(forward(a_norm, emb, params, m)?.b))
}

/// Backward pass: given dL/dB, accumulate gradients for every head parameter.
pub fn backward(
    cache: &HeadForward,
    emb: &EmbeddingMatrix,
    params: &ClusterHeadParams,
    d_b: &Array2<f64>,
) -> HeadGrads {
    let n = emb.n();
    let h = params.hidden_dim;
    let m = cache.m;
    let p = params.p();
    let mut grads = HeadGrads::zeros(params);

    // Row-softmax backward: dL/dlogits.
    let mut d_logits = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let dot: f64 = (0..m).map(|c| d_b[[i, c]] * cache.b[[i, c]]).sum();
        for c in 0..m {
            d_logits[[i, c]] = cache.b[[i, c]] * (d_b[[i, c]] - dot);
        }
    }

    // Projection: logits = hidden . P[:, :m]
    let mut d_hidden = Array2::<f64>::zeros((n, h));
    for i in 0..n {
        for c in 0..m {
            let dl = d_logits[[i, c]];
            for k in 0..h {
                grads.proj[k * params.m_max + c] += cache.hidden[[i, k]] * dl;
                d_hidden[[i, k]] += dl * p[[k, c]];
            }
        }
    }

    // hidden = tanh(g)
    let mut d_g = Array2::<f64>::zeros((n, h));
    for i in 0..n {
        for k in 0..h {
            d_g[[i, k]] = d_hidden[[i, k]] * (1.0 - cache.hidden[[i, k]] * cache.hidden[[i, k]]);
        }
    }

    // g_i = sum_j alpha_ij z_j
    let mut d_alpha = Array2::<f64>::zeros((n, n));
    let mut d_z = Array2::<f64>::zeros((n, h));
    for i in 0..n {
        for &j in &cache.neighbors[i] {
            let mut acc = 0.0;
            for k in 0..h {
                acc += d_g[[i, k]] * cache.z[[j, k]];
            }
            d_alpha[[i, j]] = acc;
            let a = cache.alpha[[i, j]];
            for k in 0..h {
                d_z[[j, k]] += a * d_g[[i, k]];
            }
        }
    }

    // Masked softmax backward, then score = tanh(u_i + v_j).
    let mut d_u = vec![0.0f64; n];
    let mut d_v = vec![0.0f64; n];
    for i in 0..n {
        let dot: f64 = cache.neighbors[i]
            .iter()
            .map(|&j| d_alpha[[i, j]] * cache.alpha[[i, j]])
            .sum();
        for &j in &cache.neighbors[i] {
            let d_score = cache.alpha[[i, j]] * (d_alpha[[i, j]] - dot);
            let s = cache.scores[[i, j]];
            let d_pre = d_score * (1.0 - s * s);
            d_u[i] += d_pre;
            d_v[j] += d_pre;
        }
    }

    // u_i = attn_src . z_i ; v_i = attn_dst . z_i
    for i in 0..n {
        for k in 0..h {
            grads.attn_src[k] += d_u[i] * cache.z[[i, k]];
            grads.attn_dst[k] += d_v[i] * cache.z[[i, k]];
            d_z[[i, k]] += d_u[i] * params.attn_src[k] + d_v[i] * params.attn_dst[k];
        }
    }
    // z_i = W x_i
    let x = emb.values();
    for i in 0..n {
        for k in 0..h {
            let dz = d_z[[i, k]];
            if dz == 0.0 {
                continue;
            }
            for d in 0..params.input_dim {
                grads.transform[k * params.input_dim + d] += dz * x[[i, d]];
            }
        }
    }

    grads
}
