//! Meta-label construction: graph augmented label centroids and balanced
//! hierarchical 2-means on the unit sphere.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::assignment_matrix;
use crate::{CsrMatrix, Error, Real, Result, SparseVec};

const MAX_ITERS: usize = 50;
const TOLERANCE: Real = 1e-4;

/// Label centroids `c_l = sum_{i: y_il = 1} x_i` smoothed over the graph as
/// `c_hat_l = sum_j G_lj c_j`, then L2-normalised.
///
/// `features` is N x F (TF-IDF or embedded documents), `doc_labels` N x L.
pub fn graph_centroids(features: &CsrMatrix, doc_labels: &CsrMatrix, graph: &CsrMatrix) -> Result<CsrMatrix> {
    let centroids = doc_labels.transpose().matmul(features)?;
    Ok(graph.matmul(&centroids)?.l2_normalize_rows())
}

/// A partition of `0..n_labels` into `n_clusters` meta-labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster id of every label.
    pub assignment: Vec<u32>,
    pub n_clusters: usize,
}

impl Clustering {
    pub fn n_labels(&self) -> usize {
        self.assignment.len()
    }

    /// Members of each cluster in increasing label order.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (l, &c) in self.assignment.iter().enumerate() {
            out[c as usize].push(l as u32);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_clusters];
        for &c in &self.assignment {
            out[c as usize] += 1;
        }
        out
    }

    /// Column-normalised L x K assignment matrix.
    pub fn assignment_matrix(&self) -> CsrMatrix {
        assignment_matrix(&self.assignment, self.n_clusters)
    }

    /// `label_id cluster_id` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.assignment.len() * 8);
        for (l, c) in self.assignment.iter().enumerate() {
            out.push_str(&format!("{l} {c}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path)?;
        let mut assignment = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let bad = |msg: &str| Error::Format { path: path.to_path_buf(), line: i + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 2 {
                return Err(bad("expected `label_id cluster_id`"));
            }
            let l: usize = f[0].parse().map_err(|_| bad("bad label id"))?;
            let c: u32 = f[1].parse().map_err(|_| bad("bad cluster id"))?;
            if l != assignment.len() {
                return Err(bad("label ids must be consecutive from 0"));
            }
            assignment.push(c);
        }
        let n_clusters = assignment.iter().max().map_or(0, |&c| c as usize + 1);
        Ok(Self { assignment, n_clusters })
    }
}

/// Balanced hierarchical 2-means with `levels` levels, giving `2^levels` clusters.
pub fn balanced_binary_cluster(points: &CsrMatrix, levels: u32, seed: u64) -> Result<Clustering> {
    balanced_cluster(points, 1usize << levels, seed)
}

/// Balanced hierarchical 2-means into `k` leaves. Each node with `k_node`
/// leaves is split into subtrees of `ceil(k_node/2)` and `floor(k_node/2)`
/// leaves; the label counts follow the same proportion, so siblings of equal
/// leaf count differ by at most one label.
pub fn balanced_cluster(points: &CsrMatrix, k: usize, seed: u64) -> Result<Clustering> {
    let n = points.rows();
    if k == 0 || k > n.max(1) {
        return Err(Error::Config(format!("cannot split {n} labels into {k} clusters")));
    }
    let mut assignment = vec![0u32; n];
    let labels: Vec<u32> = (0..n as u32).collect();
    let leaves = split_node(points, labels, k, 1, seed);
    for (cluster, members) in leaves.iter().enumerate() {
        for &l in members {
            assignment[l as usize] = cluster as u32;
        }
    }
    Ok(Clustering { assignment, n_clusters: k })
}

fn split_node(points: &CsrMatrix, labels: Vec<u32>, k: usize, node: u64, seed: u64) -> Vec<Vec<u32>> {
    if k == 1 {
        return vec![labels];
    }
    let k_left = k.div_ceil(2);
    let n = labels.len();
    let n_left = if k_left * 2 == k { n.div_ceil(2) } else { (n * k_left).div_ceil(k) };
    let (left, right) = two_means_split(points, &labels, n_left, node, seed);
    let (mut a, b) = rayon::join(
        || split_node(points, left, k_left, 2 * node, seed),
        || split_node(points, right, k - k_left, 2 * node + 1, seed),
    );
    a.extend(b);
    a
}

/// Splits `labels` into the `n_left` labels most similar to the first mean and
/// the rest, alternating with mean re-estimation.
fn two_means_split(points: &CsrMatrix, labels: &[u32], n_left: usize, node: u64, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let n = labels.len();
    if n_left == 0 || n_left >= n {
        return (labels[..n_left.min(n)].to_vec(), labels[n_left.min(n)..].to_vec());
    }
    let dim = points.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node);
    let first = labels[rng.gen_range(0..n)] as usize;
    let mut mean_a = points.row_vec(first).to_dense();
    let second = labels
        .iter()
        .map(|&l| (points.row_vec(l as usize).dot_dense(&mean_a), l))
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        .map(|(_, l)| l as usize)
        .expect("node is non-empty");
    let mut mean_b = points.row_vec(second).to_dense();

    let mut order: Vec<(Real, u32)> = Vec::with_capacity(n);
    let mut previous = Real::NEG_INFINITY;
    for _ in 0..MAX_ITERS {
        order.clear();
        let mut objective = 0.0;
        for &l in labels {
            let row = points.row_vec(l as usize);
            let (sa, sb) = (row.dot_dense(&mean_a), row.dot_dense(&mean_b));
            order.push((sa - sb, l));
            objective += sb;
        }
        order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        objective += order[..n_left].iter().map(|o| o.0).sum::<Real>();
        mean_a = unit_mean(points, order[..n_left].iter().map(|o| o.1), dim);
        mean_b = unit_mean(points, order[n_left..].iter().map(|o| o.1), dim);
        if objective - previous < TOLERANCE * (n as Real) {
            break;
        }
        previous = objective;
    }
    let mut left: Vec<u32> = order[..n_left].iter().map(|o| o.1).collect();
    let mut right: Vec<u32> = order[n_left..].iter().map(|o| o.1).collect();
    left.sort_unstable();
    right.sort_unstable();
    (left, right)
}

fn unit_mean(points: &CsrMatrix, members: impl Iterator<Item = u32>, dim: usize) -> Vec<Real> {
    let mut mean = vec![0.0; dim];
    for l in members {
        for (c, v) in points.row_iter(l as usize) {
            mean[c as usize] += v;
        }
    }
    let norm = mean.iter().map(|v| v * v).sum::<Real>().sqrt();
    if norm > 0.0 {
        mean.iter_mut().for_each(|v| *v /= norm);
    }
    mean
}

/// Clusters head labels (more than `threshold` training documents) and tail
/// labels separately. Heads take `round(k * heads / L)` clusters (at least one,
/// at most one per head) and their ids come first.
pub fn cluster_with_heads(points: &CsrMatrix, label_freq: &[u32], threshold: usize, k: usize, seed: u64) -> Result<Clustering> {
    let n = points.rows();
    let heads: Vec<usize> = (0..n).filter(|&l| label_freq[l] as usize > threshold).collect();
    if heads.is_empty() || heads.len() == n {
        return balanced_cluster(points, k, seed);
    }
    let tails: Vec<usize> = (0..n).filter(|&l| label_freq[l] as usize <= threshold).collect();
    let k_head = ((k as f64 * heads.len() as f64 / n as f64).round() as usize).clamp(1, heads.len()).min(k - 1);
    let k_tail = k - k_head;
    if k_head == 0 || k_tail > tails.len() {
        return Err(Error::Config(format!(
            "cannot split {} head and {} tail labels into {k} clusters",
            heads.len(),
            tails.len()
        )));
    }
    let head_part = balanced_cluster(&points.select_rows(&heads), k_head, seed)?;
    let tail_part = balanced_cluster(&points.select_rows(&tails), k_tail, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let mut assignment = vec![0u32; n];
    for (i, &l) in heads.iter().enumerate() {
        assignment[l] = head_part.assignment[i];
    }
    for (i, &l) in tails.iter().enumerate() {
        assignment[l] = k_head as u32 + tail_part.assignment[i];
    }
    Ok(Clustering { assignment, n_clusters: k })
}

/// Unit vectors of a dense `n x d` set of rows, as CSR.
pub fn dense_points(rows: &[Vec<Real>]) -> CsrMatrix {
    let cols = rows.first().map_or(0, Vec::len);
    let sparse: Vec<SparseVec> =
        rows.iter().map(|r| SparseVec::from_pairs(cols, r.iter().enumerate().map(|(i, &v)| (i as u32, v)).collect())).collect();
    CsrMatrix::from_rows(cols, &sparse).l2_normalize_rows()
}
