//! Cluster-based shortlisting with graph assisted re-ranking (GAME).
//!
//! Meta-classifier scores are kept for the top `B` clusters only, smoothed
//! through the induced cluster graph `G_M` and re-ranked to pick the final
//! `B` clusters.

use rayon::prelude::*;

use crate::cluster::Clustering;
use crate::model::sparse_embed_row;
use crate::rank::{top_k, top_k_pairs};
use crate::tensor::{dot, relu, sigmoid, Checkpoint, EmbeddingBlock, Matrix};
use crate::{CsrMatrix, Error, Real, Result};

/// GAME re-ranking of meta scores.
///
/// `scores` are per-cluster probabilities; `graph_t` is `G_M` transposed so
/// that column `j` of `G_M` is row `j` here. Returns exactly `beam` clusters
/// ranked by `p = G_M p_tilde`, where `p_tilde` keeps the top `beam` scores
/// and zeroes the rest.
pub fn game_rerank(scores: &[Real], graph_t: &CsrMatrix, beam: usize) -> Vec<(u32, Real)> {
    let k = scores.len();
    let beam = beam.min(k);
    let first = top_k(scores, beam);
    let mut p: Vec<(u32, Real)> = Vec::with_capacity(beam * 4);
    let mut acc = std::collections::BTreeMap::new();
    for &(j, s) in &first {
        if s == 0.0 {
            continue;
        }
        for (m, g) in graph_t.row_iter(j as usize) {
            *acc.entry(m).or_insert(0.0) += g * s;
        }
    }
    p.extend(acc.into_iter().filter(|e| e.1 != 0.0));
    let mut out = top_k_pairs(p, beam);
    if out.len() < beam {
        let taken: std::collections::BTreeSet<u32> = out.iter().map(|e| e.0).collect();
        out.extend((0..k as u32).filter(|m| !taken.contains(m)).take(beam - out.len()).map(|m| (m, 0.0)));
    }
    out
}

/// Clusters, meta-classifiers and the re-ranking graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Shortlister {
    pub clustering: Clustering,
    members: Vec<Vec<u32>>,
    /// K x D meta-classifiers.
    pub meta: Matrix,
    /// Induced cluster graph `G_M`.
    pub meta_graph: CsrMatrix,
    meta_graph_t: CsrMatrix,
    pub beam: usize,
    /// Document block used to embed queries for the shortlister.
    pub doc_block: EmbeddingBlock,
}

impl Shortlister {
    pub fn new(clustering: Clustering, meta: Matrix, meta_graph: CsrMatrix, beam: usize, doc_block: EmbeddingBlock) -> Result<Self> {
        let k = clustering.n_clusters;
        if meta.rows() != k || meta_graph.rows() != k || meta_graph.cols() != k {
            return Err(Error::Dimension(format!(
                "shortlister with {k} clusters got {} meta-classifiers and a {}x{} cluster graph",
                meta.rows(),
                meta_graph.rows(),
                meta_graph.cols()
            )));
        }
        if beam == 0 || beam > k {
            return Err(Error::Config(format!("beam {beam} must lie in [1, {k}]")));
        }
        let members = clustering.members();
        let meta_graph_t = meta_graph.transpose();
        Ok(Self { clustering, members, meta, meta_graph, meta_graph_t, beam, doc_block })
    }

    pub fn n_clusters(&self) -> usize {
        self.clustering.n_clusters
    }

    pub fn members(&self, cluster: u32) -> &[u32] {
        &self.members[cluster as usize]
    }

    /// Query embedding `relu(f_D(E x))` with the shortlister's own document block.
    pub fn embed(&self, table: &Matrix, idx: &[u32], vals: &[Real]) -> Vec<Real> {
        self.doc_block.apply(&sparse_embed_row(table, idx, vals)).into_iter().map(relu).collect()
    }

    /// `sigmoid(<h_m, x_hat>)` for every cluster.
    pub fn meta_scores(&self, x_hat: &[Real]) -> Vec<Real> {
        (0..self.meta.rows()).map(|m| sigmoid(dot(self.meta.row(m), x_hat))).collect()
    }

    /// The `B` GAME-shortlisted clusters and their re-ranked scores.
    pub fn shortlist(&self, x_hat: &[Real]) -> Vec<(u32, Real)> {
        game_rerank(&self.meta_scores(x_hat), &self.meta_graph_t, self.beam)
    }

    /// Labels of the shortlisted clusters, sorted.
    pub fn shortlisted_labels(&self, clusters: &[(u32, Real)]) -> Vec<u32> {
        let mut out: Vec<u32> = clusters.iter().flat_map(|&(c, _)| self.members(c).iter().copied()).collect();
        out.sort_unstable();
        out
    }

    pub fn save(&self, prefix: &str, ck: &mut Checkpoint) {
        ck.put_u32(&format!("{prefix}.assignment"), &self.clustering.assignment);
        ck.put_u32(&format!("{prefix}.n_clusters"), &[self.clustering.n_clusters as u32]);
        ck.put_u32(&format!("{prefix}.beam"), &[self.beam as u32]);
        ck.put_matrix(&format!("{prefix}.meta"), &self.meta);
        ck.put_csr(&format!("{prefix}.meta_graph"), &self.meta_graph);
        ck.put_block(&format!("{prefix}.doc"), &self.doc_block);
    }

    pub fn load(prefix: &str, ck: &Checkpoint) -> Result<Self> {
        let one = |name: &str| -> Result<usize> {
            let v = ck.u32s(&format!("{prefix}.{name}"))?;
            v.first().map(|&x| x as usize).ok_or_else(|| Error::Checkpoint(format!("{prefix}.{name} is empty")))
        };
        let clustering = Clustering { assignment: ck.u32s(&format!("{prefix}.assignment"))?, n_clusters: one("n_clusters")? };
        Self::new(
            clustering,
            ck.matrix(&format!("{prefix}.meta"))?,
            ck.csr(&format!("{prefix}.meta_graph"))?,
            one("beam")?,
            ck.block(&format!("{prefix}.doc"))?,
        )
    }
}

/// Per-point training shortlists: labels of the GAME clusters plus the point's positives.
pub fn train_shortlists(s: &Shortlister, table: &Matrix, docs: &CsrMatrix, doc_labels: &CsrMatrix) -> Vec<Vec<u32>> {
    (0..docs.rows())
        .into_par_iter()
        .map(|i| {
            let (idx, vals) = docs.row(i);
            let clusters = s.shortlist(&s.embed(table, idx, vals));
            let mut labels = s.shortlisted_labels(&clusters);
            labels.extend_from_slice(doc_labels.row(i).0);
            labels.sort_unstable();
            labels.dedup();
            labels
        })
        .collect()
}

/// Fraction of ground-truth positives that fall inside the GAME shortlist.
pub fn shortlist_recall(s: &Shortlister, table: &Matrix, docs: &CsrMatrix, doc_labels: &CsrMatrix) -> Real {
    let (hit, total) = (0..docs.rows())
        .into_par_iter()
        .map(|i| {
            let (idx, vals) = docs.row(i);
            let clusters = s.shortlist(&s.embed(table, idx, vals));
            let chosen: Vec<u32> = clusters.iter().map(|c| c.0).collect();
            let pos = doc_labels.row(i).0;
            let hit = pos.iter().filter(|&&l| chosen.contains(&s.clustering.assignment[l as usize])).count();
            (hit, pos.len())
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0 {
        1.0
    } else {
        hit as Real / total as Real
    }
}
