//! Prediction: GAME shortlist, one-vs-all scores on shortlisted labels,
//! label-graph smoothing `r = G r~` and joint scores `s_l = r_l p_m`.

use std::cell::RefCell;

use rayon::prelude::*;

use crate::metrics::Ranking;
use crate::model::sparse_embed_row;
use crate::rank::top_k_pairs;
use crate::shortlist::Shortlister;
use crate::tensor::{dot, relu, sigmoid, EmbeddingBlock, Matrix};
use crate::{CsrMatrix, Error, Real, Result, SparseVec};

thread_local! {
    static SCRATCH: RefCell<Vec<Real>> = const { RefCell::new(Vec::new()) };
}

/// Everything needed to rank labels for a document.
///
/// Classifier rows are stored grouped by cluster so that scoring a shortlist
/// reads contiguous memory.
#[derive(Debug, Clone)]
pub struct Predictor {
    /// V x D token table.
    pub table: Matrix,
    pub doc_block: EmbeddingBlock,
    shortlister: Shortlister,
    /// Label graph `G` (L x L).
    pub graph: CsrMatrix,
    /// L x D classifiers, rows in cluster order.
    packed: Matrix,
    /// Label of each packed row.
    label_of: Vec<u32>,
    /// Packed row of each label.
    row_of: Vec<u32>,
    /// First packed row of each cluster, plus a final end marker.
    cluster_start: Vec<usize>,
}

impl Predictor {
    /// `classifiers` is the L x D matrix of one-vs-all classifiers in label order.
    pub fn new(table: Matrix, doc_block: EmbeddingBlock, classifiers: Matrix, shortlister: Shortlister, graph: CsrMatrix) -> Result<Self> {
        let (l, d) = classifiers.shape();
        if table.cols() != d || doc_block.dim() != d || shortlister.meta.cols() != d {
            return Err(Error::Dimension("embedding dimensions disagree".into()));
        }
        if shortlister.clustering.n_labels() != l || graph.rows() != l || graph.cols() != l {
            return Err(Error::Dimension(format!("{l} classifiers do not match the clustering or graph")));
        }
        let mut label_of = Vec::with_capacity(l);
        let mut cluster_start = Vec::with_capacity(shortlister.n_clusters() + 1);
        for m in 0..shortlister.n_clusters() {
            cluster_start.push(label_of.len());
            label_of.extend_from_slice(shortlister.members(m as u32));
        }
        cluster_start.push(l);
        let mut row_of = vec![0u32; l];
        let mut packed = Matrix::zeros(l, d);
        for (row, &label) in label_of.iter().enumerate() {
            row_of[label as usize] = row as u32;
            packed.row_mut(row).copy_from_slice(classifiers.row(label as usize));
        }
        Ok(Self { table, doc_block, shortlister, graph, packed, label_of, row_of, cluster_start })
    }

    pub fn n_labels(&self) -> usize {
        self.packed.rows()
    }

    pub fn shortlister(&self) -> &Shortlister {
        &self.shortlister
    }

    /// Classifier `w_l`.
    pub fn classifier(&self, label: usize) -> &[Real] {
        self.packed.row(self.row_of[label] as usize)
    }

    /// All classifiers in label order.
    pub fn classifiers(&self) -> Matrix {
        let rows: Vec<Vec<Real>> = (0..self.n_labels()).map(|l| self.classifier(l).to_vec()).collect();
        Matrix::from_rows(&rows)
    }

    fn embed(&self, idx: &[u32], vals: &[Real]) -> Vec<Real> {
        self.doc_block.apply(&sparse_embed_row(&self.table, idx, vals)).into_iter().map(relu).collect()
    }

    /// Top-`k` labels by joint score for one document.
    pub fn predict_row(&self, idx: &[u32], vals: &[Real], k: usize) -> Ranking {
        let s = &self.shortlister;
        let clusters = s.shortlist(&s.embed(&self.table, idx, vals));
        let x_hat = self.embed(idx, vals);
        SCRATCH.with(|cell| {
            let mut r_tilde = cell.borrow_mut();
            if r_tilde.len() < self.n_labels() {
                r_tilde.resize(self.n_labels(), 0.0);
            }
            for &(m, _) in &clusters {
                for row in self.cluster_start[m as usize]..self.cluster_start[m as usize + 1] {
                    r_tilde[self.label_of[row] as usize] = sigmoid(dot(self.packed.row(row), &x_hat));
                }
            }
            let mut joint = Vec::with_capacity(clusters.len() * 4);
            for &(m, p) in &clusters {
                for &l in s.members(m) {
                    let (cols, vals) = self.graph.row(l as usize);
                    let r: Real = cols.iter().zip(vals).map(|(&j, &g)| g * r_tilde[j as usize]).sum();
                    joint.push((l, r * p));
                }
            }
            for &(m, _) in &clusters {
                for &l in s.members(m) {
                    r_tilde[l as usize] = 0.0;
                }
            }
            top_k_pairs(joint, k)
        })
    }

    pub fn predict(&self, x: &SparseVec, k: usize) -> Ranking {
        self.predict_row(x.indices(), x.values(), k)
    }

    /// Predictions for every row, in parallel.
    pub fn predict_all(&self, docs: &CsrMatrix, k: usize) -> Vec<Ranking> {
        (0..docs.rows())
            .into_par_iter()
            .map(|i| {
                let (idx, vals) = docs.row(i);
                self.predict_row(idx, vals, k)
            })
            .collect()
    }

    /// Brute-force baseline: `sigmoid(<w_l, x_hat>)` for every label.
    pub fn predict_dense_row(&self, idx: &[u32], vals: &[Real], k: usize) -> Ranking {
        let x_hat = self.embed(idx, vals);
        let scores: Vec<(u32, Real)> =
            (0..self.n_labels()).map(|row| (self.label_of[row], sigmoid(dot(self.packed.row(row), &x_hat)))).collect();
        top_k_pairs(scores, k)
    }
}

/// Prediction rows as sparse score vectors.
pub fn rankings_to_matrix(preds: &[Ranking], n_labels: usize) -> CsrMatrix {
    let rows: Vec<SparseVec> = preds.iter().map(|p| SparseVec::from_pairs(n_labels, p.clone())).collect();
    CsrMatrix::from_rows(n_labels, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Clustering;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn singleton_predictor(classifiers: Matrix, meta: Matrix, graph: CsrMatrix, beam: usize) -> Predictor {
        let l = classifiers.rows();
        let d = classifiers.cols();
        let clustering = Clustering { assignment: (0..l as u32).collect(), n_clusters: l };
        let s = Shortlister::new(clustering, meta, CsrMatrix::identity(l), beam, EmbeddingBlock::identity(d)).unwrap();
        Predictor::new(Matrix::identity(d), EmbeddingBlock::identity(d), classifiers, s, graph).unwrap()
    }

    fn logit(p: Real) -> Real {
        (p / (1.0 - p)).ln()
    }

    #[test]
    fn correlated_rare_label_is_surfaced() {
        // x_hat = e_0; classifier logits give r~ = (0.6, 0.4, ~0) and every
        // meta score is 0.5. G row 3 = (0.5, 0.5, 0).
        let w = Matrix::from_rows(&[vec![logit(0.6), 0.0], vec![logit(0.4), 0.0], vec![-40.0, 0.0]]);
        let meta = Matrix::zeros(3, 2);
        let g = CsrMatrix::from_dense(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.5, 0.5, 0.0]]);
        let pred = singleton_predictor(w, meta, g, 3);
        let x = SparseVec::new(2, vec![0], vec![1.0]).unwrap();
        let out = pred.predict(&x, 3);
        assert_eq!(out[0].0, 0);
        assert!((out[0].1 - 0.3).abs() < 1e-12);
        assert_eq!(out[1].0, 2);
        assert!((out[1].1 - 0.25).abs() < 1e-12);
        assert_eq!(out[2].0, 1);
        assert!((out[2].1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn full_beam_identity_graphs_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (l, d) = (40, 5);
        let w = Matrix::uniform(l, d, 1.0, &mut rng);
        let meta = Matrix::uniform(l, d, 1.0, &mut rng);
        let pred = singleton_predictor(w.clone(), meta.clone(), CsrMatrix::identity(l), l);
        for _ in 0..20 {
            let x = SparseVec::from_pairs(d, (0..3).map(|_| (rng.gen_range(0..d as u32), rng.gen_range(0.0..1.0))).collect());
            let xh: Vec<Real> = x.to_dense().iter().map(|v| v.max(0.0)).collect();
            let mut oracle: Vec<(u32, Real)> = (0..l)
                .map(|j| {
                    let s: Real = (0..d).map(|c| w.get(j, c) * xh[c]).sum();
                    let m: Real = (0..d).map(|c| meta.get(j, c) * xh[c]).sum();
                    (j as u32, 1.0 / (1.0 + (-s).exp()) / (1.0 + (-m).exp()))
                })
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let got = pred.predict(&x, 10);
            for (g, o) in got.iter().zip(&oracle) {
                assert_eq!(g.0, o.0);
                assert!((g.1 - o.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn asking_for_more_than_available_shortens_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pred = singleton_predictor(Matrix::uniform(6, 3, 1.0, &mut rng), Matrix::uniform(6, 3, 1.0, &mut rng), CsrMatrix::identity(6), 2);
        let x = SparseVec::new(3, vec![1], vec![1.0]).unwrap();
        let out = pred.predict(&x, 10);
        assert_eq!(out.len(), 2);
        assert!(out.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
