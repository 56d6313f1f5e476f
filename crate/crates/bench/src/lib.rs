//! Fixtures shared by the benchmarks.

use graphxc_core::cluster::Clustering;
use graphxc_core::predict::Predictor;
use graphxc_core::shortlist::Shortlister;
use graphxc_core::tensor::{EmbeddingBlock, Matrix};
use graphxc_core::{CsrMatrix, Real, SparseVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse `n x n` graph with a 0.5 self-loop and `per_row` random edges per row.
pub fn random_graph(n: usize, per_row: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
    let t: Vec<(u32, u32, Real)> = (0..n)
        .flat_map(|r| {
            let mut row = vec![(r as u32, r as u32, 0.5)];
            row.extend((0..per_row).map(|_| (r as u32, rng.gen_range(0..n as u32), rng.gen_range(0.0..0.1))));
            row
        })
        .collect();
    CsrMatrix::from_triplets(n, n, &t)
}

/// Random predictor over `labels` labels in `clusters` meta-labels of
/// `labels / clusters` members each, with embedding dimension `dim`.
pub fn random_predictor(labels: usize, dim: usize, clusters: usize, beam: usize, vocab: usize, seed: u64) -> Predictor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clustering = Clustering { assignment: (0..labels).map(|j| (j % clusters) as u32).collect(), n_clusters: clusters };
    let scale = 1.0 / (dim as Real).sqrt();
    let meta_graph = random_graph(clusters, 4, &mut rng);
    let graph = random_graph(labels, 4, &mut rng);
    let s = Shortlister::new(clustering, Matrix::uniform(clusters, dim, scale, &mut rng), meta_graph, beam, EmbeddingBlock::identity(dim))
        .expect("consistent shortlister");
    Predictor::new(Matrix::uniform(vocab, dim, 1.0, &mut rng), EmbeddingBlock::identity(dim), Matrix::uniform(labels, dim, scale, &mut rng), s, graph)
        .expect("consistent predictor")
}

/// Documents with eight random tokens each.
pub fn random_docs(n: usize, vocab: usize, seed: u64) -> Vec<SparseVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| SparseVec::from_pairs(vocab, (0..8).map(|_| (rng.gen_range(0..vocab as u32), rng.gen_range(0.1..1.0))).collect()))
        .collect()
}
