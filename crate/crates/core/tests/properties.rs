use graphxc_core::cluster::{balanced_binary_cluster, dense_points, Clustering};
use graphxc_core::data::tfidf_normalize;
use graphxc_core::graph::{normalize_graph, partition_head_labels, random_walk_graph, GraphKind, LabelGraph, WalkConfig};
use graphxc_core::metrics::{propensities, PropensityParams};
use graphxc_core::model::{gale_embedding, lte_embedding, Attention};
use graphxc_core::predict::Predictor;
use graphxc_core::rank::top_k;
use graphxc_core::shortlist::{game_rerank, Shortlister};
use graphxc_core::tensor::{relu, sigmoid, EmbeddingBlock, Matrix};
use graphxc_core::{CsrMatrix, Real, SparseVec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random N x L presence matrix where each document has 1..=3 labels.
fn ground_truth(n_docs: usize, n_labels: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<SparseVec> = (0..n_docs)
        .map(|_| {
            let count = rng.gen_range(1..=3);
            let mut labels: Vec<u32> = (0..count).map(|_| rng.gen_range(0..n_labels as u32)).collect();
            labels.sort_unstable();
            labels.dedup();
            SparseVec::from_pairs(n_labels, labels.into_iter().map(|l| (l, 1.0)).collect())
        })
        .collect();
    CsrMatrix::from_rows(n_labels, &rows)
}

fn random_counts(rows: usize, cols: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense: Vec<Vec<Real>> = (0..rows)
        .map(|_| (0..cols).map(|_| if rng.gen_bool(density) { rng.gen_range(1..5) as Real } else { 0.0 }).collect())
        .collect();
    CsrMatrix::from_dense(&dense)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn label_frequencies_sum_to_positive_entries(seed in 0u64..10_000, n in 1usize..40, l in 1usize..30) {
        let y = ground_truth(n, l, seed);
        let freq: Real = y.col_sums().iter().sum();
        prop_assert_eq!(freq as usize, y.nnz());
    }

    #[test]
    fn tfidf_rows_are_unit_or_zero(seed in 0u64..10_000, n in 1usize..30, v in 1usize..30) {
        let x = tfidf_normalize(&random_counts(n, v, 0.2, seed));
        for r in 0..x.rows() {
            let norm: Real = x.row(r).1.iter().map(|a| a * a).sum::<Real>().sqrt();
            prop_assert!(x.row_nnz(r) == 0 || (norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn walk_rows_sum_to_walk_length_with_self_visits(seed in 0u64..10_000, omega in 100usize..400, p in 0.3f64..1.0) {
        let y = ground_truth(25, 12, seed);
        let cfg = WalkConfig { walk_length: omega, restart_prob: p, seed, ..WalkConfig::default() };
        let (g, isolated) = random_walk_graph(&y, &cfg);
        for (l, s) in g.row_sums().into_iter().enumerate() {
            prop_assert_eq!(s, omega as Real);
            if !isolated.contains(&(l as u32)) {
                prop_assert!(g.get(l, l) > 0.0);
            }
        }
    }

    #[test]
    fn partition_is_idempotent(seed in 0u64..10_000, threshold in 1usize..6) {
        let y = ground_truth(30, 10, seed);
        let (g, _) = random_walk_graph(&y, &WalkConfig { walk_length: 50, seed, ..WalkConfig::default() });
        let freq: Vec<u32> = y.col_sums().iter().map(|&f| f as u32).collect();
        let once = partition_head_labels(&g, &freq, threshold);
        prop_assert_eq!(partition_head_labels(&once, &freq, threshold), once);
    }

    #[test]
    fn normalisation_is_scale_invariant(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let g = random_counts(8, 8, 0.4, seed);
        let a = normalize_graph(&g);
        let b = normalize_graph(&g.map_entries(|_, _, v| v * c as Real));
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_build_is_deterministic(seed in 0u64..10_000) {
        let y = ground_truth(20, 8, seed);
        let cfg = WalkConfig { walk_length: 80, seed, ..WalkConfig::default() };
        prop_assert_eq!(
            LabelGraph::build(&y, &cfg, GraphKind::RandomWalk).unwrap(),
            LabelGraph::build(&y, &cfg, GraphKind::RandomWalk).unwrap()
        );
    }

    #[test]
    fn sigmoid_is_symmetric_and_relu_idempotent(x in -50.0f64..50.0) {
        let x = x as Real;
        prop_assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-12);
        prop_assert_eq!(relu(relu(x)), relu(x));
    }

    #[test]
    fn attention_weights_lie_on_the_simplex(seed in 0u64..10_000, scale in 0.0f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, n) = (rng.gen_range(1..6), rng.gen_range(1..5));
        let mut att = Attention::random(d, n, &mut rng);
        att.a.scale(scale as Real);
        att.t.scale(scale as Real);
        let comps = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let (_, cache) = att.forward(comps);
        prop_assert!(cache.alpha.iter().all(|&a| a >= 0.0));
        prop_assert!((cache.alpha.iter().sum::<Real>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gale_over_identity_graph_is_lte(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, d, l) = (10, 4, 6);
        let text = random_counts(l, v, 0.3, seed);
        let table = Matrix::uniform(v, d, 1.0, &mut rng);
        let block = EmbeddingBlock { r: Matrix::uniform(d, d, 0.5, &mut rng), lambda: 0.7 };
        for label in 0..l {
            prop_assert_eq!(
                gale_embedding(label, &CsrMatrix::identity(l), &text, &table, &block),
                lte_embedding(&table, &block, &text.row_vec(label))
            );
        }
    }

    #[test]
    fn clustering_is_a_balanced_deterministic_partition(seed in 0u64..10_000, n in 16usize..120, levels in 1u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<Real>> = (0..n).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let pts = dense_points(&rows);
        let c = balanced_binary_cluster(&pts, levels, seed).unwrap();
        prop_assert_eq!(&c, &balanced_binary_cluster(&pts, levels, seed).unwrap());
        let sizes = c.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        for depth in 0..levels {
            let width = 1usize << (levels - depth - 1);
            for node in sizes.chunks(2 * width) {
                let left: usize = node[..width].iter().sum();
                let right: usize = node[width..].iter().sum();
                prop_assert!(left.abs_diff(right) <= 1);
            }
        }
    }

    #[test]
    fn game_returns_beam_clusters_and_reduces_to_top_b(seed in 0u64..10_000, k in 2usize..30, beam in 1usize..30) {
        let beam = beam.min(k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<Real> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let g = random_counts(k, k, 0.3, seed);
        prop_assert_eq!(game_rerank(&scores, &g.transpose(), beam).len(), beam);
        let plain = game_rerank(&scores, &CsrMatrix::identity(k), beam);
        let expect = top_k(&scores, beam);
        // Zero scores are dropped by the re-ranking and padded back in id order.
        for (a, b) in plain.iter().zip(&expect) {
            prop_assert!(a == b || b.1 == 0.0);
        }
    }

    #[test]
    fn joint_scores_are_bounded_and_monotone(seed in 0u64..10_000, bump in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, k, d) = (12, 4, 3);
        // Nonnegative graph with rows summing to one.
        let g = random_counts(l, l, 0.3, seed).add(&CsrMatrix::identity(l)).unwrap();
        let sums = g.row_sums();
        let g = g.map_entries(|r, _, v| v / sums[r]);
        let clustering = Clustering { assignment: (0..l as u32).map(|j| j % k as u32).collect(), n_clusters: k };
        let meta = Matrix::uniform(k, d, 1.0, &mut rng);
        let s = Shortlister::new(clustering, meta, CsrMatrix::identity(k), k, EmbeddingBlock::identity(d)).unwrap();
        let w = Matrix::uniform(l, d, 1.0, &mut rng);
        let pred = Predictor::new(Matrix::identity(d), EmbeddingBlock::identity(d), w.clone(), s.clone(), g.clone()).unwrap();
        let x = SparseVec::from_pairs(d, vec![(0, 1.0), (1, 0.5), (2, 0.25)]);
        let base = pred.predict(&x, l);
        let x_hat: Vec<Real> = x.to_dense();
        let max_r = (0..l).map(|j| sigmoid((0..d).map(|c| w.get(j, c) * x_hat[c]).sum())).fold(0.0, Real::max);
        prop_assert!(base.iter().all(|e| e.1 >= 0.0 && e.1 <= max_r + 1e-12));
        // Raising one classifier's logit can only raise every joint score.
        let target = rng.gen_range(0..l);
        let mut w2 = w.clone();
        for c in 0..d {
            w2.set(target, c, w.get(target, c) + bump as Real * x_hat[c]);
        }
        let raised = Predictor::new(Matrix::identity(d), EmbeddingBlock::identity(d), w2, s, g).unwrap().predict(&x, l);
        for e in &base {
            let after = raised.iter().find(|f| f.0 == e.0).unwrap().1;
            prop_assert!(after >= e.1 - 1e-12);
        }
    }

    #[test]
    fn propensity_weights_do_not_grow_with_frequency(freq in proptest::collection::vec(0u32..1000, 2..30)) {
        let p = propensities(&freq, 10_000, PropensityParams::default());
        for i in 0..freq.len() {
            for j in 0..freq.len() {
                if freq[i] < freq[j] {
                    prop_assert!(1.0 / p[i] >= 1.0 / p[j]);
                }
            }
        }
    }
}
