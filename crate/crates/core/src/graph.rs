//! Label correlation graphs inferred from the ground truth.
//!
//! A walk from label `l` alternates between sampling a relevant document of the
//! current label and a relevant label of that document, restarting at `l` with
//! a fixed probability. Visit counts form row `l` of the raw graph. Head labels
//! are then cut off and the matrix is normalised as `A^{-1/2} G B^{-1/2}` with
//! `A`, `B` the row and column sums.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{format_feature_file, parse_feature_file, Precision};
use crate::{CsrMatrix, Error, Real, Result, SparseVec};

/// Random-walk hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub walk_length: usize,
    pub restart_prob: f64,
    /// Labels with more than this many training documents are head labels.
    pub head_threshold: usize,
    pub seed: u64,
    /// Optional top-k truncation per row of the raw graph; `None` keeps every visited edge.
    pub top_k: Option<usize>,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self { walk_length: 400, restart_prob: 0.8, head_threshold: 500, seed: 0, top_k: None }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 1 {
            return Err(Error::Config("walk_length must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.restart_prob) {
            return Err(Error::Config("restart_prob must lie in [0, 1]".into()));
        }
        if self.head_threshold < 1 {
            return Err(Error::Config("head_threshold must be >= 1".into()));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top_k must be positive".into()));
        }
        Ok(())
    }
}

/// How the raw correlation matrix is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    RandomWalk,
    /// Plain co-occurrence counts `Y Y^T`.
    Cooccurrence,
}

/// Normalised label graph plus the raw counts it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGraph {
    /// Normalised weights, L x L.
    pub g: CsrMatrix,
    /// Raw visit (or co-occurrence) counts before partitioning.
    pub g_raw: CsrMatrix,
    pub head_labels: Vec<u32>,
    /// Labels without any training document.
    pub isolated: Vec<u32>,
    pub config: WalkConfig,
    pub kind: GraphKind,
}

impl LabelGraph {
    /// Builds the full graph: raw counts, head partition, optional truncation, normalisation.
    pub fn build(doc_labels: &CsrMatrix, cfg: &WalkConfig, kind: GraphKind) -> Result<Self> {
        cfg.validate()?;
        let bip = Bipartite::new(doc_labels);
        let (g_raw, isolated) = match kind {
            GraphKind::RandomWalk => {
                let (g, isolated) = random_walk_graph_with(&bip, cfg);
                (g, isolated)
            }
            GraphKind::Cooccurrence => {
                let isolated = (0..bip.n_labels()).filter(|&l| bip.docs_of(l).is_empty()).map(|l| l as u32).collect();
                (cooccurrence_graph(doc_labels), isolated)
            }
        };
        let freq: Vec<u32> = (0..bip.n_labels()).map(|l| bip.docs_of(l).len() as u32).collect();
        let head_labels: Vec<u32> =
            (0..freq.len()).filter(|&l| freq[l] as usize > cfg.head_threshold).map(|l| l as u32).collect();
        let mut parted = partition_head_labels(&g_raw, &freq, cfg.head_threshold);
        if let Some(k) = cfg.top_k {
            parted = parted.top_k_per_row(k);
        }
        let g = with_self_loops_on_empty_rows(&normalize_graph(&parted));
        Ok(Self { g, g_raw, head_labels, isolated, config: *cfg, kind })
    }

    /// The identity graph on `n` labels.
    pub fn identity(n: usize) -> Self {
        Self {
            g: CsrMatrix::identity(n),
            g_raw: CsrMatrix::identity(n),
            head_labels: Vec::new(),
            isolated: Vec::new(),
            config: WalkConfig::default(),
            kind: GraphKind::Cooccurrence,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.g.rows()
    }

    pub fn meta(&self) -> GraphMeta {
        match self.kind {
            GraphKind::RandomWalk => GraphMeta {
                walk_length: self.config.walk_length,
                restart_prob: self.config.restart_prob,
                head_threshold: self.config.head_threshold,
                seed: self.config.seed,
            },
            GraphKind::Cooccurrence => GraphMeta {
                walk_length: 0,
                restart_prob: 0.0,
                head_threshold: self.config.head_threshold,
                seed: self.config.seed,
            },
        }
    }
}

/// Ground truth indexed both ways.
pub struct Bipartite {
    label_docs: CsrMatrix,
    doc_labels: CsrMatrix,
}

impl Bipartite {
    /// `doc_labels` is the N x L presence matrix.
    pub fn new(doc_labels: &CsrMatrix) -> Self {
        Self { label_docs: doc_labels.transpose(), doc_labels: doc_labels.clone() }
    }

    pub fn n_labels(&self) -> usize {
        self.label_docs.rows()
    }

    pub fn docs_of(&self, label: usize) -> &[u32] {
        self.label_docs.row(label).0
    }

    pub fn labels_of(&self, doc: usize) -> &[u32] {
        self.doc_labels.row(doc).0
    }
}

/// Runs one walk of `cfg.walk_length` steps from `label`.
///
/// Returns the visit counts and whether the label was isolated (no relevant
/// documents), in which case every visit is a self-visit.
pub fn walk_from<R: Rng>(label: usize, bip: &Bipartite, cfg: &WalkConfig, rng: &mut R) -> (SparseVec, bool) {
    let n_labels = bip.n_labels();
    let omega = cfg.walk_length;
    if bip.docs_of(label).is_empty() {
        return (SparseVec::from_pairs(n_labels, vec![(label as u32, omega as Real)]), true);
    }
    let mut visits: Vec<(u32, u32)> = Vec::new();
    let mut current = label;
    for _ in 0..omega {
        if rng.gen::<f64>() <= cfg.restart_prob {
            current = label;
        }
        let docs = bip.docs_of(current);
        let doc = docs[rng.gen_range(0..docs.len())] as usize;
        let labels = bip.labels_of(doc);
        current = labels[rng.gen_range(0..labels.len())] as usize;
        visits.push((current as u32, 1));
    }
    visits.sort_unstable_by_key(|v| v.0);
    let mut pairs: Vec<(u32, Real)> = Vec::new();
    for (l, _) in visits {
        match pairs.last_mut() {
            Some((last, c)) if *last == l => *c += 1.0,
            _ => pairs.push((l, 1.0)),
        }
    }
    (SparseVec::from_pairs(n_labels, pairs), false)
}

/// Per-label random stream: the walk from `label` does not depend on any other label's walk.
pub fn label_rng(seed: u64, label: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

/// Raw visit-count graph `G^c`: row `l` is [`walk_from`]`(l)`.
///
/// `doc_labels` is the N x L ground truth. Also returns isolated label ids.
pub fn random_walk_graph(doc_labels: &CsrMatrix, cfg: &WalkConfig) -> (CsrMatrix, Vec<u32>) {
    random_walk_graph_with(&Bipartite::new(doc_labels), cfg)
}

fn random_walk_graph_with(bip: &Bipartite, cfg: &WalkConfig) -> (CsrMatrix, Vec<u32>) {
    let rows: Vec<(SparseVec, bool)> = (0..bip.n_labels())
        .into_par_iter()
        .map(|l| walk_from(l, bip, cfg, &mut label_rng(cfg.seed, l)))
        .collect();
    let isolated = rows.iter().enumerate().filter(|(_, r)| r.1).map(|(l, _)| l as u32).collect();
    let rows: Vec<SparseVec> = rows.into_iter().map(|r| r.0).collect();
    (CsrMatrix::from_rows(bip.n_labels(), &rows), isolated)
}

/// Disconnects labels with more than `threshold` training documents: their row
/// becomes a unit self-loop and their column is zero elsewhere.
pub fn partition_head_labels(g: &CsrMatrix, label_freq: &[u32], threshold: usize) -> CsrMatrix {
    let is_head: Vec<bool> = label_freq.iter().map(|&f| f as usize > threshold).collect();
    if !is_head.iter().any(|&h| h) {
        return g.clone();
    }
    let rows: Vec<SparseVec> = (0..g.rows())
        .map(|r| {
            if is_head[r] {
                SparseVec::from_pairs(g.cols(), vec![(r as u32, 1.0)])
            } else {
                let pairs = g.row_iter(r).filter(|(c, _)| !is_head[*c as usize]).collect();
                SparseVec::from_pairs(g.cols(), pairs)
            }
        })
        .collect();
    CsrMatrix::from_rows(g.cols(), &rows)
}

/// `G_lm = G^c_lm / sqrt(rowsum_l * colsum_m)`; zero sums give zero scale.
pub fn normalize_graph(g: &CsrMatrix) -> CsrMatrix {
    let inv_sqrt = |s: Real| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 };
    let rows: Vec<Real> = g.row_sums().into_iter().map(inv_sqrt).collect();
    let cols: Vec<Real> = g.col_sums().into_iter().map(inv_sqrt).collect();
    g.scale(&rows, &cols)
}

fn with_self_loops_on_empty_rows(g: &CsrMatrix) -> CsrMatrix {
    if (0..g.rows()).all(|r| g.row_nnz(r) > 0) {
        return g.clone();
    }
    let rows: Vec<SparseVec> = (0..g.rows())
        .map(|r| {
            if g.row_nnz(r) == 0 {
                SparseVec::from_pairs(g.cols(), vec![(r as u32, 1.0)])
            } else {
                g.row_vec(r)
            }
        })
        .collect();
    CsrMatrix::from_rows(g.cols(), &rows)
}

/// Label co-occurrence counts `Y Y^T` (L x L) from the N x L ground truth.
pub fn cooccurrence_graph(doc_labels: &CsrMatrix) -> CsrMatrix {
    doc_labels.transpose().matmul(doc_labels).expect("shapes agree by construction")
}

/// Column-normalised L x K assignment matrix: `M_lm = 1/|C_m|` when `l` is in cluster `m`.
pub fn assignment_matrix(label_cluster: &[u32], n_clusters: usize) -> CsrMatrix {
    let mut sizes = vec![0usize; n_clusters];
    for &c in label_cluster {
        sizes[c as usize] += 1;
    }
    let rows: Vec<SparseVec> = label_cluster
        .iter()
        .map(|&c| SparseVec::from_pairs(n_clusters, vec![(c, 1.0 / sizes[c as usize] as Real)]))
        .collect();
    CsrMatrix::from_rows(n_clusters, &rows)
}

/// Induced cluster graph `G_M = M^T G M` for a column-normalised assignment `M`.
pub fn induced_cluster_graph(g: &CsrMatrix, m: &CsrMatrix) -> Result<CsrMatrix> {
    m.transpose().matmul(g)?.matmul(m)
}

/// `G^k` by repeated sparse products; `k = 0` is the identity.
pub fn graph_power(g: &CsrMatrix, k: usize) -> Result<CsrMatrix> {
    let mut out = CsrMatrix::identity(g.rows());
    for _ in 0..k {
        out = out.matmul(g)?;
    }
    Ok(out)
}

/// The `ω p threshold seed` header line of a graph file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphMeta {
    pub walk_length: usize,
    pub restart_prob: f64,
    pub head_threshold: usize,
    pub seed: u64,
}

impl fmt::Display for GraphMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.walk_length, self.restart_prob, self.head_threshold, self.seed)
    }
}

pub fn format_graph(meta: &GraphMeta, g: &CsrMatrix) -> String {
    format!("{meta}\n{}", format_feature_file(g, Precision::Double))
}

pub fn write_graph(path: &Path, meta: &GraphMeta, g: &CsrMatrix) -> Result<()> {
    fs::write(path, format_graph(meta, g))?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<(GraphMeta, CsrMatrix)> {
    let src = fs::read_to_string(path)?;
    let (first, rest) = src.split_once('\n').unwrap_or((&src, ""));
    let bad = |msg: &str| Error::Format { path: path.to_path_buf(), line: 1, msg: msg.to_string() };
    let f: Vec<&str> = first.split_whitespace().collect();
    if f.len() != 4 {
        return Err(bad("graph metadata must be `walk_length restart_prob threshold seed`"));
    }
    let meta = GraphMeta {
        walk_length: f[0].parse().map_err(|_| bad("bad walk length"))?,
        restart_prob: f[1].parse().map_err(|_| bad("bad restart probability"))?,
        head_threshold: f[2].parse().map_err(|_| bad("bad head threshold"))?,
        seed: f[3].parse().map_err(|_| bad("bad seed"))?,
    };
    let (g, _) = parse_feature_file(rest, path, Precision::Double).map_err(|e| match e {
        Error::Format { path, line, msg } => Error::Format { path, line: line + 1, msg },
        other => other,
    })?;
    if g.rows() != g.cols() {
        return Err(bad("graph must be square"));
    }
    Ok((meta, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn presence(n_labels: usize, docs: &[&[u32]]) -> CsrMatrix {
        let rows: Vec<SparseVec> = docs
            .iter()
            .map(|d| SparseVec::new(n_labels, d.to_vec(), vec![1.0; d.len()]).unwrap())
            .collect();
        CsrMatrix::from_rows(n_labels, &rows)
    }

    fn cfg(walk_length: usize, restart_prob: f64) -> WalkConfig {
        WalkConfig { walk_length, restart_prob, head_threshold: 500, seed: 42, top_k: None }
    }

    #[test]
    fn single_label_walk_stays_home() {
        let y = presence(1, &[&[0]]);
        let bip = Bipartite::new(&y);
        let (v, isolated) = walk_from(0, &bip, &cfg(10, 0.8), &mut label_rng(1, 0));
        assert!(!isolated);
        assert_eq!(v.iter().collect::<Vec<_>>(), vec![(0, 10.0)]);
    }

    #[test]
    fn isolated_label_gets_self_visits() {
        let y = presence(3, &[&[0, 1]]);
        let bip = Bipartite::new(&y);
        let (v, isolated) = walk_from(2, &bip, &cfg(7, 0.5), &mut label_rng(1, 2));
        assert!(isolated);
        assert_eq!(v.iter().collect::<Vec<_>>(), vec![(2, 7.0)]);
    }

    #[test]
    fn cotagged_pair_splits_visits_evenly() {
        let y = presence(2, &[&[0, 1], &[0, 1], &[0, 1]]);
        let bip = Bipartite::new(&y);
        let (v, _) = walk_from(0, &bip, &cfg(10_000, 0.0), &mut label_rng(9, 0));
        let f0 = v.get(0) / 10_000.0;
        assert!((f0 - 0.5).abs() < 0.02, "{f0}");
    }

    #[test]
    fn full_restart_matches_one_hop_distribution() {
        let docs: &[&[u32]] = &[&[0, 1], &[0, 2, 3], &[0], &[1, 3], &[2, 4]];
        let y = presence(5, docs);
        let bip = Bipartite::new(&y);
        let steps = 20_000;
        let (v, _) = walk_from(0, &bip, &cfg(steps, 1.0), &mut label_rng(3, 0));
        // Exact one-hop transition probabilities from label 0.
        let mine: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].contains(&0)).collect();
        let mut exact = [0.0f64; 5];
        for &i in &mine {
            for &j in docs[i] {
                exact[j as usize] += 1.0 / mine.len() as f64 / docs[i].len() as f64;
            }
        }
        for j in 0..5 {
            let freq = v.get(j as u32) as f64 / steps as f64;
            assert!((freq - exact[j]).abs() < 0.03, "label {j}: {freq} vs {}", exact[j]);
        }
    }

    #[test]
    fn identity_ground_truth_gives_scaled_identity() {
        let y = presence(4, &[&[0], &[1], &[2], &[3]]);
        let (g, isolated) = random_walk_graph(&y, &cfg(25, 0.8));
        assert!(isolated.is_empty());
        let mut expect = CsrMatrix::identity(4);
        expect = expect.map_entries(|_, _, v| v * 25.0);
        assert_eq!(g, expect);
    }

    #[test]
    fn chain_dataset_infers_two_hop_edge() {
        let y = presence(3, &[&[0, 1], &[1, 2]]);
        let (g, _) = random_walk_graph(&y, &cfg(400, 0.8));
        assert!(g.get(0, 2) > 0.0);
        assert_eq!(cooccurrence_graph(&y).get(0, 2), 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let y = presence(5, &[&[0, 1], &[1, 2, 3], &[3, 4], &[0, 4]]);
        let a = LabelGraph::build(&y, &cfg(300, 0.8), GraphKind::RandomWalk).unwrap();
        let b = LabelGraph::build(&y, &cfg(300, 0.8), GraphKind::RandomWalk).unwrap();
        assert_eq!(a, b);
        let c = LabelGraph::build(&y, &WalkConfig { seed: 43, ..cfg(300, 0.8) }, GraphKind::RandomWalk).unwrap();
        assert_ne!(a.g_raw, c.g_raw);
    }

    #[test]
    fn partition_cases() {
        let dense = CsrMatrix::from_dense(&vec![vec![1.0; 4]; 4]);
        assert_eq!(partition_head_labels(&dense, &[1, 1, 1, 1], 5), dense);
        assert_eq!(partition_head_labels(&dense, &[9, 9, 9, 9], 5), CsrMatrix::identity(4));
        let parted = partition_head_labels(&dense, &[1, 9, 1, 1], 5);
        assert_eq!(dense.nnz() - parted.nnz(), 3 * 2);
        assert_eq!(parted.row_iter(1).collect::<Vec<_>>(), vec![(1, 1.0)]);
        assert!((0..4).filter(|&r| r != 1).all(|r| parted.get(r, 1) == 0.0));
    }

    #[test]
    fn normalize_two_by_two() {
        let g = normalize_graph(&CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]));
        let expect = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((g.get(r, c) - expect[r][c]).abs() < 1e-15);
            }
        }
        assert_eq!(normalize_graph(&CsrMatrix::identity(3)), CsrMatrix::identity(3));
    }

    #[test]
    fn zero_sums_scale_to_zero() {
        let g = CsrMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 3.0]]);
        let n = normalize_graph(&g);
        assert_eq!(n.nnz(), 1);
        assert!((n.get(1, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cooccurrence_counts() {
        let y = presence(3, &[&[0, 1], &[0, 1], &[0, 1], &[2]]);
        let c = cooccurrence_graph(&y);
        assert_eq!(c.get(0, 1), 3.0);
        assert_eq!(c.get(0, 0), 3.0);
        assert_eq!(c.get(2, 2), 1.0);
        assert_eq!(c.get(0, 2), 0.0);
        let ident = cooccurrence_graph(&presence(3, &[&[0], &[1], &[2]]));
        assert_eq!(ident, CsrMatrix::identity(3));
    }

    #[test]
    fn induced_graph_single_cluster_is_mean() {
        let g = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.5, 0.0, 1.0], vec![0.0, 3.0, 4.0]]);
        let m = assignment_matrix(&[0, 0, 0], 1);
        let gm = induced_cluster_graph(&g, &m).unwrap();
        assert_eq!((gm.rows(), gm.cols()), (1, 1));
        assert!((gm.get(0, 0) - 11.5 / 9.0).abs() < 1e-12);
        let ident = induced_cluster_graph(&g, &assignment_matrix(&[0, 1, 2], 3)).unwrap();
        assert_eq!(ident, g);
    }

    #[test]
    fn empty_cluster_has_zero_row_and_column() {
        let g = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let m = assignment_matrix(&[0, 2], 3);
        let gm = induced_cluster_graph(&g, &m).unwrap();
        assert_eq!(gm.row_nnz(1), 0);
        assert!((0..3).all(|r| gm.get(r, 1) == 0.0));
    }

    #[test]
    fn graph_file_round_trips() {
        let y = presence(4, &[&[0, 1], &[1, 2], &[3]]);
        let lg = LabelGraph::build(&y, &cfg(50, 0.8), GraphKind::RandomWalk).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        write_graph(&p, &lg.meta(), &lg.g).unwrap();
        let (meta, g) = read_graph(&p).unwrap();
        assert_eq!(meta, lg.meta());
        assert_eq!(g, lg.g);
    }

    fn random_presence(seed: u64, n: usize, l: usize) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<SparseVec> = (0..n)
            .map(|_| {
                let k = rng.gen_range(1..4);
                let mut ids: Vec<u32> = (0..k).map(|_| rng.gen_range(0..l as u32)).collect();
                ids.sort_unstable();
                ids.dedup();
                SparseVec::new(l, ids.clone(), vec![1.0; ids.len()]).unwrap()
            })
            .collect();
        CsrMatrix::from_rows(l, &rows)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn raw_rows_sum_to_walk_length(seed in 0u64..500, omega in 1usize..200) {
            let y = random_presence(seed, 30, 12);
            let (g, _) = random_walk_graph(&y, &WalkConfig { walk_length: omega, seed, ..cfg(omega, 0.8) });
            for s in g.row_sums() {
                prop_assert_eq!(s, omega as Real);
            }
        }

        #[test]
        fn partition_is_idempotent(seed in 0u64..500, threshold in 1usize..6) {
            let y = random_presence(seed, 30, 10);
            let freq: Vec<u32> = {
                let t = y.transpose();
                (0..10).map(|l| t.row_nnz(l) as u32).collect()
            };
            let (g, _) = random_walk_graph(&y, &cfg(100, 0.8));
            let once = partition_head_labels(&g, &freq, threshold);
            prop_assert_eq!(partition_head_labels(&once, &freq, threshold), once);
        }

        #[test]
        fn normalization_is_scale_free_and_invertible(seed in 0u64..500, c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dense: Vec<Vec<Real>> = (0..10)
                .map(|_| (0..10).map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.0..5.0) } else { 0.0 }).collect())
                .collect();
            let gc = CsrMatrix::from_dense(&dense);
            let g = normalize_graph(&gc);
            let a: Vec<Real> = gc.row_sums().iter().map(|s| s.sqrt()).collect();
            let b: Vec<Real> = gc.col_sums().iter().map(|s| s.sqrt()).collect();
            let back = g.scale(&a, &b).to_dense();
            for r in 0..10 {
                for col in 0..10 {
                    prop_assert!((back[r][col] - dense[r][col]).abs() <= 1e-12);
                }
            }
            let scaled = normalize_graph(&gc.map_entries(|_, _, v| v * c as Real));
            for (x, y) in scaled.values().iter().zip(g.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn self_loops_present_with_restarts(seed in 0u64..200) {
            let y = random_presence(seed, 40, 15);
            let lg = LabelGraph::build(&y, &WalkConfig { seed, ..cfg(400, 0.8) }, GraphKind::RandomWalk).unwrap();
            for l in 0..15 {
                prop_assert!(lg.g.get(l, l) > 0.0);
            }
            prop_assert!(lg.g.is_nonnegative());
        }
    }
}
