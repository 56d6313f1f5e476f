//! Ranking metrics: precision, recall and propensity-scored precision at k,
//! popularity-bin decomposition of precision, loss of mutual information of a
//! label clustering, and GAME re-ranking of externally produced scores.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cluster::Clustering;
use crate::rank::top_k_pairs;
use crate::shortlist::game_rerank;
use crate::{CsrMatrix, Real};

/// Ranked `(label, score)` pairs for one document, best first.
pub type Ranking = Vec<(u32, Real)>;

fn is_positive(truth: &CsrMatrix, row: usize, label: u32) -> bool {
    truth.row(row).0.binary_search(&label).is_ok()
}

fn hits(pred: &Ranking, truth: &CsrMatrix, row: usize, k: usize) -> usize {
    pred.iter().take(k).filter(|p| is_positive(truth, row, p.0)).count()
}

/// Mean over documents of `|top_k ∩ truth| / k`.
pub fn precision_at_k(preds: &[Ranking], truth: &CsrMatrix, k: usize) -> Real {
    if preds.is_empty() || k == 0 {
        return 0.0;
    }
    let total: usize = preds.iter().enumerate().map(|(i, p)| hits(p, truth, i, k)).sum();
    total as Real / (k * preds.len()) as Real
}

/// Mean over documents with at least one positive of `|top_k ∩ truth| / |truth|`.
pub fn recall_at_k(preds: &[Ranking], truth: &CsrMatrix, k: usize) -> Real {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, p) in preds.iter().enumerate() {
        let n = truth.row_nnz(i);
        if n > 0 {
            sum += hits(p, truth, i, k) as Real / n as Real;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as Real
    }
}

/// Propensity model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropensityParams {
    pub a: Real,
    pub b: Real,
}

impl Default for PropensityParams {
    fn default() -> Self {
        Self { a: 0.55, b: 1.5 }
    }
}

/// `p_l = 1 / (1 + C exp(-A ln(N_l + B)))` with `C = (ln N - 1)(B + 1)^A`,
/// where `N_l` is the training frequency of label `l` and `N` the number of
/// training documents.
pub fn propensities(label_freq: &[u32], n_train: usize, params: PropensityParams) -> Vec<Real> {
    let c = ((n_train as Real).ln() - 1.0) * (params.b + 1.0).powf(params.a);
    label_freq
        .iter()
        .map(|&n| 1.0 / (1.0 + c * (-params.a * (n as Real + params.b).ln()).exp()))
        .collect()
}

/// Propensity-scored precision at k: the sum over documents of inverse
/// propensities of correct predictions in the top k, divided by the same sum
/// for the best possible top k.
pub fn psp_at_k(preds: &[Ranking], truth: &CsrMatrix, propensity: &[Real], k: usize) -> Real {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, p) in preds.iter().enumerate() {
        num += p.iter().take(k).filter(|e| is_positive(truth, i, e.0)).map(|e| 1.0 / propensity[e.0 as usize]).sum::<Real>();
        let mut best: Vec<Real> = truth.row(i).0.iter().map(|&l| 1.0 / propensity[l as usize]).collect();
        best.sort_by(|a, b| b.total_cmp(a));
        den += best.iter().take(k).sum::<Real>();
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Labels grouped into popularity bins with equal training positives.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityBins {
    /// Bin of every label; bin 0 holds the rarest labels.
    pub bin_of: Vec<usize>,
    /// Training positives falling in each bin.
    pub positives: Vec<u64>,
}

impl PopularityBins {
    /// Labels are sorted by increasing frequency (ties by id) and cut so that
    /// each bin receives about `total / bins` training positives.
    pub fn new(label_freq: &[u32], bins: usize) -> Self {
        let mut order: Vec<usize> = (0..label_freq.len()).collect();
        order.sort_by_key(|&l| (label_freq[l], l));
        let total: u64 = label_freq.iter().map(|&f| f as u64).sum();
        let mut bin_of = vec![0; label_freq.len()];
        let mut positives = vec![0u64; bins];
        let mut cum = 0u64;
        for l in order {
            let f = label_freq[l] as u64;
            // Bin of the midpoint of this label's share of the cumulative count.
            let bin = if total == 0 { 0 } else { (((2 * cum + f) * bins as u64) / (2 * total)).min(bins as u64 - 1) as usize };
            bin_of[l] = bin;
            positives[bin] += f;
            cum += f;
        }
        Self { bin_of, positives }
    }

    pub fn n_bins(&self) -> usize {
        self.positives.len()
    }
}

/// Contribution of each bin to P@k: correct top-k predictions of labels in the
/// bin divided by `k * n_docs`. The contributions sum to P@k.
pub fn bin_contributions(preds: &[Ranking], truth: &CsrMatrix, bins: &PopularityBins, k: usize) -> Vec<Real> {
    let mut out = vec![0.0; bins.n_bins()];
    if preds.is_empty() || k == 0 {
        return out;
    }
    let scale = 1.0 / (k * preds.len()) as Real;
    for (i, p) in preds.iter().enumerate() {
        for e in p.iter().take(k) {
            if is_positive(truth, i, e.0) {
                out[bins.bin_of[e.0 as usize]] += scale;
            }
        }
    }
    out
}

/// Mutual information between rows and columns of a nonnegative count
/// matrix, under the joint `P(i, j) = C_ij / sum(C)`, in nats.
fn mutual_information(counts: &CsrMatrix) -> Real {
    let total: Real = counts.values().iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let rows: Vec<Real> = counts.row_sums().into_iter().map(|s| s / total).collect();
    let cols: Vec<Real> = counts.col_sums().into_iter().map(|s| s / total).collect();
    let mut mi = 0.0;
    for r in 0..counts.rows() {
        for (c, v) in counts.row_iter(r) {
            if v > 0.0 {
                let p = v / total;
                mi += p * (p / (rows[r] * cols[c as usize])).ln();
            }
        }
    }
    mi
}

/// Loss of mutual information from merging labels into clusters:
/// `I(label; document) - I(cluster; document)` under the empirical joint
/// `P(i, l) = y_il / nnz(Y)`. `doc_labels` is N x L.
pub fn lmi(clustering: &Clustering, doc_labels: &CsrMatrix) -> Real {
    let merged = doc_labels.matmul(&indicator(clustering)).expect("shapes agree by construction");
    mutual_information(doc_labels) - mutual_information(&merged)
}

fn indicator(c: &Clustering) -> CsrMatrix {
    let triplets: Vec<(u32, u32, Real)> = c.assignment.iter().enumerate().map(|(l, &m)| (l as u32, m, 1.0)).collect();
    CsrMatrix::from_triplets(c.n_labels(), c.n_clusters, &triplets)
}

/// `I(label; document)`: the LMI of collapsing every label into one cluster.
pub fn label_information(doc_labels: &CsrMatrix) -> Real {
    mutual_information(doc_labels)
}

/// Optional cluster stage for [`game_external`].
pub struct ClusterStage<'a> {
    pub clustering: &'a Clustering,
    /// Induced cluster graph `G_M`.
    pub meta_graph: &'a CsrMatrix,
    pub beam: usize,
}

/// Applies GAME to an externally produced N x L score matrix.
///
/// Label stage: `r = G r~` row by row. With a cluster stage, each cluster's
/// meta score is the best raw score among its labels, clusters are GAME
/// re-ranked through `G_M`, and `s_l = r_l p_m` for labels of the selected
/// clusters (zero elsewhere).
pub fn game_external(scores: &CsrMatrix, graph: &CsrMatrix, stage: Option<ClusterStage<'_>>) -> CsrMatrix {
    let graph_t = graph.transpose();
    let meta_t = stage.as_ref().map(|s| s.meta_graph.transpose());
    let mut rows = Vec::with_capacity(scores.rows());
    for i in 0..scores.rows() {
        let mut r: BTreeMap<u32, Real> = BTreeMap::new();
        for (j, s) in scores.row_iter(i) {
            for (l, g) in graph_t.row_iter(j as usize) {
                *r.entry(l).or_insert(0.0) += g * s;
            }
        }
        let row: Vec<(u32, Real)> = match (&stage, &meta_t) {
            (Some(st), Some(mt)) => {
                let mut meta: Vec<Real> = vec![0.0; st.clustering.n_clusters];
                for (l, s) in scores.row_iter(i) {
                    let m = st.clustering.assignment[l as usize] as usize;
                    meta[m] = meta[m].max(s);
                }
                let chosen: BTreeMap<u32, Real> = game_rerank(&meta, mt, st.beam).into_iter().collect();
                r.into_iter()
                    .filter_map(|(l, v)| chosen.get(&st.clustering.assignment[l as usize]).map(|p| (l, v * p)))
                    .collect()
            }
            _ => r.into_iter().collect(),
        };
        rows.push(crate::SparseVec::from_pairs(scores.cols(), row));
    }
    CsrMatrix::from_rows(scores.cols(), &rows)
}

/// Top-k rankings from the rows of a score matrix.
pub fn rankings_from_scores(scores: &CsrMatrix, k: usize) -> Vec<Ranking> {
    (0..scores.rows()).map(|i| top_k_pairs(scores.row_iter(i).collect(), k)).collect()
}

/// One evaluation line.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricLine {
    pub metric: String,
    pub k: usize,
    pub value: Real,
}

/// P@k, R@k and PSP@k for each `k`.
pub fn evaluate(preds: &[Ranking], truth: &CsrMatrix, propensity: &[Real], ks: &[usize]) -> Vec<MetricLine> {
    let mut out = Vec::new();
    for &k in ks {
        out.push(MetricLine { metric: "P".into(), k, value: precision_at_k(preds, truth, k) });
    }
    for &k in ks {
        out.push(MetricLine { metric: "R".into(), k, value: recall_at_k(preds, truth, k) });
    }
    for &k in ks {
        out.push(MetricLine { metric: "PSP".into(), k, value: psp_at_k(preds, truth, propensity, k) });
    }
    out
}

/// `metric k value` lines.
pub fn format_report(lines: &[MetricLine]) -> String {
    let mut out = String::new();
    for l in lines {
        let _ = writeln!(out, "{} {} {:.6}", l.metric, l.k, l.value);
    }
    out
}

/// Parses a report written by [`format_report`].
pub fn parse_report(src: &str) -> Option<Vec<MetricLine>> {
    src.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return None;
            }
            Some(MetricLine { metric: f[0].to_string(), k: f[1].parse().ok()?, value: f[2].parse().ok()? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SparseVec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth(l: usize, rows: &[&[u32]]) -> CsrMatrix {
        let rows: Vec<SparseVec> = rows.iter().map(|r| SparseVec::new(l, r.to_vec(), vec![1.0; r.len()]).unwrap()).collect();
        CsrMatrix::from_rows(l, &rows)
    }

    #[test]
    fn precision_and_recall_by_hand() {
        let y = truth(4, &[&[1, 2]]);
        let preds = vec![vec![(1, 0.9), (3, 0.5)]];
        assert_eq!(precision_at_k(&preds, &y, 2), 0.5);
        assert_eq!(recall_at_k(&preds, &y, 2), 0.5);
        let perfect = vec![vec![(1, 0.9), (2, 0.8), (0, 0.1)]];
        assert_eq!(precision_at_k(&perfect, &y, 3), 2.0 / 3.0);
        assert_eq!(recall_at_k(&perfect, &y, 3), 1.0);
    }

    #[test]
    fn psp_special_cases() {
        let y = truth(3, &[&[2]]);
        let preds = vec![vec![(2, 1.0)]];
        let prop = propensities(&[500, 40, 1], 1000, PropensityParams::default());
        assert!((psp_at_k(&preds, &y, &prop, 1) - 1.0).abs() < 1e-12);
        let y = truth(4, &[&[0, 1, 2], &[0, 1, 3]]);
        let preds = vec![vec![(0, 0.9), (3, 0.5)], vec![(2, 0.7), (1, 0.6)]];
        let ones = vec![1.0; 4];
        assert!((psp_at_k(&preds, &y, &ones, 2) - precision_at_k(&preds, &y, 2)).abs() < 1e-12);
    }

    #[test]
    fn propensity_weights_favour_rare_labels() {
        let freq: Vec<u32> = (0..200).collect();
        let p = propensities(&freq, 10_000, PropensityParams::default());
        assert!(p.windows(2).all(|w| 1.0 / w[0] >= 1.0 / w[1]));
    }

    #[test]
    fn one_bin_is_overall_precision() {
        let y = truth(4, &[&[0, 1], &[2]]);
        let preds = vec![vec![(0, 0.9), (2, 0.5)], vec![(2, 0.7), (3, 0.6)]];
        let bins = PopularityBins::new(&[5, 1, 7, 2], 1);
        let c = bin_contributions(&preds, &y, &bins, 2);
        assert_eq!(c, vec![precision_at_k(&preds, &y, 2)]);
    }

    #[test]
    fn bins_split_positives_evenly() {
        let freq = vec![1u32; 100];
        let bins = PopularityBins::new(&freq, 5);
        assert_eq!(bins.positives, vec![20; 5]);
        let freq: Vec<u32> = (1..=60).collect();
        let bins = PopularityBins::new(&freq, 5);
        let ideal = freq.iter().sum::<u32>() as f64 / 5.0;
        let max = *freq.iter().max().unwrap() as f64;
        assert!(bins.positives.iter().all(|&p| (p as f64 - ideal).abs() <= max));
        assert!(bins.bin_of.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lmi_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = CsrMatrix::from_dense(&(0..30).map(|_| (0..8).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect()).collect::<Vec<Vec<Real>>>());
        let singletons = Clustering { assignment: (0..8).collect(), n_clusters: 8 };
        assert!(lmi(&singletons, &y).abs() < 1e-12);
        let one = Clustering { assignment: vec![0; 8], n_clusters: 1 };
        let full = label_information(&y);
        assert!((lmi(&one, &y) - full).abs() < 1e-12);
        assert!(full > 0.0);
    }

    #[test]
    fn game_external_identity_and_hand_case() {
        let s = CsrMatrix::from_dense(&[vec![0.6, 0.4, 0.0], vec![0.0, 0.2, 0.9]]);
        assert_eq!(game_external(&s, &CsrMatrix::identity(3), None), s);
        let g = CsrMatrix::from_dense(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.5, 0.5, 0.0]]);
        let c = Clustering { assignment: vec![0, 1, 2], n_clusters: 3 };
        let gm = CsrMatrix::identity(3);
        let out = game_external(&s, &g, Some(ClusterStage { clustering: &c, meta_graph: &gm, beam: 3 }));
        // r_3 = 0.5 * 0.6 + 0.5 * 0.4 = 0.5, and cluster 3 has meta score 0.
        assert!((out.get(0, 2) - 0.0).abs() < 1e-12);
        let r = game_external(&s, &g, None);
        assert!((r.get(0, 2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn report_round_trips() {
        let lines = vec![MetricLine { metric: "P".into(), k: 1, value: 0.5 }, MetricLine { metric: "PSP".into(), k: 5, value: 0.25 }];
        let text = format_report(&lines);
        assert_eq!(text, "P 1 0.500000\nPSP 5 0.250000\n");
        assert_eq!(parse_report(&text).unwrap(), lines);
    }
}
