//! Synthetic data with planted label correlations.
//!
//! Labels are split into groups. Each group has a few frequent labels and a
//! larger number of rare labels, the rare labels forming small cliques. A
//! document picks a group, a frequent primary label, optionally a second
//! frequent label, and with a probability tuned to a target mean training
//! count one clique of the group, whose members are then included
//! independently. Document tokens mix label-specific tokens, group tokens and
//! noise.

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Idf, XcDataset};
use crate::{CsrMatrix, Error, Real, Result, SparseVec};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_labels: usize,
    pub vocab: usize,
    pub n_groups: usize,
    /// Fraction of labels that are rare.
    pub rare_fraction: f64,
    /// Expected number of training documents of a rare label.
    pub rare_mean_count: f64,
    /// Probability of a second frequent label from the same group.
    pub co_label_prob: f64,
    /// Rare labels per clique.
    pub clique_size: usize,
    /// Probability that each member of a chosen clique is included.
    pub clique_member_prob: f64,
    /// Probability that a document shows each token of each of its labels.
    pub label_token_prob: f64,
    /// Tokens owned by each label.
    pub tokens_per_label: usize,
    /// Noise tokens per document.
    pub noise_tokens: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_train: 2000,
            n_test: 500,
            n_labels: 512,
            vocab: 1024,
            n_groups: 32,
            rare_fraction: 0.75,
            rare_mean_count: 2.0,
            co_label_prob: 0.3,
            clique_size: 3,
            clique_member_prob: 0.9,
            label_token_prob: 0.7,
            tokens_per_label: 2,
            noise_tokens: 3,
            seed: 0,
        }
    }
}

/// Generated data plus the planted structure.
#[derive(Debug, Clone)]
pub struct SynthData {
    /// TF-IDF weighted training set.
    pub train: XcDataset,
    /// Test set weighted with the training IDF.
    pub test: XcDataset,
    pub group_of: Vec<u32>,
    /// Clique of each rare label; `None` for frequent labels.
    pub clique_of: Vec<Option<u32>>,
}

impl SynthData {
    /// Fraction of labels with fewer than `below` training documents.
    pub fn fraction_below(&self, below: u32) -> f64 {
        let freq = self.train.label_frequency();
        freq.iter().filter(|&&f| f < below).count() as f64 / freq.len() as f64
    }
}

struct Layout {
    group_of: Vec<u32>,
    clique_of: Vec<Option<u32>>,
    /// Frequent labels of each group with their sampling weights.
    frequent: Vec<(Vec<u32>, Vec<f64>)>,
    /// Rare-label cliques of each group.
    cliques: Vec<Vec<Vec<u32>>>,
    /// Probability that a document of the group draws a clique.
    clique_prob: Vec<f64>,
}

fn own_token(cfg: &SynthConfig, label: usize, j: usize) -> u32 {
    let region = (cfg.vocab / 2).max(1);
    ((label * cfg.tokens_per_label + j) % region) as u32
}

fn group_token(cfg: &SynthConfig, group: usize, j: usize) -> u32 {
    let start = cfg.vocab / 2;
    let region = (cfg.vocab / 4).max(1);
    (start + (group * 3 + j) % region) as u32
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 || self.n_labels < 2 * self.n_groups {
            return Err(Error::Config("need at least two labels per group".into()));
        }
        if self.vocab < 8 || !(0.0..1.0).contains(&self.rare_fraction) {
            return Err(Error::Config("vocab must be >= 8 and rare_fraction in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.clique_member_prob) {
            return Err(Error::Config("clique_member_prob must lie in [0, 1]".into()));
        }
        if self.n_train == 0 {
            return Err(Error::Config("n_train must be positive".into()));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let l = self.n_labels;
        let group_of: Vec<u32> = (0..l).map(|i| (i % self.n_groups) as u32).collect();
        let mut members = vec![Vec::new(); self.n_groups];
        for i in 0..l {
            members[group_of[i] as usize].push(i as u32);
        }
        let mut clique_of = vec![None; l];
        let mut cliques: Vec<Vec<Vec<u32>>> = vec![Vec::new(); self.n_groups];
        let mut frequent = Vec::with_capacity(self.n_groups);
        let mut n_cliques = 0u32;
        for (g, m) in members.iter().enumerate() {
            let n_freq = (((1.0 - self.rare_fraction) * m.len() as f64).round() as usize).clamp(1, m.len());
            let freq: Vec<u32> = m[..n_freq].to_vec();
            let weights: Vec<f64> = (0..n_freq).map(|r| 1.0 / ((r + 1) as f64).sqrt()).collect();
            for clique in m[n_freq..].chunks(self.clique_size.max(1)) {
                for &rare in clique {
                    clique_of[rare as usize] = Some(n_cliques);
                }
                n_cliques += 1;
                cliques[g].push(clique.to_vec());
            }
            frequent.push((freq, weights));
        }
        let clique_prob: Vec<f64> = cliques
            .iter()
            .map(|c| {
                let per_member = self.n_train as f64 / self.n_groups as f64 * self.clique_member_prob / c.len().max(1) as f64;
                (self.rare_mean_count / per_member).min(1.0)
            })
            .collect();
        Layout { group_of, clique_of, frequent, cliques, clique_prob }
    }

    fn sample_doc(&self, lay: &Layout, rng: &mut ChaCha8Rng) -> (Vec<u32>, SparseVec) {
        let g = rng.gen_range(0..self.n_groups);
        let (freq, weights) = &lay.frequent[g];
        let pick = WeightedIndex::new(weights).expect("positive weights");
        let primary = freq[pick.sample(rng)];
        let mut labels = vec![primary];
        if freq.len() > 1 && rng.gen_bool(self.co_label_prob) {
            let second = freq[pick.sample(rng)];
            if second != primary {
                labels.push(second);
            }
        }
        let cliques = &lay.cliques[g];
        if !cliques.is_empty() && rng.gen_bool(lay.clique_prob[g]) {
            for &r in &cliques[rng.gen_range(0..cliques.len())] {
                if rng.gen_bool(self.clique_member_prob) {
                    labels.push(r);
                }
            }
        }
        labels.sort_unstable();
        let mut tokens: Vec<(u32, Real)> = Vec::new();
        for &l in &labels {
            for j in 0..self.tokens_per_label {
                if rng.gen_bool(self.label_token_prob) {
                    tokens.push((own_token(self, l as usize, j), 1.0));
                }
            }
        }
        for _ in 0..2 {
            tokens.push((group_token(self, g, rng.gen_range(0..3)), 1.0));
        }
        for _ in 0..self.noise_tokens {
            tokens.push((rng.gen_range(0..self.vocab as u32), 1.0));
        }
        (labels, SparseVec::from_pairs(self.vocab, tokens))
    }

    fn label_text(&self, lay: &Layout) -> CsrMatrix {
        let rows: Vec<SparseVec> = (0..self.n_labels)
            .map(|l| {
                let mut t: Vec<(u32, Real)> = (0..self.tokens_per_label).map(|j| (own_token(self, l, j), 1.0)).collect();
                t.push((group_token(self, lay.group_of[l] as usize, 0), 1.0));
                SparseVec::from_pairs(self.vocab, t)
            })
            .collect();
        CsrMatrix::from_rows(self.vocab, &rows)
    }

    pub fn generate(&self) -> Result<SynthData> {
        self.validate()?;
        let lay = self.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut split = |n: usize| -> (CsrMatrix, CsrMatrix) {
            let mut docs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let (labels, doc) = self.sample_doc(&lay, &mut rng);
                ys.push(SparseVec::from_pairs(self.n_labels, labels.into_iter().map(|l| (l, 1.0)).collect()));
                docs.push(doc);
            }
            (CsrMatrix::from_rows(self.vocab, &docs), CsrMatrix::from_rows(self.n_labels, &ys))
        };
        let (train_x, train_y) = split(self.n_train);
        let (test_x, test_y) = split(self.n_test);
        let idf = Idf::fit(&train_x);
        let text = idf.transform(&self.label_text(&lay));
        let train = XcDataset::new(idf.transform(&train_x), train_y, text.clone())?;
        let test = XcDataset::new(idf.transform(&test_x), test_y, text)?;
        Ok(SynthData { train, test, group_of: lay.group_of, clique_of: lay.clique_of })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_long_tail_shape() {
        let data = SynthConfig::default().generate().unwrap();
        assert_eq!(data.train.n_docs(), 2000);
        assert_eq!(data.train.n_labels(), 512);
        let rare = data.fraction_below(5);
        assert!((0.6..=0.8).contains(&rare), "rare fraction {rare}");
    }

    #[test]
    fn rare_labels_share_documents_only_with_their_clique_and_group() {
        let data = SynthConfig { seed: 3, ..SynthConfig::default() }.generate().unwrap();
        for i in 0..data.train.n_docs() {
            let pos = data.train.positives(i);
            let group = data.group_of[pos[0] as usize];
            assert!(pos.iter().all(|&l| data.group_of[l as usize] == group));
            assert!(pos.iter().any(|&l| data.clique_of[l as usize].is_none()));
            let cliques: Vec<u32> = pos.iter().filter_map(|&l| data.clique_of[l as usize]).collect();
            assert!(cliques.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig { n_train: 100, n_test: 20, n_labels: 64, n_groups: 8, seed: 5, ..SynthConfig::default() };
        let a = cfg.generate().unwrap();
        let b = cfg.generate().unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }
}
