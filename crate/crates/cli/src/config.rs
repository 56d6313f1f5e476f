//! The run configuration: one flat JSON object whose keys name every
//! hyper-parameter, path and ablation switch. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use graphxc_core::graph::WalkConfig;
use graphxc_core::metrics::PropensityParams;
use graphxc_core::model::Fusion;
use graphxc_core::train::TrainConfig;
use graphxc_core::{Error, Real, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Training document file (`N V L` header, `labels t:v ...` rows).
    pub train: Option<PathBuf>,
    /// Test document file in the same format.
    pub test: Option<PathBuf>,
    /// Label text file (`L V` header, `t:v ...` rows).
    pub label_text: Option<PathBuf>,
    /// Directory for graphs, checkpoints, logs, predictions and reports.
    pub workdir: PathBuf,
    /// Re-weight raw token counts with TF-IDF after loading.
    pub tfidf: bool,

    pub dim: usize,
    pub n_clusters: usize,
    pub beam: usize,
    pub dropout: Real,
    pub batch_size: usize,
    pub epochs_meta: usize,
    pub lr_meta: Real,
    pub epochs_shortlist: usize,
    pub epochs_classifier: usize,
    pub lr_fine: Real,
    pub lr_decay: Real,
    pub decay_interval: Real,
    pub spectral: bool,
    pub walk_length: usize,
    pub restart_prob: f64,
    pub head_threshold: usize,
    pub seed: u64,

    pub ks: Vec<usize>,
    /// Labels kept per document in the prediction file.
    pub predict_k: usize,
    pub propensity_a: Real,
    pub propensity_b: Real,
    pub bins: usize,
    /// Optional `label_id cluster_id` file; `eval` then also reports LMI.
    pub assignment: Option<PathBuf>,

    pub no_graph: bool,
    /// Co-occurrence counts instead of random walks.
    pub cooc: bool,
    pub sum_fusion: bool,
    pub no_lte: bool,
    pub no_refine: bool,
    /// Highest GALE graph order.
    pub k_order: usize,
    /// Keep only the `fanout` largest entries per graph row; 0 keeps all.
    pub fanout: usize,
    /// Refinement vectors in the Module I meta classifiers. Never valid.
    pub meta_refine_module_one: bool,
    /// Variants run by `ablate`.
    pub ablations: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let w = WalkConfig::default();
        let p = PropensityParams::default();
        Self {
            train: None,
            test: None,
            label_text: None,
            workdir: PathBuf::from("work"),
            tfidf: false,
            dim: t.dim,
            n_clusters: t.n_clusters,
            beam: t.beam,
            dropout: t.dropout,
            batch_size: t.batch_size,
            epochs_meta: t.epochs_meta,
            lr_meta: t.lr_meta,
            epochs_shortlist: t.epochs_shortlist,
            epochs_classifier: t.epochs_classifier,
            lr_fine: t.lr_fine,
            lr_decay: t.lr_decay,
            decay_interval: t.decay_interval,
            spectral: t.spectral,
            walk_length: w.walk_length,
            restart_prob: w.restart_prob,
            head_threshold: w.head_threshold,
            seed: t.seed,
            ks: vec![1, 3, 5],
            predict_k: 10,
            propensity_a: p.a,
            propensity_b: p.b,
            bins: 5,
            assignment: None,
            no_graph: false,
            cooc: false,
            sum_fusion: false,
            no_lte: false,
            no_refine: false,
            k_order: t.order,
            fanout: 0,
            meta_refine_module_one: false,
            ablations: ["default", "no_graph", "sum_fusion", "no_refine"].map(String::from).to_vec(),
        }
    }
}

pub const ABLATIONS: [&str; 6] = ["default", "no_graph", "cooc", "sum_fusion", "no_lte", "no_refine"];

impl RunConfig {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&src)
    }

    pub fn walk(&self) -> WalkConfig {
        WalkConfig {
            walk_length: self.walk_length,
            restart_prob: self.restart_prob,
            head_threshold: self.head_threshold,
            seed: self.seed,
            top_k: (self.fanout > 0).then_some(self.fanout),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            n_clusters: self.n_clusters,
            beam: self.beam,
            order: self.k_order,
            dropout: self.dropout,
            batch_size: self.batch_size,
            epochs_meta: self.epochs_meta,
            lr_meta: self.lr_meta,
            epochs_shortlist: self.epochs_shortlist,
            epochs_classifier: self.epochs_classifier,
            lr_fine: self.lr_fine,
            lr_decay: self.lr_decay,
            decay_interval: self.decay_interval,
            spectral: self.spectral,
            walk: self.walk(),
            no_graph: self.no_graph,
            fusion: if self.sum_fusion { Fusion::Sum } else { Fusion::Attention },
            lte: !self.no_lte,
            refine: !self.no_refine,
            meta_refine_module_one: self.meta_refine_module_one,
            seed: self.seed,
        }
    }

    pub fn propensity(&self) -> PropensityParams {
        PropensityParams { a: self.propensity_a, b: self.propensity_b }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::Config("ks must be a non-empty list of positive integers".into()));
        }
        if self.ks.iter().any(|&k| k > self.predict_k) {
            return Err(Error::Config(format!("predict_k {} is below the largest metric k", self.predict_k)));
        }
        if self.bins == 0 {
            return Err(Error::Config("bins must be positive".into()));
        }
        if self.cooc && self.no_graph {
            return Err(Error::Config("cooc and no_graph are mutually exclusive".into()));
        }
        if self.cooc && self.fanout > 0 {
            return Err(Error::Config("fanout truncates random-walk graphs and cannot be combined with cooc".into()));
        }
        for a in &self.ablations {
            if !ABLATIONS.contains(&a.as_str()) {
                return Err(Error::Config(format!("unknown ablation {a:?}; expected one of {ABLATIONS:?}")));
            }
        }
        for (name, path) in [("train", &self.train), ("test", &self.test), ("label_text", &self.label_text), ("assignment", &self.assignment)]
        {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!("{name} path {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// The configuration of one ablation variant.
    pub fn variant(&self, name: &str) -> Result<Self> {
        let base = Self { no_graph: false, cooc: false, sum_fusion: false, no_lte: false, no_refine: false, ..self.clone() };
        let out = match name {
            "default" => base,
            "no_graph" => Self { no_graph: true, ..base },
            "cooc" => Self { cooc: true, fanout: 0, ..base },
            "sum_fusion" => Self { sum_fusion: true, ..base },
            "no_lte" => Self { no_lte: true, ..base },
            "no_refine" => Self { no_refine: true, ..base },
            other => return Err(Error::Config(format!("unknown ablation {other:?}"))),
        };
        Ok(Self { workdir: self.workdir.join("ablate").join(name), ..out })
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| Error::Config(format!("config key `{key}` is required for this command")))
    }
}
