//! Four-stage training schedule.
//!
//! * Module I clusters labels on graph-smoothed TF-IDF centroids and solves
//!   the meta-label problem, learning the token table `E`, the document block
//!   and the meta classifier blocks.
//! * Module II freezes `E`, re-clusters on embedded centroids, adds meta
//!   refinement vectors, fine-tunes, and emits GAME training shortlists.
//! * Module III resets the document block and initialises the label
//!   classifiers, with refinement vectors set to `sum_m G_lm E z_m`.
//! * Module IV trains the label classifiers on positives and shortlisted
//!   negatives.
//!
//! Batches are split into a fixed number of chunks processed in parallel;
//! chunk gradients are reduced in chunk order, so results do not depend on
//! the number of worker threads.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cluster::{cluster_with_heads, graph_centroids, Clustering};
use crate::data::XcDataset;
use crate::graph::{induced_cluster_graph, WalkConfig};
use crate::model::{
    convolved_texts, embed_rows, sparse_embed_backward, sparse_embed_row, ClassifierHead, Fusion, HeadSpec, LabelInputs,
    LabelTexts,
};
use crate::predict::Predictor;
use crate::shortlist::{train_shortlists, Shortlister};
use crate::tensor::{
    bce_with_logit, dot, dropout_mask, relu, AdamState, Checkpoint, EmbeddingBlock, Matrix, Parameters, SpectralNorm,
};
use crate::{CsrMatrix, Error, Real, Result, SparseVec};

/// Chunks per batch; fixed so that the reduction order never changes.
const CHUNKS: usize = 16;

/// Hyper-parameters of the whole schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub n_clusters: usize,
    pub beam: usize,
    /// Highest GALE graph order `k`.
    pub order: usize,
    pub dropout: Real,
    pub batch_size: usize,
    pub epochs_meta: usize,
    pub lr_meta: Real,
    pub epochs_shortlist: usize,
    pub epochs_classifier: usize,
    pub lr_fine: Real,
    pub lr_decay: Real,
    /// Learning-rate decay interval in epochs.
    pub decay_interval: Real,
    pub spectral: bool,
    pub walk: WalkConfig,
    /// Replace the label graph with the identity everywhere.
    pub no_graph: bool,
    pub fusion: Fusion,
    pub lte: bool,
    pub refine: bool,
    /// Refinement vectors in the Module I meta classifiers; always rejected.
    pub meta_refine_module_one: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            n_clusters: 1024,
            beam: 50,
            order: 1,
            dropout: 0.2,
            batch_size: 255,
            epochs_meta: 20,
            lr_meta: 0.01,
            epochs_shortlist: 10,
            epochs_classifier: 10,
            lr_fine: 0.008,
            lr_decay: 0.5,
            decay_interval: 0.5,
            spectral: true,
            walk: WalkConfig::default(),
            no_graph: false,
            fusion: Fusion::Attention,
            lte: true,
            refine: true,
            meta_refine_module_one: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("n_clusters", self.n_clusters),
            ("beam", self.beam),
            ("order", self.order),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.beam > self.n_clusters {
            return Err(Error::Config(format!("beam {} exceeds n_clusters {}", self.beam, self.n_clusters)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.lr_meta > 0.0 && self.lr_fine > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) || self.decay_interval <= 0.0 {
            return Err(Error::Config("lr_decay must lie in (0, 1] and decay_interval be positive".into()));
        }
        if self.meta_refine_module_one {
            return Err(Error::Config("refinement vectors are not allowed in the Module I meta classifiers".into()));
        }
        self.walk.validate()?;
        self.classifier_spec().validate()
    }

    /// Checks the configuration against a dataset's size.
    pub fn validate_for(&self, ds: &XcDataset) -> Result<()> {
        self.validate()?;
        if self.n_clusters > ds.n_labels() {
            return Err(Error::Config(format!("n_clusters {} exceeds the {} labels", self.n_clusters, ds.n_labels())));
        }
        Ok(())
    }

    pub fn classifier_spec(&self) -> HeadSpec {
        HeadSpec { order: self.order, lte: self.lte, refine: self.refine, fusion: self.fusion }
    }

    pub fn meta_spec(&self) -> HeadSpec {
        HeadSpec { order: self.order, lte: true, refine: false, fusion: Fusion::Attention }
    }
}

/// One line of the training log: `epoch step loss lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub step: u64,
    pub loss: Real,
    pub lr: Real,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:.8} {:e}", self.epoch, self.step, self.loss, self.lr)
    }
}

/// Per-stage training logs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub module_one: Vec<LogRecord>,
    pub module_two: Vec<LogRecord>,
    pub module_four: Vec<LogRecord>,
    /// Points skipped because they had neither positives nor shortlisted labels.
    pub skipped_points: usize,
}

pub fn format_log(records: &[LogRecord]) -> String {
    records.iter().map(|r| format!("{r}\n")).collect()
}

/// Parameters touched by one training stage.
#[derive(Debug, Clone)]
struct Trainable {
    table: Matrix,
    train_table: bool,
    doc: EmbeddingBlock,
    head: ClassifierHead,
}

impl Parameters for Trainable {
    fn tensors(&self) -> Vec<&[Real]> {
        let mut out = Vec::new();
        if self.train_table {
            out.push(self.table.data());
        }
        out.extend(self.doc.tensors());
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [Real]> {
        let mut out = Vec::new();
        if self.train_table {
            out.push(self.table.data_mut());
        }
        out.extend(self.doc.tensors_mut());
        out.extend(self.head.tensors_mut());
        out
    }
}

impl Trainable {
    fn zeros_like(&self) -> Self {
        let mut g = Self {
            table: if self.train_table { self.table.clone() } else { Matrix::zeros(0, 0) },
            train_table: self.train_table,
            doc: self.doc.clone(),
            head: self.head.clone(),
        };
        g.zero();
        g
    }

    fn spectral_targets(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.doc.r];
        out.extend(self.head.spectral_targets());
        out
    }
}

enum LabelSource<'a> {
    Fixed(&'a LabelInputs),
    /// Inputs recomputed from the token table at every step.
    Trainable(&'a LabelTexts),
}

struct FitTask<'a> {
    docs: &'a CsrMatrix,
    targets: &'a CsrMatrix,
    /// Per-point candidate labels; `None` means every label.
    candidates: Option<&'a [Vec<u32>]>,
    labels: LabelSource<'a>,
    epochs: usize,
    lr: Real,
    tag: u64,
}

fn stream_rng(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ a.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    rng.set_stream(b);
    rng
}

struct ChunkOut {
    loss: Real,
    pairs: usize,
    skipped: usize,
    doc: EmbeddingBlock,
    table: Option<Matrix>,
    dw: Matrix,
}

/// Gradient-descent driver shared by Modules I, II and IV.
fn fit(cfg: &TrainConfig, task: &FitTask<'_>, params: &mut Trainable) -> Result<(Vec<LogRecord>, usize)> {
    let n = task.docs.rows();
    let steps_per_epoch = n.div_ceil(cfg.batch_size).max(1);
    let decay_every = ((cfg.decay_interval * steps_per_epoch as Real).ceil() as u64).max(1);
    let mut adam = AdamState::new(task.lr);
    let mut init_rng = stream_rng(cfg.seed, task.tag, u64::MAX, 0);
    let mut norms: Vec<SpectralNorm> =
        params.spectral_targets().iter().map(|m| SpectralNorm::new(m.rows(), &mut init_rng)).collect();
    let frozen_bases = if params.train_table { None } else { Some(embed_rows(&params.table, task.docs)) };
    let mut log = Vec::new();
    let mut skipped_total = 0;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..task.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(cfg.seed, task.tag, epoch as u64, 1));
        let mut epoch_loss = 0.0;
        let mut epoch_pairs = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let step = adam.steps();
            let BatchGrad { loss, pairs, skipped, grad } =
                batch_gradient(cfg, task, params, frozen_bases.as_ref(), batch, step)?;
            skipped_total += skipped;
            if pairs == 0 {
                continue;
            }
            adam.step(params, &grad);
            if cfg.spectral {
                for (m, sn) in params.spectral_targets().into_iter().zip(norms.iter_mut()) {
                    sn.apply(m);
                }
            }
            if adam.steps() % decay_every == 0 {
                adam.lr *= cfg.lr_decay;
            }
            epoch_loss += loss;
            epoch_pairs += pairs;
        }
        let mean = if epoch_pairs == 0 { 0.0 } else { epoch_loss / epoch_pairs as Real };
        log::debug!("module {} epoch {epoch} loss {mean:.6}", task.tag);
        log.push(LogRecord { epoch, step: adam.steps(), loss: mean, lr: adam.lr });
    }
    Ok((log, skipped_total))
}

struct BatchGrad {
    loss: Real,
    pairs: usize,
    skipped: usize,
    /// Gradient of the mean loss over the batch's (point, label) pairs.
    grad: Trainable,
}

fn batch_gradient(
    cfg: &TrainConfig,
    task: &FitTask<'_>,
    params: &Trainable,
    frozen_bases: Option<&Matrix>,
    batch: &[usize],
    step: u64,
) -> Result<BatchGrad> {
    let dim = cfg.dim;
    let n_labels = task.targets.cols();
    let mut skipped = 0;
        let inputs_owned;
        let inputs = match &task.labels {
            LabelSource::Fixed(i) => *i,
            LabelSource::Trainable(t) => {
                inputs_owned = t.embed(&params.table);
                &inputs_owned
            }
        };
        // Labels touched by this batch and their slots.
        let mut slot = vec![u32::MAX; n_labels];
        let mut used: Vec<u32> = Vec::new();
        match task.candidates {
            None => used.extend(0..n_labels as u32),
            Some(c) => {
                for &i in batch {
                    used.extend_from_slice(&c[i]);
                    used.extend_from_slice(task.targets.row(i).0);
                }
                used.sort_unstable();
                used.dedup();
            }
        }
        for (s, &l) in used.iter().enumerate() {
            slot[l as usize] = s as u32;
        }
        let head = &params.head;
        let heads: Vec<_> = used
            .par_iter()
            .map(|&l| {
                let masks = (cfg.dropout > 0.0)
                    .then(|| head.dropout_masks(cfg.dropout, &mut stream_rng(cfg.seed, task.tag, step, (1 << 40) + l as u64)));
                head.forward(l as usize, inputs, masks)
            })
            .collect::<Result<Vec<_>>>()?;

        let chunk_len = batch.len().div_ceil(CHUNKS);
        let outs: Vec<ChunkOut> = batch
            .par_chunks(chunk_len)
            .map(|chunk| {
                let mut out = ChunkOut {
                    loss: 0.0,
                    pairs: 0,
                    skipped: 0,
                    doc: zeroed_block(&params.doc),
                    table: params.train_table.then(|| Matrix::zeros(params.table.rows(), dim)),
                    dw: Matrix::zeros(used.len(), dim),
                };
                for &i in chunk {
                    let (idx, vals) = task.docs.row(i);
                    let base = match &frozen_bases {
                        Some(b) => b.row(i).to_vec(),
                        None => sparse_embed_row(&params.table, idx, vals),
                    };
                    let positives = task.targets.row(i).0;
                    let all: Vec<u32>;
                    let cands: &[u32] = match task.candidates {
                        Some(c) => &c[i],
                        None => {
                            all = (0..n_labels as u32).collect();
                            &all
                        }
                    };
                    if cands.is_empty() && positives.is_empty() {
                        out.skipped += 1;
                        continue;
                    }
                    let mask = (cfg.dropout > 0.0)
                        .then(|| dropout_mask(dim, cfg.dropout, &mut stream_rng(cfg.seed, task.tag, step, i as u64)));
                    let (pre, cache) = params.doc.forward(&base, mask)?;
                    let x_hat: Vec<Real> = pre.iter().map(|&v| relu(v)).collect();
                    let mut dx = vec![0.0; dim];
                    let mut scored = |l: u32, positive: bool, out: &mut ChunkOut| {
                        let s = slot[l as usize] as usize;
                        let w = &heads[s].0;
                        let (loss, ds) = bce_with_logit(dot(&x_hat, w), positive);
                        out.loss += loss;
                        out.pairs += 1;
                        crate::tensor::axpy(ds, w, &mut dx);
                        crate::tensor::axpy(ds, &x_hat, out.dw.row_mut(s));
                    };
                    for &l in cands {
                        scored(l, positives.binary_search(&l).is_ok(), &mut out);
                    }
                    for &l in positives {
                        if cands.binary_search(&l).is_err() {
                            scored(l, true, &mut out);
                        }
                    }
                    let dpre: Vec<Real> = dx.iter().zip(&pre).map(|(d, &v)| if v > 0.0 { *d } else { 0.0 }).collect();
                    let dbase = params.doc.backward(&cache, &dpre, &mut out.doc);
                    if let Some(t) = out.table.as_mut() {
                        sparse_embed_backward(t, idx, vals, &dbase);
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut grad = params.zeros_like();
        let mut loss = 0.0;
        let mut pairs = 0usize;
        let mut dw = Matrix::zeros(used.len(), dim);
        for o in &outs {
            loss += o.loss;
            pairs += o.pairs;
            skipped += o.skipped;
            grad.doc.accumulate(&o.doc);
            if let Some(t) = &o.table {
                grad.table.add_assign(t);
            }
            dw.add_assign(&o.dw);
        }
        if pairs == 0 {
            return Ok(BatchGrad { loss, pairs, skipped, grad });
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss at step {step}")));
        }
        let scale = 1.0 / pairs as Real;

        // Backward through the label classifiers, chunked over labels.
        let label_chunk = used.len().div_ceil(CHUNKS).max(1);
        let head_grads: Vec<(ClassifierHead, Option<Matrix>)> = (0..used.len())
            .collect::<Vec<_>>()
            .par_chunks(label_chunk)
            .map(|slots| {
                let mut g = params.head.clone();
                g.zero();
                let mut t = params.train_table.then(|| Matrix::zeros(params.table.rows(), dim));
                for &s in slots {
                    let l = used[s] as usize;
                    let d_in = params.head.backward(l, &heads[s].1, dw.row(s), &mut g);
                    if let (Some(t), LabelSource::Trainable(texts)) = (t.as_mut(), &task.labels) {
                        texts.backward(l, &d_in, t);
                    }
                }
                (g, t)
            })
            .collect();
        for (g, t) in &head_grads {
            grad.head.accumulate(g);
            if let Some(t) = t {
                grad.table.add_assign(t);
            }
        }
        for t in grad.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(BatchGrad { loss, pairs, skipped, grad })
}

fn zeroed_block(b: &EmbeddingBlock) -> EmbeddingBlock {
    let mut g = b.clone();
    g.zero();
    g
}

/// Meta-label problem derived from a clustering.
pub struct MetaProblem {
    pub clustering: Clustering,
    /// N x K binary targets.
    pub targets: CsrMatrix,
    /// `G_M = M^T G M` with column-normalised `M`.
    pub meta_graph: CsrMatrix,
    /// Meta texts `u_m = sum_{l in C_m} z_l`.
    pub meta_text: CsrMatrix,
    /// Meta texts and their graph convolutions, one per block component.
    pub texts: LabelTexts,
}

impl MetaProblem {
    /// `graph` drives GAME; `gale_graph` convolves the meta texts.
    pub fn new(
        clustering: Clustering,
        ds: &XcDataset,
        graph: &CsrMatrix,
        gale_graph: &CsrMatrix,
        order: usize,
        spec: &HeadSpec,
    ) -> Result<Self> {
        let k = clustering.n_clusters;
        let triplets: Vec<(u32, u32, Real)> =
            clustering.assignment.iter().enumerate().map(|(l, &m)| (l as u32, m, 1.0)).collect();
        let indicator = CsrMatrix::from_triplets(ds.n_labels(), k, &triplets);
        let targets = ds.labels.matmul(&indicator)?.map_entries(|_, _, v| if v > 0.0 { 1.0 } else { 0.0 });
        let assignment = clustering.assignment_matrix();
        let meta_graph = induced_cluster_graph(graph, &assignment)?;
        let meta_text = indicator.transpose().matmul(&ds.label_text)?;
        let conv = convolved_texts(&induced_cluster_graph(gale_graph, &assignment)?, &meta_text, order)?;
        let texts = LabelTexts::new(spec, &meta_text, &conv);
        Ok(Self { clustering, targets, meta_graph, meta_text, texts })
    }

    /// `E (G_M U)_m`: the meta refinement initialisation.
    pub fn refinement_init(&self, table: &Matrix) -> Result<Matrix> {
        Ok(embed_rows(table, &self.meta_graph.matmul(&self.meta_text)?))
    }
}

/// Output of Module I.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaStage {
    pub table: Matrix,
    pub doc: EmbeddingBlock,
    pub meta_head: ClassifierHead,
    pub clustering: Clustering,
}

/// Output of Module II.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortlistStage {
    pub table: Matrix,
    pub shortlister: Shortlister,
    pub shortlists: Vec<Vec<u32>>,
}

/// Output of Module III (and input of Module IV).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierStage {
    pub table: Matrix,
    pub shortlister: Shortlister,
    pub shortlists: Vec<Vec<u32>>,
    pub doc: EmbeddingBlock,
    pub head: ClassifierHead,
    pub inputs: LabelInputs,
}

/// Final model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub table: Matrix,
    pub shortlister: Shortlister,
    pub doc: EmbeddingBlock,
    pub head: ClassifierHead,
    pub inputs: LabelInputs,
    /// Graph used for GAME at prediction time.
    pub graph: CsrMatrix,
}

impl TrainedModel {
    pub fn predictor(&self) -> Result<Predictor> {
        Predictor::new(
            self.table.clone(),
            self.doc.clone(),
            self.head.classifiers(&self.inputs),
            self.shortlister.clone(),
            self.graph.clone(),
        )
    }
}

fn put_spec(ck: &mut Checkpoint, name: &str, spec: &HeadSpec) {
    let fusion = match spec.fusion {
        Fusion::Attention => 0,
        Fusion::Sum => 1,
    };
    ck.put_u32(name, &[spec.order as u32, spec.lte as u32, spec.refine as u32, fusion]);
}

fn get_spec(ck: &Checkpoint, name: &str) -> Result<HeadSpec> {
    let v = ck.u32s(name)?;
    if v.len() != 4 {
        return Err(Error::Checkpoint(format!("{name}: bad classifier spec")));
    }
    Ok(HeadSpec { order: v[0] as usize, lte: v[1] != 0, refine: v[2] != 0, fusion: if v[3] == 0 { Fusion::Attention } else { Fusion::Sum } })
}

fn put_head(ck: &mut Checkpoint, name: &str, head: &ClassifierHead) {
    put_spec(ck, &format!("{name}.spec"), &head.spec);
    head.save(name, ck);
}

fn get_head(ck: &Checkpoint, name: &str) -> Result<ClassifierHead> {
    ClassifierHead::load(get_spec(ck, &format!("{name}.spec"))?, name, ck)
}

fn put_lists(ck: &mut Checkpoint, name: &str, lists: &[Vec<u32>], n_labels: usize) {
    let rows: Vec<SparseVec> =
        lists.iter().map(|l| SparseVec::from_pairs(n_labels, l.iter().map(|&x| (x, 1.0)).collect())).collect();
    ck.put_csr(name, &CsrMatrix::from_rows(n_labels, &rows));
}

fn get_lists(ck: &Checkpoint, name: &str) -> Result<Vec<Vec<u32>>> {
    let m = ck.csr(name)?;
    Ok((0..m.rows()).map(|r| m.row(r).0.to_vec()).collect())
}

fn put_inputs(ck: &mut Checkpoint, inputs: &LabelInputs) {
    ck.put_u32("inputs.count", &[inputs.mats.len() as u32]);
    for (i, m) in inputs.mats.iter().enumerate() {
        ck.put_matrix(&format!("inputs.{i}"), m);
    }
}

fn get_inputs(ck: &Checkpoint) -> Result<LabelInputs> {
    let count = ck.u32s("inputs.count")?.first().copied().unwrap_or(0);
    Ok(LabelInputs { mats: (0..count).map(|i| ck.matrix(&format!("inputs.{i}"))).collect::<Result<_>>()? })
}

impl MetaStage {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_matrix("table", &self.table);
        ck.put_block("doc", &self.doc);
        put_head(&mut ck, "meta_head", &self.meta_head);
        ck.put_u32("clustering.assignment", &self.clustering.assignment);
        ck.put_u32("clustering.n_clusters", &[self.clustering.n_clusters as u32]);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let n_clusters = ck.u32s("clustering.n_clusters")?.first().copied().unwrap_or(0) as usize;
        Ok(Self {
            table: ck.matrix("table")?,
            doc: ck.block("doc")?,
            meta_head: get_head(ck, "meta_head")?,
            clustering: Clustering { assignment: ck.u32s("clustering.assignment")?, n_clusters },
        })
    }
}

impl ShortlistStage {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_matrix("table", &self.table);
        self.shortlister.save("shortlister", &mut ck);
        put_lists(&mut ck, "shortlists", &self.shortlists, self.shortlister.clustering.n_labels());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            table: ck.matrix("table")?,
            shortlister: Shortlister::load("shortlister", ck)?,
            shortlists: get_lists(ck, "shortlists")?,
        })
    }
}

impl ClassifierStage {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_matrix("table", &self.table);
        self.shortlister.save("shortlister", &mut ck);
        put_lists(&mut ck, "shortlists", &self.shortlists, self.shortlister.clustering.n_labels());
        ck.put_block("doc", &self.doc);
        put_head(&mut ck, "head", &self.head);
        put_inputs(&mut ck, &self.inputs);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            table: ck.matrix("table")?,
            shortlister: Shortlister::load("shortlister", ck)?,
            shortlists: get_lists(ck, "shortlists")?,
            doc: ck.block("doc")?,
            head: get_head(ck, "head")?,
            inputs: get_inputs(ck)?,
        })
    }
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_matrix("table", &self.table);
        self.shortlister.save("shortlister", &mut ck);
        ck.put_block("doc", &self.doc);
        put_head(&mut ck, "head", &self.head);
        put_inputs(&mut ck, &self.inputs);
        ck.put_csr("graph", &self.graph);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            table: ck.matrix("table")?,
            shortlister: Shortlister::load("shortlister", ck)?,
            doc: ck.block("doc")?,
            head: get_head(ck, "head")?,
            inputs: get_inputs(ck)?,
            graph: ck.csr("graph")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?)
    }
}

/// Runs the training modules on one dataset and label graph.
pub struct Trainer<'a> {
    pub cfg: TrainConfig,
    pub ds: &'a XcDataset,
    /// Graph for centroids, GAME and refinement initialisation.
    graph: CsrMatrix,
    /// Graph for the GALE convolutions.
    gale_graph: CsrMatrix,
    pub log: TrainLog,
}

impl<'a> Trainer<'a> {
    /// `graph` is the normalised label graph. When the configuration disables
    /// the graph it is replaced by the identity everywhere except in GALE.
    pub fn new(cfg: TrainConfig, ds: &'a XcDataset, graph: &CsrMatrix) -> Result<Self> {
        cfg.validate_for(ds)?;
        if graph.rows() != ds.n_labels() || graph.cols() != ds.n_labels() {
            return Err(Error::Dimension(format!(
                "graph is {}x{} but the dataset has {} labels",
                graph.rows(),
                graph.cols(),
                ds.n_labels()
            )));
        }
        let gale_graph = graph.clone();
        let graph = if cfg.no_graph { CsrMatrix::identity(ds.n_labels()) } else { graph.clone() };
        Ok(Self { cfg, ds, graph, gale_graph, log: TrainLog::default() })
    }

    pub fn graph(&self) -> &CsrMatrix {
        &self.graph
    }

    /// Without the graph GAME is skipped entirely, so `G_M` is the identity.
    fn meta_problem(&self, clustering: Clustering, spec: &HeadSpec) -> Result<MetaProblem> {
        let mut meta = MetaProblem::new(clustering, self.ds, &self.graph, &self.gale_graph, self.cfg.order, spec)?;
        if self.cfg.no_graph {
            meta.meta_graph = CsrMatrix::identity(meta.clustering.n_clusters);
        }
        Ok(meta)
    }

    fn cluster(&self, features: &CsrMatrix, seed: u64) -> Result<Clustering> {
        let centroids = graph_centroids(features, &self.ds.labels, &self.graph)?;
        cluster_with_heads(&centroids, &self.ds.label_frequency(), self.cfg.walk.head_threshold, self.cfg.n_clusters, seed)
    }

    /// Clusters on TF-IDF centroids and solves the meta problem, training `E`.
    pub fn module_one(&mut self) -> Result<MetaStage> {
        let cfg = &self.cfg;
        let clustering = self.cluster(&self.ds.docs, cfg.seed)?;
        let spec = cfg.meta_spec();
        let meta = self.meta_problem(clustering, &spec)?;
        let mut rng = stream_rng(cfg.seed, 1, u64::MAX - 1, 0);
        let he = Normal::new(0.0, (2.0 / self.ds.vocab() as f64).sqrt()).expect("valid std");
        let data = (0..self.ds.vocab() * cfg.dim).map(|_| he.sample(&mut rng) as Real).collect();
        let mut head = ClassifierHead::new(spec, cfg.dim, meta.clustering.n_clusters);
        head.attention = crate::model::Attention::random(cfg.dim, head.attention.n_components(), &mut rng);
        let mut params = Trainable {
            table: Matrix::from_vec(self.ds.vocab(), cfg.dim, data),
            train_table: true,
            doc: EmbeddingBlock::identity(cfg.dim),
            head,
        };
        let task = FitTask {
            docs: &self.ds.docs,
            targets: &meta.targets,
            candidates: None,
            labels: LabelSource::Trainable(&meta.texts),
            epochs: cfg.epochs_meta,
            lr: cfg.lr_meta,
            tag: 1,
        };
        let (log, _) = fit(cfg, &task, &mut params)?;
        self.log.module_one = log;
        Ok(MetaStage { table: params.table, doc: params.doc, meta_head: params.head, clustering: meta.clustering })
    }

    /// Re-clusters on embedded centroids, fine-tunes the meta classifiers
    /// with refinement vectors and emits GAME shortlists. `E` stays frozen.
    pub fn module_two(&mut self, stage: MetaStage) -> Result<ShortlistStage> {
        let cfg = &self.cfg;
        let embedded = embed_rows(&stage.table, &self.ds.docs);
        let rows: Vec<SparseVec> = (0..embedded.rows())
            .map(|r| SparseVec::from_pairs(cfg.dim, embedded.row(r).iter().enumerate().map(|(i, &v)| (i as u32, v)).collect()))
            .collect();
        let features = CsrMatrix::from_rows(cfg.dim, &rows);
        let clustering = self.cluster(&features, cfg.seed.wrapping_add(1))?;
        let meta = self.meta_problem(clustering, &cfg.meta_spec())?;
        let inputs = meta.texts.embed(&stage.table);
        let mut head = stage.meta_head;
        head.enable_refinement(meta.refinement_init(&stage.table)?);
        let mut params = Trainable { table: stage.table, train_table: false, doc: stage.doc, head };
        let task = FitTask {
            docs: &self.ds.docs,
            targets: &meta.targets,
            candidates: None,
            labels: LabelSource::Fixed(&inputs),
            epochs: cfg.epochs_shortlist,
            lr: cfg.lr_fine,
            tag: 2,
        };
        let (log, _) = fit(cfg, &task, &mut params)?;
        self.log.module_two = log;
        let classifiers = params.head.classifiers(&inputs);
        let shortlister = Shortlister::new(meta.clustering, classifiers, meta.meta_graph, cfg.beam, params.doc)?;
        let shortlists = train_shortlists(&shortlister, &params.table, &self.ds.docs, &self.ds.labels);
        Ok(ShortlistStage { table: params.table, shortlister, shortlists })
    }

    /// Fresh document block and label classifiers; refinement vectors start
    /// at `sum_m G_lm E z_m`.
    pub fn module_three(&self, stage: ShortlistStage) -> Result<ClassifierStage> {
        let cfg = &self.cfg;
        let spec = cfg.classifier_spec();
        let conv = convolved_texts(&self.gale_graph, &self.ds.label_text, cfg.order)?;
        let inputs = LabelInputs::build(&spec, &stage.table, &self.ds.label_text, &conv);
        let mut head = ClassifierHead::new(spec, cfg.dim, self.ds.n_labels());
        let mut rng = stream_rng(cfg.seed, 3, u64::MAX - 1, 0);
        if cfg.fusion == Fusion::Attention {
            head.attention = crate::model::Attention::random(cfg.dim, head.attention.n_components(), &mut rng);
        }
        if cfg.refine {
            head.refine = Some(embed_rows(&stage.table, &self.graph.matmul(&self.ds.label_text)?));
        }
        Ok(ClassifierStage {
            table: stage.table,
            shortlister: stage.shortlister,
            shortlists: stage.shortlists,
            doc: EmbeddingBlock::identity(cfg.dim),
            head,
            inputs,
        })
    }

    /// Trains the label classifiers on positives and shortlisted negatives.
    pub fn module_four(&mut self, stage: ClassifierStage) -> Result<TrainedModel> {
        let cfg = &self.cfg;
        let mut params = Trainable { table: stage.table, train_table: false, doc: stage.doc, head: stage.head };
        let task = FitTask {
            docs: &self.ds.docs,
            targets: &self.ds.labels,
            candidates: Some(&stage.shortlists),
            labels: LabelSource::Fixed(&stage.inputs),
            epochs: cfg.epochs_classifier,
            lr: cfg.lr_fine,
            tag: 4,
        };
        let (log, skipped) = fit(cfg, &task, &mut params)?;
        self.log.module_four = log;
        self.log.skipped_points = skipped;
        Ok(TrainedModel {
            table: params.table,
            shortlister: stage.shortlister,
            doc: params.doc,
            head: params.head,
            inputs: stage.inputs,
            graph: self.graph.clone(),
        })
    }

    /// Modules I to IV in sequence.
    pub fn run(&mut self) -> Result<TrainedModel> {
        let one = self.module_one()?;
        let two = self.module_two(one)?;
        let three = self.module_three(two)?;
        self.module_four(three)
    }
}

/// Fraction of points whose best-scoring meta-label is a positive.
pub fn meta_precision_at_1(stage: &MetaStage, ds: &XcDataset, graph: &CsrMatrix, order: usize) -> Result<Real> {
    let meta = MetaProblem::new(stage.clustering.clone(), ds, graph, graph, order, &stage.meta_head.spec)?;
    let inputs = meta.texts.embed(&stage.table);
    let h = stage.meta_head.classifiers(&inputs);
    let hits: usize = (0..ds.n_docs())
        .into_par_iter()
        .map(|i| {
            let (idx, vals) = ds.docs.row(i);
            let x: Vec<Real> = stage.doc.apply(&sparse_embed_row(&stage.table, idx, vals)).into_iter().map(relu).collect();
            let scores: Vec<Real> = (0..h.rows()).map(|m| dot(h.row(m), &x)).collect();
            let best = crate::rank::top_k(&scores, 1)[0].0;
            usize::from(meta.targets.row(i).0.contains(&best))
        })
        .sum();
    Ok(hits as Real / ds.n_docs().max(1) as Real)
}
