//! Scoring architecture: document encoder, label components (LTE, GALE of
//! each graph order, refinement vectors) and the attention block that fuses
//! them into one-vs-all classifiers.
//!
//! The token table `E` is stored as a `V x D` matrix so that `E x` for a
//! sparse `x` is a weighted sum of rows.

use rand::Rng;

use crate::graph::graph_power;
use crate::tensor::{axpy, dot, dropout_mask, relu, sigmoid, softmax, BlockCache, Checkpoint, EmbeddingBlock, Matrix, Parameters};
use crate::{CsrMatrix, Error, Real, Result, SparseVec};

/// One input to a label classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    /// Label text embedding.
    Lte,
    /// Graph augmented label embedding of the given order (1-based).
    Gale(usize),
    /// Free per-label refinement vector.
    Refine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    Attention,
    /// Unweighted mean of the components.
    Sum,
}

/// Which components a classifier uses and how they are combined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadSpec {
    pub order: usize,
    pub lte: bool,
    pub refine: bool,
    pub fusion: Fusion,
}

impl HeadSpec {
    pub fn new(order: usize) -> Self {
        Self { order, lte: true, refine: true, fusion: Fusion::Attention }
    }

    /// Components in canonical order: LTE, GALE 1..k, refinement.
    pub fn components(&self) -> Vec<Component> {
        let mut out = Vec::with_capacity(self.order + 2);
        if self.lte {
            out.push(Component::Lte);
        }
        out.extend((1..=self.order).map(Component::Gale));
        if self.refine {
            out.push(Component::Refine);
        }
        out
    }

    /// Components that go through an embedding block (everything but refinement).
    pub fn block_components(&self) -> Vec<Component> {
        self.components().into_iter().filter(|c| *c != Component::Refine).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 && !self.lte {
            return Err(Error::Config("a classifier needs at least one text component".into()));
        }
        Ok(())
    }
}

/// Token embedding `E x` of a sparse vector.
pub fn sparse_embed(table: &Matrix, x: &SparseVec) -> Vec<Real> {
    let mut out = vec![0.0; table.cols()];
    for (t, v) in x.iter() {
        axpy(v, table.row(t as usize), &mut out);
    }
    out
}

/// Same as [`sparse_embed`] for a borrowed CSR row.
pub fn sparse_embed_row(table: &Matrix, idx: &[u32], vals: &[Real]) -> Vec<Real> {
    let mut out = vec![0.0; table.cols()];
    for (&t, &v) in idx.iter().zip(vals) {
        axpy(v, table.row(t as usize), &mut out);
    }
    out
}

/// Backward of [`sparse_embed_row`]: `dE[t] += x_t * dv`.
pub fn sparse_embed_backward(grad: &mut Matrix, idx: &[u32], vals: &[Real], dv: &[Real]) {
    for (&t, &v) in idx.iter().zip(vals) {
        axpy(v, dv, grad.row_mut(t as usize));
    }
}

/// Embeds every row of `x` (n x V) into an `n x D` matrix.
pub fn embed_rows(table: &Matrix, x: &CsrMatrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), table.cols());
    for r in 0..x.rows() {
        let (idx, vals) = x.row(r);
        let v = sparse_embed_row(table, idx, vals);
        out.row_mut(r).copy_from_slice(&v);
    }
    out
}

/// `x_hat = relu(f_D(E x))` in eval mode.
pub fn embed_document(table: &Matrix, block: &EmbeddingBlock, x: &SparseVec) -> Vec<Real> {
    block.apply(&sparse_embed(table, x)).into_iter().map(relu).collect()
}

/// LTE: `f_L(E z_l)` with no trailing non-linearity.
pub fn lte_embedding(table: &Matrix, block: &EmbeddingBlock, z: &SparseVec) -> Vec<Real> {
    block.apply(&sparse_embed(table, z))
}

/// GALE of order `κ`: `f_G(sum_m (G^κ)_lm E z_m)` where `graph_power` is `G^κ`
/// and `label_text` holds the rows `z_m`.
pub fn gale_embedding(
    label: usize,
    graph_power: &CsrMatrix,
    label_text: &CsrMatrix,
    table: &Matrix,
    block: &EmbeddingBlock,
) -> Vec<Real> {
    let mut v = vec![0.0; table.cols()];
    for (m, g) in graph_power.row_iter(label) {
        let (idx, vals) = label_text.row(m as usize);
        axpy(g, &sparse_embed_row(table, idx, vals), &mut v);
    }
    block.apply(&v)
}

/// Logit `<w, x_hat>`.
pub fn score(x_hat: &[Real], w: &[Real]) -> Real {
    dot(x_hat, w)
}

/// Unweighted mean of the components.
pub fn fuse_sum(components: &[&[Real]]) -> Vec<Real> {
    let mut w = vec![0.0; components[0].len()];
    let scale = 1.0 / components.len() as Real;
    for c in components {
        axpy(scale, c, &mut w);
    }
    w
}

/// Graph-convolved label text `G^κ Z` for each order `κ = 1..=order`.
pub fn convolved_texts(graph: &CsrMatrix, label_text: &CsrMatrix, order: usize) -> Result<Vec<CsrMatrix>> {
    (1..=order).map(|k| graph_power(graph, k)?.matmul(label_text)).collect()
}

/// Attention block: `t(v) = sigmoid(T relu(v))`, `q = [t(c_1); ...]`,
/// `alpha = softmax(A q / sqrt(n D))`, `w = sum_j alpha_j c_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    /// D x D
    pub t: Matrix,
    /// n x (n D) for `n` components
    pub a: Matrix,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    comps: Vec<Vec<Real>>,
    hidden: Vec<Vec<Real>>,
    gates: Vec<Vec<Real>>,
    q: Vec<Real>,
    pub alpha: Vec<Real>,
}

impl Attention {
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self { t: Matrix::zeros(dim, dim), a: Matrix::zeros(n, n * dim) }
    }

    /// Uniform entries in `±1/sqrt(D)`.
    pub fn random<R: Rng>(dim: usize, n: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as Real).sqrt();
        Self { t: Matrix::uniform(dim, dim, bound, rng), a: Matrix::uniform(n, n * dim, bound, rng) }
    }

    pub fn n_components(&self) -> usize {
        self.a.rows()
    }

    /// Attention logits are `A q / sqrt(n D)`.
    fn logit_scale(&self) -> Real {
        1.0 / (self.a.cols().max(1) as Real).sqrt()
    }

    pub fn forward(&self, comps: Vec<Vec<Real>>) -> (Vec<Real>, AttentionCache) {
        let dim = self.t.rows();
        let n = comps.len();
        debug_assert_eq!(n, self.n_components());
        let mut hidden = Vec::with_capacity(n);
        let mut gates = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n * dim);
        for c in &comps {
            let h: Vec<Real> = c.iter().map(|&x| relu(x)).collect();
            let g: Vec<Real> = self.t.matvec(&h).into_iter().map(sigmoid).collect();
            q.extend_from_slice(&g);
            hidden.push(h);
            gates.push(g);
        }
        let scale = self.logit_scale();
        let logits: Vec<Real> = self.a.matvec(&q).into_iter().map(|v| v * scale).collect();
        let alpha = softmax(&logits);
        let mut w = vec![0.0; dim];
        for (c, &a) in comps.iter().zip(&alpha) {
            axpy(a, c, &mut w);
        }
        (w, AttentionCache { comps, hidden, gates, q, alpha })
    }

    /// Accumulates into `grad` and returns the gradient for each component.
    pub fn backward(&self, cache: &AttentionCache, dw: &[Real], grad: &mut Attention) -> Vec<Vec<Real>> {
        let dim = self.t.rows();
        let alpha = &cache.alpha;
        let d_alpha: Vec<Real> = cache.comps.iter().map(|c| dot(dw, c)).collect();
        let mean = dot(alpha, &d_alpha);
        let scale = self.logit_scale();
        let d_logits: Vec<Real> = alpha.iter().zip(&d_alpha).map(|(a, d)| scale * a * (d - mean)).collect();
        grad.a.add_outer(1.0, &d_logits, &cache.q);
        let dq = self.a.matvec_t(&d_logits);
        let mut out = Vec::with_capacity(cache.comps.len());
        for j in 0..cache.comps.len() {
            let gate = &cache.gates[j];
            let d_pre: Vec<Real> =
                (0..dim).map(|i| dq[j * dim + i] * gate[i] * (1.0 - gate[i])).collect();
            grad.t.add_outer(1.0, &d_pre, &cache.hidden[j]);
            let dh = self.t.matvec_t(&d_pre);
            let c = &cache.comps[j];
            let mut dc: Vec<Real> = (0..dim).map(|i| if c[i] > 0.0 { dh[i] } else { 0.0 }).collect();
            axpy(alpha[j], dw, &mut dc);
            out.push(dc);
        }
        out
    }
}

impl Parameters for Attention {
    fn tensors(&self) -> Vec<&[Real]> {
        vec![self.t.data(), self.a.data()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [Real]> {
        vec![self.t.data_mut(), self.a.data_mut()]
    }
}

/// Pre-block inputs for every label: one `n_labels x D` matrix per block
/// component, in [`HeadSpec::block_components`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelInputs {
    pub mats: Vec<Matrix>,
}

impl LabelInputs {
    /// `E z_l` for LTE and `E (G^κ Z)_l` for each GALE order.
    pub fn build(spec: &HeadSpec, table: &Matrix, label_text: &CsrMatrix, convolved: &[CsrMatrix]) -> Self {
        let mats = spec
            .block_components()
            .into_iter()
            .map(|c| match c {
                Component::Lte => embed_rows(table, label_text),
                Component::Gale(k) => embed_rows(table, &convolved[k - 1]),
                Component::Refine => unreachable!("refinement has no block"),
            })
            .collect();
        Self { mats }
    }

    pub fn n_labels(&self) -> usize {
        self.mats.first().map_or(0, Matrix::rows)
    }
}

/// Sparse sources of [`LabelInputs`], kept when `E` is still being trained.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTexts {
    /// One `n_labels x V` matrix per block component.
    pub texts: Vec<CsrMatrix>,
}

impl LabelTexts {
    pub fn new(spec: &HeadSpec, label_text: &CsrMatrix, convolved: &[CsrMatrix]) -> Self {
        let texts = spec
            .block_components()
            .into_iter()
            .map(|c| match c {
                Component::Lte => label_text.clone(),
                Component::Gale(k) => convolved[k - 1].clone(),
                Component::Refine => unreachable!("refinement has no block"),
            })
            .collect();
        Self { texts }
    }

    pub fn embed(&self, table: &Matrix) -> LabelInputs {
        LabelInputs { mats: self.texts.iter().map(|t| embed_rows(table, t)).collect() }
    }

    /// Pushes per-label input gradients back into the token table.
    pub fn backward(&self, label: usize, d_inputs: &[Vec<Real>], grad: &mut Matrix) {
        for (text, d) in self.texts.iter().zip(d_inputs) {
            let (idx, vals) = text.row(label);
            sparse_embed_backward(grad, idx, vals, d);
        }
    }
}

/// One-vs-all classifiers built from label components.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub spec: HeadSpec,
    /// One block per block component.
    pub blocks: Vec<EmbeddingBlock>,
    pub attention: Attention,
    /// `n_labels x D` refinement vectors when enabled.
    pub refine: Option<Matrix>,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    blocks: Vec<BlockCache>,
    attention: Option<AttentionCache>,
}

impl HeadCache {
    pub fn alpha(&self) -> Option<&[Real]> {
        self.attention.as_ref().map(|a| a.alpha.as_slice())
    }
}

impl ClassifierHead {
    /// Identity blocks, zero attention and zero refinement vectors.
    pub fn new(spec: HeadSpec, dim: usize, n_labels: usize) -> Self {
        let n_blocks = spec.block_components().len();
        let n = spec.components().len();
        let refine = spec.refine.then(|| Matrix::zeros(n_labels, dim));
        Self { spec, blocks: vec![EmbeddingBlock::identity(dim); n_blocks], attention: Attention::zeros(dim, n), refine }
    }

    pub fn dim(&self) -> usize {
        self.attention.t.rows()
    }

    pub fn uses_attention(&self) -> bool {
        self.spec.fusion == Fusion::Attention
    }

    /// Draws one dropout mask per block.
    pub fn dropout_masks<R: Rng>(&self, rate: Real, rng: &mut R) -> Vec<Vec<Real>> {
        self.blocks.iter().map(|b| dropout_mask(b.dim(), rate, rng)).collect()
    }

    /// Classifier `w_l`. `masks` carries dropout masks in training.
    pub fn forward(&self, label: usize, inputs: &LabelInputs, masks: Option<Vec<Vec<Real>>>) -> Result<(Vec<Real>, HeadCache)> {
        let mut comps = Vec::with_capacity(self.spec.components().len());
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut masks = masks.map(|m| m.into_iter());
        for (block, input) in self.blocks.iter().zip(&inputs.mats) {
            let mask = masks.as_mut().and_then(|m| m.next());
            let (out, cache) = block.forward(input.row(label), mask)?;
            comps.push(out);
            caches.push(cache);
        }
        if let Some(r) = &self.refine {
            comps.push(r.row(label).to_vec());
        }
        if self.uses_attention() {
            let (w, cache) = self.attention.forward(comps);
            Ok((w, HeadCache { blocks: caches, attention: Some(cache) }))
        } else {
            let refs: Vec<&[Real]> = comps.iter().map(Vec::as_slice).collect();
            Ok((fuse_sum(&refs), HeadCache { blocks: caches, attention: None }))
        }
    }

    /// Eval-mode classifier.
    pub fn classifier(&self, label: usize, inputs: &LabelInputs) -> Vec<Real> {
        let mut comps: Vec<Vec<Real>> =
            self.blocks.iter().zip(&inputs.mats).map(|(b, m)| b.apply(m.row(label))).collect();
        if let Some(r) = &self.refine {
            comps.push(r.row(label).to_vec());
        }
        if self.uses_attention() {
            self.attention.forward(comps).0
        } else {
            let refs: Vec<&[Real]> = comps.iter().map(Vec::as_slice).collect();
            fuse_sum(&refs)
        }
    }

    /// All classifiers as an `n_labels x D` matrix.
    pub fn classifiers(&self, inputs: &LabelInputs) -> Matrix {
        use rayon::prelude::*;
        let rows: Vec<Vec<Real>> =
            (0..inputs.n_labels()).into_par_iter().map(|l| self.classifier(l, inputs)).collect();
        Matrix::from_rows(&rows)
    }

    /// Accumulates parameter gradients for label `label` and returns the
    /// gradient with respect to each block input.
    pub fn backward(&self, label: usize, cache: &HeadCache, dw: &[Real], grad: &mut ClassifierHead) -> Vec<Vec<Real>> {
        let d_comps = match &cache.attention {
            Some(ac) => self.attention.backward(ac, dw, &mut grad.attention),
            None => {
                let n = self.spec.components().len();
                let scale = 1.0 / n as Real;
                vec![dw.iter().map(|d| d * scale).collect(); n]
            }
        };
        if let (Some(gr), true) = (grad.refine.as_mut(), self.refine.is_some()) {
            axpy(1.0, &d_comps[self.blocks.len()], gr.row_mut(label));
        }
        self.blocks
            .iter()
            .zip(grad.blocks.iter_mut())
            .zip(&cache.blocks)
            .zip(&d_comps)
            .map(|(((b, g), c), d)| b.backward(c, d, g))
            .collect()
    }

    /// Matrices subject to spectral regularisation: every block `R` and `T`.
    pub fn spectral_targets(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = self.blocks.iter_mut().map(|b| &mut b.r).collect();
        if self.spec.fusion == Fusion::Attention {
            out.push(&mut self.attention.t);
        }
        out
    }

    /// Adds a refinement component, extending `A` with zero rows and columns
    /// so that existing attention logits are unchanged for the old components.
    pub fn enable_refinement(&mut self, init: Matrix) {
        if self.refine.is_some() {
            self.refine = Some(init);
            return;
        }
        let dim = self.dim();
        let n = self.attention.n_components();
        let mut a = Matrix::zeros(n + 1, (n + 1) * dim);
        for r in 0..n {
            a.row_mut(r)[..n * dim].copy_from_slice(self.attention.a.row(r));
        }
        self.attention.a = a;
        self.spec.refine = true;
        self.refine = Some(init);
    }

    pub fn save(&self, prefix: &str, ck: &mut Checkpoint) {
        for (i, b) in self.blocks.iter().enumerate() {
            ck.put_matrix(&format!("{prefix}.block{i}.r"), &b.r);
            ck.put_scalar(&format!("{prefix}.block{i}.lambda"), b.lambda);
        }
        ck.put_matrix(&format!("{prefix}.attention.t"), &self.attention.t);
        ck.put_matrix(&format!("{prefix}.attention.a"), &self.attention.a);
        if let Some(r) = &self.refine {
            ck.put_matrix(&format!("{prefix}.refine"), r);
        }
    }

    pub fn load(spec: HeadSpec, prefix: &str, ck: &Checkpoint) -> Result<Self> {
        let n_blocks = spec.block_components().len();
        let blocks = (0..n_blocks)
            .map(|i| {
                Ok(EmbeddingBlock {
                    r: ck.matrix(&format!("{prefix}.block{i}.r"))?,
                    lambda: ck.scalar(&format!("{prefix}.block{i}.lambda"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let attention = Attention { t: ck.matrix(&format!("{prefix}.attention.t"))?, a: ck.matrix(&format!("{prefix}.attention.a"))? };
        let refine = if spec.refine { Some(ck.matrix(&format!("{prefix}.refine"))?) } else { None };
        if attention.n_components() != spec.components().len() {
            return Err(Error::Checkpoint(format!("{prefix}: attention size does not match component count")));
        }
        Ok(Self { spec, blocks, attention, refine })
    }
}

impl Parameters for ClassifierHead {
    fn tensors(&self) -> Vec<&[Real]> {
        let mut out: Vec<&[Real]> = self.blocks.iter().flat_map(|b| b.tensors()).collect();
        out.extend(self.attention.tensors());
        if let Some(r) = &self.refine {
            out.push(r.data());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [Real]> {
        let mut out: Vec<&mut [Real]> = self.blocks.iter_mut().flat_map(|b| b.tensors_mut()).collect();
        out.extend(self.attention.tensors_mut());
        if let Some(r) = &mut self.refine {
            out.push(r.data_mut());
        }
        out
    }
}

/// Document block plus classifier head; the trainable set of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    pub doc: EmbeddingBlock,
    pub head: ClassifierHead,
}

impl Parameters for Scorer {
    fn tensors(&self) -> Vec<&[Real]> {
        let mut out = self.doc.tensors();
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [Real]> {
        let mut out = self.doc.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }
}
