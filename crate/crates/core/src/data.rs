//! Dataset types, the sparse text format, statistics and TF-IDF weighting.
//!
//! Combined document/label files start with `N V L` followed by one line per
//! document: `l1,l2,...,lk t1:v1 t2:v2 ...` (the label list may be empty).
//! Label-text files start with `L V` followed by one `t:v` list per label.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{CsrMatrix, Error, Real, Result, SparseVec};

/// Documents, their ground truth and the label texts over a shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct XcDataset {
    /// N x V bag-of-tokens documents.
    pub docs: CsrMatrix,
    /// N x L binary ground truth; stored values are 1.
    pub labels: CsrMatrix,
    /// L x V label texts.
    pub label_text: CsrMatrix,
}

impl XcDataset {
    pub fn new(docs: CsrMatrix, labels: CsrMatrix, label_text: CsrMatrix) -> Result<Self> {
        if docs.rows() != labels.rows() {
            return Err(Error::Dimension(format!(
                "{} documents but {} label rows",
                docs.rows(),
                labels.rows()
            )));
        }
        if label_text.rows() != labels.cols() {
            return Err(Error::Dimension(format!(
                "{} labels but {} label-text rows",
                labels.cols(),
                label_text.rows()
            )));
        }
        if label_text.cols() != docs.cols() {
            return Err(Error::Dimension(format!(
                "document vocabulary {} vs label vocabulary {}",
                docs.cols(),
                label_text.cols()
            )));
        }
        if !docs.is_nonnegative() || !label_text.is_nonnegative() {
            return Err(Error::Data("negative token weight".into()));
        }
        if labels.values().iter().any(|&v| v != 1.0) {
            return Err(Error::Data("ground truth must be binary".into()));
        }
        Ok(Self { docs, labels, label_text })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.rows()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.cols()
    }

    pub fn vocab(&self) -> usize {
        self.docs.cols()
    }

    /// Positive label ids of document `i`.
    pub fn positives(&self, i: usize) -> &[u32] {
        self.labels.row(i).0
    }

    /// L x N presence matrix (`Y` with labels as rows).
    pub fn label_major(&self) -> CsrMatrix {
        self.labels.transpose()
    }

    /// Number of training documents per label.
    pub fn label_frequency(&self) -> Vec<u32> {
        let mut freq = vec![0u32; self.n_labels()];
        for &l in self.labels.col_idx() {
            freq[l as usize] += 1;
        }
        freq
    }

    /// Keeps the given documents (in order) with the same label space.
    pub fn subset(&self, rows: &[usize]) -> XcDataset {
        XcDataset {
            docs: self.docs.select_rows(rows),
            labels: self.labels.select_rows(rows),
            label_text: self.label_text.clone(),
        }
    }
}

/// Non-fatal fixes applied while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Rows whose indices had to be sorted.
    pub unsorted_rows: usize,
    /// Duplicate indices merged (token weights summed, labels deduplicated).
    pub duplicate_entries: usize,
    /// Explicit zero weights dropped.
    pub dropped_zeros: usize,
}

impl LoadReport {
    fn merge(&mut self, other: &LoadReport) {
        self.unsorted_rows += other.unsorted_rows;
        self.duplicate_entries += other.duplicate_entries;
        self.dropped_zeros += other.dropped_zeros;
    }
}

/// Loads a combined document/label file and its label-text file.
pub fn load_dataset(doc_path: &Path, label_text_path: &Path) -> Result<XcDataset> {
    load_dataset_with_report(doc_path, label_text_path).map(|(ds, _)| ds)
}

pub fn load_dataset_with_report(
    doc_path: &Path,
    label_text_path: &Path,
) -> Result<(XcDataset, LoadReport)> {
    let doc_src = fs::read_to_string(doc_path)?;
    let text_src = fs::read_to_string(label_text_path)?;
    let (docs, labels, mut report) = parse_doc_file(&doc_src, doc_path)?;
    let (label_text, text_report) = parse_feature_file(&text_src, label_text_path, Precision::Single)?;
    report.merge(&text_report);
    if label_text.rows() != labels.cols() {
        return Err(Error::Format {
            path: label_text_path.to_path_buf(),
            line: 1,
            msg: format!("declares {} labels, document file declares {}", label_text.rows(), labels.cols()),
        });
    }
    if label_text.cols() != docs.cols() {
        return Err(Error::Format {
            path: label_text_path.to_path_buf(),
            line: 1,
            msg: format!("declares vocabulary {}, document file declares {}", label_text.cols(), docs.cols()),
        });
    }
    if report != LoadReport::default() {
        log::warn!("loading {}: {:?}", doc_path.display(), report);
    }
    Ok((XcDataset::new(docs, labels, label_text)?, report))
}

/// How values are parsed. Dataset weights are 32-bit; graphs keep full precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn format(&self, msg: impl Into<String>) -> Error {
        Error::Format { path: self.path.to_path_buf(), line: self.line, msg: msg.into() }
    }
}

fn parse_header(line: Option<&str>, path: &Path, arity: usize) -> Result<Vec<usize>> {
    let ctx = LineCtx { path, line: 1 };
    let line = line.ok_or_else(|| ctx.format("missing header"))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != arity {
        return Err(ctx.format(format!("header must have {arity} fields, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| f.parse::<usize>().map_err(|_| ctx.format(format!("bad header field {f:?}"))))
        .collect()
}

fn parse_value(s: &str, precision: Precision) -> Option<Real> {
    match precision {
        Precision::Single => s.parse::<f32>().ok().map(|v| v as Real),
        Precision::Double => s.parse::<f64>().ok().map(|v| v as Real),
    }
}

fn parse_features<'a>(
    items: impl Iterator<Item = &'a str>,
    dim: usize,
    row: usize,
    ctx: &LineCtx,
    precision: Precision,
    report: &mut LoadReport,
) -> Result<SparseVec> {
    let mut pairs: Vec<(u32, Real)> = Vec::new();
    for item in items {
        let (idx, val) = item
            .split_once(':')
            .ok_or_else(|| ctx.format(format!("expected index:value, found {item:?}")))?;
        let idx: usize = idx.parse().map_err(|_| ctx.format(format!("bad index {idx:?}")))?;
        let val = parse_value(val, precision).ok_or_else(|| ctx.format(format!("bad value {val:?}")))?;
        if idx >= dim {
            return Err(Error::Bounds { path: ctx.path.to_path_buf(), line: ctx.line, row, index: idx, dim });
        }
        if !val.is_finite() || val < 0.0 {
            return Err(ctx.format(format!("weight {val} must be finite and nonnegative")));
        }
        if val == 0.0 {
            report.dropped_zeros += 1;
            continue;
        }
        pairs.push((idx as u32, val));
    }
    if pairs.windows(2).any(|w| w[0].0 > w[1].0) {
        report.unsorted_rows += 1;
    }
    let before = pairs.len();
    let v = SparseVec::from_pairs(dim, pairs);
    report.duplicate_entries += before - v.nnz();
    Ok(v)
}

fn parse_doc_file(src: &str, path: &Path) -> Result<(CsrMatrix, CsrMatrix, LoadReport)> {
    let mut lines = src.lines();
    let header = parse_header(lines.next(), path, 3)?;
    let (n, v, l) = (header[0], header[1], header[2]);
    let mut report = LoadReport::default();
    let mut docs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (row, text) in lines.enumerate() {
        let ctx = LineCtx { path, line: row + 2 };
        if row >= n {
            if text.trim().is_empty() {
                continue;
            }
            return Err(ctx.format(format!("more than the declared {n} rows")));
        }
        let mut items = text.split_whitespace().peekable();
        let mut label_ids: Vec<u32> = Vec::new();
        let starts_with_labels = !text.starts_with(char::is_whitespace)
            && items.peek().is_some_and(|first| !first.contains(':'));
        if starts_with_labels {
            for lbl in items.next().unwrap().split(',').filter(|s| !s.is_empty()) {
                let id: usize = lbl.parse().map_err(|_| ctx.format(format!("bad label {lbl:?}")))?;
                if id >= l {
                    return Err(Error::Bounds { path: path.to_path_buf(), line: ctx.line, row, index: id, dim: l });
                }
                label_ids.push(id as u32);
            }
        }
        if label_ids.windows(2).any(|w| w[0] > w[1]) {
            report.unsorted_rows += 1;
        }
        let before = label_ids.len();
        label_ids.sort_unstable();
        label_ids.dedup();
        report.duplicate_entries += before - label_ids.len();
        let ones = vec![1.0; label_ids.len()];
        labels.push(SparseVec::new(l, label_ids, ones)?);
        docs.push(parse_features(items, v, row, &ctx, Precision::Single, &mut report)?);
    }
    if docs.len() != n {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: docs.len() + 2,
            msg: format!("declared {n} rows, found {}", docs.len()),
        });
    }
    Ok((CsrMatrix::from_rows(v, &docs), CsrMatrix::from_rows(l, &labels), report))
}

/// Parses a `rows cols` header followed by one `t:v` list per row.
pub fn parse_feature_file(src: &str, path: &Path, precision: Precision) -> Result<(CsrMatrix, LoadReport)> {
    let mut lines = src.lines();
    let header = parse_header(lines.next(), path, 2)?;
    let (n, dim) = (header[0], header[1]);
    let mut report = LoadReport::default();
    let mut rows = Vec::with_capacity(n);
    for (row, text) in lines.enumerate() {
        let ctx = LineCtx { path, line: row + 2 };
        if row >= n {
            if text.trim().is_empty() {
                continue;
            }
            return Err(ctx.format(format!("more than the declared {n} rows")));
        }
        rows.push(parse_features(text.split_whitespace(), dim, row, &ctx, precision, &mut report)?);
    }
    if rows.len() != n {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: rows.len() + 2,
            msg: format!("declared {n} rows, found {}", rows.len()),
        });
    }
    Ok((CsrMatrix::from_rows(dim, &rows), report))
}

pub fn read_feature_file(path: &Path, precision: Precision) -> Result<CsrMatrix> {
    let src = fs::read_to_string(path)?;
    parse_feature_file(&src, path, precision).map(|(m, _)| m)
}

fn format_value(v: Real, precision: Precision) -> String {
    match precision {
        Precision::Single => format!("{}", v as f32),
        Precision::Double => format!("{}", v as f64),
    }
}

fn write_features(out: &mut String, m: &CsrMatrix, r: usize, precision: Precision) {
    let mut first = true;
    for (c, v) in m.row_iter(r) {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{c}:{}", format_value(v, precision));
    }
}

/// Serialises a matrix as a `rows cols` header plus one `t:v` line per row.
pub fn format_feature_file(m: &CsrMatrix, precision: Precision) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        write_features(&mut out, m, r, precision);
        out.push('\n');
    }
    out
}

pub fn format_doc_file(ds: &XcDataset) -> String {
    let mut out = format!("{} {} {}\n", ds.n_docs(), ds.vocab(), ds.n_labels());
    for i in 0..ds.n_docs() {
        let labels: Vec<String> = ds.positives(i).iter().map(u32::to_string).collect();
        out.push_str(&labels.join(","));
        out.push(' ');
        write_features(&mut out, &ds.docs, i, Precision::Single);
        out.push('\n');
    }
    out
}

/// Writes `ds` in the format read by [`load_dataset`].
pub fn write_dataset(ds: &XcDataset, doc_path: &Path, label_text_path: &Path) -> Result<()> {
    fs::write(doc_path, format_doc_file(ds))?;
    fs::write(label_text_path, format_feature_file(&ds.label_text, Precision::Single))?;
    Ok(())
}

/// Dataset-level summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub n_docs: usize,
    pub n_labels: usize,
    pub vocab: usize,
    pub avg_labels_per_doc: f64,
    pub avg_points_per_label: f64,
    pub avg_tokens_per_doc: f64,
    pub avg_tokens_per_label: f64,
    /// Training documents per label.
    pub label_freq: Vec<u32>,
}

pub fn compute_stats(ds: &XcDataset) -> DatasetStats {
    let n = ds.n_docs().max(1) as f64;
    let l = ds.n_labels().max(1) as f64;
    DatasetStats {
        n_docs: ds.n_docs(),
        n_labels: ds.n_labels(),
        vocab: ds.vocab(),
        avg_labels_per_doc: ds.labels.nnz() as f64 / n,
        avg_points_per_label: ds.labels.nnz() as f64 / l,
        avg_tokens_per_doc: ds.docs.nnz() as f64 / n,
        avg_tokens_per_label: ds.label_text.nnz() as f64 / l,
        label_freq: ds.label_frequency(),
    }
}

/// Smoothed inverse document frequencies `ln((N+1)/(df+1)) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Idf {
    pub weights: Vec<Real>,
}

impl Idf {
    pub fn fit(docs: &CsrMatrix) -> Self {
        let n = docs.rows() as f64;
        let mut df = vec![0usize; docs.cols()];
        for &t in docs.col_idx() {
            df[t as usize] += 1;
        }
        let weights = df.iter().map(|&d| (((n + 1.0) / (d as f64 + 1.0)).ln() + 1.0) as Real).collect();
        Self { weights }
    }

    /// Raw counts times IDF, then L2 row normalisation; zero rows stay zero.
    pub fn transform(&self, counts: &CsrMatrix) -> CsrMatrix {
        counts.map_entries(|_, t, v| v * self.weights[t as usize]).l2_normalize_rows()
    }
}

/// TF-IDF weighting of a raw count matrix using its own document frequencies.
pub fn tfidf_normalize(docs: &CsrMatrix) -> CsrMatrix {
    Idf::fit(docs).transform(docs)
}

/// Re-weights a dataset's documents and label texts with the document-corpus IDF.
pub fn tfidf_dataset(ds: &XcDataset) -> XcDataset {
    let idf = Idf::fit(&ds.docs);
    XcDataset {
        docs: idf.transform(&ds.docs),
        labels: ds.labels.clone(),
        label_text: idf.transform(&ds.label_text),
    }
}
