//! Row-compressed sparse vectors and matrices.
//!
//! Everything sparse in the pipeline lives here: bag-of-token documents, label
//! texts, the ground-truth matrix, the correlation graphs and cluster
//! assignments. Column indices are `u32`, values are [`Real`].

use crate::tensor::Matrix;
use crate::{Error, Real, Result};

/// Sparse vector with strictly ascending indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<Real>,
}

impl SparseVec {
    /// Builds a vector from parts that already satisfy the invariants.
    pub fn new(dim: usize, indices: Vec<u32>, values: Vec<Real>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} indices vs {} values",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Data(format!("indices not strictly ascending at {}", w[1])));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::Dimension(format!("index {last} >= dim {dim}")));
            }
        }
        if values.iter().any(|&v| v == 0.0) {
            return Err(Error::Data("explicit zero stored".into()));
        }
        Ok(Self { dim, indices, values })
    }

    /// Sorts, merges duplicates by summation and drops zeros.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(u32, Real)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<Real> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = Self { dim, indices, values };
        out.drop_zeros();
        out
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, indices: Vec::new(), values: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[Real] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Real)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> Real {
        match self.indices.binary_search(&index) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> Real {
        self.values.iter().map(|v| v * v).sum::<Real>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[Real]) -> Real {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }

    pub fn to_dense(&self) -> Vec<Real> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut k = 0;
        for j in 0..self.values.len() {
            if self.values[j] != 0.0 {
                self.indices[k] = self.indices[j];
                self.values[k] = self.values[j];
                k += 1;
            }
        }
        self.indices.truncate(k);
        self.values.truncate(k);
    }
}

/// Compressed-sparse-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<Real>,
}

impl CsrMatrix {
    /// Validates and wraps raw CSR arrays.
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<Real>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return Err(Error::Dimension(format!(
                "row_ptr has length {} for {rows} rows",
                row_ptr.len()
            )));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::Dimension("row_ptr/col_idx/values lengths disagree".into()));
        }
        for r in 0..rows {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            if lo > hi {
                return Err(Error::Data(format!("row_ptr decreases at row {r}")));
            }
            let row = &col_idx[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Data(format!("row {r} columns not strictly ascending")));
            }
            if row.last().is_some_and(|&c| c as usize >= cols) {
                return Err(Error::Dimension(format!("row {r} has a column >= {cols}")));
            }
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    /// Stacks sparse rows. Every row must have dimension `cols`.
    pub fn from_rows(cols: usize, rows: &[SparseVec]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(SparseVec::nnz).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for r in rows {
            debug_assert_eq!(r.dim(), cols);
            col_idx.extend_from_slice(r.indices());
            values.extend_from_slice(r.values());
            row_ptr.push(col_idx.len());
        }
        Self { rows: rows.len(), cols, row_ptr, col_idx, values }
    }

    /// Builds from unsorted `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(u32, u32, Real)]) -> Self {
        let mut per_row: Vec<Vec<(u32, Real)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            per_row[r as usize].push((c, v));
        }
        let rows_vec: Vec<SparseVec> =
            per_row.into_iter().map(|p| SparseVec::from_pairs(cols, p)).collect();
        Self::from_rows(cols, &rows_vec)
    }

    pub fn from_dense(dense: &[Vec<Real>]) -> Self {
        let cols = dense.first().map_or(0, Vec::len);
        let rows: Vec<SparseVec> = dense
            .iter()
            .map(|r| {
                let pairs = r
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c as u32, v))
                    .collect();
                SparseVec::from_pairs(cols, pairs)
            })
            .collect();
        Self::from_rows(cols, &rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[Real] {
        &self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[Real]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn row_iter(&self, r: usize) -> impl Iterator<Item = (u32, Real)> + '_ {
        let (c, v) = self.row(r);
        c.iter().copied().zip(v.iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn row_vec(&self, r: usize) -> SparseVec {
        let (c, v) = self.row(r);
        SparseVec { dim: self.cols, indices: c.to_vec(), values: v.to_vec() }
    }

    pub fn get(&self, r: usize, c: usize) -> Real {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<Real>> {
        (0..self.rows)
            .map(|r| {
                let mut row = vec![0.0; self.cols];
                for (c, v) in self.row_iter(r) {
                    row[c as usize] = v;
                }
                row
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row_iter(r) {
                let slot = next[c as usize];
                col_idx[slot] = r as u32;
                values[slot] = v;
                next[c as usize] += 1;
            }
        }
        Self { rows: self.cols, cols: self.rows, row_ptr, col_idx, values }
    }

    /// Sparse-sparse product `self * rhs` (Gustavson, dense accumulator).
    pub fn matmul(&self, rhs: &CsrMatrix) -> Result<CsrMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut acc = vec![0.0; rhs.cols];
        let mut touched = vec![false; rhs.cols];
        let mut pattern: Vec<u32> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row_iter(r) {
                for (c, b) in rhs.row_iter(k as usize) {
                    let c_us = c as usize;
                    if !touched[c_us] {
                        touched[c_us] = true;
                        pattern.push(c);
                    }
                    acc[c_us] += a * b;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                let v = acc[c as usize];
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
                acc[c as usize] = 0.0;
                touched[c as usize] = false;
            }
            pattern.clear();
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { rows: self.rows, cols: rhs.cols, row_ptr, col_idx, values })
    }

    /// `self * rhs` where `rhs` is dense with `self.cols` rows.
    pub fn mul_dense(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows() {
            return Err(Error::Dimension(format!(
                "sparse {}x{} by dense {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols());
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            for (k, a) in self.row_iter(r) {
                for (d, &b) in dst.iter_mut().zip(rhs.row(k as usize)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Sparse matrix times dense vector.
    pub fn mul_vec(&self, x: &[Real]) -> Vec<Real> {
        (0..self.rows)
            .map(|r| self.row_iter(r).map(|(c, v)| v * x[c as usize]).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<Real> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<Real> {
        let mut out = vec![0.0; self.cols];
        for (&c, &v) in self.col_idx.iter().zip(&self.values) {
            out[c as usize] += v;
        }
        out
    }

    /// Returns `diag(row_scale) * self * diag(col_scale)`, dropping entries that become zero.
    pub fn scale(&self, row_scale: &[Real], col_scale: &[Real]) -> CsrMatrix {
        self.map_entries(|r, c, v| v * row_scale[r] * col_scale[c as usize])
    }

    /// Applies `f(row, col, value)` to every stored entry; zero results are removed.
    pub fn map_entries(&self, mut f: impl FnMut(usize, u32, Real) -> Real) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row_iter(r) {
                let nv = f(r, c, v);
                if nv != 0.0 {
                    col_idx.push(c);
                    values.push(nv);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { rows: self.rows, cols: self.cols, row_ptr, col_idx, values }
    }

    /// Scales each row to unit L2 norm; all-zero rows stay zero.
    pub fn l2_normalize_rows(&self) -> CsrMatrix {
        let norms: Vec<Real> = (0..self.rows)
            .map(|r| self.row(r).1.iter().map(|v| v * v).sum::<Real>().sqrt())
            .collect();
        self.map_entries(|r, _, v| if norms[r] > 0.0 { v / norms[r] } else { 0.0 })
    }

    /// Keeps the `k` largest entries of each row (ties: lower column wins).
    pub fn top_k_per_row(&self, k: usize) -> CsrMatrix {
        let rows: Vec<SparseVec> = (0..self.rows)
            .map(|r| {
                let mut entries: Vec<(u32, Real)> = self.row_iter(r).collect();
                if entries.len() > k {
                    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    entries.truncate(k);
                }
                SparseVec::from_pairs(self.cols, entries)
            })
            .collect();
        CsrMatrix::from_rows(self.cols, &rows)
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> CsrMatrix {
        let picked: Vec<SparseVec> = rows.iter().map(|&r| self.row_vec(r)).collect();
        CsrMatrix::from_rows(self.cols, &picked)
    }

    /// `self + other`, same shape.
    pub fn add(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("add: shape mismatch".into()));
        }
        let rows: Vec<SparseVec> = (0..self.rows)
            .map(|r| {
                let pairs = self.row_iter(r).chain(other.row_iter(r)).collect();
                SparseVec::from_pairs(self.cols, pairs)
            })
            .collect();
        Ok(CsrMatrix::from_rows(self.cols, &rows))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}
