//! Named-tensor checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "GXCK"
//! version  u32      currently 1
//! count    u32      number of entries
//! entry*   name_len u32, name (UTF-8), dtype u8 (0 = f64, 1 = u32),
//!          ndim u8, dims u64 * ndim, data (product(dims) elements)
//! ```
//!
//! Entries are written in name order, so identical contents give identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::block::EmbeddingBlock;
use super::dense::Matrix;
use crate::{CsrMatrix, Error, Real, Result};

const MAGIC: &[u8; 4] = b"GXCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F64 { shape: Vec<usize>, data: Vec<f64> },
    U32 { shape: Vec<usize>, data: Vec<u32> },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    entries: BTreeMap<String, TensorData>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn put_matrix(&mut self, name: &str, m: &Matrix) {
        self.entries.insert(
            name.to_string(),
            TensorData::F64 {
                shape: vec![m.rows(), m.cols()],
                data: m.data().iter().map(|&v| v as f64).collect(),
            },
        );
    }

    pub fn put_vec(&mut self, name: &str, v: &[Real]) {
        self.entries.insert(
            name.to_string(),
            TensorData::F64 { shape: vec![v.len()], data: v.iter().map(|&x| x as f64).collect() },
        );
    }

    pub fn put_scalar(&mut self, name: &str, v: Real) {
        self.put_vec(name, &[v]);
    }

    pub fn put_u32(&mut self, name: &str, v: &[u32]) {
        self.entries
            .insert(name.to_string(), TensorData::U32 { shape: vec![v.len()], data: v.to_vec() });
    }

    fn f64_entry(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.entries.get(name) {
            Some(TensorData::F64 { shape, data }) => Ok((shape, data)),
            Some(_) => Err(Error::Checkpoint(format!("{name}: expected f64 tensor"))),
            None => Err(Error::Checkpoint(format!("missing tensor {name}"))),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix> {
        let (shape, data) = self.f64_entry(name)?;
        if shape.len() != 2 {
            return Err(Error::Checkpoint(format!("{name}: expected 2-d tensor")));
        }
        Ok(Matrix::from_vec(shape[0], shape[1], data.iter().map(|&v| v as Real).collect()))
    }

    pub fn vec(&self, name: &str) -> Result<Vec<Real>> {
        Ok(self.f64_entry(name)?.1.iter().map(|&v| v as Real).collect())
    }

    pub fn scalar(&self, name: &str) -> Result<Real> {
        let v = self.vec(name)?;
        if v.len() != 1 {
            return Err(Error::Checkpoint(format!("{name}: expected scalar")));
        }
        Ok(v[0])
    }

    pub fn u32s(&self, name: &str) -> Result<Vec<u32>> {
        match self.entries.get(name) {
            Some(TensorData::U32 { data, .. }) => Ok(data.clone()),
            Some(_) => Err(Error::Checkpoint(format!("{name}: expected u32 tensor"))),
            None => Err(Error::Checkpoint(format!("missing tensor {name}"))),
        }
    }

    /// Stores `name.shape`, `name.ptr`, `name.idx` and `name.val`.
    pub fn put_csr(&mut self, name: &str, m: &CsrMatrix) {
        self.put_u32(&format!("{name}.shape"), &[m.rows() as u32, m.cols() as u32]);
        let ptr: Vec<u32> = m.row_ptr().iter().map(|&p| p as u32).collect();
        self.put_u32(&format!("{name}.ptr"), &ptr);
        self.put_u32(&format!("{name}.idx"), m.col_idx());
        self.put_vec(&format!("{name}.val"), m.values());
    }

    pub fn csr(&self, name: &str) -> Result<CsrMatrix> {
        let shape = self.u32s(&format!("{name}.shape"))?;
        if shape.len() != 2 {
            return Err(Error::Checkpoint(format!("{name}: bad sparse shape")));
        }
        let ptr = self.u32s(&format!("{name}.ptr"))?.into_iter().map(|p| p as usize).collect();
        let idx = self.u32s(&format!("{name}.idx"))?;
        let val = self.vec(&format!("{name}.val"))?;
        CsrMatrix::new(shape[0] as usize, shape[1] as usize, ptr, idx, val)
            .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))
    }

    pub fn put_block(&mut self, name: &str, b: &EmbeddingBlock) {
        self.put_matrix(&format!("{name}.r"), &b.r);
        self.put_scalar(&format!("{name}.lambda"), b.lambda);
    }

    pub fn block(&self, name: &str) -> Result<EmbeddingBlock> {
        Ok(EmbeddingBlock { r: self.matrix(&format!("{name}.r"))?, lambda: self.scalar(&format!("{name}.lambda"))? })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let (dtype, shape) = match t {
                TensorData::F64 { shape, .. } => (0u8, shape),
                TensorData::U32 { shape, .. } => (1u8, shape),
            };
            out.push(dtype);
            out.push(shape.len() as u8);
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match t {
                TensorData::F64 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                TensorData::U32 { data, .. } => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = cur.u32()? as usize;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
            let dtype = cur.take(1)?[0];
            let ndim = cur.take(1)?[0] as usize;
            let shape: Vec<usize> = (0..ndim).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<_>>()?;
            let n: usize = shape.iter().product();
            let t = match dtype {
                0 => TensorData::F64 {
                    data: (0..n).map(|_| cur.u64().map(f64::from_bits)).collect::<Result<_>>()?,
                    shape,
                },
                1 => TensorData::U32 { data: (0..n).map(|_| cur.u32()).collect::<Result<_>>()?, shape },
                d => return Err(Error::Checkpoint(format!("{name}: unknown dtype {d}"))),
            };
            entries.insert(name, t);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
