//! Sectioned little-endian file layout for every format.
//!
//! ```text
//! magic   "SCVM"            4 bytes
//! version u8 = 1
//! kind    u8                0 coo, 1 csr, 2 csc, 3 bcsr, 4 scv
//! n_rows  u64
//! n_cols  u64
//! params  bcsr: block_size u64
//!         scv:  vec_height u64, tile_width u64, order u8 (0 row-major, 1 z-morton)
//! arrays  each: u64 element count, then elements
//!         coo:  rows u32[], cols u32[], values f64[]
//!         csr:  row_ptr u64[], col_id u32[], values f64[]
//!         csc:  col_ptr u64[], row_id u32[], values f64[]
//!         bcsr: row_ptr u64[], col_id u32[], values f64[]
//!         scv:  block_order u32[] (flattened pairs), blk_ptr u64[], blk_id u32[],
//!               blk_col u32[], values f64[]
//! ```

use super::{
    BcsrMatrix, CooMatrix, CscMatrix, CsrMatrix, OrderKind, ScvMatrix, SparseMatrix, Triplet,
};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SCVM";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    Coo(CooMatrix),
    Csr(CsrMatrix),
    Csc(CscMatrix),
    Bcsr(BcsrMatrix),
    Scv(ScvMatrix),
}

impl AnyMatrix {
    fn kind(&self) -> u8 {
        match self {
            AnyMatrix::Coo(_) => 0,
            AnyMatrix::Csr(_) => 1,
            AnyMatrix::Csc(_) => 2,
            AnyMatrix::Bcsr(_) => 3,
            AnyMatrix::Scv(_) => 4,
        }
    }

    pub fn as_sparse(&self) -> &dyn SparseMatrix {
        match self {
            AnyMatrix::Coo(m) => m,
            AnyMatrix::Csr(m) => m,
            AnyMatrix::Csc(m) => m,
            AnyMatrix::Bcsr(m) => m,
            AnyMatrix::Scv(m) => m,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u8(VERSION);
        w.u8(self.kind());
        let m = self.as_sparse();
        w.u64(m.n_rows() as u64);
        w.u64(m.n_cols() as u64);
        match self {
            AnyMatrix::Coo(m) => {
                let t = m.triplets();
                w.u32s(t.iter().map(|t| t.row as u32), t.len());
                w.u32s(t.iter().map(|t| t.col as u32), t.len());
                w.f64s(t.iter().map(|t| t.value), t.len());
            }
            AnyMatrix::Csr(m) => {
                w.u64s(&m.row_ptr);
                w.u32s(m.col_id.iter().map(|&c| c as u32), m.col_id.len());
                w.f64s(m.values.iter().copied(), m.values.len());
            }
            AnyMatrix::Csc(m) => {
                w.u64s(&m.col_ptr);
                w.u32s(m.row_id.iter().map(|&r| r as u32), m.row_id.len());
                w.f64s(m.values.iter().copied(), m.values.len());
            }
            AnyMatrix::Bcsr(m) => {
                w.u64(m.block_size as u64);
                w.u64s(&m.row_ptr);
                w.u32s(m.col_id.iter().map(|&c| c as u32), m.col_id.len());
                w.f64s(m.values.iter().copied(), m.values.len());
            }
            AnyMatrix::Scv(m) => {
                w.u64(m.vec_height as u64);
                w.u64(m.tile_width as u64);
                w.u8(match m.order {
                    OrderKind::RowMajor => 0,
                    OrderKind::ZMorton => 1,
                });
                w.u32s(
                    m.block_order.iter().flat_map(|&(r, c)| [r, c]),
                    2 * m.block_order.len(),
                );
                w.u64s(&m.blk_ptr);
                w.u32s(m.blk_id.iter().copied(), m.blk_id.len());
                w.u32s(m.blk_col.iter().copied(), m.blk_col.len());
                w.f64s(m.values.iter().copied(), m.values.len());
            }
        }
        w.0
    }

    /// Parses and structurally validates a matrix.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Malformed("bad magic".into()));
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::Malformed(format!("unsupported version {version}")));
        }
        let kind = r.u8()?;
        let n_rows = r.u64()? as usize;
        let n_cols = r.u64()? as usize;
        let m = match kind {
            0 => {
                let rows = r.u32s()?;
                let cols = r.u32s()?;
                let vals = r.f64s()?;
                if rows.len() != cols.len() || rows.len() != vals.len() {
                    return Err(Error::Malformed("coo: array lengths disagree".into()));
                }
                let t = rows
                    .iter()
                    .zip(&cols)
                    .zip(&vals)
                    .map(|((&r, &c), &v)| Triplet::new(r as usize, c as usize, v))
                    .collect();
                AnyMatrix::Coo(CooMatrix::new(n_rows, n_cols, t)?)
            }
            1 => {
                let m = CsrMatrix {
                    n_rows,
                    n_cols,
                    row_ptr: r.usizes()?,
                    col_id: r.u32s()?.into_iter().map(|x| x as usize).collect(),
                    values: r.f64s()?,
                };
                m.validate()?;
                AnyMatrix::Csr(m)
            }
            2 => {
                let m = CscMatrix {
                    n_rows,
                    n_cols,
                    col_ptr: r.usizes()?,
                    row_id: r.u32s()?.into_iter().map(|x| x as usize).collect(),
                    values: r.f64s()?,
                };
                m.validate()?;
                AnyMatrix::Csc(m)
            }
            3 => {
                let block_size = r.u64()? as usize;
                let m = BcsrMatrix {
                    n_rows,
                    n_cols,
                    block_size,
                    row_ptr: r.usizes()?,
                    col_id: r.u32s()?.into_iter().map(|x| x as usize).collect(),
                    values: r.f64s()?,
                };
                m.validate()?;
                AnyMatrix::Bcsr(m)
            }
            4 => {
                let vec_height = r.u64()? as usize;
                let tile_width = r.u64()? as usize;
                let order = match r.u8()? {
                    0 => OrderKind::RowMajor,
                    1 => OrderKind::ZMorton,
                    o => return Err(Error::Malformed(format!("unknown order tag {o}"))),
                };
                let flat = r.u32s()?;
                if flat.len() % 2 != 0 {
                    return Err(Error::Malformed("scv: odd block order array".into()));
                }
                let m = ScvMatrix {
                    n_rows,
                    n_cols,
                    vec_height,
                    tile_width,
                    order,
                    block_order: flat.chunks(2).map(|p| (p[0], p[1])).collect(),
                    blk_ptr: r.usizes()?,
                    blk_id: r.u32s()?,
                    blk_col: r.u32s()?,
                    values: r.f64s()?,
                };
                m.validate()?;
                AnyMatrix::Scv(m)
            }
            k => return Err(Error::Malformed(format!("unknown kind tag {k}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Malformed("trailing bytes".into()));
        }
        Ok(m)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64s(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.u64(x as u64);
        }
    }
    fn u32s(&mut self, v: impl Iterator<Item = u32>, len: usize) {
        self.u64(len as u64);
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn f64s(&mut self, v: impl Iterator<Item = f64>, len: usize) {
        self.u64(len as u64);
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Malformed("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn count(&mut self, width: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.saturating_mul(width) > self.buf.len() - self.pos {
            return Err(Error::Malformed("array length exceeds file".into()));
        }
        Ok(n)
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.u64().map(|x| x as usize)).collect()
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.count(4)?;
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
