//! Sparse storage formats for the aggregation adjacency matrix.
//!
//! Every format is built from a validated [`CooMatrix`] and is immutable
//! afterwards. Conversions never materialize padding except inside BCSR dense
//! blocks; matrix dimensions that are not a multiple of the block or vector
//! size are treated as if zero-padded.

mod binary;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zorder;

pub use binary::AnyMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Triplet {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Triplet { row, col, value }
    }
}

/// Common read-only surface of every sparse format.
pub trait SparseMatrix {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Number of stored values, including explicit padding zeros.
    fn stored_values(&self) -> usize;
    fn to_dense(&self) -> DenseMatrix;
}

/// Row-major dense matrix. Used for Z, PS, W, H and as the oracle target of
/// every sparse format.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_rows}x{n_cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in 0..n_rows {
            for c in 0..n_cols {
                data.push(f(r, c));
            }
        }
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n_cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    /// Largest absolute elementwise difference, with the location where it
    /// first occurs. `None` when the shapes differ.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Option<(f64, Option<(usize, usize)>)> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return None;
        }
        let mut worst = 0.0f64;
        let mut at = None;
        for (i, (a, b)) in self.data.iter().zip(&other.data).enumerate() {
            let d = (a - b).abs();
            if d > worst || (d.is_nan() && at.is_none()) {
                worst = if d.is_nan() { f64::INFINITY } else { d };
                at = Some((i / self.n_cols, i % self.n_cols));
            }
        }
        Some((worst, at))
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} += {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

/// Coordinate-list storage; the entry point for every conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    n_rows: usize,
    n_cols: usize,
    triplets: Vec<Triplet>,
}

impl CooMatrix {
    /// Validates ranges and rejects duplicate coordinates.
    pub fn new(n_rows: usize, n_cols: usize, triplets: Vec<Triplet>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triplets.len());
        for t in &triplets {
            if t.row >= n_rows || t.col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row: t.row,
                    col: t.col,
                    n_rows,
                    n_cols,
                });
            }
            if !seen.insert((t.row, t.col)) {
                return Err(Error::DuplicateEntry {
                    row: t.row,
                    col: t.col,
                });
            }
        }
        Ok(CooMatrix {
            n_rows,
            n_cols,
            triplets,
        })
    }

    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        CooMatrix {
            n_rows,
            n_cols,
            triplets: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CooMatrix {
            n_rows: n,
            n_cols: n,
            triplets: (0..n).map(|i| Triplet::new(i, i, 1.0)).collect(),
        }
    }

    /// Nonzero entries of a dense matrix, in row-major order.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.n_rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    triplets.push(Triplet::new(r, c, v));
                }
            }
        }
        CooMatrix {
            n_rows: m.n_rows(),
            n_cols: m.n_cols(),
            triplets,
        }
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn into_triplets(self) -> Vec<Triplet> {
        self.triplets
    }

    /// Triplets sorted row-major.
    pub fn sorted_row_major(&self) -> Vec<Triplet> {
        let mut t = self.triplets.clone();
        t.sort_by_key(|t| (t.row, t.col));
        t
    }
}

impl SparseMatrix for CooMatrix {
    fn n_rows(&self) -> usize {
        self.n_rows
    }
    fn n_cols(&self) -> usize {
        self.n_cols
    }
    fn stored_values(&self) -> usize {
        self.triplets.len()
    }
    fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for t in &self.triplets {
            d.set(t.row, t.col, t.value);
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_id: Vec<usize>,
    pub values: Vec<f64>,
}

/// Compressed storage along one axis; CSR and CSC share it with the axes swapped.
fn compress(
    n_major: usize,
    entries: impl Iterator<Item = (usize, usize, f64)>,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_major];
    for (major, minor, v) in entries {
        buckets[major].push((minor, v));
    }
    let mut ptr = Vec::with_capacity(n_major + 1);
    let mut idx = Vec::new();
    let mut vals = Vec::new();
    ptr.push(0);
    for mut b in buckets {
        b.sort_by_key(|&(minor, _)| minor);
        for (minor, v) in b {
            idx.push(minor);
            vals.push(v);
        }
        ptr.push(idx.len());
    }
    (ptr, idx, vals)
}

fn validate_compressed(
    what: &str,
    n_major: usize,
    n_minor: usize,
    ptr: &[usize],
    idx: &[usize],
    vals: &[f64],
) -> Result<()> {
    if ptr.len() != n_major + 1 || ptr[0] != 0 {
        return Err(Error::Malformed(format!("{what}: bad pointer array")));
    }
    if idx.len() != vals.len() || ptr[n_major] != vals.len() {
        return Err(Error::Malformed(format!("{what}: array lengths disagree")));
    }
    for m in 0..n_major {
        if ptr[m] > ptr[m + 1] {
            return Err(Error::Malformed(format!("{what}: pointer decreases at {m}")));
        }
        let seg = &idx[ptr[m]..ptr[m + 1]];
        for (k, &i) in seg.iter().enumerate() {
            if i >= n_minor {
                return Err(Error::Malformed(format!("{what}: index {i} out of range")));
            }
            if k > 0 && seg[k - 1] >= i {
                return Err(Error::Malformed(format!(
                    "{what}: indices not strictly increasing in segment {m}"
                )));
            }
        }
    }
    Ok(())
}

impl CsrMatrix {
    pub fn from_coo(m: &CooMatrix) -> Self {
        let (row_ptr, col_id, values) = compress(
            m.n_rows,
            m.triplets.iter().map(|t| (t.row, t.col, t.value)),
        );
        CsrMatrix {
            n_rows: m.n_rows,
            n_cols: m.n_cols,
            row_ptr,
            col_id,
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_compressed(
            "csr",
            self.n_rows,
            self.n_cols,
            &self.row_ptr,
            &self.col_id,
            &self.values,
        )
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

impl SparseMatrix for CsrMatrix {
    fn n_rows(&self) -> usize {
        self.n_rows
    }
    fn n_cols(&self) -> usize {
        self.n_cols
    }
    fn stored_values(&self) -> usize {
        self.values.len()
    }
    fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                d.set(r, self.col_id[k], self.values[k]);
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub col_ptr: Vec<usize>,
    pub row_id: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn from_coo(m: &CooMatrix) -> Self {
        let (col_ptr, row_id, values) = compress(
            m.n_cols,
            m.triplets.iter().map(|t| (t.col, t.row, t.value)),
        );
        CscMatrix {
            n_rows: m.n_rows,
            n_cols: m.n_cols,
            col_ptr,
            row_id,
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_compressed(
            "csc",
            self.n_cols,
            self.n_rows,
            &self.col_ptr,
            &self.row_id,
            &self.values,
        )
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

impl SparseMatrix for CscMatrix {
    fn n_rows(&self) -> usize {
        self.n_rows
    }
    fn n_cols(&self) -> usize {
        self.n_cols
    }
    fn stored_values(&self) -> usize {
        self.values.len()
    }
    fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for c in 0..self.n_cols {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                d.set(self.row_id[k], c, self.values[k]);
            }
        }
        d
    }
}

fn check_pow2(name: &'static str, value: usize) -> Result<()> {
    if value == 0 || !value.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { name, value });
    }
    Ok(())
}

/// Block CSR with square `block_size`×`block_size` dense blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BcsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub block_size: usize,
    /// Offsets over block rows, counted in blocks.
    pub row_ptr: Vec<usize>,
    /// Block-column index of each stored block.
    pub col_id: Vec<usize>,
    /// Stored blocks, each `block_size²` values row-major, contiguous.
    pub values: Vec<f64>,
}

impl BcsrMatrix {
    pub fn from_coo(m: &CooMatrix, block_size: usize) -> Result<Self> {
        check_pow2("block size", block_size)?;
        let b = block_size;
        let n_block_rows = m.n_rows.div_ceil(b);
        let mut per_row: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); n_block_rows];
        for t in &m.triplets {
            per_row[t.row / b].push((t.col / b, t.row % b, t.col % b, t.value));
        }
        let mut row_ptr = vec![0];
        let mut col_id = Vec::new();
        let mut values = Vec::new();
        for mut entries in per_row {
            entries.sort_by_key(|e| (e.0, e.1, e.2));
            let mut i = 0;
            while i < entries.len() {
                let bc = entries[i].0;
                col_id.push(bc);
                let base = values.len();
                values.resize(base + b * b, 0.0);
                while i < entries.len() && entries[i].0 == bc {
                    let (_, r, c, v) = entries[i];
                    values[base + r * b + c] = v;
                    i += 1;
                }
            }
            row_ptr.push(col_id.len());
        }
        Ok(BcsrMatrix {
            n_rows: m.n_rows,
            n_cols: m.n_cols,
            block_size,
            row_ptr,
            col_id,
            values,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.col_id.len()
    }

    pub fn n_block_rows(&self) -> usize {
        self.n_rows.div_ceil(self.block_size)
    }

    pub fn block(&self, k: usize) -> &[f64] {
        let bb = self.block_size * self.block_size;
        &self.values[k * bb..(k + 1) * bb]
    }

    /// Nonzero count (the stored padding excluded).
    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn validate(&self) -> Result<()> {
        check_pow2("block size", self.block_size)?;
        let b = self.block_size;
        let nbr = self.n_block_rows();
        let nbc = self.n_cols.div_ceil(b);
        if self.row_ptr.len() != nbr + 1 || self.row_ptr[0] != 0 {
            return Err(Error::Malformed("bcsr: bad row pointer".into()));
        }
        if self.row_ptr[nbr] != self.col_id.len() || self.values.len() != b * b * self.col_id.len()
        {
            return Err(Error::Malformed("bcsr: array lengths disagree".into()));
        }
        for br in 0..nbr {
            if self.row_ptr[br] > self.row_ptr[br + 1] {
                return Err(Error::Malformed("bcsr: pointer decreases".into()));
            }
            for k in self.row_ptr[br]..self.row_ptr[br + 1] {
                let bc = self.col_id[k];
                if bc >= nbc || (k > self.row_ptr[br] && self.col_id[k - 1] >= bc) {
                    return Err(Error::Malformed(format!("bcsr: bad block column at {k}")));
                }
                let blk = self.block(k);
                for r in 0..b {
                    for c in 0..b {
                        let outside = br * b + r >= self.n_rows || bc * b + c >= self.n_cols;
                        if outside && blk[r * b + c] != 0.0 {
                            return Err(Error::Malformed("bcsr: nonzero padding".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

impl SparseMatrix for BcsrMatrix {
    fn n_rows(&self) -> usize {
        self.n_rows
    }
    fn n_cols(&self) -> usize {
        self.n_cols
    }
    fn stored_values(&self) -> usize {
        self.values.len()
    }
    fn to_dense(&self) -> DenseMatrix {
        let b = self.block_size;
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for br in 0..self.n_block_rows() {
            for k in self.row_ptr[br]..self.row_ptr[br + 1] {
                let bc = self.col_id[k];
                let blk = self.block(k);
                for r in 0..b {
                    for c in 0..b {
                        let (gr, gc) = (br * b + r, bc * b + c);
                        if gr < self.n_rows && gc < self.n_cols && blk[r * b + c] != 0.0 {
                            d.set(gr, gc, blk[r * b + c]);
                        }
                    }
                }
            }
        }
        d
    }
}

/// Order in which SCV tiles are laid out and processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderKind {
    RowMajor,
    ZMorton,
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderKind::RowMajor => write!(f, "row-major"),
            OrderKind::ZMorton => write!(f, "z-morton"),
        }
    }
}

/// Sparse compressed vectors.
///
/// The matrix is cut into tiles of `vec_height` rows by `tile_width` columns.
/// With the default width of 1 every tile is a single column vector. Tiles are
/// stored in `block_order`; `blk_ptr` has one entry per tile position,
/// including empty tiles, plus a final end offset. Inside a tile, entries are
/// grouped by column (`blk_col`, only materialized when `tile_width > 1`) and
/// sorted by their row offset `blk_id` within the vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScvMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub vec_height: usize,
    pub tile_width: usize,
    pub order: OrderKind,
    /// `(block_row, tile_col)` of each tile position.
    pub block_order: Vec<(u32, u32)>,
    pub blk_ptr: Vec<usize>,
    pub blk_id: Vec<u32>,
    /// Column offset inside the tile; empty when `tile_width == 1`.
    pub blk_col: Vec<u32>,
    pub values: Vec<f64>,
}

impl ScvMatrix {
    pub fn from_coo(
        m: &CooMatrix,
        vec_height: usize,
        tile_width: usize,
        order: OrderKind,
    ) -> Result<Self> {
        check_pow2("vector height", vec_height)?;
        check_pow2("tile width", tile_width)?;
        let n_block_rows = m.n_rows.div_ceil(vec_height);
        let n_tile_cols = m.n_cols.div_ceil(tile_width);
        let block_order: Vec<(u32, u32)> = match order {
            OrderKind::RowMajor => (0..n_block_rows)
                .flat_map(|br| (0..n_tile_cols).map(move |tc| (br as u32, tc as u32)))
                .collect(),
            OrderKind::ZMorton => {
                let group = (vec_height / tile_width).max(1);
                zorder::scv_block_order(n_block_rows, n_tile_cols, group)
                    .into_iter()
                    .map(|(r, c)| (r as u32, c as u32))
                    .collect()
            }
        };
        let mut position = vec![0usize; n_block_rows * n_tile_cols];
        for (pos, &(br, tc)) in block_order.iter().enumerate() {
            position[br as usize * n_tile_cols + tc as usize] = pos;
        }

        let mut counts = vec![0usize; block_order.len() + 1];
        let tile_of = |t: &Triplet| position[(t.row / vec_height) * n_tile_cols + t.col / tile_width];
        for t in &m.triplets {
            counts[tile_of(t) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let blk_ptr = counts.clone();
        let mut cursor = counts;
        // (col offset, row offset, value), scattered by tile then sorted in place
        let mut slots = vec![(0u32, 0u32, 0.0f64); m.nnz()];
        for t in &m.triplets {
            let p = tile_of(t);
            slots[cursor[p]] = (
                (t.col % tile_width) as u32,
                (t.row % vec_height) as u32,
                t.value,
            );
            cursor[p] += 1;
        }
        for p in 0..block_order.len() {
            slots[blk_ptr[p]..blk_ptr[p + 1]].sort_by_key(|s| (s.0, s.1));
        }
        let blk_id = slots.iter().map(|s| s.1).collect();
        let blk_col = if tile_width > 1 {
            slots.iter().map(|s| s.0).collect()
        } else {
            Vec::new()
        };
        let values = slots.iter().map(|s| s.2).collect();
        Ok(ScvMatrix {
            n_rows: m.n_rows,
            n_cols: m.n_cols,
            vec_height,
            tile_width,
            order,
            block_order,
            blk_ptr,
            blk_id,
            blk_col,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn n_block_rows(&self) -> usize {
        self.n_rows.div_ceil(self.vec_height)
    }

    pub fn n_tile_cols(&self) -> usize {
        self.n_cols.div_ceil(self.tile_width)
    }

    /// Number of tile positions (vectors when `tile_width == 1`).
    pub fn n_tiles(&self) -> usize {
        self.block_order.len()
    }

    pub fn tile_range(&self, pos: usize) -> std::ops::Range<usize> {
        self.blk_ptr[pos]..self.blk_ptr[pos + 1]
    }

    /// Column offset of entry `k` inside its tile.
    pub fn col_offset(&self, k: usize) -> usize {
        if self.tile_width == 1 {
            0
        } else {
            self.blk_col[k] as usize
        }
    }

    /// Global `(row, col)` of entry `k`, which must lie in tile position `pos`.
    pub fn coord(&self, pos: usize, k: usize) -> (usize, usize) {
        let (br, tc) = self.block_order[pos];
        (
            br as usize * self.vec_height + self.blk_id[k] as usize,
            tc as usize * self.tile_width + self.col_offset(k),
        )
    }

    /// Bits needed per nonzero for the intra-vector row offset.
    pub fn index_bits(&self) -> u32 {
        self.vec_height.trailing_zeros()
    }

    pub fn validate(&self) -> Result<()> {
        check_pow2("vector height", self.vec_height)?;
        check_pow2("tile width", self.tile_width)?;
        let nbr = self.n_block_rows();
        let ntc = self.n_tile_cols();
        if self.block_order.len() != nbr * ntc {
            return Err(Error::Malformed("scv: block order has wrong length".into()));
        }
        let mut seen = vec![false; nbr * ntc];
        for &(br, tc) in &self.block_order {
            let (br, tc) = (br as usize, tc as usize);
            if br >= nbr || tc >= ntc || std::mem::replace(&mut seen[br * ntc + tc], true) {
                return Err(Error::Malformed(format!(
                    "scv: block order is not a bijection at ({br}, {tc})"
                )));
            }
        }
        if self.blk_ptr.len() != self.n_tiles() + 1 || self.blk_ptr[0] != 0 {
            return Err(Error::Malformed("scv: bad block pointer".into()));
        }
        if *self.blk_ptr.last().unwrap() != self.values.len()
            || self.blk_id.len() != self.values.len()
            || (self.tile_width > 1 && self.blk_col.len() != self.values.len())
            || (self.tile_width == 1 && !self.blk_col.is_empty())
        {
            return Err(Error::Malformed("scv: array lengths disagree".into()));
        }
        for pos in 0..self.n_tiles() {
            if self.blk_ptr[pos] > self.blk_ptr[pos + 1] {
                return Err(Error::Malformed(format!("scv: pointer decreases at {pos}")));
            }
            let mut prev: Option<(usize, u32)> = None;
            for k in self.tile_range(pos) {
                let id = self.blk_id[k];
                let off = self.col_offset(k);
                if id as usize >= self.vec_height || off >= self.tile_width {
                    return Err(Error::Malformed(format!(
                        "scv: entry {k} of tile {pos} has offset ({id}, {off}) outside the tile"
                    )));
                }
                let (r, c) = self.coord(pos, k);
                if r >= self.n_rows || c >= self.n_cols {
                    return Err(Error::Malformed(format!(
                        "scv: entry {k} of tile {pos} lies in the padding at ({r}, {c})"
                    )));
                }
                if let Some(p) = prev {
                    if (off, id) <= p {
                        return Err(Error::Malformed(format!(
                            "scv: offsets not strictly increasing in tile {pos}"
                        )));
                    }
                }
                prev = Some((off, id));
            }
        }
        Ok(())
    }
}

impl SparseMatrix for ScvMatrix {
    fn n_rows(&self) -> usize {
        self.n_rows
    }
    fn n_cols(&self) -> usize {
        self.n_cols
    }
    fn stored_values(&self) -> usize {
        self.values.len()
    }
    fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for pos in 0..self.n_tiles() {
            for k in self.tile_range(pos) {
                let (r, c) = self.coord(pos, k);
                d.set(r, c, self.values[k]);
            }
        }
        d
    }
}

pub fn coo_to_csr(m: &CooMatrix) -> CsrMatrix {
    CsrMatrix::from_coo(m)
}

pub fn coo_to_csc(m: &CooMatrix) -> CscMatrix {
    CscMatrix::from_coo(m)
}

pub fn coo_to_bcsr(m: &CooMatrix, block_size: usize) -> Result<BcsrMatrix> {
    BcsrMatrix::from_coo(m, block_size)
}

pub fn coo_to_scv(
    m: &CooMatrix,
    vec_height: usize,
    tile_width: usize,
    order: OrderKind,
) -> Result<ScvMatrix> {
    ScvMatrix::from_coo(m, vec_height, tile_width, order)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The 4x4 worked example used throughout the tests.
    pub(crate) fn a4() -> CooMatrix {
        let t = [
            (0, 0, 1.0),
            (0, 2, 2.0),
            (1, 1, 3.0),
            (2, 1, 4.0),
            (2, 2, 5.0),
            (3, 0, 6.0),
            (3, 3, 7.0),
        ];
        CooMatrix::new(4, 4, t.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect()).unwrap()
    }

    #[test]
    fn coo_rejects_duplicates_and_out_of_range() {
        let dup = vec![Triplet::new(1, 2, 1.0), Triplet::new(1, 2, 3.0)];
        assert_eq!(
            CooMatrix::new(3, 3, dup),
            Err(Error::DuplicateEntry { row: 1, col: 2 })
        );
        let oob = vec![Triplet::new(3, 0, 1.0)];
        assert!(matches!(
            CooMatrix::new(3, 3, oob),
            Err(Error::IndexOutOfRange { row: 3, .. })
        ));
    }

    #[test]
    fn csr_examples() {
        let e = CsrMatrix::from_coo(&CooMatrix::empty(4, 4));
        assert_eq!(e.row_ptr, vec![0, 0, 0, 0, 0]);
        assert!(e.values.is_empty());

        let i = CsrMatrix::from_coo(&CooMatrix::identity(4));
        assert_eq!(i.row_ptr, vec![0, 1, 2, 3, 4]);
        assert_eq!(i.col_id, vec![0, 1, 2, 3]);
        assert_eq!(i.values, vec![1.0; 4]);

        let a = CsrMatrix::from_coo(&a4());
        assert_eq!(a.values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(a.col_id, vec![0, 2, 1, 1, 2, 0, 3]);
        assert_eq!(a.row_ptr, vec![0, 2, 3, 5, 7]);
        assert_eq!(a.to_dense(), a4().to_dense());
        a.validate().unwrap();
    }

    #[test]
    fn csc_examples() {
        let e = CscMatrix::from_coo(&CooMatrix::empty(4, 4));
        assert_eq!(e.col_ptr, vec![0; 5]);

        let i = CscMatrix::from_coo(&CooMatrix::identity(4));
        assert_eq!(i.col_ptr, vec![0, 1, 2, 3, 4]);
        assert_eq!(i.row_id, vec![0, 1, 2, 3]);

        let a = CscMatrix::from_coo(&a4());
        assert_eq!(a.values, vec![1.0, 6.0, 3.0, 4.0, 2.0, 5.0, 7.0]);
        assert_eq!(a.row_id, vec![0, 3, 1, 2, 0, 2, 3]);
        assert_eq!(a.col_ptr, vec![0, 2, 4, 6, 7]);
        assert_eq!(a.to_dense(), a4().to_dense());
    }

    #[test]
    fn bcsr_examples() {
        let e = BcsrMatrix::from_coo(&CooMatrix::empty(4, 4), 2).unwrap();
        assert_eq!(e.n_blocks(), 0);

        let a = BcsrMatrix::from_coo(&a4(), 2).unwrap();
        assert_eq!(a.n_blocks(), 4);
        assert_eq!(a.row_ptr, vec![0, 2, 4]);
        assert_eq!(a.col_id, vec![0, 1, 0, 1]);
        assert_eq!(a.block(1), &[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(a.to_dense(), a4().to_dense());

        let one = CooMatrix::new(4, 4, vec![Triplet::new(0, 0, 9.0)]).unwrap();
        let b = BcsrMatrix::from_coo(&one, 2).unwrap();
        assert_eq!(b.stored_values(), 4);
        assert_eq!(b.values.iter().filter(|v| **v == 0.0).count(), 3);

        assert!(matches!(
            BcsrMatrix::from_coo(&a4(), 3),
            Err(Error::NotPowerOfTwo { .. })
        ));
    }

    #[test]
    fn bcsr_edge_blocks_are_padded() {
        let m = CooMatrix::new(3, 3, vec![Triplet::new(2, 2, 1.0)]).unwrap();
        let b = BcsrMatrix::from_coo(&m, 2).unwrap();
        assert_eq!(b.block(0), &[1.0, 0.0, 0.0, 0.0]);
        b.validate().unwrap();
        assert_eq!(b.to_dense(), m.to_dense());
    }

    #[test]
    fn scv_row_major_example() {
        let s = ScvMatrix::from_coo(&a4(), 2, 1, OrderKind::RowMajor).unwrap();
        assert_eq!(s.values, vec![1.0, 3.0, 2.0, 6.0, 4.0, 5.0, 7.0]);
        assert_eq!(s.blk_id, vec![0, 1, 0, 1, 0, 0, 1]);
        assert_eq!(s.blk_ptr, vec![0, 1, 2, 3, 3, 4, 5, 6, 7]);
        assert_eq!(s.to_dense(), a4().to_dense());
        s.validate().unwrap();

        let i = ScvMatrix::from_coo(&CooMatrix::identity(4), 4, 1, OrderKind::RowMajor).unwrap();
        assert_eq!(i.blk_ptr, vec![0, 1, 2, 3, 4]);
        assert_eq!(i.blk_id, vec![0, 1, 2, 3]);
    }

    #[test]
    fn scv_z_order_example() {
        // A 2x2 super-grid visited TL, TR, BL, BR coincides with row-major.
        let z = ScvMatrix::from_coo(&a4(), 2, 1, OrderKind::ZMorton).unwrap();
        let r = ScvMatrix::from_coo(&a4(), 2, 1, OrderKind::RowMajor).unwrap();
        assert_eq!(z.block_order, r.block_order);
        assert_eq!(z.values, vec![1.0, 3.0, 2.0, 6.0, 4.0, 5.0, 7.0]);
        assert_eq!(z.to_dense(), a4().to_dense());

        // Unit-height vectors make the super-grid the element grid itself.
        let z1 = ScvMatrix::from_coo(&a4(), 1, 1, OrderKind::ZMorton).unwrap();
        assert_eq!(
            &z1.block_order[..8],
            &[(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (0, 3), (1, 2), (1, 3)]
        );
        assert_eq!(z1.values, vec![1.0, 3.0, 2.0, 4.0, 6.0, 5.0, 7.0]);
        assert_eq!(z1.to_dense(), a4().to_dense());
    }

    #[test]
    fn scv_wide_tiles() {
        let s = ScvMatrix::from_coo(&a4(), 2, 2, OrderKind::RowMajor).unwrap();
        assert_eq!(s.n_tiles(), 4);
        assert_eq!(s.blk_ptr, vec![0, 2, 3, 5, 7]);
        // tile (0,0): col 0 row 0 = 1, col 1 row 1 = 3
        assert_eq!(&s.values[0..2], &[1.0, 3.0]);
        assert_eq!(&s.blk_col[0..2], &[0, 1]);
        assert_eq!(s.to_dense(), a4().to_dense());
        s.validate().unwrap();
    }

    #[test]
    fn scv_validate_rejects_bad_blk_id() {
        let mut s = ScvMatrix::from_coo(&a4(), 2, 1, OrderKind::RowMajor).unwrap();
        s.blk_id[3] = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn scv_full_height_matches_csc() {
        let s = ScvMatrix::from_coo(&a4(), 4, 1, OrderKind::RowMajor).unwrap();
        let c = CscMatrix::from_coo(&a4());
        assert_eq!(s.values, c.values);
        assert_eq!(s.blk_ptr, c.col_ptr);
    }
}
