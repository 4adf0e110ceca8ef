//! SpMM processing orders.
//!
//! Each sparse format is turned into a [`Schedule`]: the ordered stream of
//! scalar multiply-add work items `PS[a_row, :] += a_value * Z[a_col, :]`
//! that the format's natural traversal produces. Executing any schedule must
//! reproduce the dense product exactly; only the order differs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{
    BcsrMatrix, CooMatrix, CscMatrix, CsrMatrix, DenseMatrix, OrderKind, ScvMatrix, SparseMatrix,
    Triplet,
};

const VALUE_BYTES: u64 = 8;
const INDEX_BYTES: u64 = 4;
const POINTER_BYTES: u64 = 4;

/// Format choice plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Format {
    Csr,
    Csc,
    Bcsr { block: usize },
    Scv { height: usize, width: usize, order: OrderKind },
    Multipass,
}

impl Format {
    pub fn scv(height: usize) -> Self {
        Format::Scv {
            height,
            width: 1,
            order: OrderKind::RowMajor,
        }
    }

    pub fn scv_z(height: usize) -> Self {
        Format::Scv {
            height,
            width: 1,
            order: OrderKind::ZMorton,
        }
    }

    pub fn is_scv(&self) -> bool {
        matches!(self, Format::Scv { .. })
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Format::Csr => write!(f, "csr"),
            Format::Csc => write!(f, "csc"),
            Format::Multipass => write!(f, "mp"),
            Format::Bcsr { block } => write!(f, "bcsr:{block}"),
            Format::Scv {
                height,
                width,
                order,
            } => {
                let name = match order {
                    OrderKind::RowMajor => "scv",
                    OrderKind::ZMorton => "scv-z",
                };
                if width == 1 {
                    write!(f, "{name}:{height}")
                } else {
                    write!(f, "{name}:{height}x{width}")
                }
            }
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    /// Accepts `csr`, `csc`, `mp`, `bcsr:<B>`, `scv[:<B>[x<W>]]`, `scv-z[:<B>[x<W>]]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let num = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad number '{v}' in format '{s}'")))
        };
        match (name, arg) {
            ("csr", None) => Ok(Format::Csr),
            ("csc", None) => Ok(Format::Csc),
            ("mp" | "multipass", None) => Ok(Format::Multipass),
            ("bcsr", a) => Ok(Format::Bcsr {
                block: a.map(num).transpose()?.unwrap_or(16),
            }),
            ("scv" | "scv-z", a) => {
                let order = if name == "scv" {
                    OrderKind::RowMajor
                } else {
                    OrderKind::ZMorton
                };
                let (height, width) = match a {
                    None => (512, 1),
                    Some(a) => match a.split_once('x') {
                        Some((h, w)) => (num(h)?, num(w)?),
                        None => (num(a)?, 1),
                    },
                };
                Ok(Format::Scv {
                    height,
                    width,
                    order,
                })
            }
            _ => Err(Error::Config(format!("unknown format '{s}'"))),
        }
    }
}

/// One scalar-times-row update. `padding` marks explicit zeros stored by BCSR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkItem {
    pub a_value: f64,
    /// PS row (adjacency row).
    pub a_row: u32,
    /// Z row (adjacency column).
    pub a_col: u32,
    pub padding: bool,
}

impl WorkItem {
    fn new(row: usize, col: usize, value: f64) -> Self {
        WorkItem {
            a_value: value,
            a_row: row as u32,
            a_col: col as u32,
            padding: false,
        }
    }
}

/// A non-empty SCV tile: its items and the Z rows the tile spans.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemGroup {
    pub items: Range<usize>,
    pub z_rows: Range<u32>,
    pub block_row: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub format: Format,
    pub n_rows: usize,
    pub n_cols: usize,
    pub items: Vec<WorkItem>,
    /// Non-empty tiles in processing order (SCV family only).
    pub groups: Vec<ItemGroup>,
    /// Start offset of each pass into `items` (multipass only).
    pub passes: Vec<usize>,
    /// Bytes of adjacency structure the command generator streams in.
    pub adjacency_bytes: u64,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn padding_items(&self) -> usize {
        self.items.iter().filter(|i| i.padding).count()
    }

    pub fn nnz(&self) -> usize {
        self.items.len() - self.padding_items()
    }

    /// Restriction to a contiguous range of SCV groups, for static partitioning.
    pub fn subset_groups(&self, groups: Range<usize>) -> Schedule {
        let gs = &self.groups[groups];
        let start = gs.first().map_or(0, |g| g.items.start);
        let end = gs.last().map_or(0, |g| g.items.end);
        let share = if self.items.is_empty() {
            0
        } else {
            self.adjacency_bytes * (end - start) as u64 / self.items.len() as u64
        };
        Schedule {
            format: self.format,
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            items: self.items[start..end].to_vec(),
            groups: gs
                .iter()
                .map(|g| ItemGroup {
                    items: g.items.start - start..g.items.end - start,
                    ..g.clone()
                })
                .collect(),
            passes: Vec::new(),
            adjacency_bytes: share,
        }
    }
}

pub fn dense_spmm(a: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
    if a.n_cols() != z.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} times {}x{}",
            a.n_rows(),
            a.n_cols(),
            z.n_rows(),
            z.n_cols()
        )));
    }
    let mut out = DenseMatrix::zeros(a.n_rows(), z.n_cols());
    for i in 0..a.n_rows() {
        for j in 0..z.n_cols() {
            let mut acc = 0.0;
            for k in 0..a.n_cols() {
                acc += a.get(i, k) * z.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

pub fn csr_schedule(m: &CsrMatrix) -> Schedule {
    let mut items = Vec::with_capacity(m.nnz());
    let mut rows_used = 0u64;
    for r in 0..m.n_rows {
        let range = m.row_ptr[r]..m.row_ptr[r + 1];
        rows_used += (!range.is_empty()) as u64;
        for k in range {
            items.push(WorkItem::new(r, m.col_id[k], m.values[k]));
        }
    }
    Schedule {
        format: Format::Csr,
        n_rows: m.n_rows,
        n_cols: m.n_cols,
        adjacency_bytes: rows_used * POINTER_BYTES + items.len() as u64 * (VALUE_BYTES + INDEX_BYTES),
        items,
        groups: Vec::new(),
        passes: Vec::new(),
    }
}

pub fn csc_schedule(m: &CscMatrix) -> Schedule {
    let mut items = Vec::with_capacity(m.nnz());
    let mut cols_used = 0u64;
    for c in 0..m.n_cols {
        let range = m.col_ptr[c]..m.col_ptr[c + 1];
        cols_used += (!range.is_empty()) as u64;
        for k in range {
            items.push(WorkItem::new(m.row_id[k], c, m.values[k]));
        }
    }
    Schedule {
        format: Format::Csc,
        n_rows: m.n_rows,
        n_cols: m.n_cols,
        adjacency_bytes: cols_used * POINTER_BYTES + items.len() as u64 * (VALUE_BYTES + INDEX_BYTES),
        items,
        groups: Vec::new(),
        passes: Vec::new(),
    }
}

/// Blocks in block-row-major order, each expanded densely; positions that
/// fall outside the matrix are skipped, stored zeros become padding items.
pub fn bcsr_schedule(m: &BcsrMatrix) -> Schedule {
    let b = m.block_size;
    let mut items = Vec::with_capacity(m.values.len());
    let mut rows_used = 0u64;
    for br in 0..m.n_block_rows() {
        let range = m.row_ptr[br]..m.row_ptr[br + 1];
        rows_used += (!range.is_empty()) as u64;
        for k in range {
            let bc = m.col_id[k];
            let blk = m.block(k);
            for r in 0..b {
                for c in 0..b {
                    let (gr, gc) = (br * b + r, bc * b + c);
                    if gr >= m.n_rows || gc >= m.n_cols {
                        continue;
                    }
                    let v = blk[r * b + c];
                    items.push(WorkItem {
                        padding: v == 0.0,
                        ..WorkItem::new(gr, gc, v)
                    });
                }
            }
        }
    }
    Schedule {
        format: Format::Bcsr { block: b },
        n_rows: m.n_rows,
        n_cols: m.n_cols,
        adjacency_bytes: rows_used * POINTER_BYTES
            + m.n_blocks() as u64 * (INDEX_BYTES + (b * b) as u64 * VALUE_BYTES),
        items,
        groups: Vec::new(),
        passes: Vec::new(),
    }
}

fn offset_bytes(extent: usize) -> u64 {
    (extent.trailing_zeros() as u64).div_ceil(8)
}

/// Tiles in `block_order`; within a tile, column by column and by ascending
/// row offset.
pub fn scv_schedule(m: &ScvMatrix) -> Schedule {
    let mut items = Vec::with_capacity(m.nnz());
    let mut groups = Vec::new();
    for pos in 0..m.n_tiles() {
        let range = m.tile_range(pos);
        if range.is_empty() {
            continue;
        }
        let (br, tc) = m.block_order[pos];
        let start = items.len();
        for k in range {
            let (r, c) = m.coord(pos, k);
            items.push(WorkItem::new(r, c, m.values[k]));
        }
        let c0 = tc as usize * m.tile_width;
        groups.push(ItemGroup {
            items: start..items.len(),
            z_rows: c0 as u32..(c0 + m.tile_width).min(m.n_cols) as u32,
            block_row: br,
        });
    }
    let per_entry = VALUE_BYTES + offset_bytes(m.vec_height).max(1) + offset_bytes(m.tile_width);
    Schedule {
        format: Format::Scv {
            height: m.vec_height,
            width: m.tile_width,
            order: m.order,
        },
        n_rows: m.n_rows,
        n_cols: m.n_cols,
        adjacency_bytes: groups.len() as u64 * (POINTER_BYTES + INDEX_BYTES)
            + items.len() as u64 * per_entry,
        items,
        groups,
        passes: Vec::new(),
    }
}

/// Scratchpad capacities, in rows, that bound what one multipass pass may
/// keep resident.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidencyPolicy {
    pub z_rows: usize,
    pub ps_rows: usize,
}

impl ResidencyPolicy {
    pub fn unconstrained() -> Self {
        ResidencyPolicy {
            z_rows: usize::MAX,
            ps_rows: usize::MAX,
        }
    }
}

/// LRU row set whose rows can be locked for the rest of a pass.
struct PassResidency {
    cap: usize,
    stamp_of: HashMap<u32, u64>,
    by_stamp: BTreeMap<u64, u32>,
    locked_in_pass: HashMap<u32, usize>,
}

impl PassResidency {
    fn new(cap: usize) -> Self {
        PassResidency {
            cap,
            stamp_of: HashMap::new(),
            by_stamp: BTreeMap::new(),
            locked_in_pass: HashMap::new(),
        }
    }

    fn is_locked(&self, row: u32, pass: usize) -> bool {
        self.locked_in_pass.get(&row) == Some(&pass)
    }

    /// Whether `row` is resident or can be loaded without evicting a row
    /// already used in this pass. Locked rows are always the most recently
    /// stamped, so only the oldest entry needs checking.
    fn can_hold(&self, row: u32, pass: usize) -> bool {
        if self.stamp_of.contains_key(&row) || self.stamp_of.len() < self.cap {
            return true;
        }
        match self.by_stamp.first_key_value() {
            Some((_, &oldest)) => !self.is_locked(oldest, pass),
            None => false,
        }
    }

    fn use_row(&mut self, row: u32, pass: usize, stamp: u64) {
        if let Some(old) = self.stamp_of.insert(row, stamp) {
            self.by_stamp.remove(&old);
        } else if self.stamp_of.len() > self.cap {
            let (_, victim) = self.by_stamp.pop_first().expect("non-empty");
            self.stamp_of.remove(&victim);
        }
        self.by_stamp.insert(stamp, row);
        self.locked_in_pass.insert(row, pass);
    }
}

/// Multipass baseline: repeated row-major scans over the remaining nonzeros,
/// emitting an item only when both its Z row and PS row are resident or can be
/// loaded without evicting rows already used in the current pass.
pub fn mp_schedule(m: &CooMatrix, residency: ResidencyPolicy) -> Result<Schedule> {
    if residency.z_rows == 0 || residency.ps_rows == 0 {
        return Err(Error::Config(
            "multipass needs room for at least one Z row and one PS row".into(),
        ));
    }
    let mut remaining: Vec<Triplet> = m.sorted_row_major();
    let mut z = PassResidency::new(residency.z_rows);
    let mut ps = PassResidency::new(residency.ps_rows);
    let mut items = Vec::with_capacity(remaining.len());
    let mut passes = Vec::new();
    let mut scanned = 0u64;
    let mut stamp = 0u64;
    let mut pass = 0usize;
    while !remaining.is_empty() {
        passes.push(items.len());
        scanned += remaining.len() as u64;
        let mut skipped = Vec::new();
        for t in remaining {
            let (r, c) = (t.row as u32, t.col as u32);
            if z.can_hold(c, pass) && ps.can_hold(r, pass) {
                stamp += 1;
                z.use_row(c, pass, stamp);
                ps.use_row(r, pass, stamp);
                items.push(WorkItem::new(t.row, t.col, t.value));
            } else {
                skipped.push(t);
            }
        }
        remaining = skipped;
        pass += 1;
    }
    Ok(Schedule {
        format: Format::Multipass,
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        items,
        groups: Vec::new(),
        passes,
        adjacency_bytes: scanned * (VALUE_BYTES + 2 * INDEX_BYTES),
    })
}

/// Builds the schedule for `format` from COO input.
pub fn build_schedule(
    m: &CooMatrix,
    format: Format,
    residency: ResidencyPolicy,
) -> Result<Schedule> {
    Ok(match format {
        Format::Csr => csr_schedule(&CsrMatrix::from_coo(m)),
        Format::Csc => csc_schedule(&CscMatrix::from_coo(m)),
        Format::Bcsr { block } => bcsr_schedule(&BcsrMatrix::from_coo(m, block)?),
        Format::Scv {
            height,
            width,
            order,
        } => scv_schedule(&ScvMatrix::from_coo(m, height, width, order)?),
        Format::Multipass => mp_schedule(m, residency)?,
    })
}

/// `PS[a_row, :] += a_value * Z[a_col, :]` for every item, in order.
pub fn execute_schedule(s: &Schedule, z: &DenseMatrix, mut ps: DenseMatrix) -> Result<DenseMatrix> {
    if z.n_rows() != s.n_cols || ps.n_rows() != s.n_rows || ps.n_cols() != z.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "schedule {}x{}, Z {}x{}, PS {}x{}",
            s.n_rows,
            s.n_cols,
            z.n_rows(),
            z.n_cols(),
            ps.n_rows(),
            ps.n_cols()
        )));
    }
    for it in &s.items {
        if it.padding {
            continue;
        }
        let zr = z.row(it.a_col as usize);
        for (p, zv) in ps.row_mut(it.a_row as usize).iter_mut().zip(zr) {
            *p += it.a_value * zv;
        }
    }
    Ok(ps)
}

/// Z = H W with H held as SCV: each non-empty column vector of H pairs with
/// the weight row of the same index.
pub fn combination(h: &ScvMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if h.n_cols != w.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{}, W is {}x{}",
            h.n_rows,
            h.n_cols,
            w.n_rows(),
            w.n_cols()
        )));
    }
    execute_schedule(&scv_schedule(h), w, DenseMatrix::zeros(h.n_rows, w.n_cols()))
}

/// GCN propagation weights: `D^-1/2 (A + I) D^-1/2`, degrees taken as row
/// sums after the self-loops are added.
pub fn gcn_normalize(a: &CooMatrix) -> Result<CooMatrix> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "adjacency must be square, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let n = a.n_rows();
    let mut entries: Vec<Triplet> = a.triplets().to_vec();
    let mut has_loop = vec![false; n];
    for t in entries.iter_mut().filter(|t| t.row == t.col) {
        t.value += 1.0;
        has_loop[t.row] = true;
    }
    entries.extend((0..n).filter(|&i| !has_loop[i]).map(|i| Triplet::new(i, i, 1.0)));
    let mut deg = vec![0.0f64; n];
    for t in &entries {
        deg[t.row] += t.value;
    }
    for t in &mut entries {
        t.value /= (deg[t.row] * deg[t.col]).sqrt();
    }
    CooMatrix::new(n, n, entries)
}

pub fn relu(m: &mut DenseMatrix) {
    for r in 0..m.n_rows() {
        for v in m.row_mut(r) {
            *v = v.max(0.0);
        }
    }
}

/// Dense reference for any sparse adjacency.
pub fn reference_aggregation(a: &dyn SparseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
    dense_spmm(&a.to_dense(), z)
}
