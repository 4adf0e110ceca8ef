//! Z-Morton encoding and the SCV-Z tile order.
//!
//! Codes interleave coordinate bits with the column bit in the least
//! significant position of each pair, so a 2x2 grid is visited
//! (0,0), (0,1), (1,0), (1,1): top-left, top-right, bottom-left, bottom-right.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZIndex {
    value: u64,
    grid_bits: u32,
}

impl ZIndex {
    pub fn new(row: u64, col: u64, grid_bits: u32) -> Result<Self> {
        if grid_bits > 32 || (grid_bits < 32 && (row >> grid_bits != 0 || col >> grid_bits != 0)) {
            return Err(Error::ZOrderRange {
                row,
                col,
                grid_bits,
            });
        }
        Ok(ZIndex {
            value: z_encode(row as u32, col as u32),
            grid_bits,
        })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn grid_bits(self) -> u32 {
        self.grid_bits
    }

    pub fn decode(self) -> (u64, u64) {
        let (r, c) = z_decode(self.value);
        (r as u64, c as u64)
    }
}

/// Spreads the low 32 bits of `x` to the even bit positions.
fn spread(x: u32) -> u64 {
    let mut x = x as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn compact(x: u64) -> u32 {
    let mut x = x & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x as u32
}

pub fn z_encode(row: u32, col: u32) -> u64 {
    (spread(row) << 1) | spread(col)
}

pub fn z_decode(z: u64) -> (u32, u32) {
    (compact(z >> 1), compact(z))
}

/// Tile visit order for SCV-Z.
///
/// `group` consecutive tile columns of one block row form a super-block.
/// Super-blocks are visited in Z order over the enclosing power-of-two grid,
/// skipping codes that fall outside the real grid; tiles inside a super-block
/// are visited left to right. Returns `(block_row, tile_col)` pairs.
pub fn scv_block_order(n_block_rows: usize, n_tile_cols: usize, group: usize) -> Vec<(usize, usize)> {
    let group = group.max(1);
    let n_super_cols = n_tile_cols.div_ceil(group);
    let mut supers: Vec<(u64, usize, usize)> = (0..n_block_rows)
        .flat_map(|r| (0..n_super_cols).map(move |c| (z_encode(r as u32, c as u32), r, c)))
        .collect();
    supers.sort_unstable_by_key(|s| s.0);
    let mut out = Vec::with_capacity(n_block_rows * n_tile_cols);
    for (_, r, sc) in supers {
        for tc in sc * group..((sc + 1) * group).min(n_tile_cols) {
            out.push((r, tc));
        }
    }
    out
}
