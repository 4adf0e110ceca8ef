#![allow(dead_code)]

//! Randomized invariants for formats, zorder and kernels. Each check runs a
//! deterministic proptest runner and reports the first failure as a string.

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scv_core::formats::{BcsrMatrix, CscMatrix, CsrMatrix, SparseMatrix};
use scv_core::kernels::{build_schedule, dense_spmm, execute_schedule, mp_schedule, ResidencyPolicy};
use scv_core::zorder::{scv_block_order, z_decode, z_encode};
use scv_core::{CooMatrix, DenseMatrix, Format, OrderKind, ScvMatrix, Triplet};

pub const CASES: u32 = 1000;

fn runner(cases: u32) -> TestRunner {
    let cfg = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// Shape and density of a random adjacency.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
    pub density: f64,
    pub seed: u64,
}

pub fn shape(max_dim: usize) -> impl Strategy<Value = Shape> {
    (1..=max_dim, 1..=max_dim, -4.0f64..-1.0, any::<u64>()).prop_map(|(rows, cols, e, seed)| Shape {
        rows,
        cols,
        density: 10f64.powf(e),
        seed,
    })
}

/// Distinct positions with small nonzero integer values. At least one entry
/// whenever the density rounds to zero, so sparse shapes are not all empty.
pub fn coo(s: Shape) -> CooMatrix {
    let cells = s.rows * s.cols;
    let want = ((cells as f64 * s.density).round() as usize).clamp(1, cells);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut seen = HashSet::new();
    let mut t = Vec::with_capacity(want);
    while t.len() < want {
        let (r, c) = (rng.gen_range(0..s.rows), rng.gen_range(0..s.cols));
        if seen.insert((r, c)) {
            let mut v = rng.gen_range(-4i32..=3);
            if v >= 0 {
                v += 1;
            }
            t.push(Triplet::new(r, c, v as f64));
        }
    }
    CooMatrix::new(s.rows, s.cols, t).unwrap()
}

pub fn features(rows: usize, f: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    DenseMatrix::from_fn(rows, f, |_, _| rng.gen_range(-8i32..=8) as f64)
}

fn pow2(max_log: u32) -> impl Strategy<Value = usize> {
    (0..=max_log).prop_map(|k| 1usize << k)
}

fn order() -> impl Strategy<Value = OrderKind> {
    prop_oneof![Just(OrderKind::RowMajor), Just(OrderKind::ZMorton)]
}

pub fn format() -> impl Strategy<Value = Format> {
    prop_oneof![
        Just(Format::Csr),
        Just(Format::Csc),
        Just(Format::Multipass),
        pow2(4).prop_map(|block| Format::Bcsr { block }),
        (pow2(6), pow2(3), order()).prop_map(|(height, width, order)| Format::Scv { height, width, order }),
    ]
}

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(TestCaseError::fail(format!($($msg)+)));
        }
    };
}

pub fn round_trip(cases: u32) -> Result<(), String> {
    run(cases, (shape(256), pow2(4), pow2(6), pow2(3), order()), |(s, block, h, w, o)| {
        let m = coo(s);
        let want = m.to_dense();
        check!(CsrMatrix::from_coo(&m).to_dense() == want, "csr {s:?}");
        check!(CscMatrix::from_coo(&m).to_dense() == want, "csc {s:?}");
        let b = BcsrMatrix::from_coo(&m, block).unwrap();
        check!(b.to_dense() == want, "bcsr:{block} {s:?}");
        let v = ScvMatrix::from_coo(&m, h, w, o).unwrap();
        check!(v.to_dense() == want, "scv {h}x{w} {o} {s:?}");
        Ok(())
    })
}

pub fn scv_index_bits(cases: u32) -> Result<(), String> {
    run(cases, (shape(256), pow2(8), order()), |(s, h, o)| {
        let v = ScvMatrix::from_coo(&coo(s), h, 1, o).unwrap();
        check!(v.index_bits() == h.trailing_zeros(), "index bits for B={h}");
        let limit = 1u64 << h.trailing_zeros();
        check!(v.blk_id.iter().all(|&b| (b as u64) < limit), "blk_id overflow B={h}");
        check!(v.blk_col.is_empty(), "unit width stores column offsets");
        Ok(())
    })
}

pub fn bcsr_dominance(cases: u32) -> Result<(), String> {
    run(cases, (shape(128), pow2(4)), |(s, block)| {
        let m = coo(s);
        let b = BcsrMatrix::from_coo(&m, block).unwrap();
        let mut per_block: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in m.triplets() {
            *per_block.entry((t.row / block, t.col / block)).or_default() += 1;
        }
        let all_full = per_block.values().all(|&c| c == block * block);
        check!(b.n_blocks() == per_block.len(), "block count");
        check!(b.stored_values() >= m.nnz(), "stored < nnz");
        check!((b.stored_values() == m.nnz()) == all_full, "equality iff full blocks");
        Ok(())
    })
}

pub fn scv_full_height_is_csc(cases: u32) -> Result<(), String> {
    run(cases, (0u32..=8, 1usize..=256, -4.0f64..-1.0, any::<u64>()), |(k, cols, e, seed)| {
        let s = Shape { rows: 1 << k, cols, density: 10f64.powf(e), seed };
        let m = coo(s);
        let v = ScvMatrix::from_coo(&m, s.rows, 1, OrderKind::RowMajor).unwrap();
        let c = CscMatrix::from_coo(&m);
        check!(v.values == c.values, "value order differs");
        let counts: Vec<usize> = v.blk_ptr.windows(2).map(|w| w[1] - w[0]).collect();
        let csc_counts: Vec<usize> = c.col_ptr.windows(2).map(|w| w[1] - w[0]).collect();
        check!(counts == csc_counts, "per-column counts differ");
        let ids: Vec<usize> = v.blk_id.iter().map(|&b| b as usize).collect();
        check!(ids == c.row_id, "row indices differ");
        Ok(())
    })
}

pub fn z_bijection(cases: u32) -> Result<(), String> {
    run(cases, (0u32..1024, 0u32..1024, 0u64..(1 << 20)), |(r, c, z)| {
        check!(z_decode(z_encode(r, c)) == (r, c), "decode(encode({r},{c}))");
        let (dr, dc) = z_decode(z);
        check!(z_encode(dr, dc) == z, "encode(decode({z}))");
        Ok(())
    })
}

pub fn z_quadrants_contiguous(cases: u32) -> Result<(), String> {
    run(cases, (0u32..=5, 0u32..32, 0u32..32), |(k, qr, qc)| {
        let side = 1u32 << k;
        let (r0, c0) = (qr * side, qc * side);
        let mut codes: Vec<u64> = (0..side)
            .flat_map(|i| (0..side).map(move |j| z_encode(r0 + i, c0 + j)))
            .collect();
        codes.sort_unstable();
        let lo = codes[0];
        check!(lo.is_multiple_of(1u64 << (2 * k)), "quadrant start not aligned");
        check!(codes.iter().enumerate().all(|(i, &z)| z == lo + i as u64), "gap in quadrant k={k}");
        Ok(())
    })
}

pub fn block_order_permutation(cases: u32) -> Result<(), String> {
    run(cases, (0usize..40, 0usize..40, 1usize..=16), |(rows, cols, group)| {
        let order = scv_block_order(rows, cols, group);
        check!(order.len() == rows * cols, "length");
        let set: HashSet<_> = order.iter().copied().collect();
        check!(set.len() == order.len(), "repeated tile");
        check!(order.iter().all(|&(r, c)| r < rows && c < cols), "tile out of range");
        Ok(())
    })
}

pub fn oracle_equivalence(cases: u32) -> Result<(), String> {
    run(cases, (shape(512), 1usize..=64, format(), 1usize..64, 1usize..64), |(s, f, fmt, zr, pr)| {
        let m = coo(s);
        let z = features(s.cols, f, s.seed);
        let want = dense_spmm(&m.to_dense(), &z).unwrap();
        let sched = build_schedule(&m, fmt, ResidencyPolicy { z_rows: zr, ps_rows: pr })
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let got = execute_schedule(&sched, &z, DenseMatrix::zeros(s.rows, f)).unwrap();
        check!(got == want, "{fmt} on {s:?} F={f}");
        Ok(())
    })
}

pub fn schedule_completeness(cases: u32) -> Result<(), String> {
    run(cases, (shape(256), format()), |(s, fmt)| {
        let m = coo(s);
        let sched = build_schedule(&m, fmt, ResidencyPolicy::unconstrained()).unwrap();
        check!(sched.nnz() == m.nnz(), "{fmt}: {} items for {} nnz", sched.nnz(), m.nnz());
        let mut seen: Vec<(u32, u32)> = sched
            .items
            .iter()
            .filter(|i| !i.padding)
            .map(|i| (i.a_row, i.a_col))
            .collect();
        seen.sort_unstable();
        let mut want: Vec<(u32, u32)> = m.triplets().iter().map(|t| (t.row as u32, t.col as u32)).collect();
        want.sort_unstable();
        check!(seen == want, "{fmt}: coordinates differ");
        if let Format::Bcsr { block } = fmt {
            let b = BcsrMatrix::from_coo(&m, block).unwrap();
            // Cells past the matrix edge have no Z or PS row and are not issued.
            let bb = &b;
            let in_range: usize = (0..b.n_block_rows())
                .flat_map(|br| (bb.row_ptr[br]..bb.row_ptr[br + 1]).map(move |k| (br, bb.col_id[k])))
                .map(|(br, bc)| {
                    (s.rows.min((br + 1) * block) - br * block) * (s.cols.min((bc + 1) * block) - bc * block)
                })
                .sum();
            check!(sched.padding_items() == in_range - m.nnz(), "bcsr padding");
            if s.rows % block == 0 && s.cols % block == 0 {
                check!(
                    sched.padding_items() == block * block * b.n_blocks() - m.nnz(),
                    "bcsr padding on aligned dims"
                );
            }
        } else {
            check!(sched.padding_items() == 0, "{fmt} padded");
        }
        Ok(())
    })
}

pub fn scv_vector_locality(cases: u32) -> Result<(), String> {
    run(cases, (shape(256), pow2(6), pow2(3), order()), |(s, h, w, o)| {
        let m = coo(s);
        let sched = build_schedule(&m, Format::Scv { height: h, width: w, order: o }, ResidencyPolicy::unconstrained())
            .unwrap();
        for g in &sched.groups {
            let items = &sched.items[g.items.clone()];
            // Each column of a tile is one vector: its items are contiguous.
            let mut cols: Vec<u32> = items.iter().map(|i| i.a_col).collect();
            cols.dedup();
            let distinct: HashSet<u32> = cols.iter().copied().collect();
            check!(cols.len() == distinct.len(), "vector split inside a tile");
            check!(items.iter().all(|i| g.z_rows.contains(&i.a_col)), "item outside tile columns");
            let rows: HashSet<u32> = items.iter().map(|i| i.a_row).collect();
            check!(rows.len() <= h, "more than B output rows in one block row");
            check!(
                items.iter().all(|i| i.a_row as usize / h == g.block_row as usize),
                "item outside its block row"
            );
        }
        Ok(())
    })
}

pub fn multipass_cover(cases: u32) -> Result<(), String> {
    run(cases, (shape(128), 1usize..32, 1usize..32), |(s, zr, pr)| {
        let m = coo(s);
        let sched = mp_schedule(&m, ResidencyPolicy { z_rows: zr, ps_rows: pr }).unwrap();
        check!(!sched.passes.is_empty(), "no passes");
        check!(sched.passes[0] == 0, "first pass offset");
        check!(sched.passes.windows(2).all(|w| w[0] < w[1]), "empty pass");
        let mut seen: Vec<(u32, u32)> = sched.items.iter().map(|i| (i.a_row, i.a_col)).collect();
        seen.sort_unstable();
        let before = seen.len();
        seen.dedup();
        check!(seen.len() == before && before == m.nnz(), "cover not exact");
        // Rows used in a pass stay locked, so a pass never exceeds capacity.
        let mut bounds = sched.passes.clone();
        bounds.push(sched.items.len());
        for w in bounds.windows(2) {
            let items = &sched.items[w[0]..w[1]];
            let z: HashSet<u32> = items.iter().map(|i| i.a_col).collect();
            let p: HashSet<u32> = items.iter().map(|i| i.a_row).collect();
            check!(z.len() <= zr, "pass holds {} Z rows, limit {zr}", z.len());
            check!(p.len() <= pr, "pass holds {} PS rows, limit {pr}", p.len());
        }
        Ok(())
    })
}

/// Every property, by name, for the acceptance gate.
pub type Property = fn(u32) -> Result<(), String>;

pub fn all() -> Vec<(&'static str, Property)> {
    vec![
        ("formats: round trip", round_trip),
        ("formats: SCV index bits", scv_index_bits),
        ("formats: BCSR cost dominance", bcsr_dominance),
        ("formats: full-height SCV is CSC", scv_full_height_is_csc),
        ("zorder: bijection", z_bijection),
        ("zorder: quadrant contiguity", z_quadrants_contiguous),
        ("zorder: block order permutation", block_order_permutation),
        ("kernels: oracle equivalence", oracle_equivalence),
        ("kernels: schedule completeness", schedule_completeness),
        ("kernels: SCV vector locality", scv_vector_locality),
        ("kernels: multipass cover", multipass_cover),
    ]
}
