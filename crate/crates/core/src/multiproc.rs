//! Static multi-processor split of an SCV schedule along its block order,
//! with buffered partial sums for output tiles that two processors write at
//! the same time and a final merge pass.

use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats::{CooMatrix, DenseMatrix, ScvMatrix};
use crate::kernels::{build_schedule, Format, Schedule};
use crate::memmodel::CacheConfig;
use crate::sim::{audit_hazards, residency_for, run_schedule, ProcessorConfig, SimStats};

/// A contiguous run of non-empty tiles assigned to one processor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub proc_id: usize,
    pub groups: Range<usize>,
    pub nnz: usize,
}

/// Splits `counts` into `n_proc` contiguous ranges whose sums differ by at
/// most `max(counts)`.
pub fn partition_counts(counts: &[usize], n_proc: usize) -> Result<Vec<Partition>> {
    if n_proc == 0 {
        return Err(Error::Config("processor count must be at least 1".into()));
    }
    let n = counts.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &c in counts {
        prefix.push(prefix.last().unwrap() + c);
    }
    let vmax = counts.iter().copied().max().unwrap_or(0);
    let cuts = match greedy_cuts(&prefix, n_proc) {
        c if spread(&prefix, &c) <= vmax => c,
        greedy => windowed_cuts(&prefix, n_proc, vmax).unwrap_or(greedy),
    };
    Ok(cuts
        .windows(2)
        .enumerate()
        .map(|(p, w)| Partition {
            proc_id: p,
            groups: w[0]..w[1],
            nnz: prefix[w[1]] - prefix[w[0]],
        })
        .collect())
}

/// Partitions over the non-empty tiles of `m`, in its block order.
pub fn partition(m: &ScvMatrix, n_proc: usize) -> Result<Vec<Partition>> {
    let counts: Vec<usize> = (0..m.n_tiles())
        .map(|p| m.tile_range(p).len())
        .filter(|&c| c > 0)
        .collect();
    partition_counts(&counts, n_proc)
}

fn spread(prefix: &[usize], cuts: &[usize]) -> usize {
    let sizes = cuts.windows(2).map(|w| prefix[w[1]] - prefix[w[0]]);
    let (lo, hi) = sizes.fold((usize::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s)));
    hi.saturating_sub(lo)
}

/// Cut `k` at the boundary nearest to `k * total / n_proc`.
fn greedy_cuts(prefix: &[usize], n_proc: usize) -> Vec<usize> {
    let n = prefix.len() - 1;
    let total = prefix[n] as u128;
    let mut cuts = vec![0];
    for k in 1..n_proc {
        let target = (k as u128 * total) as f64 / n_proc as f64;
        let j = prefix.partition_point(|&s| (s as f64) < target);
        let mut best = j.min(n);
        if j > 0 && (target - prefix[j - 1] as f64) <= (prefix[best] as f64 - target) {
            best = j - 1;
        }
        cuts.push(best.max(*cuts.last().unwrap()));
    }
    cuts.push(n);
    cuts
}

/// Finds cuts with every part in `[lo, lo + vmax]`, trying `lo` downward from
/// the mean. Reachability per part count over prefix positions.
fn windowed_cuts(prefix: &[usize], n_proc: usize, vmax: usize) -> Option<Vec<usize>> {
    let n = prefix.len() - 1;
    let total = prefix[n];
    let mean = total / n_proc;
    let lowest = total.div_ceil(n_proc).saturating_sub(vmax);
    for lo in (lowest..=mean).rev() {
        let hi = lo + vmax;
        let mut reach: Vec<Vec<bool>> = Vec::with_capacity(n_proc + 1);
        let mut first = vec![false; n + 1];
        first[0] = true;
        reach.push(first);
        for _ in 0..n_proc {
            let prev = reach.last().unwrap();
            let mut count = vec![0usize; n + 2];
            for i in 0..=n {
                count[i + 1] = count[i] + prev[i] as usize;
            }
            let mut next = vec![false; n + 1];
            let (mut a, mut b) = (0usize, 0usize);
            for j in 0..=n {
                // i in [a, b) satisfies lo <= prefix[j] - prefix[i] <= hi.
                while a < j && prefix[j] - prefix[a] > hi {
                    a += 1;
                }
                b = b.max(a);
                while b <= j && prefix[j] - prefix[b] >= lo {
                    b += 1;
                }
                next[j] = b > a && count[b] > count[a];
            }
            reach.push(next);
        }
        if !reach[n_proc][n] {
            continue;
        }
        let mut cuts = vec![n];
        let mut j = n;
        for k in (0..n_proc).rev() {
            let i = (0..=j)
                .rev()
                .find(|&i| reach[k][i] && (lo..=hi).contains(&(prefix[j] - prefix[i])))?;
            cuts.push(i);
            j = i;
        }
        cuts.reverse();
        return Some(cuts);
    }
    None
}

#[derive(Debug, Clone)]
pub struct MultiReport {
    pub n_proc: usize,
    pub partitions: Vec<Partition>,
    /// Timed statistics of each processor on its own partition.
    pub per_proc: Vec<SimStats>,
    /// Mean access time measured on each private cache.
    pub per_proc_mat: Vec<f64>,
    pub cache_misses: u64,
    /// Output tiles with at least one buffered copy.
    pub buffered_tiles: usize,
    /// PS rows written to a buffer instead of the output.
    pub buffered_rows: usize,
    pub merge_ops: u64,
    pub merge_bytes: u64,
    pub merge_cycles: u64,
    /// DRAM bytes over all private caches.
    pub dram_bytes: u64,
    /// Cycles the shared DRAM interface needs for `dram_bytes`. Reported
    /// only; latency comes from each processor's MAT-fed run.
    pub dram_floor_cycles: u64,
    /// Longest processor.
    pub max_proc_cycles: u64,
    /// The run without merging.
    pub ideal_cycles: u64,
    pub total_cycles: u64,
    /// Write-readback violations found in the processors' op logs.
    pub hazard_violations: usize,
    pub result: DenseMatrix,
}

/// Runs `format` (SCV family) on `n_proc` processors with private caches
/// behind one DRAM. Latency is the slowest processor plus the merge pass.
pub fn simulate_multi(
    a: &CooMatrix,
    z: &DenseMatrix,
    format: Format,
    cfg: &ProcessorConfig,
    cache: &CacheConfig,
    n_proc: usize,
) -> Result<MultiReport> {
    let s = build_schedule(a, format, residency_for(cfg, z.n_cols()))?;
    simulate_multi_schedule(&s, z, cfg, cache, n_proc)
}

pub fn simulate_multi_schedule(
    s: &Schedule,
    z: &DenseMatrix,
    cfg: &ProcessorConfig,
    cache: &CacheConfig,
    n_proc: usize,
) -> Result<MultiReport> {
    let Format::Scv { height, .. } = s.format else {
        return Err(Error::Config(format!(
            "multi-processor runs need an SCV schedule, got {}",
            s.format
        )));
    };
    cfg.validate()?;
    cache.validate()?;
    let counts: Vec<usize> = s.groups.iter().map(|g| g.items.len()).collect();
    let partitions = partition_counts(&counts, n_proc)?;

    let runs = partitions
        .par_iter()
        .map(|p| run_schedule(&s.subset_groups(p.groups.clone()), z, cfg, cache, true))
        .collect::<Result<Vec<_>>>()?;

    let hazard_violations = runs
        .iter()
        .map(|r| {
            audit_hazards(&r.ideal_ops, cfg.write_readback_latency).len()
                + audit_hazards(&r.timed.ops, cfg.write_readback_latency).len()
        })
        .sum();
    let mut result = DenseMatrix::zeros(s.n_rows, z.n_cols());
    for r in &runs {
        result.add_assign(r.result())?;
    }

    // Per output tile: each processor's write window and rows touched.
    let mut tiles: HashMap<u32, Vec<(usize, u64, u64, usize)>> = HashMap::new();
    for (p, r) in runs.iter().enumerate() {
        let mut per_tile: HashMap<u32, (u64, u64, usize)> = HashMap::new();
        for (&row, &(first, last)) in &r.timed.row_windows {
            let e = per_tile
                .entry(row / height as u32)
                .or_insert((u64::MAX, 0, 0));
            e.0 = e.0.min(first);
            e.1 = e.1.max(last);
            e.2 += 1;
        }
        for (t, (first, last, rows)) in per_tile {
            tiles.entry(t).or_default().push((p, first, last, rows));
        }
    }
    let mut buffered_tiles = 0;
    let mut buffered_rows = 0;
    for writers in tiles.values_mut() {
        if writers.len() < 2 {
            continue;
        }
        writers.sort_by_key(|&(p, first, _, _)| (first, p));
        let mut open_until = writers[0].2;
        let mut any = false;
        for &(_, first, last, rows) in &writers[1..] {
            if first <= open_until {
                buffered_rows += rows;
                any = true;
            }
            open_until = open_until.max(last);
        }
        buffered_tiles += any as usize;
    }

    let f = z.n_cols();
    let row_bytes = (f * cfg.value_bytes) as u64;
    let merge_ops = buffered_rows as u64 * f.div_ceil(cfg.n_pe) as u64;
    // Read the buffer copy and the output row, write the sum back.
    let merge_bytes = buffered_rows as u64 * row_bytes * 3;
    let mat = runs.iter().map(|r| r.mat_cycles).max().unwrap_or(1);
    // Every processor merges the tiles it owns; the buffer addresses are
    // known up front, so only the first access latency is exposed.
    let merge_cycles = if merge_ops == 0 {
        0
    } else {
        merge_ops.div_ceil((cfg.n_vpe * n_proc) as u64) + mat
    };

    let dram_bytes: u64 = runs.iter().map(|r| r.replay.dram_bytes).sum();
    let dram_floor_cycles = dram_bytes.div_ceil(cache.dram_bytes_per_cycle);
    let max_proc_cycles = runs.iter().map(|r| r.cycles()).max().unwrap_or(0);
    let ideal_cycles = max_proc_cycles;
    Ok(MultiReport {
        n_proc,
        partitions,
        per_proc: runs.iter().map(|r| r.timed.stats).collect(),
        per_proc_mat: runs.iter().map(|r| r.mat).collect(),
        cache_misses: runs.iter().map(|r| r.replay.misses).sum(),
        buffered_tiles,
        buffered_rows,
        merge_ops,
        merge_bytes,
        merge_cycles,
        dram_bytes,
        dram_floor_cycles,
        max_proc_cycles,
        ideal_cycles,
        total_cycles: ideal_cycles + merge_cycles,
        hazard_violations,
        result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupPoint {
    pub n_proc: usize,
    pub cycles: u64,
    pub speedup: f64,
    /// Speedup with merge overhead left out.
    pub ideal_speedup: f64,
}

/// Speedups relative to the single-processor run (added when absent).
pub fn speedup_curve(
    a: &CooMatrix,
    z: &DenseMatrix,
    format: Format,
    cfg: &ProcessorConfig,
    cache: &CacheConfig,
    procs: &[usize],
) -> Result<Vec<SpeedupPoint>> {
    let s = build_schedule(a, format, residency_for(cfg, z.n_cols()))?;
    let base = simulate_multi_schedule(&s, z, cfg, cache, 1)?.total_cycles.max(1) as f64;
    procs
        .iter()
        .map(|&p| {
            let r = simulate_multi_schedule(&s, z, cfg, cache, p)?;
            Ok(SpeedupPoint {
                n_proc: p,
                cycles: r.total_cycles,
                speedup: base / r.total_cycles.max(1) as f64,
                ideal_speedup: base / r.ideal_cycles.max(1) as f64,
            })
        })
        .collect()
}
