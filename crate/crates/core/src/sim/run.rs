use super::engine::{simulate, SimOptions, SimOutput};
use super::{OpRecord, ProcessorConfig, SimStats};
use crate::error::Result;
use crate::formats::{CooMatrix, DenseMatrix};
use crate::kernels::{build_schedule, Format, ResidencyPolicy, Schedule};
use crate::memmodel::{replay, CacheConfig, ReplayStats};

#[derive(Debug, Clone)]
pub struct AggregationReport {
    pub format: Format,
    /// Run with every operand resident: pure compute and load balance.
    pub ideal: SimStats,
    pub ideal_ops: Vec<OpRecord>,
    /// Final run with misses charged at the measured mean access time.
    pub timed: SimOutput,
    pub mat: f64,
    pub mat_cycles: u64,
    /// Cache replay of the functional-timing trace that produced `mat`.
    pub trace_pass: ReplayStats,
    /// Cache replay of the final run's trace.
    pub replay: ReplayStats,
}

impl AggregationReport {
    pub fn result(&self) -> &DenseMatrix {
        &self.timed.result
    }

    pub fn cycles(&self) -> u64 {
        self.timed.stats.compute_cycles
    }
}

/// Multipass residency limits: whole feature rows that fit each partition.
pub fn residency_for(cfg: &ProcessorConfig, feature_dim: usize) -> ResidencyPolicy {
    let row = feature_dim.max(1) * cfg.value_bytes;
    ResidencyPolicy {
        z_rows: cfg.scratch_z_bytes / row,
        ps_rows: cfg.scratch_ps_bytes / row,
    }
}

/// Builds the schedule for `format` and runs it through
/// ideal → trace pass → cache replay → timed pass.
pub fn run_aggregation(
    a: &CooMatrix,
    z: &DenseMatrix,
    format: Format,
    cfg: &ProcessorConfig,
    cache: &CacheConfig,
    record_ops: bool,
) -> Result<AggregationReport> {
    let s = build_schedule(a, format, residency_for(cfg, z.n_cols()))?;
    run_schedule(&s, z, cfg, cache, record_ops)
}

pub fn run_schedule(
    s: &Schedule,
    z: &DenseMatrix,
    cfg: &ProcessorConfig,
    cache: &CacheConfig,
    record_ops: bool,
) -> Result<AggregationReport> {
    cache.validate()?;
    let ideal_opts = SimOptions {
        record_ops,
        ..SimOptions::default()
    };
    let ideal = simulate(s, z, cfg, &ideal_opts)?;

    let functional = simulate(s, z, cfg, &SimOptions::timed(cache.hit_latency))?;
    let trace_pass = replay(&functional.trace, cache)?;
    let mat = trace_pass.mat;
    let mat_cycles = (mat.ceil() as u64).max(1);

    let mut timed_opts = SimOptions::timed(mat_cycles);
    timed_opts.record_ops = record_ops;
    let timed = simulate(s, z, cfg, &timed_opts)?;
    let final_replay = replay(&timed.trace, cache)?;
    Ok(AggregationReport {
        format: s.format,
        ideal: ideal.stats,
        ideal_ops: ideal.ops,
        timed,
        mat,
        mat_cycles,
        trace_pass,
        replay: final_replay,
    })
}
