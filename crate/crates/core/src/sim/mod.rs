//! Cycle-approximate model of the queue-based vector processor.
//!
//! N_VPE vector engines of N_PE lanes each are fed by per-engine FIFO
//! queues of depth D. An arbiter places work items into the queues, routing
//! items whose partial-sum row is still in flight to the queue that owns it.
//! The scratchpad is split into adjacency (A), Z (B) and partial-sum (C)
//! partitions, each banked; C has a two-cycle write-to-read latency.

mod arbiter;
mod engine;
mod hazard;
mod run;
mod scratchpad;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arbiter::{Arbiter, Assignment};
pub use engine::{simulate, MemoryMode, OpRecord, SimOptions, SimOutput};
pub use hazard::{audit_hazards, resolve_same_queue_hazard, HazardViolation, Mitigation};
pub use run::{residency_for, run_aggregation, run_schedule, AggregationReport};
pub use scratchpad::{
    scratchpad_access, AccessOutcome, BankModel, BankRequest, Insert, PartitionKind, Residency,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessorConfig {
    pub n_vpe: usize,
    pub n_pe: usize,
    pub queue_depth: usize,
    pub scratch_adj_bytes: usize,
    pub scratch_z_bytes: usize,
    pub scratch_ps_bytes: usize,
    pub value_bytes: usize,
    pub write_readback_latency: u64,
    /// Rate at which the command generator streams adjacency data in.
    pub adj_stream_bytes_per_cycle: u64,
}

impl Default for ProcessorConfig {
    fn default() -> Self {
        ProcessorConfig {
            n_vpe: 8,
            n_pe: 64,
            queue_depth: 16,
            scratch_adj_bytes: 64 << 10,
            scratch_z_bytes: 64 << 10,
            scratch_ps_bytes: 256 << 10,
            value_bytes: 8,
            write_readback_latency: 2,
            adj_stream_bytes_per_cycle: 256,
        }
    }
}

impl ProcessorConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("n_vpe", self.n_vpe),
            ("n_pe", self.n_pe),
            ("queue_depth", self.queue_depth),
            ("scratch_adj_bytes", self.scratch_adj_bytes),
            ("scratch_z_bytes", self.scratch_z_bytes),
            ("scratch_ps_bytes", self.scratch_ps_bytes),
            ("value_bytes", self.value_bytes),
            ("write_readback_latency", self.write_readback_latency as usize),
            ("adj_stream_bytes_per_cycle", self.adj_stream_bytes_per_cycle as usize),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.n_vpe > u16::MAX as usize {
            return Err(Error::Config("n_vpe exceeds 65535".into()));
        }
        Ok(())
    }

    pub fn total_macs(&self) -> usize {
        self.n_vpe * self.n_pe
    }

    pub fn total_scratch_bytes(&self) -> usize {
        self.scratch_adj_bytes + self.scratch_z_bytes + self.scratch_ps_bytes
    }

    /// A/B partitions: four read ports per bank, enough banks for one read
    /// per engine per cycle.
    pub fn ab_banks(&self) -> usize {
        self.n_vpe.div_ceil(4)
    }

    /// C partition: one bank per engine, two reads and two writes each.
    pub fn c_banks(&self) -> usize {
        self.n_vpe
    }
}

/// How a feature dimension is cut into vector operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureTiling {
    pub feature_dim: usize,
    /// Columns per vector op.
    pub op_width: usize,
    /// Vector ops per item per feature pass.
    pub ops_per_pass: usize,
    pub segments: usize,
    pub passes: usize,
}

impl FeatureTiling {
    /// `tile` is the number of feature columns processed per pass over the
    /// adjacency; it is rounded down to a multiple of `n_pe` when wider.
    pub fn new(feature_dim: usize, tile: usize, n_pe: usize) -> Result<Self> {
        if feature_dim == 0 || tile == 0 || n_pe == 0 {
            return Err(Error::Config("feature tiling needs positive sizes".into()));
        }
        let tile = tile.min(feature_dim);
        let (op_width, ops_per_pass) = if tile >= n_pe {
            (n_pe, tile / n_pe)
        } else {
            (tile, 1)
        };
        let segments = feature_dim.div_ceil(op_width);
        Ok(FeatureTiling {
            feature_dim,
            op_width,
            ops_per_pass,
            segments,
            passes: segments.div_ceil(ops_per_pass),
        })
    }

    /// Tiling used for a schedule: baselines keep the whole feature row per
    /// pass; SCV narrows the pass so that one B-row output tile fits the
    /// partial-sum partition.
    pub fn for_schedule(
        format: crate::kernels::Format,
        feature_dim: usize,
        cfg: &ProcessorConfig,
    ) -> Result<Self> {
        let tile = match format {
            crate::kernels::Format::Scv { height, .. } => {
                let cols = cfg.scratch_ps_bytes / (height * cfg.value_bytes);
                if cols == 0 {
                    return Err(Error::Config(format!(
                        "a {height}-row output tile does not fit {} partial-sum bytes",
                        cfg.scratch_ps_bytes
                    )));
                }
                cols
            }
            _ => feature_dim,
        };
        Self::new(feature_dim, tile, cfg.n_pe)
    }

    pub fn pass_segments(&self, pass: usize) -> std::ops::Range<usize> {
        let s = pass * self.ops_per_pass;
        s..(s + self.ops_per_pass).min(self.segments)
    }

    pub fn pass_of(&self, segment: usize) -> usize {
        segment / self.ops_per_pass
    }

    pub fn segment_cols(&self, segment: usize) -> std::ops::Range<usize> {
        let s = segment * self.op_width;
        s..(s + self.op_width).min(self.feature_dim)
    }

    pub fn vector_ops_per_item(&self) -> usize {
        self.segments
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    VecMulAdd,
    VecMulAcc,
    VecAdd,
    VecMul,
    VecMov,
    MemLoadM,
    MemStoreM,
}

impl Opcode {
    pub const ALL: [Opcode; 7] = [
        Opcode::VecMulAdd,
        Opcode::VecMulAcc,
        Opcode::VecAdd,
        Opcode::VecMul,
        Opcode::VecMov,
        Opcode::MemLoadM,
        Opcode::MemStoreM,
    ];

    /// 4-bit encoding.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VpeCommand {
    pub opcode: Opcode,
    pub a_addr: u64,
    pub b_addr: u64,
    pub c_addr: u64,
    /// Broadcast flags for ports A, B, C.
    pub broadcast: [bool; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HazardKind {
    /// An item was routed to the engine already holding its PS row.
    CrossQueueSameVpe,
    SameQueue1CycleAccum,
    SameQueue2CycleForward,
    /// The owning queue was full, so issue stopped.
    Stall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HazardEvent {
    pub kind: HazardKind,
    pub cycle: u64,
    pub vpe: usize,
    /// PS row involved.
    pub address: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimStats {
    pub compute_cycles: u64,
    /// Engine-cycles spent with an empty queue or stalled.
    pub idle_cycles: u64,
    pub busy_cycles: u64,
    /// Engine-cycles stalled waiting on memory.
    pub stall_cycles: u64,
    pub vector_ops: u64,
    /// `items * ceil(F / n_pe) * n_pe`, padding included.
    pub mac_ops: u64,
    pub padding_mac_ops: u64,
    pub scratch_reads: u64,
    pub scratch_writes: u64,
    /// Demand misses sent to the lower memory.
    pub miss_requests: u64,
    pub prefetch_requests: u64,
    pub bank_conflicts: u64,
    /// Cycles the arbiter could not place because the target queue was full.
    pub arbiter_stall_cycles: u64,
    pub accum_rewrites: u64,
    pub forwards: u64,
    pub routed_to_owner: u64,
    /// Bytes crossing the scratchpad boundary (the trace volume).
    pub traffic_bytes: u64,
    pub adjacency_bytes: u64,
    pub feature_passes: u64,
    pub op_width: u64,
}

impl SimStats {
    pub fn mac_ops_without_padding(&self) -> u64 {
        self.mac_ops - self.padding_mac_ops
    }
}
