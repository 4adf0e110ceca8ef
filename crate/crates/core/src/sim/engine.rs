use std::collections::{HashMap, VecDeque};

use super::arbiter::{Arbiter, Assignment};
use super::hazard::{mitigation_for, Mitigation};
use super::scratchpad::{BankModel, BankRequest, Insert, PartitionKind, Residency};
use super::{FeatureTiling, HazardEvent, HazardKind, Opcode, ProcessorConfig, SimStats};
use crate::error::{Error, Result};
use crate::formats::DenseMatrix;
use crate::kernels::Schedule;
use crate::memmodel::{AccessKind, AddressMap, MemTrace, Role, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryMode {
    /// Every operand is resident; no trace is produced.
    Ideal,
    /// Finite partitions backed by a memory answering in `mat` cycles.
    Timed { mat: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub memory: MemoryMode,
    /// Keep a per-op log for the hazard audit and event dumps.
    pub record_ops: bool,
    /// Granularity of adjacency stream reads.
    pub adj_chunk_bytes: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            memory: MemoryMode::Ideal,
            record_ops: false,
            adj_chunk_bytes: 64,
        }
    }
}

impl SimOptions {
    pub fn timed(mat: u64) -> Self {
        SimOptions {
            memory: MemoryMode::Timed { mat },
            ..Self::default()
        }
    }

    pub fn with_ops(mut self) -> Self {
        self.record_ops = true;
        self
    }
}

/// One executed vector op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpRecord {
    pub cycle: u64,
    pub vpe: usize,
    pub opcode: Opcode,
    pub a_addr: u64,
    pub b_addr: u64,
    pub c_addr: u64,
    /// PS row segment written (row * segments + segment).
    pub ps_unit: u64,
    pub hazard: Option<HazardKind>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub stats: SimStats,
    pub trace: MemTrace,
    /// Aggregation result computed alongside timing, starting from zeros.
    pub result: DenseMatrix,
    pub ops: Vec<OpRecord>,
    pub events: Vec<HazardEvent>,
    /// First and last cycle each PS row was written, for touched rows.
    pub row_windows: HashMap<u32, (u64, u64)>,
    pub tiling: FeatureTiling,
}

impl SimOutput {
    /// `cycle,vpe,opcode,a_addr,b_addr,c_addr,hazard` lines.
    pub fn ops_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("cycle,vpe,opcode,a_addr,b_addr,c_addr,hazard\n");
        for o in &self.ops {
            let h = o.hazard.map(|h| format!("{h:?}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{:#x},{:#x},{:#x},{}",
                o.cycle, o.vpe, o.opcode, o.a_addr, o.b_addr, o.c_addr, h
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct Active {
    item: u32,
    pass: u32,
    seg: usize,
    end: usize,
}

const NEVER: u64 = u64::MAX;
const NO_GROUP: u32 = u32::MAX;

struct Memory {
    mat: u64,
    z: Residency,
    ps: Residency,
    ps_seen: Vec<bool>,
    /// Queued entries per (Z row, pass), for SCV's early eviction.
    z_refs: HashMap<u64, u32>,
    use_refs: bool,
    pinned: Vec<Vec<(PartitionKind, u64)>>,
    trace: MemTrace,
}

struct Ctx {
    map: AddressMap,
    tiling: FeatureTiling,
    vb: u64,
}

impl Ctx {
    fn unit(&self, row: u32, seg: usize) -> u64 {
        row as u64 * self.tiling.segments as u64 + seg as u64
    }

    fn split(&self, key: u64) -> (usize, usize) {
        let s = self.tiling.segments as u64;
        ((key / s) as usize, (key % s) as usize)
    }

    fn record(&self, role: Role, key: u64, cycle: u64, kind: AccessKind) -> Result<TraceRecord> {
        let (row, seg) = self.split(key);
        Ok(TraceRecord {
            cycle,
            addr: self.map.addr(role, row, seg)?,
            kind,
            size: (self.tiling.segment_cols(seg).len() as u64 * self.vb) as u32,
        })
    }

    fn ref_key(&self, z_key: u64) -> u64 {
        let (row, seg) = self.split(z_key);
        row as u64 * self.tiling.passes as u64 + self.tiling.pass_of(seg) as u64
    }
}

impl Memory {
    fn handle_eviction(&mut self, ctx: &Ctx, ev: Option<(u64, bool)>, role: Role, t: u64) -> Result<()> {
        if let Some((key, true)) = ev {
            debug_assert_eq!(role, Role::Ps);
            let rec = ctx.record(role, key, t, AccessKind::Write)?;
            self.trace.push(rec)?;
        }
        Ok(())
    }

    /// Requests a unit ahead of use. Returns whether a fill was issued.
    fn load(
        &mut self,
        ctx: &Ctx,
        part: PartitionKind,
        key: u64,
        ready: u64,
        t: u64,
    ) -> Result<Option<bool>> {
        let (res, role) = match part {
            PartitionKind::B => (&mut self.z, Role::Z),
            _ => (&mut self.ps, Role::Ps),
        };
        if res.ready_at(key).is_some() {
            return Ok(Some(false));
        }
        let fresh = part == PartitionKind::C && !self.ps_seen[key as usize];
        let ready = if fresh { t } else { ready };
        let refs = &self.z_refs;
        let prefer = |k: u64| refs.get(&ctx.ref_key(k)).copied().unwrap_or(0) == 0;
        let prefer: Option<&dyn Fn(u64) -> bool> = if part == PartitionKind::B && self.use_refs {
            Some(&prefer)
        } else {
            None
        };
        match res.insert(key, ready, t, prefer) {
            Insert::NoVictim => Ok(None),
            Insert::Inserted { evicted } => {
                self.handle_eviction(ctx, evicted, role, t)?;
                if fresh {
                    self.ps_seen[key as usize] = true;
                    Ok(Some(false))
                } else {
                    let rec = ctx.record(role, key, t, AccessKind::Read)?;
                    self.trace.push(rec)?;
                    Ok(Some(true))
                }
            }
        }
    }
}

/// Cycle-level run of `s` with feature matrix `z`.
pub fn simulate(
    s: &Schedule,
    z: &DenseMatrix,
    cfg: &ProcessorConfig,
    opts: &SimOptions,
) -> Result<SimOutput> {
    cfg.validate()?;
    if z.n_rows() != s.n_cols {
        return Err(Error::DimensionMismatch(format!(
            "schedule has {} columns, Z has {} rows",
            s.n_cols,
            z.n_rows()
        )));
    }
    if let Some(it) = s
        .items
        .iter()
        .find(|it| it.a_row as usize >= s.n_rows || it.a_col as usize >= s.n_cols)
    {
        return Err(Error::IndexOutOfRange {
            row: it.a_row as usize,
            col: it.a_col as usize,
            n_rows: s.n_rows,
            n_cols: s.n_cols,
        });
    }
    let f = z.n_cols();
    let tiling = FeatureTiling::for_schedule(s.format, f, cfg)?;
    let vb = cfg.value_bytes as u64;
    let unit_bytes = tiling.op_width * cfg.value_bytes;
    let ctx = Ctx {
        map: AddressMap {
            feature_dim: f,
            seg_width: tiling.op_width,
            value_bytes: cfg.value_bytes,
        },
        tiling,
        vb,
    };
    let segs = tiling.segments;

    let mut mem = match opts.memory {
        MemoryMode::Ideal => None,
        MemoryMode::Timed { mat } => {
            if mat == 0 {
                return Err(Error::Config("mean access time must be at least 1".into()));
            }
            let z_cap = cfg.scratch_z_bytes / unit_bytes;
            let ps_cap = cfg.scratch_ps_bytes / unit_bytes;
            if z_cap == 0 || ps_cap == 0 {
                return Err(Error::Config(format!(
                    "a {unit_bytes}-byte row segment does not fit the Z or PS partition"
                )));
            }
            Some(Memory {
                mat,
                z: Residency::new(z_cap),
                ps: Residency::new(ps_cap),
                ps_seen: vec![false; s.n_rows * segs],
                z_refs: HashMap::new(),
                use_refs: s.format.is_scv(),
                pinned: vec![Vec::new(); cfg.n_vpe],
                trace: MemTrace::new(),
            })
        }
    };
    let prefetch = mem.is_some() && s.format.is_scv();
    // SCV streams go through the greedy hazard-aware arbiter; the baselines
    // bind each output row to one engine.
    let dynamic = s.format.is_scv();
    let mut group_start = Vec::new();
    if prefetch {
        group_start = vec![NO_GROUP; s.items.len()];
        for (g, grp) in s.groups.iter().enumerate() {
            group_start[grp.items.start] = g as u32;
        }
    }

    let n_vpe = cfg.n_vpe;
    let latency = cfg.write_readback_latency;
    let n_items = s.items.len();
    let total = n_items * tiling.passes;
    let adj_total = s.adjacency_bytes as u128;
    let item_end_byte = |i: usize| (adj_total * (i as u128 + 1) / n_items as u128) as u64;
    let stream_avail = |e: usize| {
        let (p, i) = (e / n_items, e % n_items);
        let pos = p as u64 * s.adjacency_bytes + item_end_byte(i);
        pos.div_ceil(cfg.adj_stream_bytes_per_cycle).saturating_sub(1)
    };

    let mut stats = SimStats {
        op_width: tiling.op_width as u64,
        feature_passes: tiling.passes as u64,
        adjacency_bytes: s.adjacency_bytes * tiling.passes as u64,
        ..SimStats::default()
    };
    let mut result = DenseMatrix::zeros(s.n_rows, f);
    let mut ops = Vec::new();
    let mut events = Vec::new();
    let mut windows: Vec<(u64, u64)> = vec![(NEVER, 0); s.n_rows];

    let mut arb = Arbiter::new(cfg.queue_depth);
    let mut queues: Vec<VecDeque<(u32, u32)>> = vec![VecDeque::with_capacity(cfg.queue_depth); n_vpe];
    let mut lens = vec![0usize; n_vpe];
    let mut active: Vec<Option<Active>> = vec![None; n_vpe];
    let mut stall_until = vec![0u64; n_vpe];
    let mut inflight = vec![0u32; s.n_rows];
    let mut owner = vec![0u16; s.n_rows];
    let mut last_write_row = vec![(NEVER, 0u16); s.n_rows];
    let mut last_write_unit = vec![(NEVER, 0u16); s.n_rows * segs];
    let mut banks = BankModel::new(cfg.ab_banks(), cfg.c_banks());

    let mut adj_emitted = 0u64;
    let mut adj_pass = 0usize;
    let mut stall_event_at: Option<usize> = None;
    let mut e = 0usize;
    let mut done = 0usize;
    let mut t = 0u64;

    while done < total {
        banks.begin_cycle();
        let mut progressed = false;
        let mut blocked = false;

        // Arbiter: in order, as many placements as the queues allow.
        while e < total {
            if mem.is_some() && stream_avail(e) > t {
                break;
            }
            let (p, i) = (e / n_items, e % n_items);
            let it = s.items[i];
            let row = it.a_row as usize;
            let lw = last_write_row[row];
            let hot_owner = if inflight[row] > 0 {
                Some(owner[row] as usize)
            } else if lw.0 != NEVER && t - lw.0 <= latency {
                Some(lw.1 as usize)
            } else {
                None
            };
            let choice = if dynamic {
                arb.arbitrate(&lens, hot_owner)
            } else {
                arb.arbitrate_static(&lens, row)
            };
            match choice {
                Assignment::Place { vpe, routed } => {
                    queues[vpe].push_back((i as u32, p as u32));
                    lens[vpe] += 1;
                    inflight[row] += 1;
                    owner[row] = vpe as u16;
                    if routed {
                        stats.routed_to_owner += 1;
                        if opts.record_ops {
                            events.push(HazardEvent {
                                kind: HazardKind::CrossQueueSameVpe,
                                cycle: t,
                                vpe,
                                address: row as u64,
                            });
                        }
                    }
                    if let Some(m) = mem.as_mut() {
                        if m.use_refs {
                            let rk = it.a_col as u64 * tiling.passes as u64 + p as u64;
                            *m.z_refs.entry(rk).or_default() += 1;
                        }
                        if p != adj_pass {
                            adj_pass = p;
                            adj_emitted = 0;
                        }
                        let end = item_end_byte(i);
                        while adj_emitted < end {
                            let addr = ctx.map.adj(adj_emitted / opts.adj_chunk_bytes * opts.adj_chunk_bytes)?;
                            m.trace.push(TraceRecord {
                                cycle: t,
                                addr,
                                kind: AccessKind::Read,
                                size: opts.adj_chunk_bytes as u32,
                            })?;
                            adj_emitted += opts.adj_chunk_bytes;
                        }
                        if prefetch && group_start[i] != NO_GROUP {
                            let g = group_start[i] as usize;
                            for grp in &s.groups[g..(g + 2).min(s.groups.len())] {
                                for zr in grp.z_rows.clone() {
                                    for seg in tiling.pass_segments(p) {
                                        let key = ctx.unit(zr, seg);
                                        if m.load(&ctx, PartitionKind::B, key, t + m.mat, t)? == Some(true) {
                                            stats.prefetch_requests += 1;
                                        }
                                    }
                                }
                                for gi in grp.items.clone() {
                                    for seg in tiling.pass_segments(p) {
                                        let key = ctx.unit(s.items[gi].a_row, seg);
                                        if m.load(&ctx, PartitionKind::C, key, t + m.mat, t)? == Some(true) {
                                            stats.prefetch_requests += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    e += 1;
                    progressed = true;
                }
                Assignment::Stall { vpe } => {
                    if dynamic && stall_event_at != Some(e) {
                        stall_event_at = Some(e);
                        if opts.record_ops {
                            events.push(HazardEvent {
                                kind: HazardKind::Stall,
                                cycle: t,
                                vpe,
                                address: row as u64,
                            });
                        }
                    }
                    blocked = true;
                    break;
                }
                Assignment::Full => break,
            }
        }
        if blocked {
            stats.arbiter_stall_cycles += 1;
        }

        // Engines, with rotating priority for bank ports.
        let first = (t % n_vpe as u64) as usize;
        for k in 0..n_vpe {
            let v = (first + k) % n_vpe;
            if stall_until[v] > t {
                stats.idle_cycles += 1;
                stats.stall_cycles += 1;
                continue;
            }
            if active[v].is_none() {
                if let Some((item, pass)) = queues[v].pop_front() {
                    lens[v] -= 1;
                    let r = tiling.pass_segments(pass as usize);
                    active[v] = Some(Active {
                        item,
                        pass,
                        seg: r.start,
                        end: r.end,
                    });
                }
            }
            let Some(act) = active[v] else {
                stats.idle_cycles += 1;
                continue;
            };
            let it = s.items[act.item as usize];
            let z_key = ctx.unit(it.a_col, act.seg);
            let ps_key = ctx.unit(it.a_row, act.seg);

            if let Some(m) = mem.as_mut() {
                let mut wait = t;
                let mut misses = 0u64;
                for (part, key) in [(PartitionKind::B, z_key), (PartitionKind::C, ps_key)] {
                    let res = if part == PartitionKind::B { &mut m.z } else { &mut m.ps };
                    match res.ready_at(key) {
                        Some(r) if r <= t => {
                            res.touch(key);
                        }
                        Some(r) => wait = wait.max(r),
                        None => {
                            let ready = t + m.mat * (misses + 1);
                            match m.load(&ctx, part, key, ready, t)? {
                                None => wait = wait.max(t + 1),
                                Some(true) => {
                                    misses += 1;
                                    stats.miss_requests += 1;
                                    wait = wait.max(ready);
                                }
                                Some(false) => {}
                            }
                        }
                    }
                }
                if wait > t {
                    for (part, key) in [(PartitionKind::B, z_key), (PartitionKind::C, ps_key)] {
                        let res = if part == PartitionKind::B { &mut m.z } else { &mut m.ps };
                        if !m.pinned[v].contains(&(part, key)) {
                            res.pin(key);
                            m.pinned[v].push((part, key));
                        }
                    }
                    stall_until[v] = wait;
                    stats.idle_cycles += 1;
                    stats.stall_cycles += 1;
                    progressed = true;
                    continue;
                }
            }

            let (lw_cycle, lw_vpe) = last_write_unit[ps_key as usize];
            let mitigation = if lw_cycle != NEVER && lw_vpe as usize == v {
                mitigation_for(t - lw_cycle, latency)?
            } else {
                debug_assert!(lw_cycle == NEVER || t - lw_cycle > latency);
                Mitigation::None
            };
            let reads_ps = mitigation == Mitigation::None;
            let a_unit = act.item as u64;
            // The adjacency value travels with the queue entry; the engine
            // reads only Z (port B) and the partial sum (port C).
            let reqs = [
                BankRequest {
                    part: PartitionKind::B,
                    addr: z_key,
                    write: false,
                },
                BankRequest {
                    part: PartitionKind::C,
                    addr: ps_key,
                    write: true,
                },
                BankRequest {
                    part: PartitionKind::C,
                    addr: ps_key,
                    write: false,
                },
            ];
            let n_req = if reads_ps { 3 } else { 2 };
            if !banks.try_issue(&reqs[..n_req]) {
                stats.bank_conflicts += 1;
                stats.idle_cycles += 1;
                progressed = true;
                continue;
            }

            if !it.padding {
                let cols = tiling.segment_cols(act.seg);
                let zr = &z.row(it.a_col as usize)[cols.clone()];
                let out = &mut result.row_mut(it.a_row as usize)[cols];
                for (o, zv) in out.iter_mut().zip(zr) {
                    *o += it.a_value * zv;
                }
            }
            stats.busy_cycles += 1;
            stats.vector_ops += 1;
            stats.scratch_reads += 1 + reads_ps as u64;
            stats.scratch_writes += 1;
            let hazard = match mitigation {
                Mitigation::Accumulate => {
                    stats.accum_rewrites += 1;
                    Some(HazardKind::SameQueue1CycleAccum)
                }
                Mitigation::Forward => {
                    stats.forwards += 1;
                    Some(HazardKind::SameQueue2CycleForward)
                }
                Mitigation::None => None,
            };
            if opts.record_ops {
                if let Some(kind) = hazard {
                    events.push(HazardEvent {
                        kind,
                        cycle: t,
                        vpe: v,
                        address: it.a_row as u64,
                    });
                }
                ops.push(OpRecord {
                    cycle: t,
                    vpe: v,
                    opcode: if mitigation == Mitigation::Accumulate {
                        Opcode::VecMulAcc
                    } else {
                        Opcode::VecMulAdd
                    },
                    a_addr: ctx.map.adj(a_unit * vb)?,
                    b_addr: ctx.map.addr(Role::Z, it.a_col as usize, act.seg)?,
                    c_addr: ctx.map.addr(Role::Ps, it.a_row as usize, act.seg)?,
                    ps_unit: ps_key,
                    hazard,
                });
            }
            last_write_unit[ps_key as usize] = (t, v as u16);
            last_write_row[it.a_row as usize] = (t, v as u16);
            let w = &mut windows[it.a_row as usize];
            w.0 = w.0.min(t);
            w.1 = t;
            if let Some(m) = mem.as_mut() {
                m.ps.mark_dirty(ps_key);
                for (part, key) in m.pinned[v].drain(..) {
                    match part {
                        PartitionKind::B => m.z.unpin(key),
                        _ => m.ps.unpin(key),
                    }
                }
            }

            let mut next = act;
            next.seg += 1;
            if next.seg == act.end {
                active[v] = None;
                inflight[it.a_row as usize] -= 1;
                done += 1;
                if let Some(m) = mem.as_mut() {
                    if m.use_refs {
                        let rk = it.a_col as u64 * tiling.passes as u64 + act.pass as u64;
                        if let Some(c) = m.z_refs.get_mut(&rk) {
                            *c -= 1;
                            if *c == 0 {
                                m.z_refs.remove(&rk);
                            }
                        }
                    }
                }
            } else {
                active[v] = Some(next);
            }
            progressed = true;
        }
        t += 1;

        if !progressed && done < total {
            // Nothing can change until a stall ends or more adjacency arrives.
            let mut next_t = stall_until.iter().copied().filter(|&u| u >= t).min();
            if mem.is_some() && e < total {
                let a = stream_avail(e);
                if a >= t {
                    next_t = Some(next_t.map_or(a, |n| n.min(a)));
                }
            }
            let Some(next_t) = next_t else {
                return Err(Error::Malformed(format!(
                    "simulation made no progress at cycle {t}"
                )));
            };
            let skip = next_t - t;
            let stalled = stall_until.iter().filter(|&&u| u >= next_t).count() as u64;
            stats.idle_cycles += skip * n_vpe as u64;
            stats.stall_cycles += skip * stalled;
            if blocked {
                stats.arbiter_stall_cycles += skip;
            }
            t = next_t;
        }
    }

    stats.compute_cycles = t;
    // Issued work at full engine width, independent of how the feature
    // dimension was tiled.
    let per_item = (f.div_ceil(cfg.n_pe) * cfg.n_pe) as u64;
    stats.mac_ops = s.items.len() as u64 * per_item;
    stats.padding_mac_ops = s.padding_items() as u64 * per_item;
    let trace = match mem {
        Some(mut m) => {
            for key in m.ps.dirty_keys() {
                let rec = ctx.record(Role::Ps, key, t, AccessKind::Write)?;
                m.trace.push(rec)?;
            }
            m.trace
        }
        None => MemTrace::new(),
    };
    stats.traffic_bytes = trace.total_bytes();
    let row_windows = windows
        .into_iter()
        .enumerate()
        .filter(|(_, w)| w.0 != NEVER)
        .map(|(r, w)| (r as u32, w))
        .collect();
    Ok(SimOutput {
        stats,
        trace,
        result,
        ops,
        events,
        row_windows,
        tiling,
    })
}
