use std::collections::BTreeMap;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use scv_core::graphgen::GraphSpec;
use scv_core::multiproc::simulate_multi;
use scv_core::sim::run_aggregation;
use scv_core::Format;

use crate::config::{ExperimentConfig, SweepAxis};

/// One CSV line. Summary rows leave per-run columns empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub graph: String,
    pub class: String,
    pub n: Option<usize>,
    pub nnz: Option<usize>,
    pub seed: Option<u64>,
    pub format: String,
    pub sweep: String,
    pub sweep_value: Option<usize>,
    pub feature_dim: usize,
    pub n_proc: usize,
    pub cycles: Option<u64>,
    pub ideal_cycles: Option<u64>,
    pub merge_cycles: Option<u64>,
    pub idle_cycles: Option<u64>,
    pub stall_cycles: Option<u64>,
    pub bank_conflicts: Option<u64>,
    pub vector_ops: Option<u64>,
    pub mac_ops: Option<u64>,
    pub padding_mac_ops: Option<u64>,
    pub scratch_reads: Option<u64>,
    pub scratch_writes: Option<u64>,
    pub traffic_bytes: Option<u64>,
    pub cache_misses: Option<u64>,
    pub mat: Option<f64>,
    pub speedup: f64,
    pub ideal_speedup: Option<f64>,
}

pub const CSV_HEADER: &str = "graph,class,n,nnz,seed,format,sweep,sweep_value,feature_dim,n_proc,\
cycles,ideal_cycles,merge_cycles,idle_cycles,stall_cycles,bank_conflicts,vector_ops,mac_ops,\
padding_mac_ops,scratch_reads,scratch_writes,traffic_bytes,cache_misses,mat,speedup,ideal_speedup";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub name: String,
    pub sweep: String,
    pub rows: Vec<ResultRow>,
    /// Geometric means of the speedups per format and sweep point.
    pub summary: Vec<ResultRow>,
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Cell ordering key: graph, seed, format, sweep point.
type Key = (usize, usize, usize, usize);

struct Measured {
    cycles: u64,
    ideal_cycles: u64,
    merge_cycles: Option<u64>,
    idle: u64,
    stall: u64,
    conflicts: u64,
    vector_ops: u64,
    mac_ops: u64,
    padding_mac_ops: u64,
    reads: u64,
    writes: u64,
    traffic: u64,
    misses: u64,
    mat: f64,
}

fn measure(cfg: &ExperimentConfig, g: &GraphSpec, format: Format, n_proc: Option<usize>) -> Result<Measured> {
    let z = g.features();
    let (p, c) = (&cfg.processor, &cfg.cache);
    Ok(match n_proc {
        None => {
            let r = run_aggregation(&g.adjacency, &z, format, p, c, false)?;
            let s = r.timed.stats;
            Measured {
                cycles: s.compute_cycles,
                ideal_cycles: r.ideal.compute_cycles,
                merge_cycles: None,
                idle: s.idle_cycles,
                stall: s.stall_cycles,
                conflicts: s.bank_conflicts,
                vector_ops: s.vector_ops,
                mac_ops: s.mac_ops,
                padding_mac_ops: s.padding_mac_ops,
                reads: s.scratch_reads,
                writes: s.scratch_writes,
                traffic: s.traffic_bytes,
                misses: r.replay.misses,
                mat: r.mat,
            }
        }
        Some(n) => {
            let r = simulate_multi(&g.adjacency, &z, format, p, c, n)?;
            let sum = |f: fn(&scv_core::SimStats) -> u64| r.per_proc.iter().map(f).sum::<u64>();
            Measured {
                cycles: r.total_cycles,
                ideal_cycles: r.ideal_cycles,
                merge_cycles: Some(r.merge_cycles),
                idle: sum(|s| s.idle_cycles),
                stall: sum(|s| s.stall_cycles),
                conflicts: sum(|s| s.bank_conflicts),
                vector_ops: sum(|s| s.vector_ops) + r.merge_ops,
                mac_ops: sum(|s| s.mac_ops),
                padding_mac_ops: sum(|s| s.padding_mac_ops),
                reads: sum(|s| s.scratch_reads),
                writes: sum(|s| s.scratch_writes),
                traffic: sum(|s| s.traffic_bytes) + r.merge_bytes,
                misses: r.cache_misses,
                mat: r.per_proc_mat.iter().copied().fold(0.0, f64::max),
            }
        }
    })
}

/// Runs every (graph, seed, format, sweep point) cell. Cells execute in
/// parallel; rows come out sorted by that key.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let axis = cfg.sweep.axis;
    let points = cfg.sweep.points();

    let graphs: Vec<Vec<GraphSpec>> = cfg
        .graphs
        .iter()
        .map(|src| {
            cfg.seeds
                .iter()
                .map(|&seed| {
                    src.load(cfg.feature_dim, seed, cfg.directed)
                        .with_context(|| format!("loading graph {src}"))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    // (key, format as run, sweep value, processors)
    let mut cells: Vec<(Key, Format, Option<usize>, Option<usize>)> = Vec::new();
    for gi in 0..cfg.graphs.len() {
        for si in 0..cfg.seeds.len() {
            for (fi, &f) in cfg.formats.iter().enumerate() {
                match axis {
                    SweepAxis::Processors => {
                        cells.push(((gi, si, fi, 0), f, Some(1), Some(1)));
                        for (pi, &p) in points.iter().enumerate() {
                            cells.push(((gi, si, fi, pi + 1), f, Some(p), Some(p)));
                        }
                    }
                    _ if cfg.sweeps(f) => {
                        for (pi, &v) in points.iter().enumerate() {
                            cells.push(((gi, si, fi, pi), cfg.format_at(f, Some(v)), Some(v), None));
                        }
                    }
                    _ => cells.push(((gi, si, fi, 0), f, None, None)),
                }
            }
        }
    }

    let mut measured = cells
        .par_iter()
        .map(|&(key, f, v, procs)| {
            let g = &graphs[key.0][key.1];
            measure(cfg, g, f, procs)
                .with_context(|| format!("{} seed {} {f}", g.name, cfg.seeds[key.1]))
                .map(|m| (key, f, v, procs, m))
        })
        .collect::<Result<Vec<_>>>()?;
    measured.sort_by_key(|c| c.0);

    // Reference cycles for speedups: the baseline format for format
    // comparisons, the single processor for scaling.
    let mut reference: BTreeMap<(usize, usize, usize), u64> = BTreeMap::new();
    for (key, f, _, procs, m) in &measured {
        let is_ref = match axis {
            SweepAxis::Processors => *procs == Some(1),
            _ => *f == cfg.baseline,
        };
        if is_ref {
            let fi = if axis == SweepAxis::Processors { key.2 } else { 0 };
            reference.insert((key.0, key.1, fi), m.cycles);
        }
    }

    let rows: Vec<ResultRow> = measured
        .into_iter()
        .map(|(key, _, v, procs, m)| {
            let g = &graphs[key.0][key.1];
            let fi = if axis == SweepAxis::Processors { key.2 } else { 0 };
            let base = reference[&(key.0, key.1, fi)] as f64;
            let ratio = |c: u64| base / c.max(1) as f64;
            ResultRow {
                graph: g.name.clone(),
                class: g.class.to_string(),
                n: Some(g.n()),
                nnz: Some(g.adjacency.nnz()),
                seed: Some(cfg.seeds[key.1]),
                // The configured format; the sweep columns say what varied.
                format: cfg.formats[key.2].to_string(),
                sweep: axis.label().to_string(),
                sweep_value: v,
                feature_dim: cfg.feature_dim,
                n_proc: procs.unwrap_or(1),
                cycles: Some(m.cycles),
                ideal_cycles: Some(m.ideal_cycles),
                merge_cycles: m.merge_cycles,
                idle_cycles: Some(m.idle),
                stall_cycles: Some(m.stall),
                bank_conflicts: Some(m.conflicts),
                vector_ops: Some(m.vector_ops),
                mac_ops: Some(m.mac_ops),
                padding_mac_ops: Some(m.padding_mac_ops),
                scratch_reads: Some(m.reads),
                scratch_writes: Some(m.writes),
                traffic_bytes: Some(m.traffic),
                cache_misses: Some(m.misses),
                mat: Some(m.mat),
                speedup: ratio(m.cycles),
                ideal_speedup: procs.map(|_| ratio(m.ideal_cycles)),
            }
        })
        .collect();

    let summary = summarize(&rows);
    Ok(ResultTable {
        name: cfg.name.clone(),
        sweep: axis.label().to_string(),
        rows,
        summary,
    })
}

fn geomean(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}

/// One GEOMEAN row per (format, sweep point, processors), in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut order: Vec<(String, Option<usize>, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, Option<usize>, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let k = (r.format.clone(), r.sweep_value, r.n_proc);
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let rs = &groups[&k];
            let speedups: Vec<f64> = rs.iter().map(|r| r.speedup).collect();
            let ideal: Option<Vec<f64>> = rs.iter().map(|r| r.ideal_speedup).collect();
            ResultRow {
                graph: "GEOMEAN".into(),
                class: String::new(),
                n: None,
                nnz: None,
                seed: None,
                format: k.0,
                sweep: rs[0].sweep.clone(),
                sweep_value: k.1,
                feature_dim: rs[0].feature_dim,
                n_proc: k.2,
                cycles: None,
                ideal_cycles: None,
                merge_cycles: None,
                idle_cycles: None,
                stall_cycles: None,
                bank_conflicts: None,
                vector_ops: None,
                mac_ops: None,
                padding_mac_ops: None,
                scratch_reads: None,
                scratch_writes: None,
                traffic_bytes: None,
                cache_misses: None,
                mat: None,
                speedup: geomean(&speedups),
                ideal_speedup: ideal.map(|v| geomean(&v)),
            }
        })
        .collect()
}
