//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod props;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scv_core::formats::{BcsrMatrix, SparseMatrix};
use scv_core::graphgen::{rmat_graph, GraphSpec, RmatParams, SparsityClass};
use scv_core::kernels::{build_schedule, dense_spmm, execute_schedule};
use scv_core::multiproc::simulate_multi;
use scv_core::sim::{audit_hazards, residency_for, run_aggregation, AggregationReport};
use scv_core::{CacheConfig, CooMatrix, DenseMatrix, Format, ProcessorConfig};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const F: usize = 64;

static HAZARDS: AtomicUsize = AtomicUsize::new(0);
static AUDITED: AtomicUsize = AtomicUsize::new(0);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// `A Z` straight from the triplets, for graphs too large to densify.
fn triplet_spmm(a: &CooMatrix, z: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.n_rows(), z.n_cols());
    for t in a.triplets() {
        let src = z.row(t.col).to_vec();
        for (o, v) in out.row_mut(t.row).iter_mut().zip(src) {
            *o += t.value * v;
        }
    }
    out
}

fn geomean(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}

fn audit(r: &AggregationReport, cfg: &ProcessorConfig) {
    let n = audit_hazards(&r.ideal_ops, cfg.write_readback_latency).len()
        + audit_hazards(&r.timed.ops, cfg.write_readback_latency).len();
    HAZARDS.fetch_add(n, Ordering::Relaxed);
    AUDITED.fetch_add(r.ideal_ops.len() + r.timed.ops.len(), Ordering::Relaxed);
}

fn run(g: &GraphSpec, z: &DenseMatrix, format: Format, cfg: &ProcessorConfig) -> AggregationReport {
    let r = run_aggregation(&g.adjacency, z, format, cfg, &CacheConfig::default(), true)
        .unwrap_or_else(|e| panic!("{} {format}: {e}", g.name));
    audit(&r, cfg);
    r
}

/// One graph with the runs of every compared format.
struct Suite {
    graph: GraphSpec,
    runs: BTreeMap<String, AggregationReport>,
}

fn suite(class: &str, log_n: u32, density: f64, formats: &[Format]) -> Vec<Suite> {
    let cfg = ProcessorConfig::default();
    SEEDS
        .par_iter()
        .map(|&seed| {
            let g = rmat_graph(format!("rmat-{class}-{seed}"), log_n, density, F, RmatParams::default(), seed)
                .unwrap();
            let z = g.features();
            let want = triplet_spmm(&g.adjacency, &z);
            let runs = formats
                .par_iter()
                .map(|&f| {
                    let r = run(&g, &z, f, &cfg);
                    assert_eq!(r.result(), &want, "{} {f}", g.name);
                    (f.to_string(), r)
                })
                .collect();
            Suite { graph: g, runs }
        })
        .collect()
}

fn c1_oracle() -> Outcome {
    let formats = ["csr", "csc", "mp", "bcsr", "scv", "scv-z"];
    let failures: Vec<String> = (0..200u64)
        .into_par_iter()
        .filter_map(|cell| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0000 + cell);
            let n = rng.gen_range(2..=512usize);
            let density = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let f = rng.gen_range(1..=160usize);
            let name = formats[rng.gen_range(0..formats.len())];
            let format: Format = match name {
                "bcsr" => format!("bcsr:{}", 1 << rng.gen_range(0..=4)),
                "scv" | "scv-z" => format!("{name}:{}x{}", 1 << rng.gen_range(0..=9), 1 << rng.gen_range(0..=3)),
                _ => name.to_string(),
            }
            .parse()
            .unwrap();
            let cfg = ProcessorConfig {
                n_vpe: 1 << rng.gen_range(0..=3),
                queue_depth: [2, 4, 16][rng.gen_range(0..3)],
                ..ProcessorConfig::default()
            };
            let shape = props::Shape {
                rows: n,
                cols: n,
                density,
                seed: rng.gen(),
            };
            let a = props::coo(shape);
            let z = props::features(n, f, shape.seed);
            let want = dense_spmm(&a.to_dense(), &z).unwrap();
            let s = build_schedule(&a, format, residency_for(&cfg, f)).unwrap();
            let exec = execute_schedule(&s, &z, DenseMatrix::zeros(n, f)).unwrap();
            let r = run_aggregation(&a, &z, format, &cfg, &CacheConfig::default(), true).unwrap();
            audit(&r, &cfg);
            (exec != want || r.result() != &want).then(|| format!("cell {cell}: {format} n={n} F={f}"))
        })
        .collect();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "200/200 cells element-exact (execute_schedule and simulator)".to_string()
        } else {
            format!("{} mismatches, first: {}", failures.len(), failures[0])
        },
    )
}

fn c2_idle(ultra: &[Suite]) -> Outcome {
    let ratios: Vec<f64> = ultra
        .iter()
        .map(|s| {
            let csr = s.runs["csr"].timed.stats.idle_cycles as f64;
            let scv = s.runs["scv:512"].timed.stats.idle_cycles.max(1) as f64;
            csr / scv
        })
        .collect();
    let g = geomean(&ratios);
    outcome(
        g >= 5.0,
        format!("geomean CSR/SCV idle-cycle ratio {g:.1} (need >= 5), per seed {ratios:.1?}"),
    )
}

fn c3_traffic(high: &[Suite]) -> Outcome {
    let ratio = |base: &str| {
        geomean(
            &high
                .iter()
                .map(|s| {
                    s.runs["scv-z:512"].timed.stats.traffic_bytes as f64
                        / s.runs[base].timed.stats.traffic_bytes as f64
                })
                .collect::<Vec<_>>(),
        )
    };
    let (csr, csc) = (ratio("csr"), ratio("csc"));
    outcome(
        csr <= 0.67 && csc <= 0.75,
        format!("SCV-Z traffic {csr:.3}x CSR (need <= 0.67), {csc:.3}x CSC (need <= 0.75)"),
    )
}

fn c4_latency(all: &[&Suite]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut speedups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in all {
        let ours = s.runs["scv-z:512"].cycles() as f64;
        for base in ["csc", "csr", "mp"] {
            let x = s.runs[base].cycles() as f64 / ours;
            worst = worst.min(x);
            speedups.entry(base).or_default().push(x);
        }
    }
    let means: BTreeMap<&str, f64> = speedups.iter().map(|(k, v)| (*k, geomean(v))).collect();
    let ok = worst > 1.0 && means.values().all(|&g| g >= 1.5);
    outcome(
        ok,
        format!(
            "SCV-Z geomean speedup csc {:.2}x csr {:.2}x mp {:.2}x over {} graphs (need >= 1.5), worst single {worst:.2}x (need > 1)",
            means["csc"],
            means["csr"],
            means["mp"],
            all.len()
        ),
    )
}

fn c5_tile_width(ultra: &[Suite]) -> Outcome {
    let cfg = ProcessorConfig::default();
    let widths = [1usize, 4, 16, 64];
    let rows: Vec<Vec<u64>> = ultra
        .par_iter()
        .map(|s| {
            let z = s.graph.features();
            widths
                .iter()
                .map(|&w| {
                    let f = format!("scv-z:512x{w}").parse().unwrap();
                    run(&s.graph, &z, f, &cfg).cycles()
                })
                .collect()
        })
        .collect();
    let ok = rows.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]));
    outcome(ok, format!("cycles at W=1/4/16/64 per seed: {rows:?}"))
}

fn c6_bcsr(ultra: &[Suite]) -> Outcome {
    let ratios: Vec<f64> = ultra
        .iter()
        .map(|s| {
            let b = BcsrMatrix::from_coo(&s.graph.adjacency, 16).unwrap();
            b.stored_values() as f64 / s.graph.adjacency.nnz() as f64
        })
        .collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        min >= 10.0,
        format!("BCSR(16) stored/nnz min {min:.1} (need >= 10), per seed {ratios:.1?}"),
    )
}

fn c7_multi(ultra: &[Suite], high: &[Suite]) -> Outcome {
    let cfg = ProcessorConfig::default();
    let cache = CacheConfig::default();
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for s in [&ultra[0], &high[0]] {
        let g = &s.graph;
        let z = g.features();
        let format = Format::scv_z(512);
        let one = simulate_multi(&g.adjacency, &z, format, &cfg, &cache, 1).unwrap();
        let base = one.total_cycles as f64;
        let sched = build_schedule(&g.adjacency, format, residency_for(&cfg, F)).unwrap();
        let vmax = sched.groups.iter().map(|g| g.items.len()).max().unwrap_or(0);
        let mut line = Vec::new();
        for p in [2usize, 4, 8] {
            let r = simulate_multi(&g.adjacency, &z, format, &cfg, &cache, p).unwrap();
            HAZARDS.fetch_add(r.hazard_violations, Ordering::Relaxed);
            if r.result != one.result {
                problems.push(format!("{} P={p}: merged result differs", g.name));
            }
            let nnz: Vec<usize> = r.partitions.iter().map(|x| x.nnz).collect();
            let spread = nnz.iter().max().unwrap() - nnz.iter().min().unwrap();
            if spread > vmax {
                problems.push(format!("{} P={p}: imbalance {spread} > {vmax}", g.name));
            }
            let (speedup, ideal) = (base / r.total_cycles as f64, base / r.ideal_cycles as f64);
            if speedup > ideal {
                problems.push(format!("{} P={p}: speedup {speedup:.2} > ideal {ideal:.2}", g.name));
            }
            line.push(format!("P={p} {speedup:.2}/{ideal:.2}"));
        }
        summary.push(format!("{}: {}", g.name, line.join(" ")));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("exact, balanced; speedup/ideal {}", summary.join("; "))
        } else {
            problems.join("; ")
        },
    )
}

fn c8_hazards() -> Outcome {
    let v = HAZARDS.load(Ordering::Relaxed);
    let n = AUDITED.load(Ordering::Relaxed);
    outcome(
        v == 0 && n > 0,
        format!("{v} write-readback violations over {n} audited ops plus multi-processor logs"),
    )
}

fn c9_properties() -> Outcome {
    let failed: Vec<String> = props::all()
        .into_par_iter()
        .filter_map(|(name, check)| check(props::CASES).err().map(|e| format!("{name}: {e}")))
        .collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} properties x {} cases", props::all().len(), props::CASES)
        } else {
            failed.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(u8, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: u8, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} C{id} {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };

    timed(1, "oracle equivalence", &mut c1_oracle);

    let compared = [
        Format::Csr,
        Format::Csc,
        Format::Multipass,
        Format::scv(512),
        Format::scv_z(512),
    ];
    let ultra = suite("ultra", 14, 1e-5, &compared);
    let high = suite("high", 13, 2e-3, &compared);
    assert!(ultra.iter().all(|s| s.graph.class == SparsityClass::UltraSparse));
    assert!(high.iter().all(|s| s.graph.class == SparsityClass::HighlySparse));

    timed(2, "idle-cycle trend", &mut || c2_idle(&ultra));
    timed(3, "memory-traffic trend", &mut || c3_traffic(&high));
    let all: Vec<&Suite> = ultra.iter().chain(high.iter()).collect();
    timed(4, "overall latency trend", &mut || c4_latency(&all));
    timed(5, "tile-width deterioration", &mut || c5_tile_width(&ultra));
    timed(6, "BCSR padding dominance", &mut || c6_bcsr(&ultra));
    timed(7, "multi-processor exactness and balance", &mut || c7_multi(&ultra, &high));
    timed(8, "hazard-safety audit", &mut c8_hazards);
    timed(9, "format property suite", &mut c9_properties);

    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
