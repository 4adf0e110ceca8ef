use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scv_bench::config::{ExperimentConfig, GraphSource, Overrides, SweepAxis};
use scv_bench::experiment::run_experiment;
use scv_bench::output::{emit_csv, emit_plot};
use scv_bench::verify::{verify, verify_stored};
use scv_bench::store;
use scv_core::sim::run_aggregation;
use scv_core::{CacheConfig, Format, ProcessorConfig};

#[derive(Parser)]
#[command(name = "scv-bench", version, about = "SCV aggregation simulator and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Store a graph in one format as a binary .scvm file.
    Convert {
        #[arg(long)]
        graph: GraphSource,
        #[arg(long, default_value = "scv-z:512")]
        format: Format,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        directed: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check every format against the reference SpMM. Exits 1 on any mismatch.
    Verify {
        #[arg(long, default_value = "identity:16")]
        graph: GraphSource,
        #[arg(long, value_delimiter = ',', default_value = "csr,csc,mp,bcsr:16,scv:512,scv-z:512")]
        formats: Vec<Format>,
        #[arg(long, default_value_t = 64)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        directed: bool,
        /// Also check a stored .scvm file against the graph.
        #[arg(long)]
        stored: Option<PathBuf>,
    },
    /// Compare formats on each graph and seed.
    Bench(RunArgs),
    /// Sweep SCV vector height or tile width.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Multi-processor scaling of the SCV formats.
    Scale(RunArgs),
    /// Write the memory trace, op log or hazard events of one run as CSV.
    TraceDump {
        #[arg(long)]
        graph: GraphSource,
        #[arg(long, default_value = "scv-z:512")]
        format: Format,
        #[arg(long, default_value_t = 64)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        directed: bool,
        #[arg(long, value_enum, default_value_t = Dump::Mem)]
        what: Dump,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Height,
    Width,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dump {
    /// cycle,addr,kind,size of every access leaving the scratchpad.
    Mem,
    /// One line per vector op.
    Ops,
    /// Accumulate, forward, routing and stall events.
    Events,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// rmat:<log2 n>:<density>, identity:<n>, or a .mtx/.scvm/edge-list path.
    #[arg(long, value_delimiter = ',')]
    graphs: Option<Vec<GraphSource>>,
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<Format>>,
    #[arg(long)]
    baseline: Option<Format>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Sweep points; powers of two inside the axis range.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<usize>>,
    #[arg(long)]
    n_vpe: Option<usize>,
    #[arg(long)]
    n_pe: Option<usize>,
    #[arg(long)]
    queue_depth: Option<usize>,
    /// Cache capacity in bytes.
    #[arg(long)]
    cache_bytes: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn experiment(run: RunArgs, axis: SweepAxis) -> Result<()> {
    let mut cfg = match &run.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if axis == SweepAxis::Processors && run.config.is_none() && run.formats.is_none() {
        cfg.formats = vec![Format::scv_z(512)];
        cfg.baseline = Format::scv_z(512);
    }
    let o = Overrides {
        graphs: run.graphs,
        formats: run.formats,
        baseline: run.baseline,
        feature_dim: run.feature_dim,
        seeds: run.seeds,
        sweep_axis: Some(axis),
        sweep_values: run.values,
        n_vpe: run.n_vpe,
        n_pe: run.n_pe,
        queue_depth: run.queue_depth,
        cache_bytes: run.cache_bytes,
        output: run.output,
        plot: run.plot,
    };
    o.apply(&mut cfg);
    if axis == SweepAxis::Processors && o.baseline.is_none() && !cfg.formats.contains(&cfg.baseline) {
        cfg.baseline = cfg.formats[0];
    }
    if run.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let table = run_experiment(&cfg)?;
    emit_csv(&table, &cfg.output)?;
    eprintln!("wrote {} rows to {}", table.rows.len(), cfg.output.display());
    for r in &table.summary {
        let at = r.sweep_value.map(|v| format!(" @{v}")).unwrap_or_default();
        let ideal = r.ideal_speedup.map(|v| format!(" (ideal {v:.2}x)")).unwrap_or_default();
        println!("GEOMEAN {}{at}: {:.2}x{ideal}", r.format, r.speedup);
    }
    if let Some(p) = &cfg.plot {
        emit_plot(&table, p)?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Convert { graph, format, seed, directed, output } => {
            let g = graph.load(1, seed, directed)?;
            let m = store(&g.adjacency, format)?;
            let bytes = m.encode();
            std::fs::write(&output, &bytes).with_context(|| format!("writing {}", output.display()))?;
            println!(
                "{}: {}x{}, nnz {}, stored values {}, {} bytes as {format}",
                g.name,
                g.n(),
                g.n(),
                g.adjacency.nnz(),
                m.as_sparse().stored_values(),
                bytes.len()
            );
        }
        Cmd::Verify { graph, formats, feature_dim, seed, directed, stored } => {
            let g = graph.load(feature_dim, seed, directed)?;
            let z = g.features();
            let cfg = ProcessorConfig::default();
            let mut rep = verify(&g.adjacency, &z, &formats, &cfg);
            if let Some(p) = stored {
                let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
                rep.checks.push(verify_stored(&bytes, &g.adjacency, &z, &cfg));
            }
            println!("{} (n={}, nnz={}, F={feature_dim})", g.name, g.n(), g.adjacency.nnz());
            println!("{rep}");
            return Ok(rep.passed());
        }
        Cmd::Bench(r) => experiment(r, SweepAxis::None)?,
        Cmd::Sweep { axis, run } => {
            let axis = match axis {
                SweepKind::Height => SweepAxis::ScvHeight,
                SweepKind::Width => SweepAxis::TileWidth,
            };
            experiment(run, axis)?
        }
        Cmd::Scale(r) => experiment(r, SweepAxis::Processors)?,
        Cmd::TraceDump { graph, format, feature_dim, seed, directed, what, output } => {
            let g = graph.load(feature_dim, seed, directed)?;
            let z = g.features();
            let cfg = ProcessorConfig::default();
            let rep = run_aggregation(&g.adjacency, &z, format, &cfg, &CacheConfig::default(), true)?;
            let t = &rep.timed;
            let text = match what {
                Dump::Mem => t.trace.to_csv(),
                Dump::Ops => {
                    let mut s = String::from("cycle,vpe,opcode,a_addr,b_addr,c_addr,ps_unit,hazard\n");
                    for o in &t.ops {
                        let h = o.hazard.map(|h| format!("{h:?}")).unwrap_or_default();
                        s += &format!(
                            "{},{},{},{:#x},{:#x},{:#x},{},{h}\n",
                            o.cycle, o.vpe, o.opcode, o.a_addr, o.b_addr, o.c_addr, o.ps_unit
                        );
                    }
                    s
                }
                Dump::Events => {
                    let mut s = String::from("cycle,vpe,kind,ps_row\n");
                    for e in &t.events {
                        s += &format!("{},{},{:?},{}\n", e.cycle, e.vpe, e.kind, e.address);
                    }
                    s
                }
            };
            std::fs::write(&output, text).with_context(|| format!("writing {}", output.display()))?;
            println!(
                "{} {format}: {} cycles, MAT {:.2}, {} trace records",
                g.name,
                rep.cycles(),
                rep.mat,
                t.trace.len()
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
