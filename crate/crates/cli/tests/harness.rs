use std::path::{Path, PathBuf};
use std::process::Command;

use scv_bench::config::{ExperimentConfig, GraphSource, SweepAxis};
use scv_bench::experiment::{run_experiment, ResultTable, CSV_HEADER};
use scv_bench::output::{csv_string, emit_csv, emit_plot};
use scv_bench::store;
use scv_core::{Format, OrderKind, ScvMatrix};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        name: "small".into(),
        graphs: vec!["rmat:9:5e-3".parse().unwrap(), "rmat:10:5e-5".parse().unwrap()],
        formats: ["csr", "csc", "mp", "bcsr:16", "scv:64", "scv-z:64"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect(),
        feature_dim: 16,
        seeds: vec![0, 1],
        ..Default::default()
    }
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn csv_matches_golden_file() {
    let csv = csv_string(&run_experiment(&small()).unwrap()).unwrap();
    let path = golden("small.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() || !path.exists() {
        std::fs::write(&path, &csv).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert!(csv == want, "CSV drifted from {}; rerun with UPDATE_GOLDEN=1 if intended", path.display());
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let cfg = small();
    emit_csv(&run_experiment(&cfg).unwrap(), &a).unwrap();
    emit_csv(&run_experiment(&cfg).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn header_is_the_documented_schema() {
    let csv = csv_string(&run_experiment(&small()).unwrap()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    let cols = CSV_HEADER.split(',').count();
    assert!(csv.lines().all(|l| l.split(',').count() == cols));
}

#[test]
fn mac_ops_match_analytic_count() {
    let cfg = small();
    let t = run_experiment(&cfg).unwrap();
    let per_item = cfg.feature_dim.div_ceil(cfg.processor.n_pe) * cfg.processor.n_pe;
    for r in &t.rows {
        let (nnz, mac, pad) = (r.nnz.unwrap(), r.mac_ops.unwrap(), r.padding_mac_ops.unwrap());
        assert_eq!(mac, (nnz * per_item) as u64 + pad, "{} {}", r.graph, r.format);
        if r.format != "bcsr:16" {
            assert_eq!(pad, 0);
        }
    }
    assert!(t.rows.iter().any(|r| r.format == "bcsr:16" && r.padding_mac_ops.unwrap() > 0));
}

#[test]
fn geomean_rows_summarize_speedups() {
    let t = run_experiment(&small()).unwrap();
    assert_eq!(t.summary.len(), 6);
    for s in &t.summary {
        let xs: Vec<f64> = t.rows.iter().filter(|r| r.format == s.format).map(|r| r.speedup).collect();
        assert_eq!(xs.len(), 4);
        let g = xs.iter().product::<f64>().powf(0.25);
        assert!((s.speedup - g).abs() < 1e-9 * g);
        assert!(s.cycles.is_none() && s.graph == "GEOMEAN");
    }
    assert_eq!(t.summary[0].speedup, 1.0);
}

#[test]
fn identity_against_itself_is_one_row_at_unit_speedup() {
    let cfg = ExperimentConfig {
        graphs: vec![GraphSource::Identity { n: 64 }],
        formats: vec![Format::scv(128)],
        baseline: Format::scv(128),
        feature_dim: 8,
        ..Default::default()
    };
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0].speedup, 1.0);
}

#[test]
fn scv_beats_csr_on_ultra_sparse_rmat() {
    let cfg = ExperimentConfig {
        graphs: vec!["rmat:13:5e-5".parse().unwrap()],
        formats: vec![Format::Csr, Format::scv(512)],
        ..Default::default()
    };
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(t.rows[0].class, "ultra-sparse");
    assert!(t.rows[1].speedup > 1.0, "{}", t.rows[1].speedup);
}

#[test]
fn height_sweep_covers_every_point() {
    let mut cfg = small();
    cfg.graphs.truncate(1);
    cfg.seeds = vec![0];
    cfg.formats = vec![Format::Csr, Format::scv_z(512)];
    cfg.sweep.axis = SweepAxis::ScvHeight;
    let t = run_experiment(&cfg).unwrap();
    let heights: Vec<usize> = t.rows.iter().filter_map(|r| r.sweep_value).collect();
    assert_eq!(heights, vec![128, 256, 512, 1024, 2048]);
    assert!(t.rows.iter().all(|r| r.format != "scv-z:512" || r.sweep_value.is_some()));
}

#[test]
fn scaling_rows_stay_under_ideal() {
    let mut cfg = small();
    cfg.graphs.truncate(1);
    cfg.formats = vec![Format::scv_z(64)];
    cfg.baseline = Format::scv_z(64);
    cfg.sweep.axis = SweepAxis::Processors;
    cfg.sweep.values = vec![2, 4, 8];
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(t.rows.len(), 2 * 4);
    for r in &t.rows {
        let ideal = r.ideal_speedup.unwrap();
        assert!(r.speedup <= ideal + 1e-12, "P={} {} > {ideal}", r.n_proc, r.speedup);
        assert_eq!(r.n_proc, r.sweep_value.unwrap());
    }
}

#[test]
fn empty_table_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let t = ResultTable::default();
    assert!(emit_csv(&t, &dir.path().join("x.csv")).is_err());
    assert!(emit_plot(&t, &dir.path().join("x.svg")).is_err());
}

/// Minimal well-formedness: one root element and balanced tags.
fn well_formed_svg(text: &str) -> bool {
    let mut stack: Vec<&str> = Vec::new();
    let mut rest = text;
    let mut roots = 0;
    while let Some(i) = rest.find('<') {
        let Some(j) = rest[i..].find('>') else { return false };
        let tag = &rest[i + 1..i + j];
        rest = &rest[i + j + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            if stack.pop() != Some(name.trim()) {
                return false;
            }
        } else {
            let name = tag.split_whitespace().next().unwrap_or("");
            if stack.is_empty() {
                roots += 1;
            }
            if !tag.ends_with('/') {
                stack.push(name);
            }
        }
    }
    stack.is_empty() && roots == 1
}

#[test]
fn plots_are_non_empty_svg() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.graphs.truncate(1);
    let p = dir.path().join("bench.svg");
    emit_plot(&run_experiment(&cfg).unwrap(), &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("<svg") && well_formed_svg(&text));
    for f in &cfg.formats {
        assert!(text.contains(&f.to_string()), "missing label {f}");
    }

    cfg.formats = vec![Format::scv_z(64)];
    cfg.baseline = Format::scv_z(64);
    cfg.sweep.axis = SweepAxis::Processors;
    cfg.sweep.values = vec![2, 4];
    let p = dir.path().join("scale.svg");
    emit_plot(&run_experiment(&cfg).unwrap(), &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(well_formed_svg(&text) && text.contains("scv-z:64 ideal"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            ExperimentConfig::load(&p).unwrap().validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 4);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scv-bench"))
}

#[test]
fn verify_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin().args(["verify", "--graph", "rmat:8:2e-2", "--feature-dim", "8"]).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let empty = bin().args(["verify", "--graph", "identity:0"]).output().unwrap();
    assert!(empty.status.success());

    // Swap a lone entry to the other row of its vector and store it.
    let g = GraphSource::Rmat { log_n: 8, density: 2e-2 }.load(8, 0, false).unwrap();
    let mut m = ScvMatrix::from_coo(&g.adjacency, 2, 1, OrderKind::RowMajor).unwrap();
    let k = (0..m.n_tiles()).find(|&p| m.tile_range(p).len() == 1).map(|p| m.blk_ptr[p]).unwrap();
    m.blk_id[k] ^= 1;
    let bad = dir.path().join("bad.scvm");
    std::fs::write(&bad, scv_core::formats::AnyMatrix::Scv(m).encode()).unwrap();
    let out = bin()
        .args(["verify", "--graph", "rmat:8:2e-2", "--feature-dim", "8", "--formats", "csr", "--stored"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL stored scv") && text.contains(" at ("), "{text}");
}

#[test]
fn convert_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["csr", "csc", "mp", "bcsr:4", "scv-z:16x2"] {
        let p = dir.path().join("g.scvm");
        let st = bin().args(["convert", "--graph", "rmat:7:5e-2", "--format", f, "-o"]).arg(&p).status().unwrap();
        assert!(st.success());
        let st = bin()
            .args(["verify", "--graph", "rmat:7:5e-2", "--feature-dim", "4", "--formats", f, "--stored"])
            .arg(&p)
            .status()
            .unwrap();
        assert!(st.success(), "{f}");
    }
    let g = GraphSource::Rmat { log_n: 7, density: 5e-2 }.load(4, 0, false).unwrap();
    assert!(store(&g.adjacency, Format::Multipass).is_ok());
}

#[test]
fn bench_and_trace_dump_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out/r.csv");
    let st = bin()
        .args(["bench", "--graphs", "identity:32", "--feature-dim", "8", "--formats", "csr,scv:128", "-o"])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 2 + 2);

    let bad = bin().args(["sweep", "--axis", "height", "--values", "100"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("power of two"));

    for what in ["mem", "ops", "events"] {
        let p = dir.path().join(format!("{what}.csv"));
        let st = bin()
            .args(["trace-dump", "--graph", "rmat:7:5e-2", "--feature-dim", "8", "--what", what, "-o"])
            .arg(&p)
            .status()
            .unwrap();
        assert!(st.success());
        assert!(std::fs::metadata(&p).unwrap().len() > 0);
    }
}
