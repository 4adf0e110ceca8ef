use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use scv_core::formats::AnyMatrix;
use scv_core::graphgen::{self, GraphSpec, RmatParams};
use scv_core::sim::residency_for;
use scv_core::{CacheConfig, CooMatrix, Format, ProcessorConfig};

/// Where a graph comes from. Written as `rmat:<log2 n>:<density>`,
/// `identity:<n>`, or a path (`.mtx` Matrix Market, `.scvm` binary,
/// anything else an edge list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GraphSource {
    Rmat { log_n: u32, density: f64 },
    Identity { n: usize },
    File(PathBuf),
}

impl FromStr for GraphSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["rmat", n, d] => Ok(GraphSource::Rmat {
                log_n: n.parse().with_context(|| format!("bad log2 n in '{s}'"))?,
                density: d.parse().with_context(|| format!("bad density in '{s}'"))?,
            }),
            ["identity", n] => Ok(GraphSource::Identity {
                n: n.parse().with_context(|| format!("bad size in '{s}'"))?,
            }),
            ["rmat", ..] | ["identity", ..] => bail!("malformed graph source '{s}'"),
            _ => Ok(GraphSource::File(PathBuf::from(s))),
        }
    }
}

impl TryFrom<String> for GraphSource {
    type Error = anyhow::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GraphSource> for String {
    fn from(g: GraphSource) -> String {
        g.to_string()
    }
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::Rmat { log_n, density } => write!(f, "rmat:{log_n}:{density:e}"),
            GraphSource::Identity { n } => write!(f, "identity:{n}"),
            GraphSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl GraphSource {
    /// Short name used in result rows.
    pub fn name(&self) -> String {
        match self {
            GraphSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            other => other.to_string(),
        }
    }

    /// Whether `seed` changes the adjacency (not just the features).
    pub fn is_random(&self) -> bool {
        matches!(self, GraphSource::Rmat { .. })
    }

    pub fn load(&self, feature_dim: usize, seed: u64, directed: bool) -> Result<GraphSpec> {
        let name = self.name();
        match self {
            GraphSource::Rmat { log_n, density } => {
                Ok(graphgen::rmat_graph(name, *log_n, *density, feature_dim, RmatParams::default(), seed)?)
            }
            GraphSource::Identity { n } => Ok(GraphSpec::new(name, CooMatrix::identity(*n), feature_dim, seed)),
            GraphSource::File(p) => Ok(GraphSpec::new(name, load_matrix(p, directed)?, feature_dim, seed)),
        }
    }
}

/// Reads any supported matrix file as COO.
pub fn load_matrix(path: &Path, directed: bool) -> Result<CooMatrix> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let m = match ext {
        "mtx" => graphgen::load_matrix_market(path)?,
        "scvm" => {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            to_coo(&AnyMatrix::decode(&bytes)?)?
        }
        _ => graphgen::load_edge_list(path, directed)?,
    };
    Ok(m)
}

/// Dense-free conversion of a stored matrix back to COO.
pub fn to_coo(m: &AnyMatrix) -> Result<CooMatrix> {
    use scv_core::Triplet;
    let t: Vec<Triplet> = match m {
        AnyMatrix::Coo(c) => return Ok(c.clone()),
        AnyMatrix::Csr(c) => (0..c.n_rows)
            .flat_map(|r| (c.row_ptr[r]..c.row_ptr[r + 1]).map(move |k| Triplet::new(r, c.col_id[k], c.values[k])))
            .collect(),
        AnyMatrix::Csc(c) => (0..c.n_cols)
            .flat_map(|col| {
                (c.col_ptr[col]..c.col_ptr[col + 1]).map(move |k| Triplet::new(c.row_id[k], col, c.values[k]))
            })
            .collect(),
        AnyMatrix::Bcsr(b) => {
            let bs = b.block_size;
            let mut t = Vec::new();
            for br in 0..b.n_block_rows() {
                for k in b.row_ptr[br]..b.row_ptr[br + 1] {
                    for (i, &v) in b.block(k).iter().enumerate() {
                        let (r, c) = (br * bs + i / bs, b.col_id[k] * bs + i % bs);
                        if v != 0.0 && r < b.n_rows && c < b.n_cols {
                            t.push(Triplet::new(r, c, v));
                        }
                    }
                }
            }
            t
        }
        AnyMatrix::Scv(s) => (0..s.n_tiles())
            .flat_map(|p| s.tile_range(p).map(move |k| (p, k)))
            .map(|(p, k)| {
                let (r, c) = s.coord(p, k);
                Triplet::new(r, c, s.values[k])
            })
            .collect(),
    };
    let sp = m.as_sparse();
    Ok(CooMatrix::new(sp.n_rows(), sp.n_cols(), t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    #[default]
    None,
    ScvHeight,
    TileWidth,
    Processors,
}

impl SweepAxis {
    /// Allowed powers of two, inclusive.
    pub fn range(self) -> Option<(usize, usize)> {
        match self {
            SweepAxis::None => None,
            SweepAxis::ScvHeight => Some((128, 2048)),
            SweepAxis::TileWidth => Some((1, 64)),
            SweepAxis::Processors => Some((2, 64)),
        }
    }

    pub fn default_values(self) -> Vec<usize> {
        match self.range() {
            None => Vec::new(),
            Some((lo, hi)) => (lo.trailing_zeros()..=hi.trailing_zeros()).map(|k| 1 << k).collect(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::ScvHeight => "scv-height",
            SweepAxis::TileWidth => "tile-width",
            SweepAxis::Processors => "processors",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => SweepAxis::None,
            "scv-height" | "height" => SweepAxis::ScvHeight,
            "tile-width" | "width" => SweepAxis::TileWidth,
            "processors" | "procs" => SweepAxis::Processors,
            _ => bail!("unknown sweep axis '{s}' (none, scv-height, tile-width, processors)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Empty means the full power-of-two range of the axis.
    pub values: Vec<usize>,
}

impl SweepConfig {
    pub fn points(&self) -> Vec<usize> {
        if self.values.is_empty() {
            self.axis.default_values()
        } else {
            self.values.clone()
        }
    }
}

fn format_strings<S: serde::Serializer>(v: &[Format], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|f| f.to_string()))
}

fn parse_formats<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<Format>, D::Error> {
    let raw = Vec::<String>::deserialize(d)?;
    raw.iter()
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .collect()
}

fn format_string<S: serde::Serializer>(v: &Format, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn parse_format<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Format, D::Error> {
    String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
}

/// One experiment: graphs x formats x seeds x sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub graphs: Vec<GraphSource>,
    /// Edge lists are read as undirected unless set.
    pub directed: bool,
    #[serde(serialize_with = "format_strings", deserialize_with = "parse_formats")]
    pub formats: Vec<Format>,
    /// Format every speedup is measured against.
    #[serde(serialize_with = "format_string", deserialize_with = "parse_format")]
    pub baseline: Format,
    pub feature_dim: usize,
    pub seeds: Vec<u64>,
    pub sweep: SweepConfig,
    pub processor: ProcessorConfig,
    pub cache: CacheConfig,
    pub output: PathBuf,
    pub plot: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            graphs: vec![GraphSource::Rmat {
                log_n: 14,
                density: 1e-5,
            }],
            directed: false,
            formats: vec![
                Format::Csr,
                Format::Csc,
                Format::Multipass,
                Format::scv(512),
                Format::scv_z(512),
            ],
            baseline: Format::Csr,
            feature_dim: 64,
            seeds: vec![0],
            sweep: SweepConfig::default(),
            processor: ProcessorConfig::default(),
            cache: CacheConfig::default(),
            output: PathBuf::from("results.csv"),
            plot: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Formats as run at sweep point `v`.
    pub fn format_at(&self, f: Format, v: Option<usize>) -> Format {
        match (f, self.sweep.axis, v) {
            (Format::Scv { width, order, .. }, SweepAxis::ScvHeight, Some(h)) => Format::Scv {
                height: h,
                width,
                order,
            },
            (Format::Scv { height, order, .. }, SweepAxis::TileWidth, Some(w)) => Format::Scv {
                height,
                width: w,
                order,
            },
            _ => f,
        }
    }

    /// Whether `f` varies along the sweep axis.
    pub fn sweeps(&self, f: Format) -> bool {
        match self.sweep.axis {
            SweepAxis::None => false,
            SweepAxis::ScvHeight | SweepAxis::TileWidth | SweepAxis::Processors => f.is_scv(),
        }
    }

    /// Rejects configurations the comparison cannot honor, with the reason.
    pub fn validate(&self) -> Result<()> {
        self.processor.validate()?;
        self.cache.validate()?;
        if self.graphs.is_empty() {
            bail!("no graphs configured");
        }
        if self.formats.is_empty() {
            bail!("no formats configured");
        }
        if self.seeds.is_empty() {
            bail!("no seeds configured");
        }
        if self.feature_dim == 0 {
            bail!("feature_dim must be positive");
        }
        let points = self.sweep.points();
        if let Some((lo, hi)) = self.sweep.axis.range() {
            for &v in &points {
                if !v.is_power_of_two() || v < lo || v > hi {
                    bail!(
                        "{} sweep value {v} must be a power of two in {lo}..={hi}",
                        self.sweep.axis.label()
                    );
                }
            }
        } else if !self.sweep.values.is_empty() {
            bail!("sweep values given without a sweep axis");
        }
        match self.sweep.axis {
            SweepAxis::Processors => {
                if let Some(f) = self.formats.iter().find(|f| !f.is_scv()) {
                    bail!("processor scaling partitions along the SCV order; {f} cannot be split");
                }
            }
            SweepAxis::None => {
                if !self.formats.contains(&self.baseline) {
                    bail!("baseline {} is not among the formats", self.baseline);
                }
            }
            _ => {
                if self.sweeps(self.baseline) || !self.formats.contains(&self.baseline) {
                    bail!(
                        "baseline {} must be a listed format that does not vary along the sweep",
                        self.baseline
                    );
                }
                if !self.formats.iter().any(|&f| self.sweeps(f)) {
                    bail!("{} sweep needs at least one SCV format", self.sweep.axis.label());
                }
            }
        }
        // Iso-memory: every format sees the same scratchpad split, so each
        // must fit its minimum working set in it.
        let row = self.feature_dim * self.processor.value_bytes;
        let vb = self.processor.value_bytes;
        for &f in &self.formats {
            let variants: Vec<Format> = if self.sweeps(f) && self.sweep.axis != SweepAxis::Processors {
                points.iter().map(|&v| self.format_at(f, Some(v))).collect()
            } else {
                vec![f]
            };
            for f in variants {
                match f {
                    Format::Scv { height, .. } if height * vb > self.processor.scratch_ps_bytes => bail!(
                        "{f}: {height} partial-sum rows of one value need {} bytes, \
                         PS scratchpad holds {} (iso-memory)",
                        height * vb,
                        self.processor.scratch_ps_bytes
                    ),
                    Format::Multipass => {
                        let r = residency_for(&self.processor, self.feature_dim);
                        if r.z_rows == 0 || r.ps_rows == 0 {
                            bail!(
                                "mp: a {row}-byte feature row does not fit the Z ({}) or PS ({}) scratchpad",
                                self.processor.scratch_z_bytes,
                                self.processor.scratch_ps_bytes
                            );
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub graphs: Option<Vec<GraphSource>>,
    pub formats: Option<Vec<Format>>,
    pub baseline: Option<Format>,
    pub feature_dim: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Option<Vec<usize>>,
    pub n_vpe: Option<usize>,
    pub n_pe: Option<usize>,
    pub queue_depth: Option<usize>,
    pub cache_bytes: Option<u64>,
    pub output: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($src:ident => $($dst:tt)+) => {
                if let Some(v) = &self.$src {
                    $($dst)+ = v.clone();
                }
            };
        }
        set!(graphs => cfg.graphs);
        set!(formats => cfg.formats);
        set!(baseline => cfg.baseline);
        set!(feature_dim => cfg.feature_dim);
        set!(seeds => cfg.seeds);
        set!(sweep_axis => cfg.sweep.axis);
        set!(sweep_values => cfg.sweep.values);
        set!(n_vpe => cfg.processor.n_vpe);
        set!(n_pe => cfg.processor.n_pe);
        set!(queue_depth => cfg.processor.queue_depth);
        set!(cache_bytes => cfg.cache.capacity);
        set!(output => cfg.output);
        if self.plot.is_some() {
            cfg.plot = self.plot.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_sources_parse() {
        assert_eq!(
            "rmat:14:1e-5".parse::<GraphSource>().unwrap(),
            GraphSource::Rmat {
                log_n: 14,
                density: 1e-5
            }
        );
        assert_eq!("identity:8".parse::<GraphSource>().unwrap(), GraphSource::Identity { n: 8 });
        assert!(matches!("g.mtx".parse::<GraphSource>().unwrap(), GraphSource::File(_)));
        assert!("rmat:x:1".parse::<GraphSource>().is_err());
        assert!("rmat:14".parse::<GraphSource>().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            graphs = ["identity:16"]
            formats = ["csr", "scv-z:128"]
            [sweep]
            axis = "scv-height"
            [processor]
            n_vpe = 4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.processor.n_vpe, 4);
        assert_eq!(cfg.processor.n_pe, 64);
        assert_eq!(cfg.sweep.points(), vec![128, 256, 512, 1024, 2048]);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("formatz = []").is_err());
    }

    #[test]
    fn sweep_ranges_enforced() {
        let mut cfg = ExperimentConfig {
            sweep: SweepConfig {
                axis: SweepAxis::TileWidth,
                values: vec![1, 3],
            },
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("power of two"));
        cfg.sweep.values = vec![128];
        assert!(cfg.validate().is_err());
        cfg.sweep.values = vec![1, 64];
        cfg.validate().unwrap();
    }

    #[test]
    fn iso_memory_violation_explained() {
        let mut cfg = ExperimentConfig::default();
        cfg.processor.scratch_ps_bytes = 1024;
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.contains("iso-memory"), "{e}");
    }

    #[test]
    fn scaling_rejects_baselines() {
        let cfg = ExperimentConfig {
            sweep: SweepConfig {
                axis: SweepAxis::Processors,
                values: vec![],
            },
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::default();
        Overrides {
            feature_dim: Some(128),
            n_vpe: Some(2),
            seeds: Some(vec![7, 8]),
            ..Overrides::default()
        }
        .apply(&mut cfg);
        assert_eq!((cfg.feature_dim, cfg.processor.n_vpe, cfg.seeds.len()), (128, 2, 2));
    }
}
