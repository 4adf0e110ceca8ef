//! Graph loading (Matrix Market, edge lists) and synthetic generation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{CooMatrix, DenseMatrix, SparseMatrix, Triplet};

/// Densities below this are ultra-sparse.
pub const ULTRA_SPARSE_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SparsityClass {
    UltraSparse,
    HighlySparse,
}

impl SparsityClass {
    pub fn of_density(density: f64) -> Self {
        if density < ULTRA_SPARSE_THRESHOLD {
            SparsityClass::UltraSparse
        } else {
            SparsityClass::HighlySparse
        }
    }
}

impl std::fmt::Display for SparsityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SparsityClass::UltraSparse => "ultra-sparse",
            SparsityClass::HighlySparse => "highly-sparse",
        })
    }
}

pub fn density_of(nnz: usize, n_rows: usize, n_cols: usize) -> f64 {
    if n_rows == 0 || n_cols == 0 {
        return 0.0;
    }
    nnz as f64 / (n_rows as f64 * n_cols as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub name: String,
    pub adjacency: CooMatrix,
    pub feature_dim: usize,
    pub density: f64,
    pub class: SparsityClass,
    pub seed: u64,
}

impl GraphSpec {
    pub fn new(name: impl Into<String>, adjacency: CooMatrix, feature_dim: usize, seed: u64) -> Self {
        let density = density_of(adjacency.nnz(), adjacency.n_rows(), adjacency.n_cols());
        GraphSpec {
            name: name.into(),
            adjacency,
            feature_dim,
            density,
            class: SparsityClass::of_density(density),
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.n_rows()
    }

    pub fn features(&self) -> DenseMatrix {
        gen_features(self.adjacency.n_cols(), self.feature_dim, self.seed)
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Keeps the first occurrence of every coordinate.
fn dedupe(triplets: Vec<Triplet>) -> Vec<Triplet> {
    let mut seen = HashSet::with_capacity(triplets.len());
    triplets
        .into_iter()
        .filter(|t| seen.insert((t.row, t.col)))
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<CooMatrix> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

/// Coordinate-format Matrix Market. Indices are 1-based in the file.
pub fn parse_matrix_market(reader: impl BufRead) -> Result<CooMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let h: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
    }
    if h[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported layout '{}'", h[2])));
    }
    let field = match h[3].as_str() {
        "real" | "integer" => Field::Real,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match h[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut read = 0usize;
    for (i, line) in lines {
        let ln = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let Some((n_rows, n_cols, nnz)) = size else {
            if tok.len() != 3 {
                return Err(parse_err(ln, "size line needs rows, cols and entry count"));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err(ln, format!("bad size '{s}'")));
            size = Some((p(tok[0])?, p(tok[1])?, p(tok[2])?));
            triplets.reserve(size.unwrap().2);
            continue;
        };
        let want = if field == Field::Pattern { 2 } else { 3 };
        if tok.len() != want {
            return Err(parse_err(ln, format!("expected {want} fields, found {}", tok.len())));
        }
        let idx = |s: &str, n: usize| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| parse_err(ln, format!("bad index '{s}'")))?;
            if v == 0 || v > n {
                return Err(parse_err(ln, format!("index {v} outside 1..={n}")));
            }
            Ok(v - 1)
        };
        let r = idx(tok[0], n_rows)?;
        let c = idx(tok[1], n_cols)?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Real => tok[2]
                .parse::<f64>()
                .map_err(|_| parse_err(ln, format!("bad value '{}'", tok[2])))?,
        };
        read += 1;
        if read > nnz {
            return Err(parse_err(ln, format!("more than the declared {nnz} entries")));
        }
        triplets.push(Triplet::new(r, c, v));
        if r != c {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => triplets.push(Triplet::new(c, r, v)),
                Symmetry::Skew => triplets.push(Triplet::new(c, r, -v)),
            }
        } else if symmetry == Symmetry::Skew {
            return Err(parse_err(ln, "skew-symmetric matrix with a diagonal entry"));
        }
    }
    let (n_rows, n_cols, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if read != nnz {
        return Err(parse_err(0, format!("declared {nnz} entries, found {read}")));
    }
    CooMatrix::new(n_rows, n_cols, dedupe(triplets))
}

pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<CooMatrix> {
    parse_edge_list(BufReader::new(File::open(path)?), directed)
}

/// `src dst [weight]` per line, 0-based; `#` and `%` start comments.
/// The matrix is square with side max index + 1.
pub fn parse_edge_list(reader: impl BufRead, directed: bool) -> Result<CooMatrix> {
    let mut triplets = Vec::new();
    let mut n = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let ln = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&tok.len()) {
            return Err(parse_err(ln, "expected 'src dst [weight]'"));
        }
        let node = |s: &str| s.parse::<usize>().map_err(|_| parse_err(ln, format!("bad node id '{s}'")));
        let (s, d) = (node(tok[0])?, node(tok[1])?);
        let w = match tok.get(2) {
            Some(w) => w.parse::<f64>().map_err(|_| parse_err(ln, format!("bad weight '{w}'")))?,
            None => 1.0,
        };
        n = n.max(s + 1).max(d + 1);
        triplets.push(Triplet::new(s, d, w));
        if !directed && s != d {
            triplets.push(Triplet::new(d, s, w));
        }
    }
    CooMatrix::new(n, n, dedupe(triplets))
}

/// Quadrant probabilities for recursive-matrix generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmatParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for RmatParams {
    fn default() -> Self {
        RmatParams {
            a: 0.57,
            b: 0.19,
            c: 0.19,
            d: 0.05,
        }
    }
}

impl RmatParams {
    pub fn uniform() -> Self {
        RmatParams {
            a: 0.25,
            b: 0.25,
            c: 0.25,
            d: 0.25,
        }
    }
}

/// R-MAT with `nnz_target` distinct coordinates; repeated draws are
/// discarded and re-drawn. All values are 1.
pub fn gen_rmat(n: usize, nnz_target: usize, p: RmatParams, seed: u64) -> Result<CooMatrix> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { name: "n", value: n });
    }
    let probs = [p.a, p.b, p.c, p.d];
    if probs.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "rmat probabilities must be in [0, 1] and sum to 1, got {probs:?}"
        )));
    }
    if nnz_target as u128 > (n as u128) * (n as u128) {
        return Err(Error::Config(format!(
            "cannot place {nnz_target} distinct entries in a {n}x{n} matrix"
        )));
    }
    let levels = n.trailing_zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(nnz_target);
    let mut triplets = Vec::with_capacity(nnz_target);
    let (ab, abc) = (p.a + p.b, p.a + p.b + p.c);
    while triplets.len() < nnz_target {
        let (mut r, mut c) = (0usize, 0usize);
        for _ in 0..levels {
            let x: f64 = rng.gen();
            let (dr, dc) = if x < p.a {
                (0, 0)
            } else if x < ab {
                (0, 1)
            } else if x < abc {
                (1, 0)
            } else {
                (1, 1)
            };
            r = 2 * r + dr;
            c = 2 * c + dc;
        }
        if seen.insert((r, c)) {
            triplets.push(Triplet::new(r, c, 1.0));
        }
    }
    CooMatrix::new(n, n, triplets)
}

/// RMAT graph of side `2^log_n` at the given density.
pub fn rmat_graph(
    name: impl Into<String>,
    log_n: u32,
    density: f64,
    feature_dim: usize,
    params: RmatParams,
    seed: u64,
) -> Result<GraphSpec> {
    let n = 1usize << log_n;
    let nnz = (density * n as f64 * n as f64).round() as usize;
    Ok(GraphSpec::new(name, gen_rmat(n, nnz, params, seed)?, feature_dim, seed))
}

/// Integers in -8..=8, so every product and sum stays exact in f64.
pub fn gen_features(n: usize, f: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    DenseMatrix::from_fn(n, f, |_, _| rng.gen_range(-8i32..=8) as f64)
}

pub fn constant_features(n: usize, f: usize, value: f64) -> DenseMatrix {
    DenseMatrix::from_fn(n, f, |_, _| value)
}
