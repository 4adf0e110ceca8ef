use std::fmt;

use scv_core::formats::AnyMatrix;
use scv_core::kernels::{
    bcsr_schedule, build_schedule, csc_schedule, csr_schedule, execute_schedule, scv_schedule,
};
use scv_core::sim::{audit_hazards, residency_for, simulate, SimOptions};
use scv_core::{CooMatrix, CsrMatrix, DenseMatrix, Format, ProcessorConfig, Schedule, SparseMatrix};

/// Outcome for one format (or one stored matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    /// Largest |result - oracle| over the functional and simulated outputs.
    pub max_abs_dev: f64,
    pub location: Option<(usize, usize)>,
    pub hazards: usize,
    pub error: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.max_abs_dev == 0.0 && self.hazards == 0
    }

    fn failed(label: String, error: String) -> Self {
        Check { label, max_abs_dev: f64::INFINITY, location: None, hazards: 0, error: Some(error) }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<14}", self.label)?;
        if let Some(e) = &self.error {
            return write!(f, " error: {e}");
        }
        write!(f, " max_abs_dev={}", self.max_abs_dev)?;
        if let (Some((r, c)), true) = (self.location, self.max_abs_dev > 0.0) {
            write!(f, " at ({r}, {c})")?;
        }
        if self.hazards > 0 {
            write!(f, " hazards={}", self.hazards)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let bad = self.checks.iter().filter(|c| !c.passed()).count();
        write!(f, "{} checks, {bad} failed", self.checks.len())
    }
}

/// Triplet-by-triplet accumulation; shares no code with the schedules.
pub fn oracle(a: &CooMatrix, z: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.n_rows(), z.n_cols());
    for t in a.triplets() {
        for (o, zv) in out.row_mut(t.row).iter_mut().zip(z.row(t.col)) {
            *o += t.value * zv;
        }
    }
    out
}

fn worse(a: (f64, Option<(usize, usize)>), b: (f64, Option<(usize, usize)>)) -> (f64, Option<(usize, usize)>) {
    if b.0 > a.0 { b } else { a }
}

fn check_schedule(label: String, s: &Schedule, z: &DenseMatrix, want: &DenseMatrix, cfg: &ProcessorConfig) -> Check {
    let run = || -> scv_core::Result<Check> {
        let zeros = DenseMatrix::zeros(s.n_rows, z.n_cols());
        let exec = execute_schedule(s, z, zeros)?;
        let opts = SimOptions { record_ops: true, ..SimOptions::default() };
        let sim = simulate(s, z, cfg, &opts)?;
        let shape = || scv_core::Error::DimensionMismatch("result shape differs from oracle".into());
        let (dev, at) = worse(
            exec.max_abs_diff(want).ok_or_else(shape)?,
            sim.result.max_abs_diff(want).ok_or_else(shape)?,
        );
        let hazards = audit_hazards(&sim.ops, cfg.write_readback_latency).len();
        Ok(Check { label: label.clone(), max_abs_dev: dev, location: at, hazards, error: None })
    };
    run().unwrap_or_else(|e| Check::failed(label.clone(), e.to_string()))
}

/// Oracle equivalence of every format's functional and simulated output.
pub fn verify(a: &CooMatrix, z: &DenseMatrix, formats: &[Format], cfg: &ProcessorConfig) -> Report {
    let want = oracle(a, z);
    let checks = formats
        .iter()
        .map(|&f| match build_schedule(a, f, residency_for(cfg, z.n_cols())) {
            Ok(s) => check_schedule(f.to_string(), &s, z, &want, cfg),
            Err(e) => Check::failed(f.to_string(), e.to_string()),
        })
        .collect();
    Report { checks }
}

/// Checks a serialized matrix against the graph it was converted from.
/// Structural damage fails at decode; damage that still decodes shows up
/// as a deviating output cell.
pub fn verify_stored(bytes: &[u8], reference: &CooMatrix, z: &DenseMatrix, cfg: &ProcessorConfig) -> Check {
    let m = match AnyMatrix::decode(bytes) {
        Ok(m) => m,
        Err(e) => return Check::failed("stored".into(), e.to_string()),
    };
    let sp = m.as_sparse();
    if (sp.n_rows(), sp.n_cols()) != (reference.n_rows(), reference.n_cols()) {
        return Check::failed(
            "stored".into(),
            format!(
                "shape {}x{} differs from reference {}x{}",
                sp.n_rows(),
                sp.n_cols(),
                reference.n_rows(),
                reference.n_cols()
            ),
        );
    }
    let (label, s) = match &m {
        AnyMatrix::Coo(c) => ("stored coo".to_string(), csr_schedule(&CsrMatrix::from_coo(c))),
        AnyMatrix::Csr(c) => ("stored csr".into(), csr_schedule(c)),
        AnyMatrix::Csc(c) => ("stored csc".into(), csc_schedule(c)),
        AnyMatrix::Bcsr(b) => (format!("stored bcsr:{}", b.block_size), bcsr_schedule(b)),
        AnyMatrix::Scv(s) => ("stored scv".into(), scv_schedule(s)),
    };
    check_schedule(label, &s, z, &oracle(reference, z), cfg)
}
