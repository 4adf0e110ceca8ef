//! Benchmark harness: experiment configs, per-format runs and sweeps, CSV
//! and SVG output, and oracle verification.

pub mod config;
pub mod experiment;
pub mod output;
pub mod verify;

use scv_core::formats::AnyMatrix;
use scv_core::{BcsrMatrix, CooMatrix, CscMatrix, CsrMatrix, Format, ScvMatrix};

/// Storage for `format`. Multi-pass is a processing order over COO, so it
/// stores as COO.
pub fn store(m: &CooMatrix, format: Format) -> scv_core::Result<AnyMatrix> {
    Ok(match format {
        Format::Csr => AnyMatrix::Csr(CsrMatrix::from_coo(m)),
        Format::Csc => AnyMatrix::Csc(CscMatrix::from_coo(m)),
        Format::Multipass => AnyMatrix::Coo(m.clone()),
        Format::Bcsr { block } => AnyMatrix::Bcsr(BcsrMatrix::from_coo(m, block)?),
        Format::Scv { height, width, order } => AnyMatrix::Scv(ScvMatrix::from_coo(m, height, width, order)?),
    })
}
