//! Sparse compressed vector (SCV) storage for GNN aggregation, together with
//! the baseline formats, their SpMM processing orders, and a cycle-approximate
//! model of a queue-based vector processor with a banked scratchpad and a
//! trace-driven cache/DRAM model.

pub mod error;
pub mod formats;
pub mod graphgen;
pub mod kernels;
pub mod memmodel;
pub mod multiproc;
pub mod sim;
pub mod zorder;

pub use error::{Error, Result};
pub use formats::{
    BcsrMatrix, CooMatrix, CscMatrix, CsrMatrix, DenseMatrix, OrderKind, ScvMatrix, SparseMatrix,
    Triplet,
};
pub use kernels::{Format, Schedule, WorkItem};
pub use memmodel::{CacheConfig, MemTrace};
pub use sim::{ProcessorConfig, SimStats};
