//! Superlinear amplitude amplification laboratory.
//!
//! - [`operator`]: symbolic products, both recursions, flattening and query counts
//! - [`gatelist`]: the line-oriented gate-list format
//! - [`state`] and [`trace`]: statevector engine with per-step instrumentation
//! - [`dense`] and [`verify`]: small-N dense reference and the identity suite
//! - [`dynamics`]: the three-amplitude model, closed forms and the continuous limit

pub mod dense;
pub mod dynamics;
pub mod error;
pub mod gatelist;
pub mod operator;
pub mod state;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use operator::{
    build_standard_aa, build_superlinear, count_queries, flatten, Expansions, FlatSequence,
    OperatorExpr, Primitive, QueryLedger, Sign,
};
pub use state::{apply_flat, run_grover, run_standard_aa, run_superlinear_iterative, Dim, StateVector};
pub use trace::{Probe, Trace, TraceRecord};
