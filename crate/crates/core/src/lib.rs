//! State-averaged quantum phase estimation toolkit: exact QPE output laws,
//! exact shot sampling at large ancilla counts, threshold peak detection
//! with provable guarantees, Chernoff shot budgets and a hexahedral FEM
//! cantilever model used as the eigenvalue workload.

// `!(x > 0.0)` is used deliberately so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod fejer;
pub mod fem;
pub mod harness;
pub mod oracle;
pub mod qpe_dist;
pub mod sampler;
pub mod shots;
pub mod spectrum;
pub mod torus;

pub use error::{Error, Result};
