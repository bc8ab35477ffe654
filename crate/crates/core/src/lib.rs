//! Cahen–Gutt moment map and Futaki-type invariants on Kähler manifolds
//! described by potentials on holomorphic charts.

// Tensor code indexes several arrays by the same slot.
#![allow(clippy::needless_range_loop)]

pub mod chart;
pub mod chern;
pub mod error;
pub mod expr;
pub mod fields;
pub mod forms;
pub mod geometry;
pub mod invariants;
pub mod jet;
pub mod manifolds;
pub mod moment;
pub mod quadrature;

pub use error::{GeomError, Result};
pub use jet::Jet;
