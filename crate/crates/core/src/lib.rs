//! Biased voter model on `Z² × Z_w`, its dual branching-coalescing random
//! walk, and closed-form speed and cancer-initiation formulas.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod coupling;
pub mod dual;
pub mod error;
pub mod lattice;
pub mod oncogenesis;
pub mod stats;
pub mod stream;
pub mod voter;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::{LatticeGeometry, Site, VerticalBc};
pub use stream::EventStream;
