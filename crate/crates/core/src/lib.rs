#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bare;
pub mod dressed;
pub mod error;
pub mod exec;
pub mod gksl;
pub mod hilbert;
pub mod integrator;
pub mod observables;
pub mod scenario;
pub mod states;

pub use error::{Error, Result};
