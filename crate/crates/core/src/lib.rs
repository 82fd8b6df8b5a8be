//! Zone-level cooling load disaggregation and demand-response flexibility
//! metrics for VAV buildings.

pub mod disaggregation;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod regression;
pub mod synth;
pub mod thermo;

pub use error::{Error, Result};
