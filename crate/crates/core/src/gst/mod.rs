//! Gate set tomography: experiment design, dataset simulation and
//! maximum-likelihood estimation of a CPTP gate set.

pub mod circuit;
pub mod completeness;
pub mod cptp;
pub mod dataset;
pub mod estimate;
pub mod model;
pub mod report;

pub use circuit::{build_fiducials, build_germs, compile_sequences, Block, Circuit, Design, GateLabel};
