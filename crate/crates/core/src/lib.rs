//! Simulation, characterization and calibration toolkit for a two-qubit
//! silicon spin-qubit processor.

pub mod calibration;
pub mod cli;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod gates;
pub mod gst;
pub mod linalg;
pub mod lsq;
pub mod metrics;
pub mod optim;
pub mod pulse;
pub mod qptm;
pub mod vqe;

pub use error::{Error, Result};
