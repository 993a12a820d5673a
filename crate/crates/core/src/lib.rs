//! Unit roots, cointegration and forecasting for high-dimensional macroeconomic panels.

pub mod ar;
pub mod bootstrap;
pub mod cli;
pub mod cv;
pub mod dgp;
pub mod error;
pub mod factors;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod multitest;
pub mod panel;
pub mod rng;
pub mod sparse;
pub mod unitroot;
pub mod var;
pub mod vecm;

pub use error::{Error, Result};
pub use nalgebra;
pub use panel::Panel;
