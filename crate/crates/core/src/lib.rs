//! Feller processes assembled from state-dependent families of Lévy
//! processes, simulated with an Euler-type Markov chain.

// `!(a < b)` is how parameter checks reject NaN along with bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod family;
pub mod inversion;
pub mod levy;
pub mod presets;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use family::{FellerFamily, ScalarFn, ValidationReport, WeightFunction};
pub use inversion::{CdfTable, InversionConfig};
pub use levy::{ComplexValue, Direction, LevySpec};
pub use rng::RngStream;
pub use sim::{SamplePath, SimConfig};
