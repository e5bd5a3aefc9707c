//! Coset-code inner bounds for three-user classical-quantum broadcast channels.

pub mod cli;
pub mod cqstates;
pub mod error;
pub mod example1;
pub mod gf;
pub mod quantum;
pub mod randmodels;
pub mod regions;
pub mod sim;
pub mod srm;

pub use error::{Error, Result};
