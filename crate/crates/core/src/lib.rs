pub mod ensemble;
pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod potential;
pub mod quadrature;
pub mod sampler;
pub mod theory;
pub mod seed;

pub use error::{Error, Result};
