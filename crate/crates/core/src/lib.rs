pub mod attack;
pub mod cluster;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod error;
pub mod fl;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
