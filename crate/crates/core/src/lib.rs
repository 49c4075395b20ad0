pub mod cli;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod synth;

pub use error::{Error, Result};
