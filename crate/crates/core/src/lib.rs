pub mod builders;
pub mod classifier;
pub mod config;
pub mod error;
pub mod euclid;
pub mod exec;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod system;

pub use error::{Error, Result};
