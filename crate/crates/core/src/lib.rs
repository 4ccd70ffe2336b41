pub mod bases;
pub mod bounds;
pub mod bp_baseline;
pub mod cli_io;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod gen_prosparse;
pub mod numerics;
pub mod prony;
pub mod prosparse;
pub mod sparse;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use sparse::SparseVec;
