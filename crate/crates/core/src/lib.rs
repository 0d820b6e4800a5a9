pub mod ape;
pub mod asymptotics;
pub mod data;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod penalized;
pub mod quantreg;
pub mod report;
pub mod selection;
pub mod shrinkage;
pub mod simlab;
pub mod specfun;

pub use data::Dataset;
pub use error::{Error, Result};
