pub mod agent;
pub mod biomarker;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod quantizer;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;
