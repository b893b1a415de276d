pub mod array;
pub mod baselines;
pub mod bench;
pub mod doa;
pub mod error;
pub mod linalg;
pub mod signal;
pub mod tensor;
pub mod vtd;

pub use error::{Error, Result};
