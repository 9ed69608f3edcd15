pub mod domain;
pub mod analysis;
pub mod cli;
pub mod energy;
pub mod error;
pub mod kernels;
pub mod oracle;
pub(crate) mod quad;
pub mod record;
pub mod solvers;

pub use error::{Error, Result};
