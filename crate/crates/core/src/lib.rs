pub mod error;
pub mod exec;
pub mod generators;
pub mod harness;
pub mod inference;
pub mod metamodel;
pub mod model;
pub mod refinement;

pub use error::{Error, Result};
pub use exec::Execution;
