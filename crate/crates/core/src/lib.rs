pub mod bounds;
pub mod cei;
pub mod cli;
pub mod engine;
pub mod error;
pub mod json;
pub mod metrics;
pub mod oracle;
pub mod quadrature;
pub mod simharness;

pub use error::{Error, Result};
