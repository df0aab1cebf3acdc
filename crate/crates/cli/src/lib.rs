//! Command-line tool and HTTP service around the `scriptoria` pipeline.

pub mod error;
pub mod server;
pub mod store;
pub mod workflow;

pub use error::{AppError, AppResult};
