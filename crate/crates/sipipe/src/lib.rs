//! File formats, simulation harness and command-line plumbing around
//! [`sipipe_core`].

pub mod config;
pub mod data;
pub mod error;
pub mod infer;
pub mod simulate;

pub use error::{AppError, AppResult};
