pub mod bksvd;
pub mod codec;
pub mod config;
pub mod error;
pub mod eval;
pub mod fdl;
pub mod io;
pub mod layers;
pub mod lightfield;
pub mod metrics;
pub mod pattern;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
