//! File formats, synthetic data and the `treemvc` command-line tool built on
//! [`treemvc_core`].

pub mod cli;
pub mod data;
mod error;
pub mod export;
pub mod model_io;
pub mod synth;

pub use error::{Error, Result};
pub use treemvc_core as core;
