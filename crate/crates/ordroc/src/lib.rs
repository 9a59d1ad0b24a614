//! File formats, simulation harness and command line front end for
//! `ordroc-core`.

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod formats;
pub mod sim;

pub use error::{Error, Result};
