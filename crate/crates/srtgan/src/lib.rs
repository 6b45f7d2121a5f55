//! File formats, dataset layout and the command line around
//! [`srtgan_core`].

pub mod archive;
pub mod checkpoint;
pub mod cli;
pub mod compare;
pub mod config;
pub mod dataset;
mod error;
pub mod image_io;
pub mod qa_data;
pub mod training;

pub use error::{Error, Result};
pub use srtgan_core as core;
