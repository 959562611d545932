//! File formats, experiment configuration and the experiment harness around
//! `pcd-core`.

pub mod config;
pub mod dataset;
mod error;
pub mod harness;
pub mod matrix_io;
pub mod mesh_io;
pub mod report;
pub mod synthetic;
pub mod text_io;

pub use error::{Error, Result};
