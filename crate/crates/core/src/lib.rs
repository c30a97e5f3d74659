//! Benchmark harness for microgrid energy management controllers.

pub mod calib;
pub mod cli;
pub mod controllers;
pub mod data;
pub mod error;
pub mod kmeans;
pub mod model;
pub mod pipeline;
pub mod pwl;
pub mod scenario;
pub mod scoring;
pub mod seed;
pub mod simulate;
pub mod tariff;

pub use error::{Error, Result};
