pub mod cli;
pub mod config;
pub mod datamodel;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod model;
pub mod numerics;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
