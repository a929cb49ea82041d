pub mod analytics;
pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod hbm;
pub mod merge_net;
pub mod merge_tree;
pub mod report;
pub mod sort_engine;

pub use error::{Error, Result};
