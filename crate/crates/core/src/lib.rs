#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod cli;
pub mod config;
pub mod data;
pub mod device;
pub mod error;
pub mod federation;
pub mod rng;
pub mod scheduler;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
