//! Parallel IPOP-CMA-ES: the optimizer, its worker fabric and restart
//! strategies, benchmark objectives, and run analysis.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cmaes;
pub mod descent;
pub mod error;
pub mod experiment;
pub mod fabric;
pub mod linalg;
pub mod objectives;
pub mod restart;
pub mod rng;
pub mod runlog;

pub use error::{Error, Result};
