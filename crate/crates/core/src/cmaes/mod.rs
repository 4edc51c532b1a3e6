//! One CMA-ES descent: parameters, sampling, update and stopping tests.

mod params;
mod state;
mod stop;

pub use params::CmaParams;
pub use state::{
    adapt_covariance, maybe_eigendecompose, population_from_normals, rank_qualities,
    sample_population, update, Best, CmaState, Population,
};
pub use stop::{check_stop, StopLimits, StopReason};
