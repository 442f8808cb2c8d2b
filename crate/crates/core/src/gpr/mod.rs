//! Exact Gaussian process regression of the model mismatch, one independent
//! squared-exponential GP per output, plus the confidence-bound machinery
//! that sizes the robust control term.

mod bound;
mod dataset;
mod kernel;
mod model;

pub use bound::{
    beta_from_rkhs_bound, greedy_information_gain, max_information_gain, rho_bound, rho_from_posterior,
    BoundParams, HalfWidth,
};
pub use dataset::{compute_mismatch_target, GpDataset, GpInput};
pub use kernel::{se_kernel, SeKernelParams};
pub use model::{default_init, log_marginal_likelihood, FitBudget, GpModel, OutputPosterior};
