//! Special functions and box-constrained smooth maximization.

mod optimize;
mod special;

pub use optimize::{maximize_box, Bounds, BoxOptimum, MaximizeOptions};
pub use special::{digamma, log_beta, log_gamma};

pub(crate) use special::{digamma_unchecked, ln_beta, ln_gamma, ln_rising};
