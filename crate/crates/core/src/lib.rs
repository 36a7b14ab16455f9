//! Local asymptotic minimax estimation of kinked transforms of a regular
//! parameter.
//!
//! The target is theta = f(g(beta)) where g is translation-scale
//! equivariant ([`gmap`]), f is continuous piecewise linear with one kink
//! ([`kink`]) and beta has an efficient estimator with covariance Sigma.
//! The estimator is the plug-in with a simulated additive adjustment,
//! f(g(beta_hat) + c_hat / sqrt(n)):
//!
//! - [`bias`] simulates the empirical risk surface and picks c_hat by the
//!   near-minimizer midpoint rule;
//! - [`bound`] evaluates the population risk bound through the analytic
//!   directional derivative, the independent route used for cross-checks;
//! - [`estim`] assembles the estimator and the bias-reduction competitors;
//! - [`harness`] reproduces the Monte Carlo risk/bias comparison over the
//!   local parameter;
//! - [`config`], [`output`] and [`verify`] back the command-line tool.

pub mod bias;
pub mod bound;
pub mod config;
pub mod error;
pub mod estim;
pub mod gmap;
pub mod harness;
pub mod kink;
pub mod linalg;
pub mod loss;
pub mod optim;
pub mod output;
pub mod rng;
mod textspec;
pub mod verify;

pub use error::{Error, Result};
