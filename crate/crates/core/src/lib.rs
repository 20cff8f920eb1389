//! Mixture-model clustering for discrete 7-point opinion surveys.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`dataset`] loads a CSV export, maps "don't know" / "not applicable"
//!    codes to the neutral midpoint and builds a complete-case matrix.
//! 2. [`em`] fits a diagonal-covariance Gaussian mixture ([`mixture`]) by
//!    expectation-maximization with seeded restarts and an optional
//!    variance floor.
//! 3. [`selection`] sweeps the cluster count and scores each fit by AIC/BIC,
//!    optionally with k-fold cross-validation.
//! 4. [`analysis`] derives party means, cluster composition, precision and
//!    recall, PCA projections and distance series.
//! 5. [`report`] renders SVG figures and CSV/Markdown tables.
//!
//! [`synth`] draws synthetic electorates from a known mixture and is used
//! throughout the test suites as ground truth.

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod em;
pub mod error;
pub mod mixture;
pub mod report;
pub mod rng;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
