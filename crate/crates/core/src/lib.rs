//! Personalized robot trajectories from a single demonstration, executed
//! with online velocity scaling driven by the operator's interaction force.
//!
//! The pipeline is: learn a [`dmp::DmpModel`] from a demonstration, roll it
//! out toward new endpoints, re-time the result to a Cartesian speed cap,
//! refuse it if it hits a known obstacle, and execute it while a force stream
//! modulates the progress rate along the fixed geometric path.
//! [`metrics`] and [`physio`] compute the evaluation indexes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dmp;
pub mod error;
pub mod io;
pub mod metrics;
pub mod physio;
pub mod scaling;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
