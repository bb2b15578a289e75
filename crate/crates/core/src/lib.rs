//! Sparse confidence sets for the mean of a Gaussian sequence model.
//!
//! Given `X ~ N(theta, sigma^2 I_d)` with `theta` `s`-sparse and every nonzero
//! entry at least `a` in magnitude, the constructions here select a support
//! `S` and return intervals on `S` (and `{0}` elsewhere) that jointly contain
//! `theta` with probability at least `1 - alpha`.

pub mod bounds;
pub mod error;
pub mod gaussian;
pub mod intervals;
pub mod model;
pub mod numfmt;
pub mod selectors;
pub mod sim;

pub use error::{Error, Result};
