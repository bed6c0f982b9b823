//! Unbiased sampled matrix products for memory-lean backpropagation.
//!
//! The crate provides the column-row sampling estimators ([`estimators`]),
//! a small layer-wise reverse-mode engine whose linear layers keep only a
//! sub-sampled activation for the weight gradient ([`autodiff`]), Monte-Carlo
//! and enumeration harnesses for bias and variance ([`lab`]), an analytic
//! activation-memory model ([`memory`]) and the `wtacrs` command line
//! front end ([`cli`]).

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod lab;
pub mod memory;
pub mod tensor;

pub use error::{Error, Result};
