//! Belief-propagation contraction of tensor network states on sparse graphs,
//! with variational ground-state preparation and exact oracles.

// `!(x > 0.0)` is used on purpose so that NaN falls into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bp;
pub mod cli;
pub mod error;
pub mod graph;
pub mod hamiltonian;
pub mod network;
pub mod oracles;
pub mod states;
pub mod tensor;
pub mod variational;

pub use error::{Error, Result};
