//! Tabular reinforcement learning workbench on exactly enumerable gridworlds.
//!
//! The crate covers exact MDP evaluation, dynamic programming and TD(λ),
//! tabular trust-region policy optimization, hierarchical policies with a
//! mutual-information regularizer, Laplacian spectra with proto-value
//! functions and eigenoptions, and a Grassmann-constrained spectral network.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cluster;
pub mod dp;
pub mod error;
pub mod experiment;
pub mod gridworld;
pub mod grassmann;
pub mod hrl;
pub mod linalg;
pub mod mdp;
pub mod pvf;
pub mod runner;
pub mod sampling;
pub mod spectral;
pub mod trust_region;

pub use error::{Error, Result};
