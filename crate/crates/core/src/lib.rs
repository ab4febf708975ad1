//! Exit events of overdamped Langevin dynamics from metastable domains.
//!
//! The crate simulates `dX = −∇f(X) dt + √h dB` in a bounded domain, samples
//! its quasi-stationary distribution, and compares the empirical exit
//! statistics with Eyring–Kramers asymptotics and a one-dimensional exact
//! oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agmon;
pub mod config;
pub mod domain;
pub mod exitstats;
pub mod kmc;
pub mod kramers;
pub mod landscape;
pub mod langevin;
pub mod oracle1d;
pub mod output;
pub mod pipeline;
pub mod potential;
pub mod qsd;
pub mod quad;
pub mod rng;
