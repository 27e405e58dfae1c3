//! Certified global optimization of IRS passive beamforming.
//!
//! The single-user MISO beamforming problem with an intelligent reflecting
//! surface reduces to minimizing a Hermitian quadratic form over a product
//! of unit circles. This crate solves it to global optimality with a
//! branch-and-bound search over arcs, bounding each node by a circular-segment
//! semidefinite relaxation, and provides the usual heuristics (SDR with
//! Gaussian randomization, Riemannian conjugate gradient, coordinate descent)
//! plus a brute-force oracle and a Monte Carlo harness.

pub mod baselines;
pub mod bnb;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod relaxation;

pub use error::{Error, Result};
