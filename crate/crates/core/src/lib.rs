//! Dual variational neural network (DVNN) solver for p-Laplace and
//! p(x)-Laplace boundary value problems on the unit ball and the cube.
//!
//! The flux `σ = -|∇u|^{p-2}∇u` is represented as `∇φ + ∇×ψ` by two tanh
//! networks. Training runs in two stages: a Poisson solve `Δφ = f` for the
//! irrotational part, then a convex minimization of the dual energy over
//! the curl part, which is divergence free by construction.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats and the command line live in the `dvnn` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod math;
pub mod networks;
pub mod optim;
pub mod rng;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

/// A point or vector in three dimensions.
pub type Vec3 = [f64; 3];
