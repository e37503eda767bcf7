//! ADAM and self-scaled BFGS over flat parameter vectors.

mod adam;
mod ssbfgs;

pub use adam::{Adam, AdamConfig};
pub use ssbfgs::{Scaling, SsBfgs, SsBfgsConfig, SsBfgsStep};

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&mut self, x: &[f64]) -> f64;

    /// Returns the value and overwrites `grad` with the gradient.
    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    crate::math::sqrt(v.iter().map(|x| x * x).sum())
}
