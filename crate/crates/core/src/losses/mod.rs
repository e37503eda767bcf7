//! Empirical objectives: the two DVNN stage losses (constant and variable
//! exponent) and the PINN, deep Ritz and mixed-PINN baselines.
//!
//! Each loss is an [`Objective`](crate::optim::Objective) over the flat
//! parameter vector of its network(s). Sample-dependent data (`f`, `g`,
//! `q`) is evaluated once at construction.

mod baselines;
mod dvnn;
mod problem;

pub use baselines::{
    baseline_drm_loss, baseline_pinn_loss, baseline_pinnm_loss, p_divergence, DrmLoss, PinnLoss, PinnMLoss, GRAD_GUARD,
};
pub use dvnn::{empirical_poisson_loss, empirical_solenoidal_loss, PoissonLoss, SolenoidalLoss};
pub use problem::{conjugate, Exponent, Field, ProblemSpec, ScalarFn, VectorFn};

use crate::math::{powf, POW_FLOOR};
use crate::Vec3;

/// `(s^{1/q}, d s^{1/q} / ds)`; the derivative is 0 at `s = 0`.
#[inline]
pub(crate) fn root(s: f64, q: f64) -> (f64, f64) {
    if s < POW_FLOOR {
        (if s > 0.0 { powf(s, 1.0 / q) } else { 0.0 }, 0.0)
    } else {
        let r = powf(s, 1.0 / q);
        (r, r / (q * s))
    }
}

/// `(|v|^q, d|v|^q/dv)` for a vector argument.
#[inline]
pub(crate) fn pow_norm_d(v: &Vec3, q: f64) -> (f64, Vec3) {
    let n = crate::math::norm(v);
    let (p, dp) = crate::math::pow_abs_d(n, q);
    if dp == 0.0 {
        (p, [0.0; 3])
    } else {
        let s = dp / n;
        (p, [v[0] * s, v[1] * s, v[2] * s])
    }
}
