//! Exact spatial derivatives of tanh MLPs and gradients of jet-valued
//! losses with respect to the network parameters.
//!
//! Spatial derivatives are propagated forward (value, gradient, Hessian);
//! parameter gradients come from a reverse sweep over the recorded forward
//! pass, so losses containing `Δφ` are differentiated exactly.

mod tape;

pub use tape::{adjoint_buffer, Order, Tape, CH_GRAD, CH_HESS, CH_VALUE, HESS_PAIRS};

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::networks::MlpParams;
use crate::Vec3;

/// Value, gradient and Hessian of a scalar network at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: Vec3,
    pub hess: [[f64; 3]; 3],
}

impl ScalarJet {
    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1] + self.hess[2][2]
    }
}

/// Value and Jacobian `jac[i][j] = ∂ψ_i/∂x_j` of a vector network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorJet {
    pub value: Vec3,
    pub jac: [[f64; 3]; 3],
}

fn expect_output(net: &MlpParams, dim: usize) -> Result<()> {
    if net.output_dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: net.output_dim(),
        });
    }
    Ok(())
}

pub fn eval_scalar_jet(net: &MlpParams, x: &Vec3) -> Result<ScalarJet> {
    expect_output(net, 1)?;
    let mut tape = Tape::new();
    tape.forward(net, core::slice::from_ref(x), Order::Second);
    Ok(ScalarJet {
        value: tape.scalar_value(0),
        grad: tape.scalar_grad(0),
        hess: tape.scalar_hess(0),
    })
}

pub fn eval_vector_jet(net: &MlpParams, x: &Vec3) -> Result<VectorJet> {
    expect_output(net, 3)?;
    let mut tape = Tape::new();
    tape.forward(net, core::slice::from_ref(x), Order::First);
    Ok(VectorJet {
        value: [tape.out(0, 0, CH_VALUE), tape.out(1, 0, CH_VALUE), tape.out(2, 0, CH_VALUE)],
        jac: tape.jacobian(0),
    })
}

pub fn curl(j: &VectorJet) -> Vec3 {
    curl_of_jacobian(&j.jac)
}

#[inline]
pub fn curl_of_jacobian(jac: &[[f64; 3]; 3]) -> Vec3 {
    [
        jac[2][1] - jac[1][2],
        jac[0][2] - jac[2][0],
        jac[1][0] - jac[0][1],
    ]
}

/// Curl of a vector network recorded on a tape (first order or higher).
#[inline]
pub fn curl_from_tape(tape: &Tape, i: usize) -> Vec3 {
    let d = |o: usize, k: usize| tape.out(o, i, CH_GRAD + k);
    [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]
}

/// Adds the adjoint of a curl value `cbar` at point `i` into the Jacobian
/// channels of an output adjoint buffer.
#[inline]
pub fn curl_adjoint(tape: &Tape, i: usize, cbar: &Vec3, adj: &mut [f64]) {
    let mut put = |o: usize, k: usize, v: f64| adj[tape.out_index(o, i, CH_GRAD + k)] += v;
    put(2, 1, cbar[0]);
    put(1, 2, -cbar[0]);
    put(0, 2, cbar[1]);
    put(2, 0, -cbar[1]);
    put(1, 0, cbar[2]);
    put(0, 1, -cbar[2]);
}

/// Gradient of a scalar loss of the network jets at `points`.
///
/// `loss` receives the forward tape and a zeroed adjoint buffer shaped like
/// the tape output; it returns the loss value and writes `d(loss)/d(jet)`
/// into the buffer. The result is `d(loss)/d(params)` in the flat parameter
/// order of [`MlpParams`].
pub fn param_gradient<F>(
    net: &MlpParams,
    points: &[Vec3],
    order: Order,
    loss: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&Tape, &mut [f64]) -> f64,
{
    let mut tape = Tape::new();
    tape.forward(net, points, order);
    let mut adj = adjoint_buffer(&tape);
    let value = loss(&tape, &mut adj);
    if !value.is_finite() {
        return Err(Error::Diverged {
            stage: "param_gradient",
            step: 0,
            reason: format!("non-finite loss {value}"),
        });
    }
    let mut grad = alloc::vec![0.0; net.len()];
    tape.backward(net, &adj, &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged {
            stage: "param_gradient",
            step: 0,
            reason: "non-finite parameter gradient".into(),
        });
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests;
