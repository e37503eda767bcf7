//! Stage losses of the dual variational network.

use alloc::vec::Vec;

use super::problem::ProblemSpec;
use super::{pow_norm_d, root};
use crate::autodiff::{curl_adjoint, curl_from_tape, Order, Tape, CH_GRAD, CH_HESS, CH_VALUE};
use crate::error::{Error, Result};
use crate::geometry::{tangential_gradient, SampleSet};
use crate::math::{dot, pow_abs_d};
use crate::networks::{grad_many, MlpParams};
use crate::optim::Objective;
use crate::Vec3;

/// Stage-1 loss: residual of `Δφ = f` in `L^q(Ω)` plus `λ` times the
/// `W^{1,q}(∂Ω)` trace of `φ`.
///
/// For a constant exponent both terms carry the outer `1/q` root; for a
/// variable exponent the pointwise powers `q(x)` are summed without roots.
#[derive(Debug, Clone)]
pub struct PoissonLoss {
    net: MlpParams,
    interior: Vec<Vec3>,
    boundary: Vec<Vec3>,
    normals: Vec<Vec3>,
    f: Vec<f64>,
    q_int: Vec<f64>,
    q_bnd: Vec<f64>,
    constant_q: Option<f64>,
    w_int: f64,
    w_bnd: f64,
    lambda: f64,
    tape_int: Tape,
    tape_bnd: Tape,
    adj_int: Vec<f64>,
    adj_bnd: Vec<f64>,
}

impl PoissonLoss {
    pub fn new(template: &MlpParams, samples: &SampleSet, spec: &ProblemSpec, lambda: f64) -> Result<Self> {
        if template.output_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: template.output_dim(),
            });
        }
        if !(lambda > 0.0) {
            return Err(Error::config("penalty lambda must be positive"));
        }
        Ok(Self {
            net: template.clone(),
            interior: samples.interior.clone(),
            boundary: samples.boundary.clone(),
            normals: samples.normals.clone(),
            f: spec.source.sample(&samples.interior),
            q_int: spec.exponent.q_values(&samples.interior)?,
            q_bnd: spec.exponent.q_values(&samples.boundary)?,
            constant_q: spec.exponent.constant().map(super::conjugate),
            w_int: samples.interior_weight(),
            w_bnd: samples.boundary_weight(),
            lambda,
            tape_int: Tape::new(),
            tape_bnd: Tape::new(),
            adj_int: Vec::new(),
            adj_bnd: Vec::new(),
        })
    }

    pub fn net(&self) -> &MlpParams {
        &self.net
    }

    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        self.net.flat_mut().copy_from_slice(x);
        let want_grad = grad.is_some();
        self.tape_int.forward(&self.net, &self.interior, Order::Second);
        self.tape_bnd.forward(&self.net, &self.boundary, Order::First);

        // Interior residual.
        let n_int = self.interior.len();
        let mut sum_int = 0.0;
        let mut d_int = Vec::with_capacity(if want_grad { n_int } else { 0 });
        for i in 0..n_int {
            let r = self.tape_int.scalar_laplacian(i) - self.f[i];
            let (pw, dpw) = pow_abs_d(r, self.q_int[i]);
            sum_int += pw;
            if want_grad {
                d_int.push(dpw);
            }
        }
        sum_int *= self.w_int;

        // Boundary trace in W^{1,q}.
        let n_bnd = self.boundary.len();
        let mut sum_bnd = 0.0;
        let mut d_bnd: Vec<(f64, Vec3)> = Vec::with_capacity(if want_grad { n_bnd } else { 0 });
        for j in 0..n_bnd {
            let q = self.q_bnd[j];
            let (pv, dv) = pow_abs_d(self.tape_bnd.scalar_value(j), q);
            let gt = tangential_gradient(&self.tape_bnd.scalar_grad(j), &self.normals[j]);
            let (pg, dg) = pow_norm_d(&gt, q);
            sum_bnd += pv + pg;
            if want_grad {
                d_bnd.push((dv, dg));
            }
        }
        sum_bnd *= self.w_bnd;

        let (term_int, mult_int, term_bnd, mult_bnd) = match self.constant_q {
            Some(q) => {
                let (a, da) = root(sum_int, q);
                let (b, db) = root(sum_bnd, q);
                (a, da, b, db)
            }
            None => (sum_int, 1.0, sum_bnd, 1.0),
        };
        let value = term_int + self.lambda * term_bnd;

        if let Some(grad) = grad {
            grad.iter_mut().for_each(|g| *g = 0.0);
            self.adj_int.clear();
            self.adj_int.resize(self.tape_int.output().len(), 0.0);
            let s = mult_int * self.w_int;
            for (i, d) in d_int.iter().enumerate() {
                for k in 0..3 {
                    self.adj_int[self.tape_int.out_index(0, i, CH_HESS + k)] = s * d;
                }
            }
            self.tape_int.backward(&self.net, &self.adj_int, grad);

            if n_bnd > 0 {
                self.adj_bnd.clear();
                self.adj_bnd.resize(self.tape_bnd.output().len(), 0.0);
                let s = self.lambda * mult_bnd * self.w_bnd;
                for (j, (dv, dg)) in d_bnd.iter().enumerate() {
                    self.adj_bnd[self.tape_bnd.out_index(0, j, CH_VALUE)] = s * dv;
                    // dg is already tangential, so the projection is its own adjoint.
                    for k in 0..3 {
                        self.adj_bnd[self.tape_bnd.out_index(0, j, CH_GRAD + k)] = s * dg[k];
                    }
                }
                self.tape_bnd.backward(&self.net, &self.adj_bnd, grad);
            }
        }
        value
    }
}

impl Objective for PoissonLoss {
    fn dim(&self) -> usize {
        self.net.len()
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

pub fn empirical_poisson_loss(phi: &MlpParams, s: &SampleSet, spec: &ProblemSpec, lambda: f64) -> Result<f64> {
    let mut loss = PoissonLoss::new(phi, s, spec, lambda)?;
    Ok(loss.value(phi.flat()))
}

/// Stage-2 loss: `Σ w |∇φ̂ + ∇×ψ|^q / q` over the interior plus the
/// boundary pairing `Σ w_b g (∇φ̂ + ∇×ψ)·n`, with `φ̂` frozen.
#[derive(Debug, Clone)]
pub struct SolenoidalLoss {
    net: MlpParams,
    interior: Vec<Vec3>,
    boundary: Vec<Vec3>,
    gphi_int: Vec<Vec3>,
    /// `w_b g(Y_j) n(Y_j)` per boundary point.
    g_normal: Vec<Vec3>,
    /// `Σ w_b g (∇φ̂ · n)`, constant in ψ.
    pairing_phi: f64,
    q_int: Vec<f64>,
    w_int: f64,
    tape_int: Tape,
    tape_bnd: Tape,
    adj: Vec<f64>,
}

impl SolenoidalLoss {
    pub fn new(template: &MlpParams, phi_hat: &MlpParams, samples: &SampleSet, spec: &ProblemSpec) -> Result<Self> {
        if template.output_dim() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                got: template.output_dim(),
            });
        }
        if phi_hat.output_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: phi_hat.output_dim(),
            });
        }
        // An all-zero phi (skipped stage 1) has zero gradient everywhere.
        let phi_active = !phi_hat.flat().iter().all(|&v| v == 0.0);
        let gphi_int = if phi_active {
            grad_many(phi_hat, &samples.interior)
        } else {
            alloc::vec![[0.0; 3]; samples.interior.len()]
        };
        let w_b = samples.boundary_weight();
        let (boundary, g_normal, pairing_phi) = if spec.boundary.is_zero() {
            (Vec::new(), Vec::new(), 0.0)
        } else {
            let gphi_bnd = if phi_active {
                grad_many(phi_hat, &samples.boundary)
            } else {
                alloc::vec![[0.0; 3]; samples.boundary.len()]
            };
            let mut pairing = 0.0;
            let gn: Vec<Vec3> = samples
                .boundary
                .iter()
                .zip(&samples.normals)
                .zip(&gphi_bnd)
                .map(|((y, n), gp)| {
                    let g = w_b * spec.boundary.at(y);
                    pairing += g * dot(gp, n);
                    [g * n[0], g * n[1], g * n[2]]
                })
                .collect();
            (samples.boundary.clone(), gn, pairing)
        };
        Ok(Self {
            net: template.clone(),
            interior: samples.interior.clone(),
            boundary,
            gphi_int,
            g_normal,
            pairing_phi,
            q_int: spec.exponent.q_values(&samples.interior)?,
            w_int: samples.interior_weight(),
            tape_int: Tape::new(),
            tape_bnd: Tape::new(),
            adj: Vec::new(),
        })
    }

    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        self.net.flat_mut().copy_from_slice(x);
        self.tape_int.forward(&self.net, &self.interior, Order::First);
        let want_grad = grad.is_some();
        if want_grad {
            self.adj.clear();
            self.adj.resize(self.tape_int.output().len(), 0.0);
        }
        let mut energy = 0.0;
        for i in 0..self.interior.len() {
            let c = curl_from_tape(&self.tape_int, i);
            let g = &self.gphi_int[i];
            let sigma = [g[0] + c[0], g[1] + c[1], g[2] + c[2]];
            let q = self.q_int[i];
            let (pw, dpw) = pow_norm_d(&sigma, q);
            energy += pw / q;
            if want_grad {
                let s = self.w_int / q;
                curl_adjoint(&self.tape_int, i, &[s * dpw[0], s * dpw[1], s * dpw[2]], &mut self.adj);
            }
        }
        energy *= self.w_int;

        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
            self.tape_int.backward(&self.net, &self.adj, g);
        }

        let mut pairing = self.pairing_phi;
        if !self.boundary.is_empty() {
            self.tape_bnd.forward(&self.net, &self.boundary, Order::First);
            if want_grad {
                self.adj.clear();
                self.adj.resize(self.tape_bnd.output().len(), 0.0);
            }
            for (j, gn) in self.g_normal.iter().enumerate() {
                pairing += dot(&curl_from_tape(&self.tape_bnd, j), gn);
                if want_grad {
                    curl_adjoint(&self.tape_bnd, j, gn, &mut self.adj);
                }
            }
            if let Some(g) = grad {
                self.tape_bnd.backward(&self.net, &self.adj, g);
            }
        }
        energy + pairing
    }
}

impl Objective for SolenoidalLoss {
    fn dim(&self) -> usize {
        self.net.len()
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

pub fn empirical_solenoidal_loss(
    psi: &MlpParams,
    phi_hat: &MlpParams,
    s: &SampleSet,
    spec: &ProblemSpec,
) -> Result<f64> {
    let mut loss = SolenoidalLoss::new(psi, phi_hat, s, spec)?;
    Ok(loss.value(psi.flat()))
}
