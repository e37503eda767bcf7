//! Primal baselines: strong-form PINN, deep Ritz, and the mixed PINN
//! (`u`, `σ` networks). All three use the boundary penalty `λ‖u - g‖_{L^p(∂Ω)}`
//! and need a constant exponent.

use alloc::vec::Vec;

use super::problem::ProblemSpec;
use super::{conjugate, pow_norm_d, root};
use crate::autodiff::{Order, Tape, CH_GRAD, CH_HESS, CH_VALUE, HESS_PAIRS};
use crate::error::{Error, Result};
use crate::geometry::SampleSet;
use crate::math::{dot, norm, pow_abs, pow_abs_d};
use crate::networks::MlpParams;
use crate::optim::Objective;
use crate::Vec3;

/// Below this gradient magnitude the `(p-2)|∇u|^{p-4}` term is dropped.
pub const GRAD_GUARD: f64 = 1e-12;

fn constant_p(spec: &ProblemSpec) -> Result<f64> {
    spec.exponent
        .constant()
        .ok_or_else(|| Error::config("baseline losses need a constant exponent p"))
}

fn expect_dim(net: &MlpParams, dim: usize) -> Result<()> {
    if net.output_dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: net.output_dim(),
        });
    }
    Ok(())
}

/// `div(|G|^{p-2} G)` for a field with gradient `G` and Hessian `H`,
/// expanded as `|G|^{p-2} tr H + (p-2)|G|^{p-4} Gᵀ H G`, together with its
/// derivatives with respect to `G` and `H`.
pub fn p_divergence(g: &Vec3, h: &[[f64; 3]; 3], p: f64) -> (f64, Vec3, [[f64; 3]; 3]) {
    let m = norm(g);
    let lap = h[0][0] + h[1][1] + h[2][2];
    let a = pow_abs(m, p - 2.0);
    let mut div = a * lap;
    let mut dg = [0.0; 3];
    let mut dh = [[0.0; 3]; 3];
    for k in 0..3 {
        dh[k][k] = a;
    }
    if m >= GRAD_GUARD {
        // d|G|^{p-2}/dG = (p-2)|G|^{p-4} G
        let a4 = pow_abs(m, p - 4.0);
        for k in 0..3 {
            dg[k] = (p - 2.0) * a4 * g[k] * lap;
        }
        let hg = [dot(&h[0], g), dot(&h[1], g), dot(&h[2], g)];
        let ghg = dot(g, &hg);
        let a6 = pow_abs(m, p - 6.0);
        div += (p - 2.0) * a4 * ghg;
        for k in 0..3 {
            dg[k] += (p - 2.0) * ((p - 4.0) * a6 * g[k] * ghg + 2.0 * a4 * hg[k]);
            for l in 0..3 {
                dh[k][l] += (p - 2.0) * a4 * g[k] * g[l];
            }
        }
    }
    (div, dg, dh)
}

/// Boundary penalty `λ (w_b Σ |u - g|^p)^{1/p}`: returns the value and fills
/// the value-channel adjoint.
fn boundary_penalty(tape: &Tape, g: &[f64], p: f64, w_b: f64, lambda: f64, adj: Option<&mut [f64]>) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut ds = Vec::with_capacity(g.len());
    for (j, gj) in g.iter().enumerate() {
        let (pw, d) = pow_abs_d(tape.scalar_value(j) - gj, p);
        sum += pw;
        ds.push(d);
    }
    let (r, dr) = root(w_b * sum, p);
    if let Some(adj) = adj {
        let s = lambda * dr * w_b;
        for (j, d) in ds.iter().enumerate() {
            adj[tape.out_index(0, j, CH_VALUE)] = s * d;
        }
    }
    lambda * r
}

/// Shared sample data of the primal baselines.
#[derive(Debug, Clone)]
struct PrimalData {
    interior: Vec<Vec3>,
    boundary: Vec<Vec3>,
    f: Vec<f64>,
    g: Vec<f64>,
    p: f64,
    w_int: f64,
    w_bnd: f64,
    lambda: f64,
}

impl PrimalData {
    fn new(samples: &SampleSet, spec: &ProblemSpec, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::config("penalty lambda must be positive"));
        }
        Ok(Self {
            interior: samples.interior.clone(),
            boundary: samples.boundary.clone(),
            f: spec.source.sample(&samples.interior),
            g: spec.boundary.sample(&samples.boundary),
            p: constant_p(spec)?,
            w_int: samples.interior_weight(),
            w_bnd: samples.boundary_weight(),
            lambda,
        })
    }
}

/// `‖-div(|∇u|^{p-2}∇u) - f‖_{L^q(Ω)} + λ‖u - g‖_{L^p(∂Ω)}`.
#[derive(Debug, Clone)]
pub struct PinnLoss {
    net: MlpParams,
    data: PrimalData,
    tape_int: Tape,
    tape_bnd: Tape,
    adj: Vec<f64>,
}

impl PinnLoss {
    pub fn new(template: &MlpParams, samples: &SampleSet, spec: &ProblemSpec, lambda: f64) -> Result<Self> {
        expect_dim(template, 1)?;
        Ok(Self {
            net: template.clone(),
            data: PrimalData::new(samples, spec, lambda)?,
            tape_int: Tape::new(),
            tape_bnd: Tape::new(),
            adj: Vec::new(),
        })
    }

    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = &self.data;
        let q = conjugate(d.p);
        self.net.flat_mut().copy_from_slice(x);
        self.tape_int.forward(&self.net, &d.interior, Order::Second);
        let want_grad = grad.is_some();
        let mut sum = 0.0;
        let mut parts = Vec::with_capacity(if want_grad { d.interior.len() } else { 0 });
        for i in 0..d.interior.len() {
            let (div, dg, dh) = p_divergence(&self.tape_int.scalar_grad(i), &self.tape_int.scalar_hess(i), d.p);
            let (pw, dr) = pow_abs_d(-div - d.f[i], q);
            sum += pw;
            if want_grad {
                parts.push((dr, dg, dh));
            }
        }
        let (term, dterm) = root(d.w_int * sum, q);
        let Some(grad) = grad else {
            self.tape_bnd.forward(&self.net, &d.boundary, Order::Value);
            return term + boundary_penalty(&self.tape_bnd, &d.g, d.p, d.w_bnd, d.lambda, None);
        };
        grad.iter_mut().for_each(|v| *v = 0.0);
        self.adj.clear();
        self.adj.resize(self.tape_int.output().len(), 0.0);
        for (i, (dr, dg, dh)) in parts.iter().enumerate() {
            // r = -div - f
            let s = -dterm * d.w_int * dr;
            for k in 0..3 {
                self.adj[self.tape_int.out_index(0, i, CH_GRAD + k)] = s * dg[k];
            }
            for (m, &(k, l)) in HESS_PAIRS.iter().enumerate() {
                let v = if k == l { dh[k][k] } else { dh[k][l] + dh[l][k] };
                self.adj[self.tape_int.out_index(0, i, CH_HESS + m)] = s * v;
            }
        }
        self.tape_int.backward(&self.net, &self.adj, grad);

        self.tape_bnd.forward(&self.net, &d.boundary, Order::Value);
        self.adj.clear();
        self.adj.resize(self.tape_bnd.output().len(), 0.0);
        let pen = boundary_penalty(&self.tape_bnd, &d.g, d.p, d.w_bnd, d.lambda, Some(&mut self.adj));
        self.tape_bnd.backward(&self.net, &self.adj, grad);
        term + pen
    }
}

impl Objective for PinnLoss {
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

/// `(1/p)‖∇u‖_{L^p}^p - (f, u) + λ‖u - g‖_{L^p(∂Ω)}`.
#[derive(Debug, Clone)]
pub struct DrmLoss {
    net: MlpParams,
    data: PrimalData,
    tape_int: Tape,
    tape_bnd: Tape,
    adj: Vec<f64>,
}

impl DrmLoss {
    pub fn new(template: &MlpParams, samples: &SampleSet, spec: &ProblemSpec, lambda: f64) -> Result<Self> {
        expect_dim(template, 1)?;
        Ok(Self {
            net: template.clone(),
            data: PrimalData::new(samples, spec, lambda)?,
            tape_int: Tape::new(),
            tape_bnd: Tape::new(),
            adj: Vec::new(),
        })
    }

    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = &self.data;
        self.net.flat_mut().copy_from_slice(x);
        self.tape_int.forward(&self.net, &d.interior, Order::First);
        self.tape_bnd.forward(&self.net, &d.boundary, Order::Value);
        let want_grad = grad.is_some();
        if want_grad {
            self.adj.clear();
            self.adj.resize(self.tape_int.output().len(), 0.0);
        }
        let mut energy = 0.0;
        for i in 0..d.interior.len() {
            let (pw, dpw) = pow_norm_d(&self.tape_int.scalar_grad(i), d.p);
            let u = self.tape_int.scalar_value(i);
            energy += pw / d.p - d.f[i] * u;
            if want_grad {
                self.adj[self.tape_int.out_index(0, i, CH_VALUE)] = -d.w_int * d.f[i];
                for k in 0..3 {
                    self.adj[self.tape_int.out_index(0, i, CH_GRAD + k)] = d.w_int * dpw[k] / d.p;
                }
            }
        }
        energy *= d.w_int;
        let Some(grad) = grad else {
            return energy + boundary_penalty(&self.tape_bnd, &d.g, d.p, d.w_bnd, d.lambda, None);
        };
        grad.iter_mut().for_each(|v| *v = 0.0);
        self.tape_int.backward(&self.net, &self.adj, grad);
        self.adj.clear();
        self.adj.resize(self.tape_bnd.output().len(), 0.0);
        let pen = boundary_penalty(&self.tape_bnd, &d.g, d.p, d.w_bnd, d.lambda, Some(&mut self.adj));
        self.tape_bnd.backward(&self.net, &self.adj, grad);
        energy + pen
    }
}

impl Objective for DrmLoss {
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

/// Mixed PINN over the pair `(u, σ)`:
/// `‖σ + |∇u|^{p-2}∇u‖_{L^q} + ‖div σ - f‖_{L^q} + λ‖u - g‖_{L^p(∂Ω)}`.
///
/// The flat parameter vector is the `u` parameters followed by the `σ`
/// parameters.
#[derive(Debug, Clone)]
pub struct PinnMLoss {
    u: MlpParams,
    sigma: MlpParams,
    data: PrimalData,
    tape_u: Tape,
    tape_s: Tape,
    tape_bnd: Tape,
    adj_u: Vec<f64>,
    adj_s: Vec<f64>,
}

impl PinnMLoss {
    pub fn new(
        u_template: &MlpParams,
        sigma_template: &MlpParams,
        samples: &SampleSet,
        spec: &ProblemSpec,
        lambda: f64,
    ) -> Result<Self> {
        expect_dim(u_template, 1)?;
        expect_dim(sigma_template, 3)?;
        Ok(Self {
            u: u_template.clone(),
            sigma: sigma_template.clone(),
            data: PrimalData::new(samples, spec, lambda)?,
            tape_u: Tape::new(),
            tape_s: Tape::new(),
            tape_bnd: Tape::new(),
            adj_u: Vec::new(),
            adj_s: Vec::new(),
        })
    }

    /// Splits a flat parameter vector into `(u, σ)` networks.
    pub fn split(&self, x: &[f64]) -> (MlpParams, MlpParams) {
        let n = self.u.len();
        let mut u = self.u.clone();
        let mut s = self.sigma.clone();
        u.flat_mut().copy_from_slice(&x[..n]);
        s.flat_mut().copy_from_slice(&x[n..]);
        (u, s)
    }

    fn eval(&mut self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = &self.data;
        let q = conjugate(d.p);
        let nu = self.u.len();
        self.u.flat_mut().copy_from_slice(&x[..nu]);
        self.sigma.flat_mut().copy_from_slice(&x[nu..]);
        self.tape_u.forward(&self.u, &d.interior, Order::First);
        self.tape_s.forward(&self.sigma, &d.interior, Order::First);
        self.tape_bnd.forward(&self.u, &d.boundary, Order::Value);
        let want_grad = grad.is_some();

        let mut sum_c = 0.0;
        let mut sum_d = 0.0;
        let mut parts = Vec::with_capacity(if want_grad { d.interior.len() } else { 0 });
        for i in 0..d.interior.len() {
            let g = self.tape_u.scalar_grad(i);
            let m = norm(&g);
            let a = pow_abs(m, d.p - 2.0);
            let s = [
                self.tape_s.out(0, i, CH_VALUE),
                self.tape_s.out(1, i, CH_VALUE),
                self.tape_s.out(2, i, CH_VALUE),
            ];
            let c = [s[0] + a * g[0], s[1] + a * g[1], s[2] + a * g[2]];
            let (pc, dc) = pow_norm_d(&c, q);
            let div = (0..3).map(|k| self.tape_s.out(k, i, CH_GRAD + k)).sum::<f64>();
            let (pd, dd) = pow_abs_d(div - d.f[i], q);
            sum_c += pc;
            sum_d += pd;
            if want_grad {
                parts.push((g, m, a, dc, dd));
            }
        }
        let (t1, d1) = root(d.w_int * sum_c, q);
        let (t2, d2) = root(d.w_int * sum_d, q);
        let Some(grad) = grad else {
            return t1 + t2 + boundary_penalty(&self.tape_bnd, &d.g, d.p, d.w_bnd, d.lambda, None);
        };
        grad.iter_mut().for_each(|v| *v = 0.0);
        self.adj_u.clear();
        self.adj_u.resize(self.tape_u.output().len(), 0.0);
        self.adj_s.clear();
        self.adj_s.resize(self.tape_s.output().len(), 0.0);
        for (i, (g, m, a, dc, dd)) in parts.iter().enumerate() {
            let cb = [d1 * d.w_int * dc[0], d1 * d.w_int * dc[1], d1 * d.w_int * dc[2]];
            for k in 0..3 {
                self.adj_s[self.tape_s.out_index(k, i, CH_VALUE)] = cb[k];
                self.adj_s[self.tape_s.out_index(k, i, CH_GRAD + k)] = d2 * d.w_int * dd;
            }
            // d(|G|^{p-2} G)/dG = |G|^{p-2} I + (p-2)|G|^{p-4} G Gᵀ
            let b = if *m >= GRAD_GUARD { (d.p - 2.0) * pow_abs(*m, d.p - 4.0) * dot(g, &cb) } else { 0.0 };
            for k in 0..3 {
                self.adj_u[self.tape_u.out_index(0, i, CH_GRAD + k)] = a * cb[k] + b * g[k];
            }
        }
        let (gu, gs) = grad.split_at_mut(nu);
        self.tape_u.backward(&self.u, &self.adj_u, gu);
        self.tape_s.backward(&self.sigma, &self.adj_s, gs);
        self.adj_u.clear();
        self.adj_u.resize(self.tape_bnd.output().len(), 0.0);
        let pen = boundary_penalty(&self.tape_bnd, &d.g, d.p, d.w_bnd, d.lambda, Some(&mut self.adj_u));
        self.tape_bnd.backward(&self.u, &self.adj_u, gu);
        t1 + t2 + pen
    }
}

impl Objective for PinnMLoss {
    fn dim(&self) -> usize {
        self.u.len() + self.sigma.len()
    }
    fn value(&mut self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }
    fn value_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }
}

pub fn baseline_pinn_loss(u: &MlpParams, s: &SampleSet, spec: &ProblemSpec, lambda: f64) -> Result<f64> {
    Ok(PinnLoss::new(u, s, spec, lambda)?.value(u.flat()))
}

pub fn baseline_drm_loss(u: &MlpParams, s: &SampleSet, spec: &ProblemSpec, lambda: f64) -> Result<f64> {
    Ok(DrmLoss::new(u, s, spec, lambda)?.value(u.flat()))
}

pub fn baseline_pinnm_loss(
    u: &MlpParams,
    sigma_net: &MlpParams,
    s: &SampleSet,
    spec: &ProblemSpec,
    lambda: f64,
) -> Result<f64> {
    let mut loss = PinnMLoss::new(u, sigma_net, s, spec, lambda)?;
    let mut x = u.flat().to_vec();
    x.extend_from_slice(sigma_net.flat());
    Ok(loss.value(&x))
}
