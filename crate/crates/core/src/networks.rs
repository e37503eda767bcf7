//! Fully connected tanh networks and the gradient-curl flux representation.

use alloc::vec::Vec;

use rand::Rng as _;
use rand::RngCore;

use crate::autodiff::{self, Order, Tape};
use crate::error::{Error, Result};
use crate::Vec3;

/// Parameters of a tanh MLP with an affine output layer.
///
/// Parameters are stored flat, layer by layer; within a layer the weight
/// matrix comes first (row-major, `out x in`) followed by the bias vector.
/// Optimizers and checkpoints use this order directly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpParams {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Number of parameters of an MLP with the given layer widths.
pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::config("an MLP needs at least an input and an output layer"));
    }
    if dims[0] != 3 {
        return Err(Error::config("network input dimension must be 3"));
    }
    if dims.contains(&0) {
        return Err(Error::config("layer widths must be positive"));
    }
    Ok(())
}

impl MlpParams {
    /// All-zero parameters.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            params: alloc::vec![0.0; param_count(dims)],
        })
    }

    pub fn from_flat(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let n = param_count(dims);
        if params.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("network parameters must be finite"));
        }
        Ok(Self {
            dims: dims.to_vec(),
            params,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn flat(&self) -> &[f64] {
        &self.params
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.params
    }

    /// Offset of layer `l`'s weights in the flat vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.dims[..=l])
    }

    /// `(weights, bias)` of layer `l`; weights are `out x in` row-major.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
        let off = self.layer_offset(l);
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        (w, b)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
        let off = self.layer_offset(l);
        let (w, rest) = self.params[off..].split_at_mut(n_in * n_out);
        (w, &mut rest[..n_out])
    }

    /// Order-independent checksum of the parameter bits, used to assert
    /// that frozen networks are untouched.
    pub fn checksum(&self) -> u64 {
        // FNV-1a over the raw bits.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.params {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_glorot<R: RngCore + ?Sized>(dims: &[usize], rng: &mut R) -> Result<MlpParams> {
    let mut net = MlpParams::zeros(dims)?;
    for l in 0..net.n_layers() {
        let bound = glorot_bound(dims[l], dims[l + 1]);
        let (w, _) = net.layer_mut(l);
        for v in w.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
    }
    Ok(net)
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    crate::math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// The flux `σ = ∇φ + ∇×ψ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FluxModel {
    pub phi: MlpParams,
    pub psi: MlpParams,
}

impl FluxModel {
    pub fn new(phi: MlpParams, psi: MlpParams) -> Result<Self> {
        if phi.output_dim() != 1 {
            return Err(Error::config("phi network must have a scalar output"));
        }
        if psi.output_dim() != 3 {
            return Err(Error::config("psi network must have a 3-vector output"));
        }
        Ok(Self { phi, psi })
    }

    /// Flux at a single point.
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        flux_eval(self, x)
    }

    /// Flux at many points, evaluated in batches.
    pub fn eval_many(&self, points: &[Vec3]) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(points.len());
        let mut phi_tape = Tape::new();
        let mut psi_tape = Tape::new();
        for chunk in points.chunks(EVAL_CHUNK) {
            phi_tape.forward(&self.phi, chunk, Order::First);
            psi_tape.forward(&self.psi, chunk, Order::First);
            for i in 0..chunk.len() {
                let g = phi_tape.scalar_grad(i);
                let c = autodiff::curl_from_tape(&psi_tape, i);
                out.push([g[0] + c[0], g[1] + c[1], g[2] + c[2]]);
            }
        }
        out
    }

    /// Irrotational part `∇φ` only, in batches.
    pub fn grad_phi_many(&self, points: &[Vec3]) -> Vec<Vec3> {
        grad_many(&self.phi, points)
    }
}

pub(crate) const EVAL_CHUNK: usize = 4096;

/// Anything that yields a flux field at points.
pub trait FluxField {
    fn flux_many(&self, points: &[Vec3]) -> Vec<Vec3>;
}

impl FluxField for FluxModel {
    fn flux_many(&self, points: &[Vec3]) -> Vec<Vec3> {
        self.eval_many(points)
    }
}

/// Flux `-|∇u|^{p-2}∇u` of a primal potential network.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalFlux {
    pub u: MlpParams,
    pub p: f64,
}

impl FluxField for PrimalFlux {
    fn flux_many(&self, points: &[Vec3]) -> Vec<Vec3> {
        grad_many(&self.u, points)
            .into_iter()
            .map(|g| {
                let a = crate::math::pow_abs(crate::math::norm(&g), self.p - 2.0);
                [-a * g[0], -a * g[1], -a * g[2]]
            })
            .collect()
    }
}

/// A vector network read directly as the flux.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorNetFlux(pub MlpParams);

impl FluxField for VectorNetFlux {
    fn flux_many(&self, points: &[Vec3]) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(points.len());
        let mut tape = Tape::new();
        for chunk in points.chunks(EVAL_CHUNK) {
            tape.forward(&self.0, chunk, Order::Value);
            out.extend((0..chunk.len()).map(|i| [tape.out(0, i, 0), tape.out(1, i, 0), tape.out(2, i, 0)]));
        }
        out
    }
}

impl<F: Fn(&Vec3) -> Vec3> FluxField for F {
    fn flux_many(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(self).collect()
    }
}

/// `∇φ` of a scalar network at many points.
pub fn grad_many(net: &MlpParams, points: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(points.len());
    let mut tape = Tape::new();
    for chunk in points.chunks(EVAL_CHUNK) {
        tape.forward(net, chunk, Order::First);
        out.extend((0..chunk.len()).map(|i| tape.scalar_grad(i)));
    }
    out
}

pub fn flux_eval(m: &FluxModel, x: &Vec3) -> Vec3 {
    let g = autodiff::eval_scalar_jet(&m.phi, x)
        .expect("FluxModel guarantees a scalar phi")
        .grad;
    let c = autodiff::curl(&autodiff::eval_vector_jet(&m.psi, x).expect("FluxModel guarantees a vector psi"));
    [g[0] + c[0], g[1] + c[1], g[2] + c[2]]
}
