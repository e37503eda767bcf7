//! Batched jet propagation through a tanh MLP.
//!
//! Each point carries `C` channels per neuron: the value, the three spatial
//! first derivatives and (for second order) the six distinct second
//! derivatives in the order `00, 11, 22, 01, 02, 12`. A layer is a matrix of
//! shape `out x (C * n)`: every neuron row holds `C` contiguous blocks of
//! `n` points, one block per channel. Every layer is then a single matrix
//! product `Z = W A`, biases only touch the first block, and the activation
//! runs over contiguous per-channel slices.
//!
//! The forward pass keeps every pre-activation and activation, and
//! [`Tape::backward`] runs the reverse sweep from adjoints of the output
//! jets to the gradient with respect to all weights and biases.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::networks::MlpParams;
use crate::Vec3;

/// Highest spatial derivative carried through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

impl Order {
    pub const fn channels(self) -> usize {
        match self {
            Order::Value => 1,
            Order::First => 4,
            Order::Second => 10,
        }
    }
}

/// Index of the value channel.
pub const CH_VALUE: usize = 0;
/// Index of `∂/∂x_0`; the other two first derivatives follow.
pub const CH_GRAD: usize = 1;
/// Index of the first second-derivative channel.
pub const CH_HESS: usize = 4;
/// Spatial index pairs of the second-derivative channels.
pub const HESS_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Forward record of one network over one batch of points.
#[derive(Debug, Clone)]
pub struct Tape {
    order: Order,
    n_points: usize,
    dims: Vec<usize>,
    /// `acts[l]` is the input of layer `l`, shape `dims[l] x cols`.
    acts: Vec<Vec<f64>>,
    /// `pre[l]` is the output of layer `l` before activation.
    pre: Vec<Vec<f64>>,
    bar: Vec<f64>,
    bar_next: Vec<f64>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            order: Order::Value,
            n_points: 0,
            dims: Vec::new(),
            acts: Vec::new(),
            pre: Vec::new(),
            bar: Vec::new(),
            bar_next: Vec::new(),
        }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn channels(&self) -> usize {
        self.order.channels()
    }

    /// Columns of every layer matrix: `n_points * channels`.
    pub fn cols(&self) -> usize {
        self.n_points * self.channels()
    }

    /// Output jets, shape `out_dim x cols`.
    pub fn output(&self) -> &[f64] {
        self.pre.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Channel `ch` of output component `o` at point `i`.
    #[inline]
    pub fn out(&self, o: usize, i: usize, ch: usize) -> f64 {
        self.output()[self.out_index(o, i, ch)]
    }

    /// Position of `(o, i, ch)` in an output-shaped adjoint buffer.
    #[inline]
    pub fn out_index(&self, o: usize, i: usize, ch: usize) -> usize {
        o * self.cols() + ch * self.n_points + i
    }

    pub fn scalar_value(&self, i: usize) -> f64 {
        self.out(0, i, CH_VALUE)
    }

    pub fn scalar_grad(&self, i: usize) -> Vec3 {
        debug_assert!(self.order != Order::Value);
        [
            self.out(0, i, CH_GRAD),
            self.out(0, i, CH_GRAD + 1),
            self.out(0, i, CH_GRAD + 2),
        ]
    }

    pub fn scalar_laplacian(&self, i: usize) -> f64 {
        debug_assert!(self.order == Order::Second);
        self.out(0, i, CH_HESS) + self.out(0, i, CH_HESS + 1) + self.out(0, i, CH_HESS + 2)
    }

    pub fn scalar_hess(&self, i: usize) -> [[f64; 3]; 3] {
        debug_assert!(self.order == Order::Second);
        let mut h = [[0.0; 3]; 3];
        for (m, &(k, l)) in HESS_PAIRS.iter().enumerate() {
            let v = self.out(0, i, CH_HESS + m);
            h[k][l] = v;
            h[l][k] = v;
        }
        h
    }

    /// Jacobian `∂ψ_o/∂x_k` of a vector output at point `i`.
    pub fn jacobian(&self, i: usize) -> [[f64; 3]; 3] {
        debug_assert!(self.order != Order::Value);
        let mut j = [[0.0; 3]; 3];
        for (o, row) in j.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = self.out(o, i, CH_GRAD + k);
            }
        }
        j
    }

    /// Propagates jets of the given order for all `points`.
    pub fn forward(&mut self, net: &MlpParams, points: &[Vec3], order: Order) {
        let n_layers = net.n_layers();
        let c = order.channels();
        let cols = points.len() * c;
        self.order = order;
        self.n_points = points.len();
        self.dims.clear();
        self.dims.extend_from_slice(net.dims());
        self.acts.resize_with(n_layers, Vec::new);
        self.pre.resize_with(n_layers, Vec::new);

        let n = points.len();
        let input = &mut self.acts[0];
        input.clear();
        input.resize(3 * cols, 0.0);
        for d in 0..3 {
            let row = &mut input[d * cols..(d + 1) * cols];
            for (v, x) in row[..n].iter_mut().zip(points) {
                *v = x[d];
            }
            if c > 1 {
                let ch = CH_GRAD + d;
                row[ch * n..(ch + 1) * n].iter_mut().for_each(|v| *v = 1.0);
            }
        }

        for l in 0..n_layers {
            let (n_in, n_out) = (net.dims()[l], net.dims()[l + 1]);
            let (w, b) = net.layer(l);
            let z = &mut self.pre[l];
            reuse(z, n_out * cols);
            if cols > 0 {
                gemm(
                    n_out, n_in, cols,
                    w, n_in, 1,
                    &self.acts[l], cols, 1,
                    0.0, z, cols, 1,
                );
            }
            for (o, &bo) in b.iter().enumerate() {
                z[o * cols..o * cols + n].iter_mut().for_each(|v| *v += bo);
            }
            if l + 1 < n_layers {
                let a = &mut self.acts[l + 1];
                reuse(a, n_out * cols);
                if cols > 0 {
                    for (zr, ar) in self.pre[l].chunks_exact(cols).zip(a.chunks_exact_mut(cols)) {
                        activate(zr, ar, n);
                    }
                }
            }
        }
    }

    /// Reverse sweep: adds `d(loss)/d(params)` to `grad`, given the adjoint
    /// of the output jets (same shape as [`Tape::output`]).
    pub fn backward(&mut self, net: &MlpParams, out_adjoint: &[f64], grad: &mut [f64]) {
        assert_eq!(net.dims(), &self.dims[..], "tape was recorded for a different architecture");
        assert_eq!(grad.len(), net.len());
        assert_eq!(out_adjoint.len(), self.output().len());
        let n = self.n_points;
        let cols = self.cols();
        if cols == 0 {
            return;
        }
        self.bar.clear();
        self.bar.extend_from_slice(out_adjoint);
        for l in (0..net.n_layers()).rev() {
            let (n_in, n_out) = (net.dims()[l], net.dims()[l + 1]);
            let off = net.layer_offset(l);
            let (gw, rest) = grad[off..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            // dW += Zbar * A^T
            gemm(
                n_out, cols, n_in,
                &self.bar, cols, 1,
                &self.acts[l], 1, cols,
                1.0, gw, n_in, 1,
            );
            for (o, g) in gb.iter_mut().enumerate() {
                *g += self.bar[o * cols..o * cols + n].iter().sum::<f64>();
            }
            if l == 0 {
                break;
            }
            // Abar = W^T * Zbar, then through the activation of layer l - 1.
            let (w, _) = net.layer(l);
            reuse(&mut self.bar_next, n_in * cols);
            gemm(
                n_in, n_out, cols,
                w, 1, n_in,
                &self.bar, cols, 1,
                0.0, &mut self.bar_next, cols, 1,
            );
            let z = &self.pre[l - 1];
            let a = &self.acts[l];
            for ((br, zr), ar) in self
                .bar_next
                .chunks_exact_mut(cols)
                .zip(z.chunks_exact(cols))
                .zip(a.chunks_exact(cols))
            {
                activate_adjoint(br, zr, &ar[..n], n);
            }
            core::mem::swap(&mut self.bar, &mut self.bar_next);
        }
    }
}

/// Sizes a buffer that is about to be fully overwritten.
fn reuse(v: &mut Vec<f64>, len: usize) {
    if v.len() != len {
        v.clear();
        v.resize(len, 0.0);
    }
}

/// Splits one neuron row into its `n`-long channel blocks.
#[inline]
fn blocks(row: &[f64], n: usize) -> impl Iterator<Item = &[f64]> {
    row.chunks_exact(n)
}

/// tanh applied to one neuron row of jets.
fn activate(z: &[f64], a: &mut [f64], n: usize) {
    let c = z.len() / n;
    let (t, rest) = a.split_at_mut(n);
    for (ti, zi) in t.iter_mut().zip(&z[..n]) {
        *ti = math::tanh(*zi);
    }
    if c == 1 {
        return;
    }
    let zb: Vec<&[f64]> = blocks(z, n).collect();
    let (grads, hess) = rest.split_at_mut(3 * n);
    for (k, ak) in grads.chunks_exact_mut(n).enumerate() {
        for ((o, zi), ti) in ak.iter_mut().zip(zb[CH_GRAD + k]).zip(t.iter()) {
            *o = (1.0 - ti * ti) * zi;
        }
    }
    if c == Order::Second.channels() {
        for (m, am) in hess.chunks_exact_mut(n).enumerate() {
            let (k, l) = HESS_PAIRS[m];
            let (zm, zk, zl) = (zb[CH_HESS + m], zb[CH_GRAD + k], zb[CH_GRAD + l]);
            for i in 0..n {
                let ti = t[i];
                let s1 = 1.0 - ti * ti;
                am[i] = s1 * (zm[i] - 2.0 * ti * zk[i] * zl[i]);
            }
        }
    }
}

/// Overwrites the activation adjoint row `bar` with the pre-activation
/// adjoint, given the pre-activation row `z` and `t = tanh(z₀)`.
fn activate_adjoint(bar: &mut [f64], z: &[f64], t: &[f64], n: usize) {
    let c = bar.len() / n;
    if c == 1 {
        for (b, ti) in bar.iter_mut().zip(t) {
            *b *= 1.0 - ti * ti;
        }
        return;
    }
    let zb: Vec<&[f64]> = blocks(z, n).collect();
    let (b0, rest) = bar.split_at_mut(n);
    let (bg, bh) = rest.split_at_mut(3 * n);
    let (bg0, bg12) = bg.split_at_mut(n);
    let (bg1, bg2) = bg12.split_at_mut(n);
    let (z1, z2, z3) = (zb[CH_GRAD], zb[CH_GRAD + 1], zb[CH_GRAD + 2]);
    if c == Order::First.channels() {
        for i in 0..n {
            let ti = t[i];
            let s1 = 1.0 - ti * ti;
            let s2 = -2.0 * ti * s1;
            b0[i] = b0[i] * s1 + s2 * (bg0[i] * z1[i] + bg1[i] * z2[i] + bg2[i] * z3[i]);
            bg0[i] *= s1;
            bg1[i] *= s1;
            bg2[i] *= s1;
        }
        return;
    }
    let mut hb: Vec<&mut [f64]> = bh.chunks_exact_mut(n).collect();
    let [h00, h11, h22, h01, h02, h12] = &mut hb[..] else {
        unreachable!("six second-derivative channels")
    };
    let (zh00, zh11, zh22) = (zb[CH_HESS], zb[CH_HESS + 1], zb[CH_HESS + 2]);
    let (zh01, zh02, zh12) = (zb[CH_HESS + 3], zb[CH_HESS + 4], zb[CH_HESS + 5]);
    for i in 0..n {
        let ti = t[i];
        let s1 = 1.0 - ti * ti;
        let s2 = -2.0 * ti * s1;
        let s3 = s1 * (6.0 * ti * ti - 2.0);
        let (d0, d1, d2) = (z1[i], z2[i], z3[i]);
        let (a00, a11, a22) = (h00[i], h11[i], h22[i]);
        let (a01, a02, a12) = (h01[i], h02[i], h12[i]);
        // Second-derivative channel m: s1 z_m + s2 z_k z_l.
        let hz = a00 * zh00[i] + a11 * zh11[i] + a22 * zh22[i] + a01 * zh01[i] + a02 * zh02[i] + a12 * zh12[i];
        let hdd = a00 * d0 * d0 + a11 * d1 * d1 + a22 * d2 * d2 + a01 * d0 * d1 + a02 * d0 * d2 + a12 * d1 * d2;
        b0[i] = b0[i] * s1 + s2 * (bg0[i] * d0 + bg1[i] * d1 + bg2[i] * d2) + s2 * hz + s3 * hdd;
        bg0[i] = bg0[i] * s1 + s2 * (2.0 * a00 * d0 + a01 * d1 + a02 * d2);
        bg1[i] = bg1[i] * s1 + s2 * (2.0 * a11 * d1 + a01 * d0 + a12 * d2);
        bg2[i] = bg2[i] * s1 + s2 * (2.0 * a22 * d2 + a02 * d0 + a12 * d1);
        h00[i] = a00 * s1;
        h11[i] = a11 * s1;
        h22[i] = a22 * s1;
        h01[i] = a01 * s1;
        h02[i] = a02 * s1;
        h12[i] = a12 * s1;
    }
}

/// `C = alpha_one * A B + beta C` for strided row/column layouts.
#[allow(clippy::too_many_arguments)]
#[rustfmt::skip]
fn gemm(
    m: usize, k: usize, n: usize,
    a: &[f64], rsa: usize, csa: usize,
    b: &[f64], rsb: usize, csb: usize,
    beta: f64, c: &mut [f64], rsc: usize, csc: usize,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` is uniquely borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n,
            1.0,
            a.as_ptr(), rsa as isize, csa as isize,
            b.as_ptr(), rsb as isize, csb as isize,
            beta,
            c.as_mut_ptr(), rsc as isize, csc as isize,
        );
    }
}

/// Fresh zeroed adjoint buffer shaped like the tape output.
pub fn adjoint_buffer(tape: &Tape) -> Vec<f64> {
    vec![0.0; tape.output().len()]
}
