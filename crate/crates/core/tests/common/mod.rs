#![allow(dead_code)]

use dvnn_core::autodiff::{curl, eval_scalar_jet, eval_vector_jet};
use dvnn_core::networks::{init_glorot, MlpParams};
use dvnn_core::optim::Objective;
use dvnn_core::rng::{stream, Stream};
use dvnn_core::Vec3;
use rand::Rng;

/// Glorot weights plus uniform biases, so every channel is exercised.
pub fn random_net(dims: &[usize], seed: u64) -> MlpParams {
    let mut rng = stream(seed, Stream::Verify);
    let mut net = init_glorot(dims, &mut rng).unwrap();
    for l in 0..net.n_layers() {
        let (_, b) = net.layer_mut(l);
        b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    }
    net
}

pub fn grad(net: &MlpParams, x: &Vec3) -> Vec3 {
    eval_scalar_jet(net, x).unwrap().grad
}

pub fn curl_at(net: &MlpParams, x: &Vec3) -> Vec3 {
    curl(&eval_vector_jet(net, x).unwrap())
}

/// Central-difference gradient of an objective.
pub fn fd_gradient<O: Objective>(obj: &mut O, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + h;
            let fp = obj.value(&xp);
            xp[k] = x[k] - h;
            let fm = obj.value(&xp);
            xp[k] = x[k];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖₂ / ‖b‖₂`
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

/// Analytic gradient of `obj` against central differences.
pub fn check_gradient<O: Objective>(obj: &mut O, x: &[f64], h: f64) -> f64 {
    let mut g = vec![0.0; x.len()];
    let v = obj.value_grad(x, &mut g);
    assert!((v - obj.value(x)).abs() <= 1e-12 * v.abs().max(1.0), "value_grad and value disagree");
    rel_l2(&g, &fd_gradient(obj, x, h))
}

/// `u(x) = tanh(ε a·x)/ε`, numerically the linear function `a·x`.
pub fn near_linear(a: Vec3) -> MlpParams {
    let eps = 1e-7;
    let mut flat = vec![eps * a[0], eps * a[1], eps * a[2], 0.0];
    flat.extend([1.0 / eps, 0.0]);
    MlpParams::from_flat(&[3, 1, 1], flat).unwrap()
}

/// Vector net with zero weights and output biases `c`.
pub fn constant_vector(c: Vec3, hidden: usize) -> MlpParams {
    let mut net = MlpParams::zeros(&[3, hidden, 3]).unwrap();
    let (_, b) = net.layer_mut(1);
    b.copy_from_slice(&c);
    net
}
