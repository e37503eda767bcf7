use super::*;
use crate::networks::{init_glorot, MlpParams};
use crate::rng::{stream, Stream};

/// Plain scalar forward pass, independent of the jet engine.
fn naive_forward(net: &MlpParams, x: &Vec3) -> Vec<f64> {
    let mut a: Vec<f64> = x.to_vec();
    for l in 0..net.n_layers() {
        let (w, b) = net.layer(l);
        let n_in = a.len();
        let mut z: Vec<f64> = b.to_vec();
        for (o, zo) in z.iter_mut().enumerate() {
            for j in 0..n_in {
                *zo += w[o * n_in + j] * a[j];
            }
        }
        if l + 1 < net.n_layers() {
            z.iter_mut().for_each(|v| *v = v.tanh());
        }
        a = z;
    }
    a
}

fn shifted(x: &Vec3, k: usize, h: f64) -> Vec3 {
    let mut y = *x;
    y[k] += h;
    y
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

fn random_point<R: rand::Rng>(rng: &mut R) -> Vec3 {
    [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ]
}

#[test]
fn zero_weight_scalar_net() {
    let mut net = MlpParams::zeros(&[3, 5, 5, 1]).unwrap();
    for l in 0..net.n_layers() {
        let (_, b) = net.layer_mut(l);
        b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * (i as f64 + 1.0));
    }
    let j = eval_scalar_jet(&net, &[0.3, 0.1, -0.9]).unwrap();
    assert_eq!(j.value, 0.1);
    assert_eq!(j.grad, [0.0; 3]);
    assert_eq!(j.hess, [[0.0; 3]; 3]);
}

#[test]
fn single_neuron_closed_form() {
    // u(x) = a tanh(w.x + b)
    let (w, b, a) = ([0.7, -1.3, 0.4], 0.25, 1.8);
    let mut flat = w.to_vec();
    flat.extend([b, a, 0.0]);
    let net = MlpParams::from_flat(&[3, 1, 1], flat).unwrap();
    let x = [0.2, 0.5, -0.6];
    let t = (w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + b).tanh();
    let j = eval_scalar_jet(&net, &x).unwrap();
    assert!((j.value - a * t).abs() < 1e-15);
    for k in 0..3 {
        assert!((j.grad[k] - a * (1.0 - t * t) * w[k]).abs() < 1e-15);
        for l in 0..3 {
            let want = -2.0 * a * t * (1.0 - t * t) * w[k] * w[l];
            assert!((j.hess[k][l] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn random_net_matches_finite_differences() {
    let mut rng = stream(21, Stream::Verify);
    let h = 1e-4;
    for _ in 0..10 {
        let net = init_glorot(&[3, 20, 20, 20, 1], &mut rng).unwrap();
        let x = random_point(&mut rng);
        let j = eval_scalar_jet(&net, &x).unwrap();
        let u = |y: &Vec3| naive_forward(&net, y)[0];
        assert!((j.value - u(&x)).abs() < 1e-13);
        let u0 = u(&x);
        let mut lap = 0.0;
        for k in 0..3 {
            let (up, um) = (u(&shifted(&x, k, h)), u(&shifted(&x, k, -h)));
            assert!(rel_err(j.grad[k], (up - um) / (2.0 * h), 1e-2) < 1e-5);
            lap += (up - 2.0 * u0 + um) / (h * h);
        }
        assert!(rel_err(j.laplacian(), lap, 1e-2) < 1e-5, "{} vs {}", j.laplacian(), lap);
    }
}

#[test]
fn hessian_symmetric_and_deterministic() {
    let mut rng = stream(3, Stream::Verify);
    let net = init_glorot(&[3, 20, 20, 1], &mut rng).unwrap();
    let x = random_point(&mut rng);
    let a = eval_scalar_jet(&net, &x).unwrap();
    let b = eval_scalar_jet(&net, &x).unwrap();
    for k in 0..3 {
        for l in 0..3 {
            assert!((a.hess[k][l] - a.hess[l][k]).abs() < 1e-12);
        }
    }
    assert_eq!(a, b);
}

#[test]
fn vector_jet_zero_and_affine() {
    let mut net = MlpParams::zeros(&[3, 4, 3]).unwrap();
    net.layer_mut(1).1.copy_from_slice(&[1.0, 2.0, 3.0]);
    let j = eval_vector_jet(&net, &[0.5, 0.5, 0.5]).unwrap();
    assert_eq!(j.value, [1.0, 2.0, 3.0]);
    assert_eq!(j.jac, [[0.0; 3]; 3]);

    let a = [1.0, -2.0, 0.5, 3.0, 0.25, -1.0, 0.0, 4.0, 2.0];
    let mut flat = a.to_vec();
    flat.extend([0.1, 0.2, 0.3]);
    let lin = MlpParams::from_flat(&[3, 3], flat).unwrap();
    let j = eval_vector_jet(&lin, &[0.3, -0.7, 0.2]).unwrap();
    for i in 0..3 {
        for k in 0..3 {
            assert_eq!(j.jac[i][k], a[i * 3 + k]);
        }
    }
}

#[test]
fn vector_jet_matches_finite_differences() {
    let mut rng = stream(4, Stream::Verify);
    let h = 1e-4;
    for _ in 0..10 {
        let net = init_glorot(&[3, 20, 20, 20, 3], &mut rng).unwrap();
        let x = random_point(&mut rng);
        let j = eval_vector_jet(&net, &x).unwrap();
        for k in 0..3 {
            let up = naive_forward(&net, &shifted(&x, k, h));
            let um = naive_forward(&net, &shifted(&x, k, -h));
            for i in 0..3 {
                let fd = (up[i] - um[i]) / (2.0 * h);
                assert!(rel_err(j.jac[i][k], fd, 1e-2) < 1e-5);
            }
        }
    }
}

#[test]
fn curl_examples() {
    let zero = VectorJet { value: [0.0; 3], jac: [[0.0; 3]; 3] };
    assert_eq!(curl(&zero), [0.0; 3]);
    let sym = VectorJet {
        value: [0.0; 3],
        jac: [[1.0, 2.0, 3.0], [2.0, 5.0, -1.0], [3.0, -1.0, 0.5]],
    };
    assert_eq!(curl(&sym), [0.0; 3]);
    // psi = (-x2, x1, 0)
    let rot = VectorJet {
        value: [0.0; 3],
        jac: [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    };
    assert_eq!(curl(&rot), [0.0, 0.0, 2.0]);
}

#[test]
fn divergence_of_curl_vanishes() {
    let mut rng = stream(8, Stream::Verify);
    let h = 1e-4;
    for _ in 0..10 {
        let net = init_glorot(&[3, 20, 20, 20, 3], &mut rng).unwrap();
        let x = random_point(&mut rng);
        let c = |y: &Vec3| curl(&eval_vector_jet(&net, y).unwrap());
        let div: f64 = (0..3)
            .map(|k| (c(&shifted(&x, k, h))[k] - c(&shifted(&x, k, -h))[k]) / (2.0 * h))
            .sum();
        assert!(div.abs() < 1e-6, "div = {div}");
    }
}

#[test]
fn output_dimension_checked() {
    let scalar = MlpParams::zeros(&[3, 2, 1]).unwrap();
    let vector = MlpParams::zeros(&[3, 2, 3]).unwrap();
    assert!(matches!(eval_vector_jet(&scalar, &[0.0; 3]), Err(Error::Dimension { .. })));
    assert!(matches!(eval_scalar_jet(&vector, &[0.0; 3]), Err(Error::Dimension { .. })));
}

#[test]
fn param_gradient_hand_chain_rule() {
    // Zero weights, nonzero biases: phi = c regardless of x.
    let hidden_bias = [0.5, -0.3];
    let c = 0.7;
    let mut net = MlpParams::zeros(&[3, 2, 1]).unwrap();
    net.layer_mut(0).1.copy_from_slice(&hidden_bias);
    net.layer_mut(1).1[0] = c;
    let x0 = [0.4, -0.2, 0.9];
    let (v, g) = param_gradient(&net, &[x0], Order::Value, |tape, adj| {
        let phi = tape.scalar_value(0);
        adj[0] = 2.0 * phi;
        phi * phi
    })
    .unwrap();
    assert!((v - c * c).abs() < 1e-15);
    // First layer: all zero because the outgoing weights are zero.
    assert!(g[..8].iter().all(|&d| d == 0.0));
    for j in 0..2 {
        assert!((g[8 + j] - 2.0 * c * hidden_bias[j].tanh()).abs() < 1e-15);
    }
    assert!((g[10] - 2.0 * c).abs() < 1e-15);
}

#[test]
fn param_gradient_constant_loss_is_zero() {
    let net = init_glorot(&[3, 6, 1], &mut stream(2, Stream::Verify)).unwrap();
    let (_, g) = param_gradient(&net, &[[0.1, 0.2, 0.3]], Order::Second, |_, _| 3.0).unwrap();
    assert!(g.iter().all(|&d| d == 0.0));
}

#[test]
fn param_gradient_non_finite_is_divergence() {
    let net = MlpParams::zeros(&[3, 2, 1]).unwrap();
    let r = param_gradient(&net, &[[0.0; 3]], Order::Value, |_, _| f64::NAN);
    assert!(matches!(r, Err(Error::Diverged { .. })));
}

fn laplacian_sq_loss(net: &MlpParams, pts: &[Vec3]) -> (f64, Vec<f64>) {
    param_gradient(net, pts, Order::Second, |tape, adj| {
        let mut s = 0.0;
        for i in 0..pts.len() {
            let lap = tape.scalar_laplacian(i);
            s += lap * lap;
            for d in 0..3 {
                adj[tape.out_index(0, i, CH_HESS + d)] = 2.0 * lap;
            }
        }
        s
    })
    .unwrap()
}

#[test]
fn laplacian_loss_gradient_matches_fd() {
    let mut rng = stream(12, Stream::Verify);
    let net = init_glorot(&[3, 20, 20, 20, 1], &mut rng).unwrap();
    let pts: Vec<Vec3> = (0..16).map(|_| random_point(&mut rng)).collect();
    let (_, g) = laplacian_sq_loss(&net, &pts);
    let h = 1e-5;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for idx in (0..net.len()).step_by(7) {
        let mut p = net.clone();
        p.flat_mut()[idx] += h;
        let lp = laplacian_sq_loss(&p, &pts).0;
        p.flat_mut()[idx] -= 2.0 * h;
        let lm = laplacian_sq_loss(&p, &pts).0;
        let fd = (lp - lm) / (2.0 * h);
        assert!(rel_err(g[idx], fd, 1e-3 * scale) < 1e-4, "param {idx}: {} vs {fd}", g[idx]);
    }
}

#[test]
fn batch_matches_single_point() {
    let mut rng = stream(13, Stream::Verify);
    let net = init_glorot(&[3, 20, 20, 1], &mut rng).unwrap();
    let pts: Vec<Vec3> = (0..37).map(|_| random_point(&mut rng)).collect();
    let mut tape = Tape::new();
    tape.forward(&net, &pts, Order::Second);
    for (i, x) in pts.iter().enumerate() {
        let j = eval_scalar_jet(&net, x).unwrap();
        assert!((tape.scalar_value(i) - j.value).abs() < 1e-14);
        assert!((tape.scalar_laplacian(i) - j.laplacian()).abs() < 1e-13);
    }
}

#[test]
fn first_order_tape_matches_second_order() {
    let mut rng = stream(14, Stream::Verify);
    let net = init_glorot(&[3, 10, 10, 1], &mut rng).unwrap();
    let pts: Vec<Vec3> = (0..5).map(|_| random_point(&mut rng)).collect();
    let (mut a, mut b) = (Tape::new(), Tape::new());
    a.forward(&net, &pts, Order::First);
    b.forward(&net, &pts, Order::Second);
    for i in 0..pts.len() {
        assert!((a.scalar_value(i) - b.scalar_value(i)).abs() < 1e-15);
        for k in 0..3 {
            assert!((a.scalar_grad(i)[k] - b.scalar_grad(i)[k]).abs() < 1e-15);
        }
    }
}
