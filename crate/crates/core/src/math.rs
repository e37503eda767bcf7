//! Scalar math shared by the losses and metrics. Backed by `libm` so the
//! crate builds without `std`.

use crate::Vec3;

/// Magnitudes below this floor are treated as exact zeros in `|v|^q`.
pub const POW_FLOOR: f64 = 1e-30;

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// `|v|^q` evaluated as `exp(q ln|v|)`, with `|v| < POW_FLOOR` mapped to 0
/// (except `q = 0`, which gives 1).
#[inline]
pub fn pow_abs(v: f64, q: f64) -> f64 {
    let a = v.abs();
    if q == 0.0 {
        1.0
    } else if a < POW_FLOOR {
        0.0
    } else {
        exp(q * ln(a))
    }
}

/// `(|v|^q, d|v|^q/dv)` with the same floor; the derivative is
/// `q |v|^{q-1} sign(v)`.
#[inline]
pub fn pow_abs_d(v: f64, q: f64) -> (f64, f64) {
    let a = v.abs();
    if a < POW_FLOOR {
        (0.0, 0.0)
    } else {
        let p = exp(q * ln(a));
        (p, q * p / v)
    }
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    sqrt(dot(a, a))
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_abs_matches_powf() {
        for &(v, q) in &[(2.0, 11.0), (-0.3, 1.002), (1e-3, 1.5), (7.5, 2.0)] {
            let want = powf(f64::abs(v), q);
            assert!((pow_abs(v, q) - want).abs() <= 1e-13 * want.max(1.0));
        }
    }

    #[test]
    fn pow_abs_floor() {
        assert_eq!(pow_abs(0.0, 1.1), 0.0);
        assert_eq!(pow_abs_d(1e-31, 1.1), (0.0, 0.0));
    }

    #[test]
    fn pow_abs_derivative_sign() {
        let (_, d) = pow_abs_d(-2.0, 3.0);
        assert!((d + 12.0).abs() < 1e-12);
    }
}
