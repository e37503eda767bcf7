//! Domains, uniform samplers on the domain and its boundary, and the
//! tangential gradient.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng as _;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::math::{dot, norm, scale, sub};
use crate::rng::{self, Stream};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Domain {
    /// `{|x| < 1}`
    UnitBall,
    /// `(-1, 1)^3`
    Cube,
}

/// Points closer than this to a cube edge are redrawn.
const EDGE_MARGIN: f64 = 1e-12;

impl Domain {
    /// `|Ω|`
    pub fn volume(self) -> f64 {
        match self {
            Domain::UnitBall => 4.0 * PI / 3.0,
            Domain::Cube => 8.0,
        }
    }

    /// `|∂Ω|`
    pub fn boundary_area(self) -> f64 {
        match self {
            Domain::UnitBall => 4.0 * PI,
            Domain::Cube => 24.0,
        }
    }

    pub fn contains(self, x: &Vec3) -> bool {
        match self {
            Domain::UnitBall => dot(x, x) < 1.0,
            Domain::Cube => x.iter().all(|c| c.abs() < 1.0),
        }
    }

    /// Euclidean distance to the boundary for a point inside.
    pub fn distance_to_boundary(self, x: &Vec3) -> f64 {
        match self {
            Domain::UnitBall => 1.0 - norm(x),
            Domain::Cube => 1.0 - x.iter().fold(0.0f64, |m, c| m.max(c.abs())),
        }
    }

    /// Lower end `x2` of the line `{(x1, t, 0)}` inside the domain, or
    /// `None` if the line misses the `x3 = 0` slice.
    pub fn slice_lower_x2(self, x1: f64) -> Option<f64> {
        match self {
            Domain::UnitBall if x1.abs() < 1.0 => Some(-crate::math::sqrt(1.0 - x1 * x1)),
            Domain::Cube if x1.abs() < 1.0 => Some(-1.0),
            _ => None,
        }
    }
}

pub fn sample_interior<R: RngCore + ?Sized>(d: Domain, n: usize, rng: &mut R) -> Vec<Vec3> {
    (0..n).map(|_| interior_point(d, rng)).collect()
}

fn interior_point<R: RngCore + ?Sized>(d: Domain, rng: &mut R) -> Vec3 {
    match d {
        Domain::UnitBall => loop {
            let dir = unit_gaussian_direction(rng);
            let r = crate::math::powf(rng.random::<f64>(), 1.0 / 3.0);
            let x = scale(&dir, r);
            if dot(&x, &x) < 1.0 {
                break x;
            }
        },
        Domain::Cube => loop {
            let x = [open_unit(rng), open_unit(rng), open_unit(rng)];
            if Domain::Cube.contains(&x) {
                break x;
            }
        },
    }
}

fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..1.0)
}

pub(crate) fn unit_gaussian_direction<R: RngCore + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let g: Vec3 = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = norm(&g);
        if n > 1e-12 {
            break scale(&g, 1.0 / n);
        }
    }
}

/// Uniform boundary points with outward unit normals.
pub fn sample_boundary<R: RngCore + ?Sized>(d: Domain, n: usize, rng: &mut R) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, nrm) = boundary_point(d, rng);
        points.push(x);
        normals.push(nrm);
    }
    (points, normals)
}

fn boundary_point<R: RngCore + ?Sized>(d: Domain, rng: &mut R) -> (Vec3, Vec3) {
    match d {
        Domain::UnitBall => {
            let x = unit_gaussian_direction(rng);
            (x, x)
        }
        Domain::Cube => {
            let face = rng.random_range(0..6usize);
            let axis = face / 2;
            let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
            loop {
                let mut x = [0.0; 3];
                let mut ok = true;
                for (k, xk) in x.iter_mut().enumerate() {
                    if k == axis {
                        *xk = sign;
                    } else {
                        *xk = open_unit(rng);
                        ok &= 1.0 - xk.abs() > EDGE_MARGIN;
                    }
                }
                if ok {
                    let mut nrm = [0.0; 3];
                    nrm[axis] = sign;
                    break (x, nrm);
                }
            }
        }
    }
}

/// Interior and boundary samples with the domain measures used as
/// Monte Carlo weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub domain: Domain,
    pub interior: Vec<Vec3>,
    pub boundary: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl SampleSet {
    /// Draws `n_interior` and `n_boundary` points from the run seed's
    /// interior and boundary streams.
    pub fn draw(domain: Domain, n_interior: usize, n_boundary: usize, seed: u64) -> Self {
        let interior = sample_interior(domain, n_interior, &mut rng::stream(seed, Stream::Interior));
        let (boundary, normals) =
            sample_boundary(domain, n_boundary, &mut rng::stream(seed, Stream::Boundary));
        Self {
            domain,
            interior,
            boundary,
            normals,
        }
    }

    pub fn from_rng<R: RngCore + ?Sized>(domain: Domain, n_interior: usize, n_boundary: usize, rng: &mut R) -> Self {
        let interior = sample_interior(domain, n_interior, rng);
        let (boundary, normals) = sample_boundary(domain, n_boundary, rng);
        Self {
            domain,
            interior,
            boundary,
            normals,
        }
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// `|Ω| / N_d`
    pub fn interior_weight(&self) -> f64 {
        self.domain.volume() / self.interior.len().max(1) as f64
    }

    /// `|∂Ω| / N_b`
    pub fn boundary_weight(&self) -> f64 {
        self.domain.boundary_area() / self.boundary.len().max(1) as f64
    }
}

/// `grad - n (n . grad)`; `n` must be a unit vector.
pub fn tangential_gradient(grad: &Vec3, n: &Vec3) -> Vec3 {
    debug_assert!((norm(n) - 1.0).abs() < 1e-9, "normal must have unit length");
    sub(grad, &scale(n, dot(n, grad)))
}
