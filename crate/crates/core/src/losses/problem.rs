use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::Vec3;

pub type ScalarFn = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;

/// A scalar datum (`f` or `g`). `Zero` is kept distinct so the solver can
/// skip work that is identically zero.
#[derive(Clone)]
pub enum Field {
    Zero,
    Constant(f64),
    Func(ScalarFn),
}

impl Field {
    pub fn func(f: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        Field::Func(Arc::new(f))
    }

    #[inline]
    pub fn at(&self, x: &Vec3) -> f64 {
        match self {
            Field::Zero => 0.0,
            Field::Constant(c) => *c,
            Field::Func(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Field::Zero => true,
            Field::Constant(c) => *c == 0.0,
            Field::Func(_) => false,
        }
    }

    pub fn sample(&self, pts: &[Vec3]) -> Vec<f64> {
        pts.iter().map(|x| self.at(x)).collect()
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Zero => write!(f, "Zero"),
            Field::Constant(c) => write!(f, "Constant({c})"),
            Field::Func(_) => write!(f, "Func(..)"),
        }
    }
}

/// The exponent `p`, constant or a field `p(x)`.
#[derive(Clone)]
pub enum Exponent {
    Constant(f64),
    Field(ScalarFn),
}

impl Exponent {
    pub fn field(f: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        Exponent::Field(Arc::new(f))
    }

    #[inline]
    pub fn p_at(&self, x: &Vec3) -> f64 {
        match self {
            Exponent::Constant(p) => *p,
            Exponent::Field(f) => f(x),
        }
    }

    /// Conjugate exponent `q = p / (p - 1)` at `x`.
    #[inline]
    pub fn q_at(&self, x: &Vec3) -> f64 {
        conjugate(self.p_at(x))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Exponent::Constant(_))
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Exponent::Constant(p) => Some(*p),
            Exponent::Field(_) => None,
        }
    }

    /// `q` at each point, rejecting `p <= 1` anywhere.
    pub fn q_values(&self, pts: &[Vec3]) -> Result<Vec<f64>> {
        pts.iter()
            .map(|x| {
                let p = self.p_at(x);
                if p.is_finite() && p > 1.0 {
                    Ok(conjugate(p))
                } else {
                    Err(Error::config(alloc::format!("exponent p = {p} must exceed 1")))
                }
            })
            .collect()
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Constant(p) => write!(f, "Constant({p})"),
            Exponent::Field(_) => write!(f, "Field(..)"),
        }
    }
}

#[inline]
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// A p- or p(x)-Laplace boundary value problem
/// `-div(|∇u|^{p-2}∇u) = f` in Ω, `u = g` on ∂Ω.
#[derive(Clone)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub exponent: Exponent,
    pub source: Field,
    pub boundary: Field,
    pub exact_u: Option<ScalarFn>,
    pub exact_flux: Option<VectorFn>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("domain", &self.domain)
            .field("exponent", &self.exponent)
            .field("source", &self.source)
            .field("boundary", &self.boundary)
            .field("exact_u", &self.exact_u.is_some())
            .field("exact_flux", &self.exact_flux.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(domain: Domain, exponent: Exponent, source: Field, boundary: Field) -> Result<Self> {
        if let Exponent::Constant(p) = exponent {
            if !(p.is_finite() && p > 1.0) {
                return Err(Error::config(alloc::format!("exponent p = {p} must exceed 1")));
            }
        }
        Ok(Self {
            domain,
            exponent,
            source,
            boundary,
            exact_u: None,
            exact_flux: None,
        })
    }

    pub fn with_exact_u(mut self, u: impl Fn(&Vec3) -> f64 + Send + Sync + 'static) -> Self {
        self.exact_u = Some(Arc::new(u));
        self
    }

    pub fn with_exact_flux(mut self, s: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        self.exact_flux = Some(Arc::new(s));
        self
    }
}
