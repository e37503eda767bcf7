//! Executable checks of the vector inequalities behind the error analysis
//! and a Monte Carlo integration oracle.
//!
//! The constants in these inequalities are not known in closed form, so the
//! checks report observed extremal ratios and assert only that they are
//! strictly positive and finite.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng as _, RngCore};

use crate::error::{Error, Result};
use crate::geometry::{sample_interior, unit_gaussian_direction, Domain};
use crate::math::{add, dot, norm, pow_abs, powf, scale, sub};
use crate::Vec3;

/// Exponents covered by the default suite.
pub const DEFAULT_EXPONENTS: [f64; 6] = [1.1, 1.5, 2.0, 3.0, 10.0, 500.0];

/// Slack allowed below zero for the monotonicity form, after scaling the
/// pair to unit maximum norm.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// The four pointwise inequalities for `a(ξ) = |ξ|^{p-2}ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorInequality {
    /// `(a(ξ)-a(η))·(ξ-η) ≥ c |ξ-η|² (|ξ|+|η|)^{p-2}`, `1 < p ≤ 2`.
    MonotoneSub,
    /// `|a(ξ)-a(η)| ≤ c |ξ-η|^{p-1}`, `1 < p ≤ 2`.
    HolderSub,
    /// `(a(ξ)-a(η))·(ξ-η) ≥ c |ξ-η|^p`, `p ≥ 2`.
    MonotoneSuper,
    /// `|a(ξ)-a(η)| ≤ c |ξ-η| (|ξ|+|η|)^{p-2}`, `p ≥ 2`.
    LipschitzSuper,
}

impl VectorInequality {
    pub const ALL: [VectorInequality; 4] = [
        VectorInequality::MonotoneSub,
        VectorInequality::HolderSub,
        VectorInequality::MonotoneSuper,
        VectorInequality::LipschitzSuper,
    ];

    pub fn applies(self, p: f64) -> bool {
        match self {
            VectorInequality::MonotoneSub | VectorInequality::HolderSub => p <= 2.0,
            VectorInequality::MonotoneSuper | VectorInequality::LipschitzSuper => p >= 2.0,
        }
    }

    /// Lower bounds need the minimum ratio, upper bounds the maximum.
    pub fn is_lower(self) -> bool {
        matches!(self, VectorInequality::MonotoneSub | VectorInequality::MonotoneSuper)
    }

    pub fn name(self) -> &'static str {
        match self {
            VectorInequality::MonotoneSub => "monotone p<=2",
            VectorInequality::HolderSub => "holder p<=2",
            VectorInequality::MonotoneSuper => "monotone p>=2",
            VectorInequality::LipschitzSuper => "lipschitz p>=2",
        }
    }
}

fn a_map(x: &Vec3, p: f64) -> Vec3 {
    let r = norm(x);
    if r == 0.0 {
        [0.0; 3]
    } else {
        scale(x, powf(r, p - 2.0))
    }
}

/// Pointwise terms of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms {
    /// `(a(ξ)-a(η))·(ξ-η)` after scaling to unit maximum norm.
    pub monotone: f64,
    /// Ratio lhs/rhs per inequality, `None` if it does not apply or the
    /// right-hand side vanishes.
    pub ratios: [Option<f64>; 4],
}

/// Evaluates the four inequalities at one pair. Both sides are homogeneous
/// of the same degree, so the pair is first scaled to unit maximum norm,
/// which keeps large `p` finite.
pub fn pair_terms(p: f64, xi: &Vec3, eta: &Vec3) -> PairTerms {
    let m = norm(xi).max(norm(eta));
    if m == 0.0 {
        return PairTerms { monotone: 0.0, ratios: [None; 4] };
    }
    let (x, y) = (scale(xi, 1.0 / m), scale(eta, 1.0 / m));
    let da = sub(&a_map(&x, p), &a_map(&y, p));
    let dx = sub(&x, &y);
    let monotone = dot(&da, &dx);
    let diff = norm(&da);
    let d = norm(&dx);
    let s = norm(&x) + norm(&y);
    let mut ratios = [None; 4];
    if d > 0.0 {
        for (k, ineq) in VectorInequality::ALL.iter().enumerate() {
            if !ineq.applies(p) {
                continue;
            }
            let (lhs, rhs) = match ineq {
                VectorInequality::MonotoneSub => (monotone, d * d * powf(s, p - 2.0)),
                VectorInequality::HolderSub => (diff, powf(d, p - 1.0)),
                VectorInequality::MonotoneSuper => (monotone, powf(d, p)),
                VectorInequality::LipschitzSuper => (diff, d * powf(s, p - 2.0)),
            };
            if rhs > 0.0 && rhs.is_finite() {
                ratios[k] = Some(lhs / rhs);
            }
        }
    }
    PairTerms { monotone, ratios }
}

/// Observed range of one ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRange {
    pub inequality: VectorInequality,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl RatioRange {
    /// The constant the inequality needs on the tested pairs.
    pub fn constant(&self) -> f64 {
        if self.inequality.is_lower() {
            self.min
        } else {
            self.max
        }
    }

    pub fn holds(&self) -> bool {
        let c = self.constant();
        self.count > 0 && c.is_finite() && c > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorReport {
    pub p: f64,
    pub n_samples: usize,
    pub min_monotone: f64,
    pub monotone_violations: usize,
    pub ranges: Vec<RatioRange>,
}

impl VectorReport {
    pub fn holds(&self) -> bool {
        self.monotone_violations == 0 && self.ranges.iter().all(RatioRange::holds)
    }
}

fn mixed_scale_vector<R: RngCore + ?Sized>(rng: &mut R) -> Vec3 {
    let e: f64 = rng.random_range(-3.0..3.0);
    scale(&unit_gaussian_direction(rng), powf(10.0, e))
}

/// Random pairs in R³ with magnitudes spread over `1e-3 .. 1e3`. Half of
/// the pairs are close, `|ξ - η|` between `1e-6|ξ|` and `|ξ|`, to probe the
/// local behaviour of the ratios.
pub fn check_vector_inequalities<R: RngCore + ?Sized>(p: f64, n_samples: usize, rng: &mut R) -> Result<VectorReport> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::config(alloc::format!("exponent p = {p} must exceed 1")));
    }
    let mut ranges: Vec<RatioRange> = VectorInequality::ALL
        .iter()
        .filter(|i| i.applies(p))
        .map(|&inequality| RatioRange { inequality, min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0 })
        .collect();
    let mut min_monotone = f64::INFINITY;
    let mut monotone_violations = 0;
    for k in 0..n_samples {
        let xi = mixed_scale_vector(rng);
        let eta = if k % 2 == 0 {
            mixed_scale_vector(rng)
        } else {
            let e: f64 = rng.random_range(-6.0..0.0);
            let dir = unit_gaussian_direction(rng);
            add(&xi, &scale(&dir, norm(&xi) * powf(10.0, e)))
        };
        let t = pair_terms(p, &xi, &eta);
        min_monotone = min_monotone.min(t.monotone);
        if t.monotone < -MONOTONE_SLACK || !t.monotone.is_finite() {
            monotone_violations += 1;
        }
        for r in ranges.iter_mut() {
            let idx = VectorInequality::ALL.iter().position(|&i| i == r.inequality).unwrap_or(0);
            if let Some(v) = t.ratios[idx] {
                r.min = r.min.min(v);
                r.max = r.max.max(v);
                r.count += 1;
            }
        }
    }
    Ok(VectorReport { p, n_samples, min_monotone, monotone_violations, ranges })
}

const GAUSS8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Default number of 8-point Gauss–Legendre panels for `S(u, v)`.
pub const S_PANELS: usize = 8;

/// Composite 8-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_01(panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = 1.0 / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        for &(x, w) in &GAUSS8 {
            sum += w * (f(mid - 0.5 * h * x) + f(mid + 0.5 * h * x));
        }
    }
    0.5 * h * sum
}

/// Weighted `Σ w_i |u_i|^q`.
pub fn lq_pow(q: f64, weights: &[f64], u: &[Vec3]) -> f64 {
    weights.iter().zip(u).map(|(w, x)| w * pow_abs(norm(x), q)).sum()
}

/// `S(u, v) = ∫₀¹ (‖v‖^q + ‖v + t(u-v)‖^q)^{1-2/q} t dt` in the weighted
/// discrete norm.
pub fn s_functional(q: f64, weights: &[f64], u: &[Vec3], v: &[Vec3], panels: usize) -> f64 {
    let vq = lq_pow(q, weights, v);
    let w: Vec<Vec3> = u.iter().zip(v).map(|(a, b)| sub(a, b)).collect();
    let mut line = Vec::with_capacity(v.len());
    gauss_legendre_01(panels, |t| {
        line.clear();
        line.extend(v.iter().zip(&w).map(|(b, d)| add(b, &scale(d, t))));
        let base = vq + lq_pow(q, weights, &line);
        if base == 0.0 {
            0.0
        } else {
            powf(base, 1.0 - 2.0 / q) * t
        }
    })
}

/// Both sides of the convexity and smoothness bounds for the weighted
/// functional `J(u) = (1/q) Σ w_i |u_i|^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub q: f64,
    /// `J(u) - J(v) - (|v|^{q-2}v, u - v)`.
    pub gap: f64,
    pub s: f64,
    /// `‖u - v‖_q`.
    pub distance: f64,
    /// Correction term of the lower bound: `S‖u-v‖²` for `q < 2`,
    /// `‖u-v‖^q` for `q ≥ 2`.
    pub lower_term: f64,
    /// Correction term of the upper bound: `‖u-v‖^q` for `q < 2`,
    /// `S‖u-v‖²` for `q ≥ 2`.
    pub upper_term: f64,
}

impl ConvexityReport {
    /// Largest `c` with `gap ≥ c · lower_term`.
    pub fn lower_constant(&self) -> Option<f64> {
        (self.lower_term > 0.0).then(|| self.gap / self.lower_term)
    }

    /// Smallest `c` with `gap ≤ c · upper_term`.
    pub fn upper_constant(&self) -> Option<f64> {
        (self.upper_term > 0.0).then(|| self.gap / self.upper_term)
    }

    /// Both constants positive and finite, or both sides zero.
    pub fn holds(&self) -> bool {
        let ok = |c: Option<f64>| c.is_none_or(|c| c.is_finite() && c > 0.0);
        let degenerate = self.lower_term == 0.0 && self.upper_term == 0.0 && self.gap.abs() <= 1e-12;
        degenerate || (self.lower_term > 0.0 && ok(self.lower_constant()) && ok(self.upper_constant()))
    }
}

pub fn check_convexity_bounds(q: f64, weights: &[f64], u: &[Vec3], v: &[Vec3]) -> Result<ConvexityReport> {
    if !(q.is_finite() && q > 1.0) {
        return Err(Error::config(alloc::format!("exponent q = {q} must exceed 1")));
    }
    for len in [u.len(), v.len()] {
        if len != weights.len() {
            return Err(Error::Dimension { expected: weights.len(), got: len });
        }
    }
    let w: Vec<Vec3> = u.iter().zip(v).map(|(a, b)| sub(a, b)).collect();
    let lin: f64 = weights.iter().zip(v).zip(&w).map(|((c, b), d)| c * dot(&a_map(b, q), d)).sum();
    let gap = (lq_pow(q, weights, u) - lq_pow(q, weights, v)) / q - lin;
    let wq = lq_pow(q, weights, &w);
    let distance = powf(wq, 1.0 / q);
    let s = s_functional(q, weights, u, v, S_PANELS);
    let quad = s * distance * distance;
    let (lower_term, upper_term) = if q < 2.0 { (quad, wq) } else { (wq, quad) };
    Ok(ConvexityReport { q, gap, s, distance, lower_term, upper_term })
}

/// Monte Carlo estimate of `∫_Ω f` with its standard error.
pub fn mc_integrate<R: RngCore + ?Sized>(
    f: impl Fn(&Vec3) -> f64,
    domain: Domain,
    n: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::config("Monte Carlo integration needs at least two samples"));
    }
    let vals: Vec<f64> = sample_interior(domain, n, rng).iter().map(f).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let vol = domain.volume();
    Ok((mean * vol, vol * crate::math::sqrt(var / n as f64)))
}

/// Observed constants of the convexity bounds over random instances.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexitySummary {
    pub q: f64,
    pub instances: usize,
    pub min_lower: f64,
    pub max_upper: f64,
    pub failures: usize,
}

impl ConvexitySummary {
    pub fn holds(&self) -> bool {
        self.failures == 0 && self.min_lower > 0.0 && self.max_upper.is_finite() && self.max_upper > 0.0
    }
}

/// Random weighted fields with entries of norm at most one, so that large
/// `q` stays finite.
pub fn random_fields<R: RngCore + ?Sized>(n_points: usize, rng: &mut R) -> (Vec<f64>, Vec<Vec3>, Vec<Vec3>) {
    let weights = (0..n_points).map(|_| rng.random_range(0.1..1.0)).collect();
    let field = |rng: &mut R| -> Vec<Vec3> {
        (0..n_points)
            .map(|_| scale(&unit_gaussian_direction(rng), rng.random_range(0.0..1.0)))
            .collect()
    };
    let u = field(rng);
    let v = field(rng);
    (weights, u, v)
}

pub fn convexity_summary<R: RngCore + ?Sized>(q: f64, instances: usize, n_points: usize, rng: &mut R) -> Result<ConvexitySummary> {
    let mut s = ConvexitySummary { q, instances, min_lower: f64::INFINITY, max_upper: 0.0, failures: 0 };
    for _ in 0..instances {
        let (w, u, v) = random_fields(n_points, rng);
        let r = check_convexity_bounds(q, &w, &u, &v)?;
        if !r.holds() {
            s.failures += 1;
        }
        if let Some(c) = r.lower_constant() {
            s.min_lower = s.min_lower.min(c);
        }
        if let Some(c) = r.upper_constant() {
            s.max_upper = s.max_upper.max(c);
        }
    }
    Ok(s)
}

/// Largest deviation from the `p = q = 2` identities: every vector ratio
/// equals one, and the convexity gap equals `½‖u-v‖²` with `S = ½`.
pub fn quadratic_identity_deviation<R: RngCore + ?Sized>(n_samples: usize, rng: &mut R) -> f64 {
    let mut dev: f64 = 0.0;
    for _ in 0..n_samples {
        let t = pair_terms(2.0, &mixed_scale_vector(rng), &mixed_scale_vector(rng));
        for r in t.ratios.iter().flatten() {
            dev = dev.max((r - 1.0).abs());
        }
    }
    for _ in 0..16 {
        let (w, u, v) = random_fields(32, rng);
        if let Ok(r) = check_convexity_bounds(2.0, &w, &u, &v) {
            let half = 0.5 * r.distance * r.distance;
            let scale = half.max(f64::MIN_POSITIVE);
            dev = dev.max((r.gap - half).abs() / scale).max((r.s - 0.5).abs());
        }
    }
    dev
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub vectors: Vec<VectorReport>,
    pub convexity: Vec<ConvexitySummary>,
    pub quadratic_deviation: f64,
}

/// Tolerance for the `p = q = 2` identities.
pub const IDENTITY_TOL: f64 = 1e-12;

impl VerifyReport {
    pub fn holds(&self) -> bool {
        self.vectors.iter().all(VectorReport::holds)
            && self.convexity.iter().all(ConvexitySummary::holds)
            && self.quadratic_deviation <= IDENTITY_TOL
    }
}

/// Runs every check for each exponent: vector inequalities over
/// `n_samples` pairs and the convexity bounds with `q` set to the same
/// values.
pub fn run_suite<R: RngCore + ?Sized>(exponents: &[f64], n_samples: usize, rng: &mut R) -> Result<VerifyReport> {
    let vectors = exponents
        .iter()
        .map(|&p| check_vector_inequalities(p, n_samples, rng))
        .collect::<Result<Vec<_>>>()?;
    let convexity = exponents
        .iter()
        .map(|&q| convexity_summary(q, 64, 32, rng))
        .collect::<Result<Vec<_>>>()?;
    let quadratic_deviation = quadratic_identity_deviation(1000, rng);
    Ok(VerifyReport { vectors, convexity, quadratic_deviation })
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vectors {
            writeln!(
                f,
                "p = {}: {} pairs, min monotone {:.3e}, violations {}",
                v.p, v.n_samples, v.min_monotone, v.monotone_violations
            )?;
            for r in &v.ranges {
                writeln!(
                    f,
                    "  {:<15} ratio in [{:.4e}, {:.4e}], constant {:.4e} {}",
                    r.inequality.name(),
                    r.min,
                    r.max,
                    r.constant(),
                    if r.holds() { "ok" } else { "FAIL" }
                )?;
            }
        }
        for c in &self.convexity {
            writeln!(
                f,
                "q = {}: {} instances, lower c >= {:.4e}, upper c <= {:.4e}, failures {} {}",
                c.q,
                c.instances,
                c.min_lower,
                c.max_upper,
                c.failures,
                if c.holds() { "ok" } else { "FAIL" }
            )?;
        }
        writeln!(f, "p = q = 2 identity deviation {:.3e}", self.quadratic_deviation)
    }
}
