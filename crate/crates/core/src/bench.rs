//! Benchmark problems, exact references, error metrics and potential
//! reconstruction on the `x₃ = 0` slice.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::losses::{conjugate, Exponent, Field, ProblemSpec};
use crate::math::{exp, norm, pow_abs, powf, sqrt};
use crate::networks::FluxField;
use crate::solver::NetworkConfig;
use crate::Vec3;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

/// The benchmark problems. `Torsion` carries its exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleId {
    /// Ball, `p = 1.1`, radial exact solution.
    SingularBall,
    /// Ball, `p = 500`, radial exact solution.
    DegenerateBall,
    /// Cube, `f = 1`, `g = 0`, no exact solution.
    Torsion(f64),
    /// Cube, piecewise constant `p(x)`, linear exact solution.
    PiecewiseExponent,
    /// Cube, smooth `p(x)`, exponential exact solution.
    SmoothExponent,
}

impl ExampleId {
    pub const TORSION_EXPONENTS: [f64; 3] = [2.0, 10.0, 200.0];

    /// Short label: `1i`, `1ii`, `2`, `3`, `4`.
    pub fn label(&self) -> &'static str {
        match self {
            ExampleId::SingularBall => "1i",
            ExampleId::DegenerateBall => "1ii",
            ExampleId::Torsion(_) => "2",
            ExampleId::PiecewiseExponent => "3",
            ExampleId::SmoothExponent => "4",
        }
    }

    /// Every benchmark run, with the torsion problem at each exponent.
    pub fn all() -> Vec<ExampleId> {
        let mut v = vec![ExampleId::SingularBall, ExampleId::DegenerateBall];
        v.extend(Self::TORSION_EXPONENTS.iter().map(|&p| ExampleId::Torsion(p)));
        v.extend([ExampleId::PiecewiseExponent, ExampleId::SmoothExponent]);
        v
    }

    /// Parses a label; `2` expands to the three torsion exponents unless
    /// `p` is given.
    pub fn parse(label: &str, p: Option<f64>) -> Result<Vec<ExampleId>> {
        Ok(match label {
            "1i" => vec![ExampleId::SingularBall],
            "1ii" => vec![ExampleId::DegenerateBall],
            "2" => match p {
                Some(p) => vec![ExampleId::Torsion(p)],
                None => Self::TORSION_EXPONENTS.iter().map(|&p| ExampleId::Torsion(p)).collect(),
            },
            "3" => vec![ExampleId::PiecewiseExponent],
            "4" => vec![ExampleId::SmoothExponent],
            "all" => Self::all(),
            _ => return Err(Error::config(format!("unknown example `{label}` (1i, 1ii, 2, 3, 4, all)"))),
        })
    }

    /// Constant exponent, if any.
    pub fn p(&self) -> Option<f64> {
        match self {
            ExampleId::SingularBall => Some(1.1),
            ExampleId::DegenerateBall => Some(500.0),
            ExampleId::Torsion(p) => Some(*p),
            _ => None,
        }
    }
}

/// Errors reported in the literature for a problem, where available.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Reference {
    pub e_sigma: Option<f64>,
    pub e_u: Option<f64>,
    pub e: Option<f64>,
    pub e2: Option<f64>,
    pub e1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExampleSpec {
    pub id: ExampleId,
    pub problem: ProblemSpec,
    pub reference: Reference,
    pub network: NetworkConfig,
}

/// `(p/(p-1))^{p-1}`, the slope of the radial flux.
pub fn radial_flux_scale(p: f64) -> f64 {
    powf(conjugate(p), p - 1.0)
}

/// Flux of `u = 1 - |x|^{p/(p-1)}`: `σ = (p/(p-1))^{p-1} x`, with
/// `div σ = 3 (p/(p-1))^{p-1} = f`.
pub fn exact_flux_example1(p: f64, x: &Vec3) -> Vec3 {
    let c = radial_flux_scale(p);
    [c * x[0], c * x[1], c * x[2]]
}

fn radial_problem(p: f64) -> Result<ProblemSpec> {
    let q = conjugate(p);
    let c = radial_flux_scale(p);
    Ok(
        ProblemSpec::new(Domain::UnitBall, Exponent::Constant(p), Field::Constant(3.0 * c), Field::Zero)?
            .with_exact_u(move |x| 1.0 - pow_abs(norm(x), q))
            .with_exact_flux(move |x| exact_flux_example1(p, x)),
    )
}

fn diagonal(x: &Vec3) -> f64 {
    (x[0] + x[1] + x[2]) * INV_SQRT3
}

/// The smooth variable-exponent problem with `s = (x₁+x₂+x₃)/3`,
/// `p = 1 + 1/(s+3)` and `u = √3 (e^{s+3} - 1)`. Then `|∇u| = e^{s+3}`,
/// `|∇u|^{p-2} = e^{1-(s+3)}` and the flux is the constant `-e (1,1,1)/√3`.
fn smooth_exponent_problem() -> Result<ProblemSpec> {
    let s = |x: &Vec3| (x[0] + x[1] + x[2]) / 3.0;
    let u = move |x: &Vec3| sqrt(3.0) * (exp(s(x) + 3.0) - 1.0);
    let c = -core::f64::consts::E * INV_SQRT3;
    Ok(ProblemSpec::new(
        Domain::Cube,
        Exponent::field(move |x| 1.0 + 1.0 / (s(x) + 3.0)),
        Field::Zero,
        Field::func(u),
    )?
    .with_exact_u(u)
    .with_exact_flux(move |_| [c, c, c]))
}

pub fn example(id: ExampleId) -> Result<ExampleSpec> {
    let none = Reference::default();
    let (problem, reference, network) = match id {
        ExampleId::SingularBall => (
            radial_problem(1.1)?,
            Reference {
                e_sigma: Some(2.40e-3),
                e_u: Some(6.22e-3),
                ..none
            },
            NetworkConfig::standard(),
        ),
        ExampleId::DegenerateBall => (
            radial_problem(500.0)?,
            Reference {
                e_sigma: Some(8.11e-5),
                ..none
            },
            NetworkConfig::deep_psi(),
        ),
        ExampleId::Torsion(p) => (
            ProblemSpec::new(Domain::Cube, Exponent::Constant(p), Field::Constant(1.0), Field::Zero)?,
            none,
            NetworkConfig::standard(),
        ),
        ExampleId::PiecewiseExponent => (
            ProblemSpec::new(
                Domain::Cube,
                Exponent::field(|x| if x[0] <= 0.0 { 1.2 } else { 100.0 }),
                Field::Zero,
                Field::func(diagonal),
            )?
            .with_exact_u(diagonal)
            .with_exact_flux(|_| [-INV_SQRT3; 3]),
            Reference {
                e: Some(5.13e-3),
                e2: Some(1.10e-2),
                e1: Some(8.36e-3),
                ..none
            },
            NetworkConfig::standard(),
        ),
        ExampleId::SmoothExponent => (
            smooth_exponent_problem()?,
            Reference {
                e: Some(3.13e-8),
                e2: Some(1.14e-2),
                e1: Some(9.43e-3),
                ..none
            },
            NetworkConfig::standard(),
        ),
    };
    Ok(ExampleSpec {
        id,
        problem,
        reference,
        network,
    })
}

/// Relative flux errors on an evaluation set.
///
/// `e_sigma` is the relative `L^q` error (constant exponent only); `e` is
/// `Σ|σ*-σ̂|^{q(x)} / Σ|σ*|^{q(x)}` without a root; `e2` and `e1` are the
/// relative `L²` and `L¹` errors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FluxErrors {
    pub e_sigma: Option<f64>,
    pub e: f64,
    pub e2: f64,
    pub e1: f64,
}

pub fn relative_flux_error<F: FluxField + ?Sized>(model: &F, spec: &ProblemSpec, points: &[Vec3]) -> Result<FluxErrors> {
    let exact = spec
        .exact_flux
        .as_ref()
        .ok_or_else(|| Error::Undefined("no exact flux for this problem".to_string()))?;
    let approx = model.flux_many(points);
    let q = spec.exponent.q_values(points)?;
    let (mut nq, mut dq, mut n2, mut d2, mut n1, mut d1) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x, s_hat), &qi) in points.iter().zip(&approx).zip(&q) {
        let s = exact(x);
        let diff = norm(&[s[0] - s_hat[0], s[1] - s_hat[1], s[2] - s_hat[2]]);
        let m = norm(&s);
        nq += pow_abs(diff, qi);
        dq += pow_abs(m, qi);
        n2 += diff * diff;
        d2 += m * m;
        n1 += diff;
        d1 += m;
    }
    if !(dq > 0.0 && d2 > 0.0 && d1 > 0.0) {
        return Err(Error::Undefined("exact flux vanishes on the evaluation set".to_string()));
    }
    let e = nq / dq;
    if !(e.is_finite() && n2.is_finite()) {
        return Err(Error::Undefined("non-finite flux error".to_string()));
    }
    Ok(FluxErrors {
        e_sigma: spec.exponent.constant().map(|p| powf(e, 1.0 / conjugate(p))),
        e,
        e2: sqrt(n2 / d2),
        e1: n1 / d1,
    })
}

/// A square grid on `[-1, 1]²` at `x₃ = 0`, and the number of trapezoid
/// intervals per reconstruction line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceGrid {
    pub n: usize,
    pub nodes: usize,
}

impl Default for SliceGrid {
    fn default() -> Self {
        Self { n: 201, nodes: 1024 }
    }
}

impl SliceGrid {
    pub fn coords(&self) -> Vec<f64> {
        let n = self.n.max(2);
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }
}

/// Values on a slice grid, row-major with rows along `x₂` and columns along
/// `x₁`; `None` outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceField {
    pub coords: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl SliceField {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Value at column `i` (`x₁`) and row `j` (`x₂`).
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.n() + i]
    }

    /// Samples `f` at grid points inside the closed domain.
    pub fn from_fn(domain: Domain, grid: &SliceGrid, f: impl Fn(&Vec3) -> f64) -> Self {
        let coords = grid.coords();
        let mut values = Vec::with_capacity(coords.len() * coords.len());
        for &x2 in &coords {
            for &x1 in &coords {
                let x = [x1, x2, 0.0];
                values.push(in_closed_slice(domain, &x).then(|| f(&x)));
            }
        }
        Self { coords, values }
    }

    /// `max |a - b|` over cells defined in both.
    pub fn max_deviation(&self, other: &SliceField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .fold(0.0, f64::max)
    }
}

fn in_closed_slice(domain: Domain, x: &Vec3) -> bool {
    match domain {
        Domain::UnitBall => x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-12,
        Domain::Cube => x[0].abs() <= 1.0 && x[1].abs() <= 1.0,
    }
}

/// Reconstructs `û` on the slice by integrating `∂₂û = -(|σ̂|^{q-2}σ̂)₂` along
/// `x₂`-lines from the lower boundary, where `û = g`, with the composite
/// trapezoid rule on `grid.nodes` intervals per line.
pub fn reconstruct_potential_slice<F: FluxField + ?Sized>(
    model: &F,
    spec: &ProblemSpec,
    grid: &SliceGrid,
) -> Result<SliceField> {
    let coords = grid.coords();
    let n = coords.len();
    let m = grid.nodes.max(1);
    let mut values = vec![None; n * n];
    for (i, &x1) in coords.iter().enumerate() {
        let Some(lo) = spec.domain.slice_lower_x2(x1) else {
            // The line touches the slice in at most one point.
            for (j, &x2) in coords.iter().enumerate() {
                let x = [x1, x2, 0.0];
                if in_closed_slice(spec.domain, &x) {
                    values[j * n + i] = Some(spec.boundary.at(&x));
                }
            }
            continue;
        };
        let hi = -lo;
        let h = (hi - lo) / m as f64;
        let nodes: Vec<Vec3> = (0..=m).map(|k| [x1, lo + h * k as f64, 0.0]).collect();
        let sig = model.flux_many(&nodes);
        let q = spec.exponent.q_values(&nodes)?;
        let d2: Vec<f64> = sig
            .iter()
            .zip(&q)
            .map(|(s, &qk)| -pow_abs(norm(s), qk - 2.0) * s[1])
            .collect();
        let mut cum = vec![0.0; m + 1];
        for k in 0..m {
            cum[k + 1] = cum[k] + 0.5 * h * (d2[k] + d2[k + 1]);
        }
        let anchor = spec.boundary.at(&nodes[0]);
        for (j, &x2) in coords.iter().enumerate() {
            if !in_closed_slice(spec.domain, &[x1, x2, 0.0]) {
                continue;
            }
            let t = ((x2 - lo) / h).clamp(0.0, m as f64);
            let k = (t as usize).min(m - 1);
            let r = t - k as f64;
            // Trapezoid on the partial interval with the linear interpolant.
            let end = d2[k] + r * (d2[k + 1] - d2[k]);
            let partial = 0.5 * r * h * (d2[k] + end);
            values[j * n + i] = Some(anchor + cum[k] + partial);
        }
    }
    Ok(SliceField { coords, values })
}

/// Relative error of the reconstructed potential on the slice: the discrete
/// `L^p` ratio for constant `p`, the unrooted modular ratio otherwise.
pub fn potential_error<F: FluxField + ?Sized>(model: &F, spec: &ProblemSpec, grid: &SliceGrid) -> Result<f64> {
    let exact = spec
        .exact_u
        .as_ref()
        .ok_or_else(|| Error::Undefined("no exact potential for this problem".to_string()))?;
    let approx = reconstruct_potential_slice(model, spec, grid)?;
    let reference = SliceField::from_fn(spec.domain, grid, |x| exact(x));
    let n = approx.n();
    let (mut diffs, mut refs, mut ps) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..n {
        for i in 0..n {
            if let (Some(a), Some(b)) = (approx.get(i, j), reference.get(i, j)) {
                diffs.push((a - b).abs());
                refs.push(b.abs());
                ps.push(spec.exponent.p_at(&[approx.coords[i], approx.coords[j], 0.0]));
            }
        }
    }
    match spec.exponent.constant() {
        // `(Σ|d|^p / Σ|b|^p)^{1/p}` with both sums scaled by their maxima,
        // so large `p` neither underflows nor overflows.
        Some(p) => {
            let (md, sd) = scaled_power_sum(&diffs, p);
            let (mb, sb) = scaled_power_sum(&refs, p);
            if !(mb > 0.0) {
                return Err(Error::Undefined("exact potential vanishes on the slice".to_string()));
            }
            Ok(if md > 0.0 { md / mb * powf(sd / sb, 1.0 / p) } else { 0.0 })
        }
        None => {
            let num: f64 = diffs.iter().zip(&ps).map(|(d, p)| pow_abs(*d, *p)).sum();
            let den: f64 = refs.iter().zip(&ps).map(|(b, p)| pow_abs(*b, *p)).sum();
            if !(den > 0.0) {
                return Err(Error::Undefined("exact potential vanishes on the slice".to_string()));
            }
            Ok(num / den)
        }
    }
}

/// `(m, Σ (v/m)^p)` with `m = max v`.
fn scaled_power_sum(v: &[f64], p: f64) -> (f64, f64) {
    let m = v.iter().copied().fold(0.0, f64::max);
    if !(m > 0.0) {
        return (0.0, 0.0);
    }
    (m, v.iter().map(|x| pow_abs(x / m, p)).sum())
}

/// `d(x, ∂Ω)` on the slice.
pub fn distance_slice(domain: Domain, grid: &SliceGrid) -> SliceField {
    SliceField::from_fn(domain, grid, |x| domain.distance_to_boundary(x).max(0.0))
}

/// Component `k` of a flux field on the slice.
pub fn flux_component_slice<F: FluxField + ?Sized>(model: &F, domain: Domain, grid: &SliceGrid, k: usize) -> SliceField {
    let coords = grid.coords();
    let mut pts = Vec::new();
    let mut idx = Vec::new();
    for (j, &x2) in coords.iter().enumerate() {
        for (i, &x1) in coords.iter().enumerate() {
            let x = [x1, x2, 0.0];
            if in_closed_slice(domain, &x) {
                pts.push(x);
                idx.push(j * coords.len() + i);
            }
        }
    }
    let mut values = vec![None; coords.len() * coords.len()];
    for (v, at) in model.flux_many(&pts).iter().zip(idx) {
        values[at] = Some(v[k]);
    }
    SliceField { coords, values }
}

/// Human-readable name of an error metric column.
pub fn describe(errors: &FluxErrors) -> String {
    match errors.e_sigma {
        Some(es) => format!("e_sigma={es:.3e} e2={:.3e} e1={:.3e}", errors.e2, errors.e1),
        None => format!("e={:.3e} e2={:.3e} e1={:.3e}", errors.e, errors.e2, errors.e1),
    }
}
