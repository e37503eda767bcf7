//! The two-stage driver: a Poisson problem for the irrotational potential
//! `φ`, then the convex solenoidal problem for `ψ` with `φ̂` frozen.

use alloc::vec;
use alloc::vec::Vec;

use crate::bench::{self, FluxErrors};
use crate::error::{Error, Result};
use crate::geometry::{sample_interior, SampleSet};
use crate::losses::{DrmLoss, PinnLoss, PinnMLoss, PoissonLoss, ProblemSpec, SolenoidalLoss};
use crate::networks::{init_glorot, FluxField, FluxModel, MlpParams, PrimalFlux, VectorNetFlux};
use crate::optim::{Adam, AdamConfig, Objective, SsBfgs, SsBfgsConfig, SsBfgsStep};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NetworkConfig {
    pub phi: Vec<usize>,
    pub psi: Vec<usize>,
}

impl NetworkConfig {
    pub fn standard() -> Self {
        Self {
            phi: vec![3, 20, 20, 20, 1],
            psi: vec![3, 20, 20, 20, 3],
        }
    }

    /// Five hidden layers for `ψ`, used for large `p`.
    pub fn deep_psi() -> Self {
        Self {
            psi: vec![3, 20, 20, 20, 20, 20, 3],
            ..Self::standard()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SamplingConfig {
    pub n_interior: usize,
    pub n_boundary: usize,
    /// Interior points of the independent evaluation set.
    pub n_eval: usize,
    /// Draw a second training set for stage 2 instead of reusing stage 1's.
    pub stage2_fresh: bool,
    /// Redraw the stage-2 training set every this many epochs (0 = never).
    pub resample_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct OptimizerConfig {
    /// Boundary penalty weight of stage 1 and of the baselines.
    pub lambda: f64,
    pub stage1_adam: usize,
    pub stage1_ssbfgs: usize,
    pub stage2_adam: usize,
    /// Record the flux error every this many stage-2 epochs (0 = off).
    pub track_every: usize,
    pub adam: AdamConfig,
    pub ssbfgs: SsBfgsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

impl core::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(Error::config(alloc::format!("unknown preset `{s}` (expected desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SolverConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub sampling: SamplingConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::preset(Preset::Full)
    }
}

impl SolverConfig {
    pub fn preset(preset: Preset) -> Self {
        let (n_interior, n_boundary, s1_adam, s1_bfgs, s2_adam) = match preset {
            Preset::Desk => (4000, 1000, 1000, 5000, 5000),
            Preset::Full => (10_000, 2000, 1000, 20_000, 10_000),
        };
        Self {
            seed: 0,
            network: NetworkConfig::standard(),
            sampling: SamplingConfig {
                n_interior,
                n_boundary,
                n_eval: 100_000,
                stage2_fresh: false,
                resample_every: 1,
            },
            optimizer: OptimizerConfig {
                lambda: 1.0,
                stage1_adam: s1_adam,
                stage1_ssbfgs: s1_bfgs,
                stage2_adam: s2_adam,
                track_every: 0,
                adam: AdamConfig::default(),
                ssbfgs: SsBfgsConfig::default(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_dims = |name: &str, dims: &[usize], out: usize| {
            if dims.len() < 2 || dims[0] != 3 || *dims.last().unwrap() != out || dims.contains(&0) {
                return Err(Error::config(alloc::format!(
                    "{name} dims must start at 3, end at {out} and have no empty layer"
                )));
            }
            Ok(())
        };
        check_dims("phi", &self.network.phi, 1)?;
        check_dims("psi", &self.network.psi, 3)?;
        let s = &self.sampling;
        if s.n_interior == 0 || s.n_eval < 2 {
            return Err(Error::config("need interior training points and at least 2 evaluation points"));
        }
        let o = &self.optimizer;
        if !(o.lambda > 0.0 && o.lambda.is_finite()) {
            return Err(Error::config("penalty lambda must be positive"));
        }
        let a = &o.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::config("invalid ADAM parameters"));
        }
        let b = &o.ssbfgs;
        if !(b.initial_step > 0.0 && b.c1 > 0.0 && b.c1 < 1.0 && b.shrink > 0.0 && b.shrink < 1.0) {
            return Err(Error::config("invalid SSBFGS line-search parameters"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Phase {
    Adam,
    SsBfgs,
}

/// One optimizer epoch. `loss` and `grad_norm` are taken at the iterate the
/// step started from; `step_size` is the update norm for ADAM and the
/// accepted line-search step for SSBFGS (0 when the search failed).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistoryRow {
    pub epoch: usize,
    pub phase: Phase,
    pub loss: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub net: MlpParams,
    pub history: Vec<HistoryRow>,
    pub skipped: bool,
    pub final_loss: f64,
}

fn norm(v: &[f64]) -> f64 {
    crate::math::sqrt(v.iter().map(|x| x * x).sum())
}

fn diverged(stage: &'static str, step: usize, what: &str, v: f64) -> Error {
    Error::Diverged {
        stage,
        step,
        reason: alloc::format!("{what} is {v}"),
    }
}

/// Consecutive ADAM epochs with a non-finite gradient before giving up.
const MAX_REJECTED: usize = 10;

fn run_adam<O: Objective + ?Sized>(
    obj: &mut O,
    x: &mut [f64],
    cfg: AdamConfig,
    epochs: usize,
    stage: &'static str,
    history: &mut Vec<HistoryRow>,
    before: &mut dyn FnMut(usize, &mut O) -> Result<()>,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<()> {
    let mut adam = Adam::new(cfg, x.len());
    let mut grad = vec![0.0; x.len()];
    let mut rejected = 0;
    for epoch in 0..epochs {
        before(epoch, obj)?;
        let loss = obj.value_grad(x, &mut grad);
        if !loss.is_finite() {
            return Err(diverged(stage, epoch, "loss", loss));
        }
        let step = adam.step(x, &grad);
        if step.is_none() {
            rejected += 1;
            if rejected >= MAX_REJECTED {
                return Err(diverged(stage, epoch, "gradient", f64::NAN));
            }
        } else {
            rejected = 0;
        }
        history.push(HistoryRow {
            epoch: history.len(),
            phase: Phase::Adam,
            loss,
            grad_norm: norm(&grad),
            step_size: step.unwrap_or(0.0),
        });
        observer(epoch + 1, x);
    }
    Ok(())
}

/// Runs SSBFGS until the budget is spent, the gradient vanishes, or two
/// line searches in a row fail (no representable progress left).
fn run_ssbfgs<O: Objective + ?Sized>(
    obj: &mut O,
    x: &mut [f64],
    cfg: SsBfgsConfig,
    epochs: usize,
    stage: &'static str,
    history: &mut Vec<HistoryRow>,
) -> Result<()> {
    let mut opt = SsBfgs::new(cfg, x.len());
    let mut failures = 0;
    if epochs > 0 {
        opt.prime(obj, x);
    }
    for epoch in 0..epochs {
        let (loss, grad_norm) = (opt.value(), norm(opt.grad()));
        if !loss.is_finite() {
            return Err(diverged(stage, epoch, "loss", loss));
        }
        match opt.step(obj, x) {
            SsBfgsStep::Accepted { step_size, .. } => {
                failures = 0;
                history.push(HistoryRow {
                    epoch: history.len(),
                    phase: Phase::SsBfgs,
                    loss,
                    grad_norm,
                    step_size,
                });
            }
            SsBfgsStep::Stationary { .. } => break,
            SsBfgsStep::LineSearchFailed { value, grad_norm } => {
                history.push(HistoryRow {
                    epoch: history.len(),
                    phase: Phase::SsBfgs,
                    loss: value,
                    grad_norm,
                    step_size: 0.0,
                });
                failures += 1;
                if failures >= 2 {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// ADAM then SSBFGS on an arbitrary objective, starting from `x`.
fn adam_then_ssbfgs<O: Objective + ?Sized>(
    obj: &mut O,
    x: &mut [f64],
    opt: &OptimizerConfig,
    adam_epochs: usize,
    bfgs_epochs: usize,
    stage: &'static str,
) -> Result<(Vec<HistoryRow>, f64)> {
    let mut history = Vec::with_capacity(adam_epochs + bfgs_epochs);
    run_adam(obj, x, opt.adam, adam_epochs, stage, &mut history, &mut |_, _| Ok(()), &mut |_, _| {})?;
    run_ssbfgs(obj, x, opt.ssbfgs, bfgs_epochs, stage, &mut history)?;
    let final_loss = obj.value(x);
    if !final_loss.is_finite() {
        return Err(diverged(stage, history.len(), "final loss", final_loss));
    }
    Ok((history, final_loss))
}

/// Stage 1. With `f ≡ 0` the potential is identically zero and training is
/// skipped.
pub fn train_stage1(spec: &ProblemSpec, samples: &SampleSet, cfg: &SolverConfig) -> Result<StageOutput> {
    let dims = &cfg.network.phi;
    if spec.source.is_zero() {
        return Ok(StageOutput {
            net: MlpParams::zeros(dims)?,
            history: Vec::new(),
            skipped: true,
            final_loss: 0.0,
        });
    }
    let net = init_glorot(dims, &mut stream(cfg.seed, Stream::InitPhi))?;
    let mut loss = PoissonLoss::new(&net, samples, spec, cfg.optimizer.lambda)?;
    let mut x = net.into_flat();
    let o = &cfg.optimizer;
    let (history, final_loss) = adam_then_ssbfgs(&mut loss, &mut x, o, o.stage1_adam, o.stage1_ssbfgs, "stage 1")?;
    Ok(StageOutput {
        net: MlpParams::from_flat(dims, x)?,
        history,
        skipped: false,
        final_loss,
    })
}

/// Stage 2: ADAM on the solenoidal loss. `observer` sees `(epoch, ψ)` after
/// every update.
pub fn train_stage2(
    spec: &ProblemSpec,
    phi_hat: &MlpParams,
    samples: &SampleSet,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &MlpParams),
) -> Result<StageOutput> {
    let dims = &cfg.network.psi;
    let net = init_glorot(dims, &mut stream(cfg.seed, Stream::InitPsi))?;
    let mut loss = SolenoidalLoss::new(&net, phi_hat, samples, spec)?;
    let mut x = net.flat().to_vec();
    let mut history = Vec::with_capacity(cfg.optimizer.stage2_adam);
    let mut scratch = net.clone();
    let every = cfg.sampling.resample_every;
    let mut rng = stream(cfg.seed, Stream::EpochResample);
    let (n_int, n_bnd) = (samples.n_interior(), samples.n_boundary());
    run_adam(
        &mut loss,
        &mut x,
        cfg.optimizer.adam,
        cfg.optimizer.stage2_adam,
        "stage 2",
        &mut history,
        &mut |epoch, loss| {
            if every > 0 && epoch > 0 && epoch % every == 0 {
                let fresh = SampleSet::from_rng(spec.domain, n_int, n_bnd, &mut rng);
                *loss = SolenoidalLoss::new(&net, phi_hat, &fresh, spec)?;
            }
            Ok(())
        },
        &mut |epoch, params| {
            scratch.flat_mut().copy_from_slice(params);
            observer(epoch, &scratch);
        },
    )?;
    let final_loss = loss.value(&x);
    if !final_loss.is_finite() {
        return Err(diverged("stage 2", history.len(), "final loss", final_loss));
    }
    Ok(StageOutput {
        net: MlpParams::from_flat(dims, x)?,
        history,
        skipped: false,
        final_loss,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub history: Vec<HistoryRow>,
    pub skipped: bool,
    pub final_loss: f64,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: SolverConfig,
    pub stage1: StageReport,
    pub stage2: StageReport,
    /// Checksums of `φ̂` when stage 2 started and ended.
    pub phi_checksum: (u64, u64),
    /// Errors on the independent evaluation set, when the exact flux is known.
    pub errors: Option<FluxErrors>,
    /// Relative error of the reconstructed potential on the `x₃ = 0` slice.
    pub e_u: Option<f64>,
    /// `(epoch, error)` pairs recorded during stage 2: `e_sigma` for a
    /// constant exponent, `e` otherwise.
    pub error_trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvnnRun {
    pub model: FluxModel,
    pub report: RunReport,
}

#[cfg(feature = "std")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, Option<f64>) {
    let t = std::time::Instant::now();
    let out = f();
    (out, Some(t.elapsed().as_secs_f64()))
}

#[cfg(not(feature = "std"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, Option<f64>) {
    (f(), None)
}

/// Points kept for tracking the error during stage 2.
const TRACK_POINTS: usize = 10_000;

/// The full two-stage method on `spec`.
pub fn run_dvnn(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<DvnnRun> {
    cfg.validate()?;
    let s = &cfg.sampling;
    let samples = SampleSet::draw(spec.domain, s.n_interior, s.n_boundary, cfg.seed);
    let (stage1, t1) = timed(|| train_stage1(spec, &samples, cfg));
    let stage1 = stage1?;

    let stage2_samples = if s.stage2_fresh {
        let mut rng = stream(cfg.seed, Stream::Resample);
        SampleSet::from_rng(spec.domain, s.n_interior, s.n_boundary, &mut rng)
    } else {
        samples
    };
    let eval_points = sample_interior(spec.domain, s.n_eval, &mut stream(cfg.seed, Stream::Evaluation));

    let phi = stage1.net;
    let checksum_before = phi.checksum();
    let mut trace = Vec::new();
    let track = cfg.optimizer.track_every > 0 && spec.exact_flux.is_some();
    let track_pts = &eval_points[..eval_points.len().min(TRACK_POINTS)];
    let (stage2, t2) = timed(|| {
        train_stage2(spec, &phi, &stage2_samples, cfg, &mut |epoch, psi| {
            if track && epoch % cfg.optimizer.track_every == 0 {
                let model = FluxModel {
                    phi: phi.clone(),
                    psi: psi.clone(),
                };
                if let Ok(e) = bench::relative_flux_error(&model, spec, track_pts) {
                    trace.push((epoch, e.e_sigma.unwrap_or(e.e)));
                }
            }
        })
    });
    let stage2 = stage2?;
    let checksum_after = phi.checksum();

    let model = FluxModel::new(phi, stage2.net)?;
    let errors = match spec.exact_flux {
        Some(_) => Some(bench::relative_flux_error(&model, spec, &eval_points)?),
        None => None,
    };
    let e_u = match spec.exact_u {
        Some(_) => Some(bench::potential_error(&model, spec, &bench::SliceGrid::default())?),
        None => None,
    };
    let report = RunReport {
        config: cfg.clone(),
        stage1: StageReport {
            history: stage1.history,
            skipped: stage1.skipped,
            final_loss: stage1.final_loss,
            seconds: t1,
        },
        stage2: StageReport {
            history: stage2.history,
            skipped: false,
            final_loss: stage2.final_loss,
            seconds: t2,
        },
        phi_checksum: (checksum_before, checksum_after),
        errors,
        e_u,
        error_trace: trace,
    };
    Ok(DvnnRun { model, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Baseline {
    Pinn,
    Drm,
    PinnM,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Pinn, Baseline::Drm, Baseline::PinnM];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Pinn => "PINN",
            Baseline::Drm => "DRM",
            Baseline::PinnM => "PINN-M",
        }
    }

    /// Network shapes `(u, σ)` of each method.
    pub fn dims(self) -> (Vec<usize>, Option<Vec<usize>>) {
        match self {
            Baseline::Pinn => (vec![3, 20, 20, 20, 1], None),
            Baseline::Drm => (vec![3, 20, 20, 20, 20, 20, 1], None),
            Baseline::PinnM => (vec![3, 20, 20, 20, 1], Some(vec![3, 20, 20, 20, 3])),
        }
    }
}

impl core::fmt::Display for Baseline {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// A trained primal baseline and its flux.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineModel {
    /// `σ = -|∇u|^{p-2}∇u`
    Primal(PrimalFlux),
    /// `σ` read from the separate flux network.
    Mixed { u: MlpParams, sigma: VectorNetFlux },
}

impl FluxField for BaselineModel {
    fn flux_many(&self, points: &[crate::Vec3]) -> Vec<crate::Vec3> {
        match self {
            BaselineModel::Primal(f) => f.flux_many(points),
            BaselineModel::Mixed { sigma, .. } => sigma.flux_many(points),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub method: Baseline,
    pub model: BaselineModel,
    pub history: Vec<HistoryRow>,
    pub final_loss: f64,
    pub errors: Option<FluxErrors>,
    pub seconds: Option<f64>,
}

/// Trains a baseline on the same samples, seed and total epoch counts as
/// the two-stage run: ADAM for `stage1_adam + stage2_adam` epochs, then
/// SSBFGS for `stage1_ssbfgs` epochs.
pub fn run_baseline(method: Baseline, spec: &ProblemSpec, cfg: &SolverConfig) -> Result<BaselineRun> {
    cfg.validate()?;
    let p = spec
        .exponent
        .constant()
        .ok_or_else(|| Error::config("baselines need a constant exponent p"))?;
    let s = &cfg.sampling;
    let samples = SampleSet::draw(spec.domain, s.n_interior, s.n_boundary, cfg.seed);
    let mut rng = stream(cfg.seed, Stream::Baseline);
    let (u_dims, sigma_dims) = method.dims();
    let u = init_glorot(&u_dims, &mut rng)?;
    let o = &cfg.optimizer;
    let adam = o.stage1_adam + o.stage2_adam;
    let stage = "baseline";
    let (out, seconds) = timed(|| -> Result<_> {
        Ok(match method {
            Baseline::Pinn | Baseline::Drm => {
                let mut x = u.flat().to_vec();
                let (h, l) = if method == Baseline::Pinn {
                    let mut loss = PinnLoss::new(&u, &samples, spec, o.lambda)?;
                    adam_then_ssbfgs(&mut loss, &mut x, o, adam, o.stage1_ssbfgs, stage)?
                } else {
                    let mut loss = DrmLoss::new(&u, &samples, spec, o.lambda)?;
                    adam_then_ssbfgs(&mut loss, &mut x, o, adam, o.stage1_ssbfgs, stage)?
                };
                let u = MlpParams::from_flat(&u_dims, x)?;
                (h, l, BaselineModel::Primal(PrimalFlux { u, p }))
            }
            Baseline::PinnM => {
                let sigma_dims = sigma_dims.expect("mixed method has a flux network");
                let sigma = init_glorot(&sigma_dims, &mut rng)?;
                let mut loss = PinnMLoss::new(&u, &sigma, &samples, spec, o.lambda)?;
                let mut x = u.flat().to_vec();
                x.extend_from_slice(sigma.flat());
                let (h, l) = adam_then_ssbfgs(&mut loss, &mut x, o, adam, o.stage1_ssbfgs, stage)?;
                let (u, sigma) = loss.split(&x);
                (h, l, BaselineModel::Mixed { u, sigma: VectorNetFlux(sigma) })
            }
        })
    });
    let (history, final_loss, model) = out?;
    let errors = match spec.exact_flux {
        Some(_) => {
            let pts = sample_interior(spec.domain, s.n_eval, &mut stream(cfg.seed, Stream::Evaluation));
            Some(bench::relative_flux_error(&model, spec, &pts)?)
        }
        None => None,
    };
    Ok(BaselineRun {
        method,
        model,
        history,
        final_loss,
        errors,
        seconds,
    })
}
