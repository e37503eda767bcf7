//! Self-scaled BFGS (Oren–Luenberger scaling) on a dense inverse Hessian
//! approximation with a backtracking Armijo line search.

use alloc::vec;
use alloc::vec::Vec;

use super::{norm2, Objective};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SsBfgsConfig {
    /// First trial step length of the line search.
    pub initial_step: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub max_halvings: usize,
    /// Times the step may double after the first trial is accepted while
    /// the curvature condition `∇f(x+αd)·d ≥ c₂ ∇f(x)·d` fails.
    pub max_expansions: usize,
    pub c2: f64,
    pub scaling: Scaling,
    /// Updates with `sᵀy` at or below this are skipped.
    pub curvature_eps: f64,
}

impl Default for SsBfgsConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            c1: 1e-4,
            shrink: 0.5,
            max_halvings: 30,
            max_expansions: 10,
            c2: 0.9,
            scaling: Scaling::FirstOnly,
            curvature_eps: 1e-12,
        }
    }
}

/// When `H` is multiplied by `sᵀy / yᵀHy` ahead of the BFGS update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scaling {
    EveryIteration,
    /// Only on the first update after `H` was (re)set to identity.
    FirstOnly,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SsBfgsStep {
    Accepted {
        value: f64,
        step_size: f64,
        grad_norm: f64,
        /// Whether the curvature pair was used to update `H`.
        updated: bool,
    },
    /// The gradient vanished; nothing to do.
    Stationary { value: f64 },
    /// No step satisfied the Armijo condition; `H` was reset to identity.
    LineSearchFailed { value: f64, grad_norm: f64 },
}

#[derive(Debug, Clone)]
pub struct SsBfgs {
    cfg: SsBfgsConfig,
    n: usize,
    /// Inverse Hessian approximation, row-major `n x n`.
    h: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    primed: bool,
    fresh_h: bool,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    dir: Vec<f64>,
    trial: Vec<f64>,
    grad_new: Vec<f64>,
    trial2: Vec<f64>,
    grad2: Vec<f64>,
    y: Vec<f64>,
    hy: Vec<f64>,
}

impl SsBfgs {
    pub fn new(cfg: SsBfgsConfig, n: usize) -> Self {
        let mut s = Self {
            cfg,
            n,
            h: vec![0.0; n * n],
            value: f64::NAN,
            grad: vec![0.0; n],
            primed: false,
            fresh_h: true,
            scratch: Scratch::default(),
        };
        s.reset_h();
        s
    }

    pub fn inverse_hessian(&self) -> &[f64] {
        &self.h
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    fn reset_h(&mut self) {
        self.h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            self.h[i * self.n + i] = 1.0;
        }
        self.fresh_h = true;
    }

    fn matvec(&self, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.h.chunks_exact(self.n).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()));
    }

    /// Evaluates the objective at the starting point unless already done.
    /// [`SsBfgs::step`] calls this itself.
    pub fn prime<O: Objective + ?Sized>(&mut self, obj: &mut O, x: &[f64]) {
        if !self.primed {
            self.value = obj.value_grad(x, &mut self.grad);
            self.primed = true;
        }
    }

    /// Doubles an accepted first step while the curvature condition fails
    /// and the loss keeps dropping. Returns the loss at the final trial.
    fn expand<O: Objective + ?Sized>(
        &self,
        obj: &mut O,
        x: &[f64],
        sc: &mut Scratch,
        alpha: &mut f64,
        mut f: f64,
        slope: f64,
    ) -> f64 {
        sc.grad2.resize(self.n, 0.0);
        for _ in 0..self.cfg.max_expansions {
            let dg: f64 = sc.grad_new.iter().zip(&sc.dir).map(|(g, d)| g * d).sum();
            if dg >= self.cfg.c2 * slope {
                break;
            }
            let a2 = 2.0 * *alpha;
            sc.trial2.clear();
            sc.trial2.extend(x.iter().zip(&sc.dir).map(|(xi, di)| xi + a2 * di));
            let f2 = obj.value_grad(&sc.trial2, &mut sc.grad2);
            if !(f2.is_finite() && f2 < f && f2 <= self.value + self.cfg.c1 * a2 * slope) {
                break;
            }
            core::mem::swap(&mut sc.trial, &mut sc.trial2);
            core::mem::swap(&mut sc.grad_new, &mut sc.grad2);
            *alpha = a2;
            f = f2;
        }
        f
    }

    /// One quasi-Newton iteration from `x` (updated in place on success).
    pub fn step<O: Objective + ?Sized>(&mut self, obj: &mut O, x: &mut [f64]) -> SsBfgsStep {
        assert_eq!(x.len(), self.n);
        self.prime(obj, x);
        let grad_norm = norm2(&self.grad);
        if grad_norm == 0.0 {
            return SsBfgsStep::Stationary { value: self.value };
        }

        let mut sc = core::mem::take(&mut self.scratch);
        self.matvec(&self.grad, &mut sc.dir);
        sc.dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope: f64 = sc.dir.iter().zip(&self.grad).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            // H lost positive definiteness: fall back to steepest descent.
            self.reset_h();
            sc.dir.clear();
            sc.dir.extend(self.grad.iter().map(|g| -g));
            slope = -grad_norm * grad_norm;
        }

        sc.grad_new.resize(self.n, 0.0);
        let mut alpha = self.cfg.initial_step;
        let mut accepted = None;
        for k in 0..=self.cfg.max_halvings {
            sc.trial.clear();
            sc.trial.extend(x.iter().zip(&sc.dir).map(|(xi, di)| xi + alpha * di));
            // The first trial usually succeeds, so it computes the gradient too.
            let f = if k == 0 {
                obj.value_grad(&sc.trial, &mut sc.grad_new)
            } else {
                obj.value(&sc.trial)
            };
            if f.is_finite() && f <= self.value + self.cfg.c1 * alpha * slope {
                if k > 0 {
                    obj.value_grad(&sc.trial, &mut sc.grad_new);
                    accepted = Some(f);
                } else {
                    accepted = Some(self.expand(obj, x, &mut sc, &mut alpha, f, slope));
                }
                break;
            }
            alpha *= self.cfg.shrink;
        }

        let Some(f_new) = accepted else {
            self.reset_h();
            self.scratch = sc;
            return SsBfgsStep::LineSearchFailed {
                value: self.value,
                grad_norm,
            };
        };

        // s = alpha * dir, y = g_new - g
        sc.y.clear();
        sc.y.extend(sc.grad_new.iter().zip(&self.grad).map(|(a, b)| a - b));
        let sy: f64 = alpha * sc.dir.iter().zip(&sc.y).map(|(d, y)| d * y).sum::<f64>();
        let mut updated = false;
        if sy > self.cfg.curvature_eps {
            self.matvec(&sc.y, &mut sc.hy);
            let mut yhy: f64 = sc.y.iter().zip(&sc.hy).map(|(a, b)| a * b).sum();
            if yhy > 0.0 {
                let scale = match self.cfg.scaling {
                    Scaling::EveryIteration => true,
                    Scaling::FirstOnly => self.fresh_h,
                    Scaling::Off => false,
                };
                if scale {
                    let gamma = sy / yhy;
                    self.h.iter_mut().for_each(|v| *v *= gamma);
                    sc.hy.iter_mut().for_each(|v| *v *= gamma);
                    yhy *= gamma;
                }
                // H <- (I - rho s yᵀ) H (I - rho y sᵀ) + rho s sᵀ
                let rho = 1.0 / sy;
                let coef = rho * rho * yhy + rho;
                let n = self.n;
                for i in 0..n {
                    let si = alpha * sc.dir[i];
                    let hyi = sc.hy[i];
                    let row = &mut self.h[i * n..(i + 1) * n];
                    for j in 0..n {
                        let sj = alpha * sc.dir[j];
                        row[j] += -rho * (si * sc.hy[j] + hyi * sj) + coef * si * sj;
                    }
                }
                updated = true;
                self.fresh_h = false;
            }
        }

        x.copy_from_slice(&sc.trial);
        self.value = f_new;
        core::mem::swap(&mut self.grad, &mut sc.grad_new);
        self.scratch = sc;
        SsBfgsStep::Accepted {
            value: f_new,
            step_size: alpha,
            grad_norm: norm2(&self.grad),
            updated,
        }
    }
}
