//! Run configuration files.
//!
//! A file has a top-level `preset` and `seed` and the sections `[problem]`,
//! `[network]`, `[sampling]` and `[optimizer]` (with `[optimizer.adam]` and
//! `[optimizer.ssbfgs]`). Every key is optional: values are layered as
//! preset, then the example's default networks, then the file, then
//! command-line flags. The resolved file written next to each run contains
//! every key and reproduces the run.

use std::path::Path;
use std::str::FromStr;

use dvnn_core::bench::{example, ExampleId};
use dvnn_core::solver::{Preset, SolverConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `1i`, `1ii`, `2`, `3` or `4`.
    pub example: String,
    /// Exponent of the torsion problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub example: Option<String>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub lr: Option<f64>,
    pub n_interior: Option<usize>,
    pub n_boundary: Option<usize>,
    pub n_eval: Option<usize>,
    pub stage1_adam: Option<usize>,
    pub stage1_ssbfgs: Option<usize>,
    pub stage2_adam: Option<usize>,
    pub track_every: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut SolverConfig) {
        let o = &mut cfg.optimizer;
        let s = &mut cfg.sampling;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        set(&mut o.lambda, self.lambda);
        set(&mut o.adam.lr, self.lr);
        set(&mut s.n_interior, self.n_interior);
        set(&mut s.n_boundary, self.n_boundary);
        set(&mut s.n_eval, self.n_eval);
        set(&mut o.stage1_adam, self.stage1_adam);
        set(&mut o.stage1_ssbfgs, self.stage1_ssbfgs);
        set(&mut o.stage2_adam, self.stage2_adam);
        set(&mut o.track_every, self.track_every);
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::Desk => "desk",
        Preset::Full => "full",
    }
}

/// The single example a problem section names.
pub fn example_id(problem: &ProblemConfig) -> AppResult<ExampleId> {
    let ids = ExampleId::parse(&problem.example, problem.p)?;
    let id = match ids.as_slice() {
        [id] => *id,
        _ if problem.example == "2" => {
            return Err(AppError::usage("example 2 needs an exponent (`p` in [problem] or --p)"))
        }
        _ => return Err(AppError::usage(format!("`{}` names more than one example", problem.example))),
    };
    if let (Some(p), Some(fixed)) = (problem.p, id.p()) {
        if p != fixed {
            return Err(AppError::usage(format!("example {} has p = {fixed}, not {p}", id.label())));
        }
    }
    Ok(id)
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn to_table<T: Serialize>(v: &T) -> AppResult<Table> {
    Table::try_from(v).map_err(|e| AppError::usage(format!("cannot encode configuration: {e}")))
}

/// Resolves a configuration from optional file contents and flags.
pub fn resolve(file: Option<&str>, ov: &Overrides) -> AppResult<RunConfig> {
    let mut table = match file {
        Some(text) => text
            .parse::<Table>()
            .map_err(|e| AppError::usage(format!("invalid configuration file: {e}")))?,
        None => Table::new(),
    };
    // Run reports embed the configuration next to their results.
    table.remove("results");

    let file_preset = match table.remove("preset") {
        Some(Value::String(s)) => Some(Preset::from_str(&s)?),
        Some(other) => return Err(AppError::usage(format!("preset must be a string, got {other}"))),
        None => None,
    };
    let preset = ov.preset.or(file_preset).unwrap_or(Preset::Full);

    let mut problem: Option<ProblemConfig> = match table.remove("problem") {
        Some(v) => Some(
            v.try_into()
                .map_err(|e| AppError::usage(format!("invalid [problem] section: {e}")))?,
        ),
        None => None,
    };
    if let Some(ex) = &ov.example {
        let keep_p = problem.as_ref().filter(|p| &p.example == ex).and_then(|p| p.p);
        problem = Some(ProblemConfig { example: ex.clone(), p: keep_p });
    }
    let mut problem = problem.ok_or_else(|| AppError::usage("no example given (--example or [problem] example)"))?;
    if ov.p.is_some() {
        problem.p = ov.p;
    }
    let id = example_id(&problem)?;
    if problem.p.is_none() {
        problem.p = matches!(id, ExampleId::Torsion(_)).then(|| id.p()).flatten();
    }

    let mut base = SolverConfig::preset(preset);
    base.network = example(id)?.network;
    let mut merged = to_table(&base)?;
    merge(&mut merged, table);
    let mut solver: SolverConfig = Value::Table(merged)
        .try_into()
        .map_err(|e| AppError::usage(format!("invalid configuration: {e}")))?;
    ov.apply(&mut solver);
    if solver.seed > i64::MAX as u64 {
        return Err(AppError::usage("seed must fit in a signed 64-bit integer"));
    }
    solver.validate()?;
    Ok(RunConfig { preset, problem, solver })
}

pub fn load(path: Option<&Path>, ov: &Overrides) -> AppResult<RunConfig> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(AppError::io(p))?),
        None => None,
    };
    resolve(text.as_deref(), ov)
}

impl RunConfig {
    pub fn example_id(&self) -> AppResult<ExampleId> {
        example_id(&self.problem)
    }

    /// Every key of the resolved configuration.
    pub fn to_table(&self) -> AppResult<Table> {
        let mut t = Table::new();
        t.insert("preset".into(), Value::String(preset_name(self.preset).into()));
        t.insert("problem".into(), Value::Table(to_table(&self.problem)?));
        let mut solver = to_table(&self.solver)?;
        // Keep `seed` ahead of the sections.
        if let Some(seed) = solver.remove("seed") {
            t.insert("seed".into(), seed);
        }
        t.extend(solver);
        Ok(t)
    }

    pub fn to_toml(&self) -> AppResult<String> {
        toml::to_string_pretty(&self.to_table()?).map_err(|e| AppError::usage(format!("cannot encode configuration: {e}")))
    }
}
