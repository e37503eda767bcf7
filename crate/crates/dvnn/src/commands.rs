use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dvnn_core::bench::{
    distance_slice, example, flux_component_slice, reconstruct_potential_slice, ExampleId, ExampleSpec,
    FluxErrors, SliceField, SliceGrid,
};
use dvnn_core::geometry::SampleSet;
use dvnn_core::networks::FluxField;
use dvnn_core::rng::{stream, Stream};
use dvnn_core::solver::{run_baseline, run_dvnn, Baseline, DvnnRun, RunReport, StageReport};
use dvnn_core::verify::{run_suite, VerifyReport, DEFAULT_EXPONENTS};
use serde::Serialize;
use toml::Value;

use crate::artifacts::{self, ErrorRow};
use crate::config::{resolve, Overrides, RunConfig};
use crate::error::{AppError, AppResult};

fn create_dir(dir: &Path) -> AppResult<()> {
    std::fs::create_dir_all(dir).map_err(AppError::io(dir))
}

#[derive(Serialize)]
struct StageSummary {
    skipped: bool,
    epochs: usize,
    final_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seconds: Option<f64>,
}

impl From<&StageReport> for StageSummary {
    fn from(s: &StageReport) -> Self {
        Self {
            skipped: s.skipped,
            epochs: s.history.len(),
            final_loss: s.final_loss,
            seconds: s.seconds,
        }
    }
}

#[derive(Serialize, Default)]
struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    e_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slice_deviation: Option<f64>,
}

#[derive(Serialize)]
struct Results {
    stage1: StageSummary,
    stage2: StageSummary,
    phi_checksum_start: String,
    phi_checksum_end: String,
    errors: Metrics,
    reference: Metrics,
}

/// Outcome of one solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub run: DvnnRun,
    pub row: ErrorRow,
    pub u_slice: SliceField,
}

fn error_row(label: &str, method: &str, p: Option<f64>, seed: u64, errors: Option<&FluxErrors>) -> ErrorRow {
    ErrorRow {
        example: label.to_string(),
        method: method.to_string(),
        p,
        seed,
        e_sigma: errors.and_then(|e| e.e_sigma),
        e_u: None,
        e: errors.map(|e| e.e),
        e2: errors.map(|e| e.e2),
        e1: errors.map(|e| e.e1),
        slice_deviation: None,
        wall_time: None,
    }
}

fn total_seconds(r: &RunReport) -> Option<f64> {
    Some(r.stage1.seconds? + r.stage2.seconds?)
}

fn write_slices(dir: &Path, ex: &ExampleSpec, model: &dyn FluxField, prefix: &str) -> AppResult<SliceField> {
    let grid = SliceGrid::default();
    let domain = ex.problem.domain;
    let u = reconstruct_potential_slice(model, &ex.problem, &grid)?;
    artifacts::write_slice(&dir.join(format!("{prefix}u_slice.csv")), &u)?;
    for k in 0..3 {
        let s = flux_component_slice(model, domain, &grid, k);
        artifacts::write_slice(&dir.join(format!("{prefix}sigma{}_slice.csv", k + 1)), &s)?;
    }
    Ok(u)
}

/// Trains the configured example and writes every artifact to `out`.
pub fn solve(cfg: &RunConfig, out: &Path) -> AppResult<SolveOutcome> {
    create_dir(out)?;
    let id = cfg.example_id()?;
    let ex = example(id)?;
    let solver = &cfg.solver;
    let run = run_dvnn(&ex.problem, solver)?;
    let report = &run.report;

    artifacts::write_text(&out.join("config.toml"), &cfg.to_toml()?)?;
    artifacts::write_history(&out.join("history_stage1.csv"), &report.stage1.history)?;
    artifacts::write_history(&out.join("history_stage2.csv"), &report.stage2.history)?;
    artifacts::write_trace(&out.join("error_trace.csv"), &report.error_trace)?;
    artifacts::write_checkpoint(&out.join("phi.csv"), &run.model.phi)?;
    artifacts::write_checkpoint(&out.join("psi.csv"), &run.model.psi)?;
    let samples = SampleSet::draw(
        ex.problem.domain,
        solver.sampling.n_interior,
        solver.sampling.n_boundary,
        solver.seed,
    );
    artifacts::write_samples(out, &samples)?;

    let grid = SliceGrid::default();
    let u_slice = write_slices(out, &ex, &run.model, "")?;
    if let Some(u) = &ex.problem.exact_u {
        let exact = SliceField::from_fn(ex.problem.domain, &grid, |x| u(x));
        artifacts::write_slice(&out.join("u_exact_slice.csv"), &exact)?;
    }
    let mut row = error_row(id.label(), "DVNN", id.p(), solver.seed, report.errors.as_ref());
    row.e_u = report.e_u;
    row.wall_time = total_seconds(report);
    if let ExampleId::Torsion(_) = id {
        let d = distance_slice(ex.problem.domain, &grid);
        artifacts::write_slice(&out.join("distance_slice.csv"), &d)?;
        row.slice_deviation = Some(u_slice.max_deviation(&d));
    }
    artifacts::write_errors(&out.join("errors.csv"), std::slice::from_ref(&row))?;

    let results = Results {
        stage1: (&report.stage1).into(),
        stage2: (&report.stage2).into(),
        phi_checksum_start: format!("{:#018x}", report.phi_checksum.0),
        phi_checksum_end: format!("{:#018x}", report.phi_checksum.1),
        errors: Metrics {
            e_sigma: row.e_sigma,
            e_u: row.e_u,
            e: row.e,
            e2: row.e2,
            e1: row.e1,
            slice_deviation: row.slice_deviation,
        },
        reference: Metrics {
            e_sigma: ex.reference.e_sigma,
            e_u: ex.reference.e_u,
            e: ex.reference.e,
            e2: ex.reference.e2,
            e1: ex.reference.e1,
            slice_deviation: None,
        },
    };
    let mut table = cfg.to_table()?;
    let results = Value::try_from(&results).map_err(|e| AppError::usage(format!("cannot encode report: {e}")))?;
    table.insert("results".into(), results);
    let text = toml::to_string_pretty(&table).map_err(|e| AppError::usage(format!("cannot encode report: {e}")))?;
    artifacts::write_text(&out.join("report.toml"), &text)?;
    Ok(SolveOutcome { run, row, u_slice })
}

fn run_dir(out: &Path, id: ExampleId) -> PathBuf {
    match id {
        ExampleId::Torsion(p) => out.join(format!("2_p{p}")),
        _ => out.join(id.label()),
    }
}

/// Runs each example, optionally with the baselines on the same budget,
/// and writes `errors.csv` plus one directory of artifacts per run.
pub fn bench(ids: &[ExampleId], ov: &Overrides, with_baselines: bool, out: &Path) -> AppResult<Vec<ErrorRow>> {
    create_dir(out)?;
    let mut rows = Vec::new();
    for &id in ids {
        let ov = Overrides {
            example: Some(id.label().to_string()),
            p: match id {
                ExampleId::Torsion(p) => Some(p),
                _ => None,
            },
            ..ov.clone()
        };
        let cfg = resolve(None, &ov)?;
        let dir = run_dir(out, id);
        let outcome = solve(&cfg, &dir)?;
        rows.push(outcome.row);
        if !with_baselines {
            continue;
        }
        let ex = example(id)?;
        if !ex.problem.exponent.is_constant() {
            continue;
        }
        for method in Baseline::ALL {
            let b = match run_baseline(method, &ex.problem, &cfg.solver) {
                Ok(b) => b,
                // A diverging baseline is a result, not a failure of the bench.
                Err(e @ dvnn_core::Error::Diverged { .. }) => {
                    eprintln!("{} on example {}: {e}", method.name(), id.label());
                    rows.push(error_row(id.label(), method.name(), id.p(), cfg.solver.seed, None));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let tag = method.name().to_lowercase().replace('-', "_");
            artifacts::write_history(&dir.join(format!("{tag}_history.csv")), &b.history)?;
            write_slices(&dir, &ex, &b.model, &format!("{tag}_"))?;
            let mut row = error_row(id.label(), method.name(), id.p(), cfg.solver.seed, b.errors.as_ref());
            row.wall_time = b.seconds;
            rows.push(row);
        }
    }
    artifacts::write_errors(&out.join("errors.csv"), &rows)?;
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into())
}

/// Fixed-width rendering of an errors table.
pub fn format_table(rows: &[ErrorRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:<7} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "example", "method", "p", "e_sigma", "e_u", "e", "e2", "e1", "slice_dev", "time[s]"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:<7} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9}",
            r.example,
            r.method,
            r.p.map(|p| p.to_string()).unwrap_or_else(|| "p(x)".into()),
            cell(r.e_sigma),
            cell(r.e_u),
            cell(r.e),
            cell(r.e2),
            cell(r.e1),
            cell(r.slice_deviation),
            r.wall_time.map(|t| format!("{t:.1}")).unwrap_or_else(|| "-".into()),
        );
    }
    s
}

/// Whether the torsion rows' slice deviation never increases with `p`.
pub fn torsion_monotone(rows: &[ErrorRow]) -> Option<bool> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.example == "2" && r.method == "DVNN")
        .filter_map(|r| Some((r.p?, r.slice_deviation?)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Some(pts.windows(2).all(|w| w[1].1 <= w[0].1))
}

/// Runs the inequality suite; fails with a verification error if any check
/// is violated.
pub fn verify(n_samples: usize, seed: u64, out: Option<&Path>) -> AppResult<VerifyReport> {
    let report = run_suite(&DEFAULT_EXPONENTS, n_samples, &mut stream(seed, Stream::Verify))?;
    if let Some(dir) = out {
        create_dir(dir)?;
        artifacts::write_text(&dir.join("verify.txt"), &report.to_string())?;
    }
    if report.holds() {
        Ok(report)
    } else {
        Err(AppError::Verification(report.to_string()))
    }
}
