//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion.
//!
//! Training criteria use the desk budget and take tens of minutes on one
//! core. Criteria listed in `EXPECTED_RED` are reported but do not fail the
//! run; any other failure does.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use dvnn::artifacts::{read_errors, ErrorRow};
use dvnn::commands::{bench, torsion_monotone};
use dvnn::config::Overrides;
use dvnn_core::autodiff::{curl, eval_scalar_jet, eval_vector_jet};
use dvnn_core::bench::{example, ExampleId};
use dvnn_core::geometry::{sample_interior, Domain, SampleSet};
use dvnn_core::losses::{PoissonLoss, SolenoidalLoss};
use dvnn_core::networks::{init_glorot, MlpParams};
use dvnn_core::optim::Objective;
use dvnn_core::rng::{stream, Stream};
use dvnn_core::solver::Preset;
use dvnn_core::verify::{mc_integrate, run_suite, VectorInequality, DEFAULT_EXPONENTS, IDENTITY_TOL};
use dvnn_core::Vec3;
use rand::Rng;

/// Criteria that currently fail at the desk budget.
const EXPECTED_RED: &[u8] = &[5, 6, 7, 10];

const N_NETS: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_net(dims: &[usize], seed: u64) -> MlpParams {
    let mut rng = stream(seed, Stream::Verify);
    let mut net = init_glorot(dims, &mut rng).unwrap();
    for l in 0..net.n_layers() {
        let (_, b) = net.layer_mut(l);
        b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    }
    net
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn shifted(x: &Vec3, k: usize, h: f64) -> Vec3 {
    let mut y = *x;
    y[k] += h;
    y
}

fn param_gradient_error<O: Objective>(obj: &mut O, x: &[f64], h: f64) -> f64 {
    let mut g = vec![0.0; x.len()];
    obj.value_grad(x, &mut g);
    let mut xp = x.to_vec();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let fp = obj.value(&xp);
        xp[k] = x[k] - h;
        let fm = obj.value(&xp);
        xp[k] = x[k];
        let fd = (fp - fm) / (2.0 * h);
        num += (g[k] - fd) * (g[k] - fd);
        den += fd * fd;
    }
    (num / den.max(1e-300)).sqrt()
}

fn autodiff_oracle() -> Outcome {
    let h = 1e-4;
    let pts = sample_interior(Domain::UnitBall, N_NETS, &mut stream(1, Stream::Verify));
    let (mut spatial, mut params) = (0.0f64, 0.0f64);
    let spec = example(ExampleId::SingularBall).unwrap().problem;
    let samples = SampleSet::draw(Domain::UnitBall, 16, 8, 1);
    for (k, x) in pts.iter().enumerate() {
        let net = random_net(&[3, 20, 20, 20, 1], 1000 + k as u64);
        let jet = eval_scalar_jet(&net, x).unwrap();
        let u = |y: &Vec3| eval_scalar_jet(&net, y).unwrap().value;
        let mut lap = 0.0;
        for d in 0..3 {
            let (up, um) = (u(&shifted(x, d, h)), u(&shifted(x, d, -h)));
            spatial = spatial.max(rel(jet.grad[d], (up - um) / (2.0 * h)));
            lap += (up - 2.0 * jet.value + um) / (h * h);
        }
        spatial = spatial.max(rel(jet.laplacian(), lap));

        let mut poisson = PoissonLoss::new(&net, &samples, &spec, 100.0).unwrap();
        params = params.max(param_gradient_error(&mut poisson, net.flat(), 1e-5));
        let psi = random_net(&[3, 20, 20, 20, 3], 2000 + k as u64);
        let mut solenoidal = SolenoidalLoss::new(&psi, &net, &samples, &spec).unwrap();
        params = params.max(param_gradient_error(&mut solenoidal, psi.flat(), 1e-5));
    }
    outcome(
        spatial < 1e-5 && params < 1e-4,
        format!("max spatial rel err {spatial:.2e} (< 1e-5), max parameter rel err {params:.2e} (< 1e-4)"),
    )
}

fn divergence_free() -> Outcome {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for m in 0..N_NETS {
        let psi = random_net(&[3, 20, 20, 20, 3], 3000 + m as u64);
        let pts = sample_interior(Domain::UnitBall, 1000, &mut stream(m as u64, Stream::Verify));
        let c = |y: &Vec3| curl(&eval_vector_jet(&psi, y).unwrap());
        for x in &pts {
            let div: f64 = (0..3)
                .map(|k| (c(&shifted(x, k, h))[k] - c(&shifted(x, k, -h))[k]) / (2.0 * h))
                .sum();
            worst = worst.max(div.abs());
        }
    }
    outcome(worst < 1e-6, format!("max |div curl psi| {worst:.2e} over 100 models x 1000 points (< 1e-6)"))
}

fn desk() -> Overrides {
    Overrides {
        preset: Some(Preset::Desk),
        track_every: Some(250),
        ..Overrides::default()
    }
}

fn run_bench(label: &str, baselines: bool, out: &Path) -> Vec<ErrorRow> {
    let ids = ExampleId::parse(label, None).unwrap();
    let t = Instant::now();
    let rows = bench(&ids, &desk(), baselines, out).unwrap_or_else(|e| panic!("bench {label}: {e}"));
    eprintln!("  bench {label}: {:.0}s", t.elapsed().as_secs_f64());
    rows
}

fn row<'a>(rows: &'a [ErrorRow], method: &str) -> &'a ErrorRow {
    rows.iter().find(|r| r.method == method).unwrap()
}

fn fmt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "n/a".into())
}

fn le(v: Option<f64>, bound: f64) -> bool {
    v.is_some_and(|v| v <= bound)
}

fn singular_ball(rows: &[ErrorRow]) -> Outcome {
    let r = row(rows, "DVNN");
    outcome(
        le(r.e_sigma, 2e-2) && le(r.e_u, 5e-2),
        format!("e_sigma {} (<= 2e-2), e_u {} (<= 5e-2)", fmt(r.e_sigma), fmt(r.e_u)),
    )
}

fn degenerate_ball(out: &Path) -> Outcome {
    let rows = run_bench("1ii", false, out);
    let e = row(&rows, "DVNN").e_sigma;
    outcome(le(e, 1e-3), format!("e_sigma {} (<= 1e-3)", fmt(e)))
}

fn variable_exponent(label: &str, out: &Path) -> Outcome {
    let rows = run_bench(label, false, out);
    let e2 = row(&rows, "DVNN").e2;
    outcome(le(e2, 3e-2), format!("e2 {} (<= 3e-2)", fmt(e2)))
}

fn baseline_contrast(rows: &[ErrorRow]) -> Outcome {
    let d = row(rows, "DVNN").e_sigma;
    let pinn = row(rows, "PINN").e_sigma;
    let mixed = row(rows, "PINN-M").e_sigma;
    // A diverged baseline counts as an infinitely bad one.
    let beats = |b: Option<f64>| d.is_some_and(|d| b.is_none_or(|b| d <= 0.1 * b));
    outcome(
        beats(pinn) && beats(mixed),
        format!("DVNN {} vs PINN {} and PINN-M {} (ratio <= 0.1)", fmt(d), fmt(pinn), fmt(mixed)),
    )
}

fn verify_suite() -> Outcome {
    let report = run_suite(&DEFAULT_EXPONENTS, 100_000, &mut stream(0, Stream::Verify)).unwrap();
    let monotone = report.vectors.iter().all(|v| v.monotone_violations == 0 && v.n_samples >= 100_000);
    let p2 = report.vectors.iter().find(|v| v.p == 2.0).unwrap();
    let p2_dev = p2
        .ranges
        .iter()
        .filter(|r| VectorInequality::ALL.contains(&r.inequality))
        .map(|r| (r.min - 1.0).abs().max((r.max - 1.0).abs()))
        .fold(report.quadratic_deviation, f64::max);
    let constants = report.convexity.iter().all(|c| c.holds()) && report.vectors.iter().all(|v| v.holds());
    let min_lower = report.convexity.iter().map(|c| c.min_lower).fold(f64::INFINITY, f64::min);
    outcome(
        monotone && p2_dev <= IDENTITY_TOL && constants,
        format!(
            "monotone over 1e5 pairs at p in {DEFAULT_EXPONENTS:?}: {monotone}; p=2 deviation {p2_dev:.1e} (<= 1e-12); \
             discrete bounds hold: {constants} (min lower constant {min_lower:.3e})"
        ),
    )
}

fn monte_carlo() -> Outcome {
    let (est, se) = mc_integrate(|x| x[0] * x[0], Domain::UnitBall, 1_000_000, &mut stream(0, Stream::Verify)).unwrap();
    let exact = 4.0 * std::f64::consts::PI / 15.0;
    let err = (est - exact).abs() / exact;
    outcome(err < 0.02, format!("{est:.6} vs {exact:.6}, rel err {err:.2e} (< 2e-2), stderr {se:.1e}"))
}

fn torsion(out: &Path) -> Outcome {
    let rows = run_bench("2", false, out);
    let written = read_errors(&out.join("errors.csv")).map(|r| r.len() == 3).unwrap_or(false);
    let slices = ["2_p2", "2_p10", "2_p200"].iter().all(|d| {
        ["u_slice.csv", "sigma1_slice.csv", "sigma2_slice.csv", "sigma3_slice.csv", "distance_slice.csv"]
            .iter()
            .all(|f| out.join(d).join(f).exists())
    });
    let devs: Vec<String> = rows
        .iter()
        .map(|r| format!("p={}: {}", r.p.unwrap(), fmt(r.slice_deviation)))
        .collect();
    let monotone = torsion_monotone(&rows) == Some(true);
    outcome(
        monotone && slices && written,
        format!("slice deviation {} non-increasing: {monotone}; slice CSVs written: {}", devs.join(", "), slices && written),
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut record = |n: u8, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    record(1, "autodiff matches finite differences", autodiff_oracle());
    record(2, "curl part is divergence free", divergence_free());
    let ball = run_bench("1i", true, &dir("1i"));
    record(3, "example 1i (p = 1.1) at desk budget", singular_ball(&ball));
    record(4, "example 1ii (p = 500) at desk budget", degenerate_ball(&dir("1ii")));
    record(5, "example 3 (piecewise p) at desk budget", variable_exponent("3", &dir("3")));
    record(6, "example 4 (smooth p) at desk budget", variable_exponent("4", &dir("4")));
    record(7, "DVNN beats PINN and PINN-M tenfold on 1i", baseline_contrast(&ball));
    record(8, "inequality suite", verify_suite());
    record(9, "Monte Carlo second moment of the ball", monte_carlo());
    record(10, "torsion slices approach the distance function", torsion(&dir("2")));

    let unexpected: Vec<u8> = results
        .iter()
        .filter(|(n, _, o)| !o.pass && !EXPECTED_RED.contains(n))
        .map(|(n, _, _)| *n)
        .collect();
    let passed = results.iter().filter(|(_, _, o)| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    let red: Vec<u8> = results.iter().filter(|(_, _, o)| !o.pass).map(|(n, _, _)| *n).collect();
    if !red.is_empty() {
        println!("failing: {red:?} (expected: {EXPECTED_RED:?})");
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
