use std::path::Path;
use std::process::{Command, Output};

use dvnn::artifacts::{read_checkpoint, read_errors, read_slice};

const TINY: [&str; 14] = [
    "--preset",
    "desk",
    "--n-interior",
    "64",
    "--n-boundary",
    "32",
    "--n-eval",
    "500",
    "--stage1-adam",
    "4",
    "--stage1-ssbfgs",
    "3",
    "--stage2-adam",
    "4",
];

fn dvnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvnn")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn solve(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["solve", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    dvnn(&args)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&dvnn(&["--help"])), 0);
    assert_eq!(code(&dvnn(&[])), 1);
    assert_eq!(code(&dvnn(&["solve", "--example", "1i"])), 1);
    assert_eq!(code(&dvnn(&["frobnicate"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), &["--example", "9"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown example"));
    assert_eq!(code(&solve(dir.path(), &["--example", "1i", "--preset", "huge"])), 1);
    assert_eq!(code(&solve(dir.path(), &["--example", "1i", "--config", "/nonexistent.toml"])), 1);
}

#[test]
fn verify_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = dvnn(&["verify", "--samples", "2000", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for p in ["1.1", "1.5", "2", "3", "10", "500"] {
        assert!(text.contains(&format!("p = {p}:")), "{text}");
    }
    assert!(text.contains("constant"));
    assert!(!text.contains("FAIL"));
    assert_eq!(std::fs::read_to_string(dir.path().join("verify.txt")).unwrap(), text);
}

#[test]
fn solve_writes_artifacts_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let mut args = vec!["--example", "1i", "--seed", "7"];
    args.extend_from_slice(&TINY);
    let o = solve(&a, &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("e_sigma="));
    for f in [
        "config.toml",
        "report.toml",
        "history_stage1.csv",
        "history_stage2.csv",
        "error_trace.csv",
        "phi.csv",
        "psi.csv",
        "interior.csv",
        "boundary.csv",
        "u_slice.csv",
        "u_exact_slice.csv",
        "sigma1_slice.csv",
        "errors.csv",
    ] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    let report = std::fs::read_to_string(a.join("report.toml")).unwrap();
    assert!(report.contains("seed = 7"));
    assert!(report.contains("e_sigma = "));
    assert!(report.contains("[results.reference]"));
    let u = read_slice(&a.join("u_slice.csv")).unwrap();
    assert_eq!(u.n(), 201);
    assert_eq!(read_checkpoint(&a.join("psi.csv")).unwrap().dims(), &[3, 20, 20, 20, 3]);

    // Re-running the echoed configuration reproduces the run bitwise.
    let b = dir.path().join("b");
    let o = solve(&b, &["--config", a.join("config.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let strip = |p: &Path| {
        let mut rows = read_errors(&p.join("errors.csv")).unwrap();
        rows.iter_mut().for_each(|r| r.wall_time = None);
        rows
    };
    assert_eq!(strip(&a), strip(&b));
    for f in ["phi.csv", "psi.csv", "history_stage2.csv", "u_slice.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn degenerate_example_uses_deep_psi() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--example", "1ii", "--p", "500"];
    args.extend_from_slice(&TINY);
    let o = solve(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let psi = read_checkpoint(&dir.path().join("psi.csv")).unwrap();
    assert_eq!(psi.dims(), &[3, 20, 20, 20, 20, 20, 3]);
    let config = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(config.contains("psi = ["));
}

#[test]
fn bench_variable_exponent_reports_modular_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["bench", "3", "--out-dir", dir.path().to_str().unwrap()];
    args.extend_from_slice(&TINY);
    let o = dvnn(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_errors(&dir.path().join("errors.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!((r.example.as_str(), r.method.as_str()), ("3", "DVNN"));
    assert!(r.e_sigma.is_none() && r.p.is_none());
    assert!(r.e.is_some() && r.e2.is_some() && r.e1.is_some());
    assert!(dir.path().join("3").join("report.toml").exists());
}

#[test]
fn bench_with_baselines_and_torsion_slices() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["bench", "1i", "2", "--with-baselines", "--out-dir", dir.path().to_str().unwrap()];
    args.extend_from_slice(&TINY);
    let o = dvnn(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_errors(&dir.path().join("errors.csv")).unwrap();
    let methods: Vec<(&str, &str)> = rows.iter().map(|r| (r.example.as_str(), r.method.as_str())).collect();
    assert_eq!(
        methods,
        [
            ("1i", "DVNN"),
            ("1i", "PINN"),
            ("1i", "DRM"),
            ("1i", "PINN-M"),
            ("2", "DVNN"),
            ("2", "PINN"),
            ("2", "DRM"),
            ("2", "PINN-M"),
            ("2", "DVNN"),
            ("2", "PINN"),
            ("2", "DRM"),
            ("2", "PINN-M"),
            ("2", "DVNN"),
            ("2", "PINN"),
            ("2", "DRM"),
            ("2", "PINN-M"),
        ]
    );
    assert!(rows[1].e_sigma.is_some());
    for p in ["2", "10", "200"] {
        let d = dir.path().join(format!("2_p{p}"));
        assert!(d.join("distance_slice.csv").exists());
        assert!(d.join("pinn_u_slice.csv").exists());
    }
    let torsion: Vec<_> = rows.iter().filter(|r| r.example == "2" && r.method == "DVNN").collect();
    assert!(torsion.iter().all(|r| r.slice_deviation.is_some()));
    assert!(stdout(&o).contains("torsion: slice deviation"));
}
