use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dvnn::commands;
use dvnn::config::{load, Overrides};
use dvnn::{AppError, AppResult};
use dvnn_core::bench::{describe, ExampleId};
use dvnn_core::solver::Preset;

/// Dual variational neural network solver for p-Laplace problems.
#[derive(Parser)]
#[command(name = "dvnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one problem and write its report, histories and slices.
    Solve {
        /// Configuration file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Example: 1i, 1ii, 2, 3 or 4.
        #[arg(long)]
        example: Option<String>,
        /// Exponent of the torsion problem (example 2).
        #[arg(long)]
        p: Option<f64>,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run benchmark examples and print the errors table.
    Bench {
        /// Examples to run (1i, 1ii, 2, 3, 4 or all).
        #[arg(default_value = "all")]
        examples: Vec<String>,
        /// Also train PINN, DRM and PINN-M on the same budget.
        #[arg(long)]
        with_baselines: bool,
        #[command(flatten)]
        budget: Budget,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Check the vector and convexity inequalities.
    Verify {
        /// Random pairs per exponent.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Budget {
    /// desk or full.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Boundary penalty weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// ADAM learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    n_interior: Option<usize>,
    #[arg(long)]
    n_boundary: Option<usize>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    stage1_adam: Option<usize>,
    #[arg(long)]
    stage1_ssbfgs: Option<usize>,
    #[arg(long)]
    stage2_adam: Option<usize>,
    /// Record the flux error every this many stage-2 epochs.
    #[arg(long)]
    track_every: Option<usize>,
}

impl Budget {
    fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset,
            seed: self.seed,
            lambda: self.lambda,
            lr: self.lr,
            n_interior: self.n_interior,
            n_boundary: self.n_boundary,
            n_eval: self.n_eval,
            stage1_adam: self.stage1_adam,
            stage1_ssbfgs: self.stage1_ssbfgs,
            stage2_adam: self.stage2_adam,
            track_every: self.track_every,
            ..Overrides::default()
        }
    }
}

fn run(cmd: Command) -> AppResult<()> {
    match cmd {
        Command::Solve { config, example, p, budget, out_dir } => {
            let ov = Overrides { example, p, ..budget.overrides() };
            let cfg = load(config.as_deref(), &ov)?;
            let out = commands::solve(&cfg, &out_dir)?;
            let r = &out.run.report;
            println!(
                "example {} seed {}: stage 1 loss {:.4e}{}, stage 2 loss {:.6e}",
                out.row.example,
                cfg.solver.seed,
                r.stage1.final_loss,
                if r.stage1.skipped { " (skipped)" } else { "" },
                r.stage2.final_loss
            );
            if let Some(e) = &r.errors {
                println!("{}", describe(e));
            }
            if let Some(e) = r.e_u {
                println!("e_u={e:.3e}");
            }
            if let Some(d) = out.row.slice_deviation {
                println!("slice deviation from d(x, boundary) {d:.3e}");
            }
            println!("artifacts in {}", out_dir.display());
        }
        Command::Bench { examples, with_baselines, budget, out_dir } => {
            let mut ids = Vec::new();
            for label in &examples {
                ids.extend(ExampleId::parse(label, None)?);
            }
            let ov = Overrides {
                preset: Some(budget.preset.unwrap_or(Preset::Desk)),
                ..budget.overrides()
            };
            let rows = commands::bench(&ids, &ov, with_baselines, &out_dir)?;
            print!("{}", commands::format_table(&rows));
            match commands::torsion_monotone(&rows) {
                Some(true) => println!("torsion: slice deviation non-increasing in p"),
                Some(false) => println!("torsion: slice deviation increases with p somewhere"),
                None => {}
            }
        }
        Command::Verify { samples, seed, out_dir } => {
            let report = commands::verify(samples, seed, out_dir.as_deref())?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if let AppError::Usage(_) = e {
                eprintln!("run `dvnn --help` for usage");
            }
            ExitCode::from(code as u8)
        }
    }
}
