//! Command-line front end: `models`, `run`, `verify`, `converge`, `entropy`.
//!
//! Exit codes: 0 on success, 1 when a verification verdict fails, 2 on
//! configuration, I/O, or solver errors.

use std::error::Error;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zeroflux::config::{load_config, RunConfig};
use zeroflux::entropy::ToleranceOverrides;
use zeroflux::io::{
    atomic_write_text, render_residual_table, read_trajectory, write_residual_reports,
    write_trajectory, RunMetadata,
};
use zeroflux::model::builtin_catalog;
use zeroflux::solver::run;
use zeroflux::verify::{
    convergence_study, default_suite, entropy_report, run_all, run_criterion, OracleKind,
};

#[derive(Parser)]
#[command(
    name = "zeroflux",
    version,
    about = "Finite-volume solver and verification harness for degenerate \
             convection–diffusion equations with zero-flux boundaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in models and their tunable parameters.
    Models,
    /// Solve the configured problem and write a run directory
    /// (snapshot CSVs, steps.csv, run.meta).
    Run {
        /// Configuration file (dotted key = value format).
        config: PathBuf,
        /// Output directory (overrides output.dir from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute the verification suite; without a config, the shipped
    /// default suite.
    Verify {
        /// Optional configuration file with suite.* overrides.
        config: Option<PathBuf>,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Run a single numbered acceptance criterion (1..=10) instead.
        #[arg(long)]
        criterion: Option<usize>,
    },
    /// Grid-refinement convergence study for the configured problem.
    Converge {
        config: PathBuf,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate the entropy and boundary residual functionals on an
    /// existing run directory; writes residuals.csv inside it.
    Entropy {
        run_dir: PathBuf,
        /// Number of Kruzhkov levels on [0, M].
        #[arg(long, default_value_t = 21)]
        k_count: usize,
        /// Residual CSV destination (default: <run_dir>/residuals.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn read_config(path: &PathBuf) -> Result<RunConfig, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    Ok(load_config(&text)?)
}

fn dispatch(command: Command) -> Result<bool, Box<dyn Error>> {
    match command {
        Command::Models => {
            for (name, description, params) in builtin_catalog() {
                println!("{name}");
                println!("    {description}");
                for (key, default, what) in params {
                    println!("    model.param.{key} = {default}  ({what})");
                }
            }
            Ok(true)
        }
        Command::Run { config, out } => {
            let cfg = read_config(&config)?;
            let problem = cfg.problem()?;
            let grid = cfg.grid()?;
            let traj = run(&problem, &grid, &cfg.solver_config())?;
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.model_name));
            let meta = RunMetadata {
                model_name: cfg.model_name.clone(),
                model_params: cfg.model_params.clone(),
            };
            let paths = write_trajectory(&out_dir, &traj, &meta)?;
            let last = traj.step_log.last();
            println!(
                "wrote {} snapshots, steps.csv, run.meta to {}",
                paths.len(),
                out_dir.display()
            );
            if let Some(rec) = last {
                println!(
                    "final state: t = {:.6}, steps = {}, range [{:.6e}, {:.6e}], mass {:.12e}",
                    rec.t, rec.step, rec.min, rec.max, rec.mass
                );
            }
            Ok(true)
        }
        Command::Verify {
            config,
            csv,
            criterion,
        } => {
            if let Some(index) = criterion {
                let check = run_criterion(index)?;
                println!("{}", check.one_line());
                if !check.details.is_empty() {
                    println!("    {}", check.details);
                }
                return Ok(check.passed);
            }
            let suite = match config {
                Some(path) => read_config(&path)?.suite_config()?,
                None => default_suite()?,
            };
            let report = run_all(&suite)?;
            print!("{}", report.render_text());
            if let Some(path) = csv {
                atomic_write_text(&path, &report.render_csv())?;
                println!("report written to {}", path.display());
            }
            Ok(report.all_passed())
        }
        Command::Converge { config, csv } => {
            let cfg = read_config(&config)?;
            let problem = cfg.problem()?;
            // Analytic oracle for the pure-diffusion model, self-refinement
            // otherwise; a suite.oracle line overrides either default.
            let oracle = cfg.suite.oracle.unwrap_or(if cfg.model_name == "heat" {
                OracleKind::Heat
            } else {
                OracleKind::SelfRefinement
            });
            let (levels, threshold) = match oracle {
                OracleKind::SelfRefinement => (
                    cfg.suite
                        .self_refinement_levels
                        .clone()
                        .unwrap_or_else(|| vec![100, 200, 400]),
                    0.5,
                ),
                _ => (
                    cfg.suite
                        .refinement_levels
                        .clone()
                        .unwrap_or_else(|| vec![50, 100, 200]),
                    0.9,
                ),
            };
            let report = convergence_study(
                &problem,
                &cfg.solver_config(),
                &levels,
                oracle,
                threshold,
                "convergence",
            )?;
            print!("{}", report.render_text());
            if let Some(path) = csv {
                atomic_write_text(&path, &report.render_csv())?;
                println!("report written to {}", path.display());
            }
            Ok(report.all_passed())
        }
        Command::Entropy {
            run_dir,
            k_count,
            out,
        } => {
            let traj = read_trajectory(&run_dir)?;
            let reports = entropy_report(&traj, k_count, &ToleranceOverrides::default())?;
            let out_path = out.unwrap_or_else(|| run_dir.join("residuals.csv"));
            write_residual_reports(&out_path, &reports)?;
            print!("{}", render_residual_table(&reports));
            let passed = reports.iter().filter(|r| r.passed()).count();
            let all = passed == reports.len();
            println!(
                "entropy: {} ({passed} of {} functionals), residuals in {}",
                if all { "PASS" } else { "FAIL" },
                reports.len(),
                out_path.display()
            );
            Ok(all)
        }
    }
}
