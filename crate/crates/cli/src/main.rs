//! `bvtrack`: front-tracking runs, sweeps and feedback analysis.
//!
//! Exit status: 0 when every monitor passed, 1 when a run completed but a
//! monitor failed, 2 on configuration or solver errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bvtrack::harness::{self, load_config, HarnessError, RunConfig, Simulation};
use bvtrack::{FluxModel, Mat2};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bvtrack", version, about = "Wave-front tracking with boundary feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its outputs.
    Simulate { config: PathBuf },
    /// Report the ρ values, the dissipativity condition and the linear root check of K.
    Analyze {
        /// a11,a12,a21,a22
        #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true)]
        k: Mat2,
        /// Characteristic speeds for the root check; default: the model speeds at 0.
        #[arg(long, value_parser = parse_pair)]
        lambdas: Option<(f64, f64)>,
        #[arg(long, default_value = "decoupled_burgers")]
        model: String,
        /// Decay margin: roots with Re z > -delta count as unstable.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Run a configuration once per value of one key (a, h, amplitude or t_final).
    Sweep {
        config: PathBuf,
        /// key=v1,v2,...
        #[arg(long)]
        vary: String,
    },
    /// Compare front tracking with a Godunov reference at the snapshot times.
    Compare {
        config: PathBuf,
        #[arg(long, default_value_t = 512)]
        cells: usize,
    },
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect()
}

fn parse_matrix(s: &str) -> Result<Mat2, String> {
    match parse_list(s)?[..] {
        [a11, a12, a21, a22] => Ok(Mat2::new(a11, a12, a21, a22)),
        _ => Err("expected four comma-separated entries".into()),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err("expected two comma-separated values".into()),
    }
}

fn load(path: &Path) -> Result<RunConfig, HarnessError> {
    Ok(load_config(path)?)
}

fn verdict(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn report(sim: &Simulation) {
    let s = &sim.summary;
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{} k={:?} h={} t_final={}: {} after {} events, max {} fronts",
        s.model, s.k.0, s.h, s.t_final, s.status, s.events, s.max_front_count
    );
    println!(
        "  TV* {:.3e} -> {:.3e}, nu_hat {} (c*gamma = {:.4}), J rate {}",
        s.tv_star_initial,
        s.tv_star_final,
        opt(s.nu_hat),
        s.expected_rate,
        opt(s.j_rate)
    );
    println!(
        "  violations {} {:?}, max rarefaction/h {:.3}, boundary residual {:.1e}, runtime {:.2?}",
        s.violations, s.violations_by_check, s.max_rarefaction_ratio, s.max_boundary_residual, sim.runtime
    );
    println!("  monitors {}", if s.monitors_passed { "passed" } else { "FAILED" });
}

fn run(command: Command) -> Result<ExitCode, HarnessError> {
    let root = harness::output_root();
    match command {
        Command::Simulate { config } => {
            let config = load(&config)?;
            let sim = harness::simulate(&config)?;
            let out = harness::write_outputs(&sim, &root.join(&config.output.dir))?;
            report(&sim);
            println!("  outputs in {}", out.dir.display());
            Ok(verdict(sim.summary.monitors_passed))
        }
        Command::Analyze {
            k,
            lambdas,
            model,
            delta,
        } => {
            let Some(model) = FluxModel::builtin(&model) else {
                eprintln!("unknown model {model:?}; builtin: {:?}", FluxModel::BUILTIN_NAMES);
                return Ok(ExitCode::from(2));
            };
            let analysis = harness::analyze(&k, &model, lambdas, delta);
            print!("{analysis}");
            Ok(if analysis.condition12.is_ok() && analysis.linear.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Sweep { config, vary } => {
            let config = load(&config)?;
            let Some((key, values)) = vary.split_once('=') else {
                eprintln!("--vary expects key=v1,v2,...");
                return Ok(ExitCode::from(2));
            };
            let values = match parse_list(values) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("--vary: {e}");
                    return Ok(ExitCode::from(2));
                }
            };
            let rows = harness::sweep(&config, key, &values, Some(&root));
            let path = root.join(&config.output.dir).join("sweep.csv");
            harness::write_sweep_file(&rows, &path)?;
            harness::write_sweep(std::io::stdout().lock(), &rows).ok();
            println!("table in {}", path.display());
            Ok(verdict(
                rows.iter().all(|r| r.outcome.as_ref().is_ok_and(|s| s.monitors_passed)),
            ))
        }
        Command::Compare { config, cells } => {
            let config = load(&config)?;
            let (sim, cmp) = harness::compare(&config, cells)?;
            let dir = root.join(&config.output.dir);
            harness::write_outputs(&sim, &dir)?;
            let path = dir.join(format!("compare_{cells}.csv"));
            harness::write_comparison(&cmp, &path)?;
            report(&sim);
            println!("  L1 distance to Godunov with {cells} cells (TV*(0) = {:.4e}):", cmp.tv_star_initial);
            for r in &cmp.rows {
                println!("    t={:<8} L1={:.4e} L1/TV*(0)={:.4e}", r.t, r.l1, r.normalized);
            }
            println!("  table in {}", path.display());
            Ok(verdict(sim.summary.monitors_passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
