//! Configured runs, output files, parameter sweeps and the finite-volume
//! cross-check.

pub mod config;
pub mod godunov;
pub mod output;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::flux_model::{Family, FluxModel};
use crate::front_tracking::{FrontTracker, RunResult, RunStatus, SeriesRow};
use crate::functionals::{fit_decay_rate, monitor_decay, select_parameters, DecayCheck, DecayReport, FunctionalParams};
use crate::linalg::{Mat2, StateVec};
use crate::piecewise::PiecewiseConstant;
use crate::stability::{analyze_matrix, condition12, linear_spectral_check, Condition12, FeedbackAnalysis, LinearCheck, RootScan};

pub use config::{load_config, parse_config, ConfigError, RunConfig};

/// Environment variable that overrides the output root.
pub const OUTPUT_ROOT_VAR: &str = "BVTRACK_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "bvtrack-output";
/// Largest accepted `|K u(L-) - u(0+)|` between events.
pub const BOUNDARY_RESIDUAL_TOL: f64 = 1e-10;
/// `TV*` samples at or below this level are solver dust and are left out of
/// the decay fit.
pub const DECAY_FIT_FLOOR: f64 = 1e-10;

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {source}")]
    Solver {
        stage: &'static str,
        #[source]
        source: Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn at(stage: &'static str) -> impl FnOnce(Error) -> HarnessError {
    move |source| HarnessError::Solver { stage, source }
}

/// The record written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: String,
    pub k: Mat2,
    pub h: f64,
    pub t_final: f64,
    pub status: String,
    pub status_detail: Option<String>,
    pub events: usize,
    pub max_front_count: usize,
    pub params: FunctionalParams,
    /// Least-squares decay rate of `TV*` over the samples above [`DECAY_FIT_FLOOR`].
    pub nu_hat: Option<f64>,
    /// Least-squares decay rate of `J`.
    pub j_rate: Option<f64>,
    pub expected_rate: f64,
    /// `max_t TV*(t) e^{ν̂ t} / TV*(0)` over the same samples.
    pub bv_constant: Option<f64>,
    pub tv_star_initial: f64,
    pub tv_star_final: f64,
    pub violations: usize,
    /// Violations of the inter-event, interior and boundary checks.
    pub violations_by_check: [usize; 3],
    pub interior_skipped: usize,
    pub worst_margin: [Option<f64>; 3],
    pub max_rarefaction_ratio: f64,
    pub max_boundary_residual: f64,
    pub max_gluing_defect: f64,
    pub perturbations: usize,
    pub dropped_strength: f64,
    pub inadmissible_shocks: usize,
    pub monitors_passed: bool,
}

/// Everything produced by one configured run, before anything is written.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: RunConfig,
    pub params: FunctionalParams,
    pub result: RunResult,
    pub report: DecayReport,
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<(f64, PiecewiseConstant)>,
    pub summary: Summary,
    pub runtime: Duration,
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub dir: PathBuf,
    pub events: PathBuf,
    pub series: PathBuf,
    pub snapshots: PathBuf,
    pub summary_path: PathBuf,
    pub summary: Summary,
    pub runtime: Duration,
}

pub fn parameters(config: &RunConfig, model: &FluxModel) -> Result<FunctionalParams, HarnessError> {
    let mut params =
        select_parameters(model, &config.k, config.length, &config.selection_options()).map_err(at("parameter selection"))?;
    config.apply_overrides(&mut params);
    Ok(params)
}

fn summarize(config: &RunConfig, params: &FunctionalParams, result: &RunResult, report: &DecayReport, series: &[SeriesRow]) -> Summary {
    let (status, status_detail) = match &result.status {
        RunStatus::Completed => ("completed", None),
        RunStatus::Steady { t } => ("steady", Some(format!("no pending event after t = {t}"))),
        RunStatus::GuardTripped { reason, .. } => ("guard_tripped", Some(reason.clone())),
    };
    let resolved = || series.iter().filter(|r| r.values.tv_star > DECAY_FIT_FLOOR);
    let nu_hat = fit_decay_rate(resolved().map(|r| (r.values.t, r.values.tv_star)));
    let tv0 = series.first().map_or(0.0, |r| r.values.tv_star);
    let bv_constant = match nu_hat {
        Some(nu) if nu > 0.0 && tv0 > 0.0 => Some(
            resolved()
                .map(|r| r.values.tv_star * (nu * r.values.t).exp() / tv0)
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let mut by_check = [0usize; 3];
    for v in &report.violations {
        by_check[v.check as usize] += 1;
    }
    let guard_ok = !matches!(result.status, RunStatus::GuardTripped { .. });
    let monitors_passed = report.passed()
        && guard_ok
        && result.max_boundary_residual <= BOUNDARY_RESIDUAL_TOL
        && result.inadmissible_shocks == 0;
    Summary {
        model: config.model.clone(),
        k: config.k,
        h: config.h,
        t_final: config.t_final,
        status: status.to_string(),
        status_detail,
        events: result.events.len().saturating_sub(1),
        max_front_count: series.iter().map(|r| r.front_count).max().unwrap_or(0),
        params: params.clone(),
        nu_hat,
        j_rate: report.fitted_rate,
        expected_rate: report.expected_rate,
        bv_constant,
        tv_star_initial: tv0,
        tv_star_final: series.last().map_or(0.0, |r| r.values.tv_star),
        violations: report.violations.len(),
        violations_by_check: by_check,
        interior_skipped: report.interior_skipped,
        worst_margin: report.worst_margin.map(|m| m.is_finite().then_some(m)),
        max_rarefaction_ratio: result.max_rarefaction_ratio,
        max_boundary_residual: result.max_boundary_residual,
        max_gluing_defect: result.max_gluing_defect,
        perturbations: result.perturbations,
        dropped_strength: result.dropped_strength,
        inadmissible_shocks: result.inadmissible_shocks,
        monitors_passed,
    }
}

/// Wall-clock stopwatch; reads zero where the platform has no clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}

/// Selects parameters, tracks fronts to `t_final` and checks the decay.
pub fn simulate(config: &RunConfig) -> Result<Simulation, HarnessError> {
    let start = Stopwatch::start();
    let model = config.flux_model();
    let params = parameters(config, &model)?;
    let u0 = config.initial_state();
    let tracker = FrontTracker::new(&model, config.k, config.length, config.h, params.clone())
        .with_options(config.tracker_options());
    let result = tracker.run(&u0, config.t_final).map_err(at("front tracking"))?;
    let report = monitor_decay(&result.events, Some(result.end_values), &params);
    let mut series = result.series.clone();
    let t_end = result.end_values.t;
    if series.last().is_some_and(|r| t_end > r.values.t) {
        series.push(SeriesRow {
            values: result.end_values,
            max_rarefaction: result.final_state.max_rarefaction(),
            front_count: result.final_state.fronts.len(),
        });
    }
    let snapshots = config
        .snapshot_times()
        .into_iter()
        .filter(|&t| t <= t_end)
        .map(|t| (t, result.trajectory.state_at(t)))
        .collect();
    let summary = summarize(config, &params, &result, &report, &series);
    Ok(Simulation {
        config: config.clone(),
        params,
        result,
        report,
        series,
        snapshots,
        summary,
        runtime: start.elapsed(),
    })
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err)
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `events.csv`, `series.csv`, `snapshots.txt` and `summary.json` into `dir`.
pub fn write_outputs(sim: &Simulation, dir: &Path) -> Result<RunOutputs, HarnessError> {
    create_dir(dir)?;
    let events = dir.join("events.csv");
    let series = dir.join("series.csv");
    let snapshots = dir.join("snapshots.txt");
    let summary_path = dir.join("summary.json");
    write_file(&events, |w| output::write_events(w, &sim.result.events))?;
    write_file(&series, |w| output::write_series(w, &sim.series))?;
    write_file(&snapshots, |w| output::write_snapshots(w, &sim.snapshots))?;
    write_file(&summary_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &sim.summary)?;
        writeln!(w)
    })?;
    Ok(RunOutputs {
        dir: dir.to_path_buf(),
        events,
        series,
        snapshots,
        summary_path,
        summary: sim.summary.clone(),
        runtime: sim.runtime,
    })
}

/// [`simulate`] and [`write_outputs`] into `root/<output.dir>`.
pub fn run_simulation(config: &RunConfig, root: &Path) -> Result<RunOutputs, HarnessError> {
    let sim = simulate(config)?;
    write_outputs(&sim, &root.join(&config.output.dir))
}

/// Godunov reference with `cells` cells at the snapshot times of `config`.
pub fn fv_reference(config: &RunConfig, cells: usize) -> Result<Vec<(f64, PiecewiseConstant)>, HarnessError> {
    let model = config.flux_model();
    godunov::godunov(&model, &config.k, &config.initial_state(), cells, &config.snapshot_times()).map_err(at("finite volumes"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub t: f64,
    pub l1: f64,
    /// `l1 / TV*(0)`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub cells: usize,
    pub h: f64,
    pub tv_star_initial: f64,
    pub rows: Vec<CompareRow>,
}

/// Exact L¹ distances between two sets of snapshots taken at the same times.
pub fn l1_rows(a: &[(f64, PiecewiseConstant)], b: &[(f64, PiecewiseConstant)], scale: f64) -> Vec<CompareRow> {
    a.iter()
        .zip(b)
        .map(|((t, u), (_, v))| {
            let l1 = u.l1_distance(v);
            CompareRow {
                t: *t,
                l1,
                normalized: if scale > 0.0 { l1 / scale } else { l1 },
            }
        })
        .collect()
}

/// Front tracking against Godunov with `cells` cells.
pub fn compare(config: &RunConfig, cells: usize) -> Result<(Simulation, Comparison), HarnessError> {
    let (sim, fv) = rayon::join(|| simulate(config), || fv_reference(config, cells));
    let (sim, fv) = (sim?, fv?);
    let tv0 = sim.summary.tv_star_initial;
    let rows = l1_rows(&sim.snapshots, &fv, tv0);
    let comparison = Comparison {
        cells,
        h: config.h,
        tv_star_initial: tv0,
        rows,
    };
    Ok((sim, comparison))
}

pub fn write_comparison(c: &Comparison, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    write_file(path, |w| {
        writeln!(w, "t,l1,l1_over_tvstar0")?;
        for r in &c.rows {
            writeln!(w, "{},{},{}", r.t, r.l1, r.normalized)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub key: String,
    pub value: f64,
    pub outcome: Result<Summary, String>,
}

/// Runs `template` once per value of `key`, in parallel; rows keep the order
/// of `values`. Each run writes into `root/<output.dir>/<key>=<value>` when
/// `root` is given. Failures are recorded and do not stop the sweep.
pub fn sweep(template: &RunConfig, key: &str, values: &[f64], root: Option<&Path>) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&value| {
            let outcome = template
                .with_value(key, value)
                .map_err(HarnessError::from)
                .and_then(|c| {
                    let sim = simulate(&c)?;
                    if let Some(root) = root {
                        write_outputs(&sim, &root.join(&template.output.dir).join(format!("{key}={value}")))?;
                    }
                    Ok(sim.summary)
                })
                .map_err(|e| e.to_string());
            SweepRow {
                key: key.to_string(),
                value,
                outcome,
            }
        })
        .collect()
}

pub const SWEEP_HEADER: &str =
    "key,value,status,nu_hat,expected_rate,violations,max_rarefaction_ratio,tv_star_final,monitors_passed,error";

pub fn write_sweep<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        match &r.outcome {
            Ok(s) => writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},",
                r.key,
                r.value,
                s.status,
                opt(s.nu_hat),
                s.expected_rate,
                s.violations,
                s.max_rarefaction_ratio,
                s.tv_star_final,
                s.monitors_passed
            )?,
            Err(e) => writeln!(w, "{},{},failed,,,,,,false,\"{}\"", r.key, r.value, e.replace('"', "'"))?,
        }
    }
    Ok(())
}

pub fn write_sweep_file(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    write_file(path, |w| write_sweep(w, rows))
}

/// One `analyze` record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub model: String,
    pub feedback: FeedbackAnalysis,
    pub condition12: Result<Condition12, String>,
    pub lambdas: (f64, f64),
    pub delta: f64,
    pub linear: Result<LinearCheck, String>,
}

/// All ρ values of `k`, the dissipativity condition in the eigen-coordinates
/// of `model` at the origin, and the linear root check with `lambdas`
/// (default: the characteristic speeds of `model` at the origin).
pub fn analyze(k: &Mat2, model: &FluxModel, lambdas: Option<(f64, f64)>, delta: f64) -> Analysis {
    let lambdas = lambdas.unwrap_or_else(|| {
        let at0 = |f| model.lambda(f, StateVec::ZERO).unwrap_or(f64::NAN);
        (at0(Family::One), at0(Family::Two))
    });
    let (feedback, (cond, linear)) = rayon::join(
        || analyze_matrix(k),
        || {
            let cond = condition12(model, k).map_err(|e| e.to_string());
            let linear = linear_spectral_check(lambdas, k, delta, &RootScan::default()).map_err(|e| e.to_string());
            (cond, linear)
        },
    );
    Analysis {
        model: model.name().to_string(),
        feedback,
        condition12: cond,
        lambdas,
        delta,
        linear,
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a11, a12], [a21, a22]] = self.feedback.k.0;
        writeln!(f, "k = [{a11}, {a12}, {a21}, {a22}]")?;
        writeln!(f, "rho_0 = {}", self.feedback.rho0)?;
        writeln!(f, "rho_1 = {}", self.feedback.rho1)?;
        writeln!(f, "rho_2 = {}", self.feedback.rho2)?;
        writeln!(f, "rho_inf = {}", self.feedback.rho_inf)?;
        match &self.condition12 {
            Ok(c) => {
                writeln!(f, "condition12.model = {}", self.model)?;
                writeln!(f, "condition12.satisfied = {}", c.satisfied)?;
                writeln!(f, "condition12.value = {}", c.value)?;
                writeln!(f, "condition12.alpha = {}", c.alpha_star)?;
            }
            Err(e) => writeln!(f, "condition12.error = {e}")?,
        }
        writeln!(f, "linear.lambdas = [{}, {}]", self.lambdas.0, self.lambdas.1)?;
        writeln!(f, "linear.delta = {}", self.delta)?;
        match &self.linear {
            Ok(l) => {
                writeln!(f, "linear.stable = {}", l.stable)?;
                match l.worst_root {
                    Some(z) => writeln!(f, "linear.worst_root = {} {:+}i", z.re, z.im),
                    None => writeln!(f, "linear.worst_root = none"),
                }
            }
            Err(e) => writeln!(f, "linear.error = {e}"),
        }
    }
}

/// Which check a violation belongs to, as written in summaries.
pub fn check_name(c: DecayCheck) -> &'static str {
    match c {
        DecayCheck::InterEvent => "inter_event",
        DecayCheck::Interior => "interior",
        DecayCheck::Boundary => "boundary",
    }
}
