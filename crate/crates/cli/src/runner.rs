//! Experiment orchestration. Each run produces in-memory artifacts (file
//! name plus contents) so output can be compared byte for byte before it
//! touches the disk.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use zeno_core::heom::HeomError;
use zeno_core::infoflow::{self, FlowError};
use zeno_core::linalg::{expectation, DensityMatrix};
use zeno_core::zeno::{self, ZenoError, ZenoScan};

use crate::config::{ConfigError, ExperimentConfig, ModelKind};
use crate::plot::{line_plot, Series};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Convergence(String),
    Solver(String),
    Io(std::io::Error),
}

impl RunError {
    /// 2 config, 3 convergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Convergence(_) => 3,
            RunError::Solver(_) | RunError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "{m}"),
            RunError::Convergence(m) => write!(f, "convergence failure: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ZenoError> for RunError {
    fn from(e: ZenoError) -> Self {
        match e {
            ZenoError::NotConverged { .. } | ZenoError::Heom(HeomError::NotConverged { .. }) => {
                RunError::Convergence(e.to_string())
            }
            other => RunError::Solver(other.to_string()),
        }
    }
}

impl From<FlowError> for RunError {
    fn from(e: FlowError) -> Self {
        RunError::Solver(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

pub type Result<T> = std::result::Result<T, RunError>;

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// `#`-prefixed block with the command and the full config.
pub fn header(cfg: &ExperimentConfig, command: &str, variant: Option<(&str, f64)>) -> String {
    let mut h = format!("# zeno {} {command}\n", env!("CARGO_PKG_VERSION"));
    if let Some((name, value)) = variant {
        let _ = writeln!(h, "# sweep {name} = {}", num(value));
    }
    h.push_str("# config:\n");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(h, "#   {line}");
    }
    h
}

fn file_name(stem: &str, cfg: &ExperimentConfig, index: Option<usize>) -> String {
    match (index, &cfg.sweep) {
        (Some(k), Some(s)) => format!("{stem}_{}_{k}.csv", s.parameter.name()),
        _ => format!("{stem}.csv"),
    }
}

fn require_grid(grid: Option<Vec<f64>>, block: &str) -> Result<Vec<f64>> {
    grid.ok_or_else(|| RunError::Config(format!("this command needs a [{block}] block")))
}

fn sweep_label(cfg: &ExperimentConfig) -> &'static str {
    cfg.sweep.as_ref().map_or("run", |s| s.parameter.name())
}

fn build(cfg: &ExperimentConfig) -> Result<(zeno_core::models::ModelSpec, zeno_core::zeno::BathSpec, zeno_core::linalg::StateVector)> {
    Ok((cfg.model_spec(), cfg.bath_spec().map_err(RunError::Config)?, cfg.initial_state().map_err(RunError::Config)?))
}

/// Runs `f` for every variant, in parallel, keeping sweep order.
fn for_variants<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(usize, Option<f64>, &ExperimentConfig) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let variants = cfg.variants();
    variants.par_iter().enumerate().map(|(k, (v, c))| f(k, *v, c)).collect()
}

/// One Zeno scan per variant.
pub fn zeno_scans(cfg: &ExperimentConfig) -> Result<Vec<(Option<f64>, ZenoScan)>> {
    let grid = require_grid(cfg.tau_grid(), "scan")?;
    for_variants(cfg, |_, v, c| {
        let (model, bath, psi) = build(c)?;
        Ok((v, zeno::scan(&model, &bath, &psi, &grid, &c.solver_settings())?))
    })
}

fn scan_csv(cfg: &ExperimentConfig, variant: Option<f64>, scan: &ZenoScan) -> String {
    let param = cfg.sweep.as_ref().map(|s| s.parameter.name());
    let mut out = header(cfg, "zeno-scan", param.zip(variant));
    out.push_str("tau,survival,gamma,converged_L,converged\n");
    for i in 0..scan.tau_grid.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(scan.tau_grid[i]),
            num(scan.survival[i]),
            num(scan.gamma[i]),
            scan.converged_l[i],
            u8::from(scan.converged[i])
        );
    }
    let taus = |idx: &[usize]| idx.iter().map(|&i| num(scan.tau_grid[i])).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "# maxima_tau: {}", taus(&scan.maxima));
    let _ = writeln!(out, "# minima_tau: {}", taus(&scan.minima));
    match &scan.zeno_time {
        Some(fit) => {
            let _ = writeln!(
                out,
                "# tau_z: {} slope: {} residual: {} window: {}",
                num(fit.tau_z),
                num(fit.slope),
                num(fit.residual),
                fit.window
            );
        }
        None => out.push_str("# tau_z: none (no positive short-time slope)\n"),
    }
    let d = &scan.diagnostics;
    let _ = writeln!(
        out,
        "# structure: trace_drift {} hermitian_residual {} min_eigenvalue {}",
        num(d.max_trace_drift),
        num(d.max_hermitian_residual),
        num(d.min_eigenvalue)
    );
    out
}

pub fn run_zeno_scan(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let scans = zeno_scans(cfg)?;
    let indexed = cfg.sweep.is_some();
    let mut artifacts: Vec<Artifact> = scans
        .iter()
        .enumerate()
        .map(|(k, (v, s))| Artifact {
            name: file_name("zeno_scan", cfg, indexed.then_some(k)),
            contents: scan_csv(cfg, *v, s),
        })
        .collect();
    if indexed {
        let label = sweep_label(cfg);
        let mut summary = header(cfg, "zeno-scan summary", None);
        let _ = writeln!(summary, "{label},tau_z,slope,maxima,minima");
        for (v, s) in &scans {
            let (tz, a) = s.zeno_time.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.tau_z, f.slope));
            let _ = writeln!(summary, "{},{},{},{},{}", num(v.unwrap_or(f64::NAN)), num(tz), num(a), s.maxima.len(), s.minima.len());
        }
        artifacts.push(Artifact { name: "zeno_time_summary.csv".into(), contents: summary });
    }
    if cfg.output.emit_plots {
        let series: Vec<Series> = scans
            .iter()
            .map(|(v, s)| Series {
                label: v.map_or_else(|| "gamma".to_string(), |v| format!("{} = {v}", sweep_label(cfg))),
                points: s.tau_grid.iter().copied().zip(s.gamma.iter().copied()).collect(),
            })
            .collect();
        artifacts.push(Artifact {
            name: "zeno_scan.svg".into(),
            contents: line_plot("Effective decay rate", "tau", "Gamma(tau)", &series),
        });
    }
    Ok(artifacts)
}

pub fn run_zeno_time(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let grid = require_grid(cfg.tau_grid(), "scan")?;
    let rows = for_variants(cfg, |_, v, c| {
        let (model, bath, psi) = build(c)?;
        let s = zeno::scan(&model, &bath, &psi, &grid, &c.solver_settings())?;
        match zeno::zeno_time(&s, c.solver.fit_window) {
            Ok(fit) => {
                if let Some(w) = &fit.warning {
                    log::warn!("{w}");
                }
                Ok((v, fit.tau_z, fit.slope, fit.residual))
            }
            Err(ZenoError::NoZenoRegime { slope }) => {
                log::warn!("no Zeno regime for {v:?}: slope {slope:.3e}");
                Ok((v, f64::NAN, slope, f64::NAN))
            }
            Err(e) => Err(e.into()),
        }
    })?;
    let mut out = header(cfg, "zeno-time", None);
    let _ = writeln!(out, "{},tau_z,slope,residual,window", sweep_label(cfg));
    for (v, tz, a, r) in rows {
        let _ = writeln!(out, "{},{},{},{},{}", num(v.unwrap_or(f64::NAN)), num(tz), num(a), num(r), cfg.solver.fit_window);
    }
    Ok(vec![Artifact { name: "zeno_time.csv".into(), contents: out }])
}

struct DynamicsRun {
    times: Vec<f64>,
    raw_trace: Vec<f64>,
    states: Vec<DensityMatrix>,
    depth: usize,
}

fn dynamics_run(c: &ExperimentConfig) -> Result<DynamicsRun> {
    let times = require_grid(c.time_grid(), "dynamics")?;
    let (model, bath, psi) = build(c)?;
    let rho0 = DensityMatrix::from_pure(&psi);
    let (traj, depth) = zeno::converged_trajectory(&model, &bath, &rho0, &times, &c.solver_settings())?;
    let states = (0..times.len())
        .map(|k| traj.reduced(k).map_err(|e| RunError::from(ZenoError::from(e))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DynamicsRun { raw_trace: traj.states.iter().map(|s| s.trace().re).collect(), times, states, depth })
}

fn reference_state(c: &ExperimentConfig) -> Result<DensityMatrix> {
    let psi = c.initial_state().map_err(RunError::Config)?;
    Ok(DensityMatrix::from_pure(&infoflow::orthogonal_state(&psi)?))
}

pub fn run_dynamics(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let with_distance = cfg.dynamics.is_some_and(|d| d.distance);
    let runs = for_variants(cfg, |_, v, c| Ok((v, dynamics_run(c)?)))?;
    let param = cfg.sweep.as_ref().map(|s| s.parameter.name());
    let indexed = cfg.sweep.is_some();
    runs.iter()
        .enumerate()
        .map(|(k, (v, run))| {
            let c = &cfg.variants()[k].1;
            let model = c.model_spec();
            let dim = model.dim();
            // population operator: σ_z for the qubit, J_z = f/2 for the qutrit
            let scale = if cfg.model.kind == ModelKind::Qutrit { 0.5 } else { 1.0 };
            let pop_name = if cfg.model.kind == ModelKind::Qutrit { "jz" } else { "sz" };
            let reference = if with_distance { Some(reference_state(c)?) } else { None };
            let frame = if with_distance { Some(infoflow::rotating_frame(&model, &run.times, &run.states)?) } else { None };
            let mut out = header(cfg, "dynamics", param.zip(*v));
            let _ = writeln!(out, "# converged_L: {}", run.depth);
            out.push_str("t,");
            out.push_str(pop_name);
            for i in 0..dim {
                for j in i + 1..dim {
                    let _ = write!(out, ",abs_rho_{i}{j}");
                }
            }
            out.push_str(",trace");
            if with_distance {
                out.push_str(",distance");
            }
            out.push('\n');
            for (n, rho) in run.states.iter().enumerate() {
                let pop = scale * expectation(rho, model.coupling()).map_err(|e| RunError::Solver(e.to_string()))?.re;
                let _ = write!(out, "{},{}", num(run.times[n]), num(pop));
                for i in 0..dim {
                    for j in i + 1..dim {
                        let _ = write!(out, ",{}", num(rho.matrix().get(i, j).norm()));
                    }
                }
                let _ = write!(out, ",{}", num(run.raw_trace[n]));
                if let (Some(r), Some(f)) = (&reference, &frame) {
                    let _ = write!(out, ",{}", num(infoflow::trace_distance(&f[n], r)?));
                }
                out.push('\n');
            }
            Ok(Artifact { name: file_name("dynamics", cfg, indexed.then_some(k)), contents: out })
        })
        .collect()
}

pub fn run_infoflow(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let flows = for_variants(cfg, |_, v, c| {
        let run = dynamics_run(c)?;
        let frame = infoflow::rotating_frame(&c.model_spec(), &run.times, &run.states)?;
        Ok((v, infoflow::flow_decomposition(&run.times, &frame, &reference_state(c)?)?))
    })?;
    let param = cfg.sweep.as_ref().map(|s| s.parameter.name());
    let indexed = cfg.sweep.is_some();
    let mut artifacts = Vec::new();
    for (k, (v, f)) in flows.iter().enumerate() {
        let mut out = header(cfg, "infoflow", param.zip(*v));
        out.push_str("t,distance,rate,cum_loss,cum_gain\n");
        for i in 0..f.times.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                num(f.times[i]),
                num(f.distance[i]),
                num(f.rate[i]),
                num(f.cum_loss[i]),
                num(f.cum_gain[i])
            );
        }
        let _ = writeln!(out, "# info_loss: {} info_gain: {}", num(f.info_loss), num(f.info_gain));
        let _ = writeln!(
            out,
            "# identity_residual: {} discretization_bound: {}",
            num(f.identity_residual),
            num(f.discretization_bound)
        );
        artifacts.push(Artifact { name: file_name("infoflow", cfg, indexed.then_some(k)), contents: out });
    }
    if cfg.output.emit_plots {
        let series = flows
            .iter()
            .map(|(v, f)| Series {
                label: v.map_or_else(|| "D".to_string(), |v| format!("{} = {v}", sweep_label(cfg))),
                points: f.times.iter().copied().zip(f.distance.iter().copied()).collect(),
            })
            .collect::<Vec<_>>();
        artifacts.push(Artifact {
            name: "infoflow.svg".into(),
            contents: line_plot("Distance to the orthogonal state", "t", "D", &series),
        });
    }
    Ok(artifacts)
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}
