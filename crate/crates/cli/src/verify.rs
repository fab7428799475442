//! Acceptance checks. Each criterion builds its own configurations, runs
//! them and compares against an independent reference (closed-form kernels,
//! quadrature) or a structural property. Structure diagnostics from every
//! hierarchy run feed criterion 8.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use zeno_core::bath::{SpectralDensity, Temperature};
use zeno_core::heom::{LinkConvention, StructureDiagnostics};
use zeno_core::infoflow;
use zeno_core::linalg::{DensityMatrix, StateVector};
use zeno_core::models::{biased_qubit, biased_qutrit, su2_coherent_state, ModelSpec};
use zeno_core::numeric::POLICY;
use zeno_core::oracle::{short_time_zeno_time, DephasingKernel};
use zeno_core::zeno::{self, fit_zeno_time, tau_grid, BathSpec, SolverSettings};

use crate::config::parse_config;
use crate::runner::run_zeno_scan;

/// Configs shipped with the tool, embedded so verification needs no files.
pub const SHIPPED_CONFIGS: [(&str, &str); 9] = [
    ("dephasing_qubit", include_str!("../configs/dephasing_qubit.toml")),
    ("dephasing_qubit_sweep", include_str!("../configs/dephasing_qubit_sweep.toml")),
    ("biased_qubit_peaks", include_str!("../configs/biased_qubit_peaks.toml")),
    ("dephasing_qutrit", include_str!("../configs/dephasing_qutrit.toml")),
    ("biased_qutrit_resonant", include_str!("../configs/biased_qutrit_resonant.toml")),
    ("thermal_qubit", include_str!("../configs/thermal_qubit.toml")),
    ("thermal_qutrit", include_str!("../configs/thermal_qutrit.toml")),
    ("resonant_dynamics", include_str!("../configs/resonant_dynamics.toml")),
    ("infoflow", include_str!("../configs/infoflow.toml")),
];

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "dephasing qubit matches the exact rate"),
    (2, "dark state does not decay"),
    (3, "dephasing qutrit matches the exact rate with one peak"),
    (4, "Zeno time scales as (gamma0 lambda)^-1/2"),
    (5, "biased qubit shows several peaks"),
    (6, "short-time slope larger for the wide bath"),
    (7, "short-time slope grows with temperature"),
    (8, "structure preserved on every run"),
    (9, "memoryless coherence decay at 2 gamma0"),
    (10, "information-flow identity and backflow"),
    (11, "bath decomposition matches quadrature"),
    (12, "scan output independent of thread count"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Link convention for every zero-temperature hierarchy; a mutant here
    /// must make the oracle criteria fail.
    pub convention: LinkConvention,
    pub l_max: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { convention: LinkConvention::Derived, l_max: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: Vec<(String, f64)>,
    pub detail: String,
    pub seconds: f64,
    pub diagnostics: Option<StructureDiagnostics>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        let measured: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        format!(
            "criterion {:>2} {}: {} [{}] {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            measured.join(", "),
            self.detail,
            self.seconds
        )
    }

    pub fn to_json(&self) -> Value {
        let measured: serde_json::Map<String, Value> =
            self.measured.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        json!({
            "id": self.id,
            "name": self.name,
            "passed": self.passed,
            "measured": measured,
            "detail": self.detail,
            "seconds": self.seconds,
        })
    }
}

struct Outcome {
    passed: bool,
    measured: Vec<(String, f64)>,
    detail: String,
    diagnostics: StructureDiagnostics,
}

impl Outcome {
    fn new() -> Self {
        Self { passed: true, measured: Vec::new(), detail: String::new(), diagnostics: StructureDiagnostics::default() }
    }

    fn record(&mut self, key: impl Into<String>, value: f64) {
        self.measured.push((key.into(), value));
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.passed = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&what.into());
        }
    }
}

type Check = Result<Outcome, String>;

fn settings(opts: &VerifyOptions, conv_tol: f64) -> SolverSettings {
    let mut s = SolverSettings { conv_tol, ..SolverSettings::default() };
    if let Some(l) = opts.l_max {
        s.l_max = l;
        s.l_start = s.l_start.min(l);
    }
    s
}

fn lorentz(opts: &VerifyOptions, gamma0: f64, lambda: f64, omega0: f64) -> Result<(SpectralDensity, BathSpec), String> {
    let j = SpectralDensity::lorentzian(gamma0, lambda, omega0).map_err(|e| e.to_string())?;
    Ok((j, BathSpec::ZeroTemperature { spectrum: j, convention: opts.convention }))
}

fn plus() -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::new(vec![C64::new(s, 0.0), C64::new(s, 0.0)]).expect("unit vector")
}

fn scan(
    model: &ModelSpec,
    bath: &BathSpec,
    psi: &StateVector,
    grid: &[f64],
    s: &SolverSettings,
    out: &mut Outcome,
) -> Result<zeno::ZenoScan, String> {
    let r = zeno::scan(model, bath, psi, grid, s).map_err(|e| e.to_string())?;
    out.diagnostics.merge(&r.diagnostics);
    Ok(r)
}

fn criterion_1(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let grid = tau_grid(0.05, 40.0, 50, false).map_err(|e| e.to_string())?;
    let model = biased_qubit(1.0, 0.0);
    for lambda in [0.05, 0.5, 5.0] {
        let (j, bath) = lorentz(opts, 0.5, lambda, 0.0)?;
        let r = scan(&model, &bath, &plus(), &grid, &settings(opts, 1e-4), &mut out)?;
        let kernel = DephasingKernel::new(j);
        let mut err = 0.0f64;
        for (&tau, g) in grid.iter().zip(&r.gamma) {
            err = err.max((g - kernel.qubit_gamma(tau).map_err(|e| e.to_string())?).abs());
        }
        out.record(format!("max_err_lambda_{lambda}"), err);
        out.require(err < 1e-3, format!("lambda {lambda}: error {err:.3e} >= 1e-3"));
    }
    Ok(out)
}

fn criterion_2(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let grid = tau_grid(0.05, 40.0, 50, false).map_err(|e| e.to_string())?;
    let model = biased_qubit(1.0, 0.0);
    for lambda in [0.05, 0.5, 5.0] {
        let (_, bath) = lorentz(opts, 0.5, lambda, 0.0)?;
        let r = scan(&model, &bath, &StateVector::basis(2, 0), &grid, &settings(opts, 1e-4), &mut out)?;
        let worst = r.gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        out.record(format!("max_gamma_lambda_{lambda}"), worst);
        out.require(worst < 1e-8, format!("lambda {lambda}: Gamma reaches {worst:.3e}"));
    }
    Ok(out)
}

fn criterion_3(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let grid = tau_grid(0.05, 40.0, 50, false).map_err(|e| e.to_string())?;
    let model = biased_qutrit(1.0, 0.0);
    let psi = su2_coherent_state(2, FRAC_PI_2, 0.0).map_err(|e| e.to_string())?;
    // |ς| = tan(θ/2) = 1 at θ = π/2
    let varsigma = (FRAC_PI_2 / 2.0).tan();
    for lambda in [0.02, 0.2, 2.0] {
        let (j, bath) = lorentz(opts, 0.2, lambda, 0.0)?;
        let r = scan(&model, &bath, &psi, &grid, &settings(opts, 1e-4), &mut out)?;
        let kernel = DephasingKernel::new(j);
        let mut err = 0.0f64;
        for (&tau, g) in grid.iter().zip(&r.gamma) {
            err = err.max((g - kernel.coherent_gamma(varsigma, 2, tau).map_err(|e| e.to_string())?).abs());
        }
        out.record(format!("max_err_lambda_{lambda}"), err);
        out.record(format!("maxima_lambda_{lambda}"), r.maxima.len() as f64);
        out.require(err < 1e-3, format!("lambda {lambda}: error {err:.3e} >= 1e-3"));
        out.require(r.maxima.len() == 1, format!("lambda {lambda}: {} maxima", r.maxima.len()));
    }
    Ok(out)
}

/// Five points τ_k = k·h inside the short-time regime of every scale.
fn short_grid(scales: &[f64]) -> Vec<f64> {
    let h = 0.01 * scales.iter().fold(f64::INFINITY, |m, s| m.min(*s));
    (1..=5).map(|k| k as f64 * h).collect()
}

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

fn criterion_4(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let gamma0 = 0.5;
    let model = biased_qubit(1.0, 0.0);
    let lambdas: Vec<f64> = (0..5).map(|k| 0.02 * 10f64.powf(k as f64 / 2.0)).collect();
    let (mut exact_tz, mut heom_tz) = (Vec::new(), Vec::new());
    for &lambda in &lambdas {
        let (j, bath) = lorentz(opts, gamma0, lambda, 0.0)?;
        let expected = short_time_zeno_time(&j).map_err(|e| e.to_string())?;
        let grid = short_grid(&[1.0 / lambda, expected, 1.0]);
        let kernel = DephasingKernel::new(j);
        let exact: Vec<f64> = grid.iter().map(|&t| kernel.qubit_gamma(t)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let fit_exact = fit_zeno_time(&grid, &exact, 5).map_err(|e| e.to_string())?;
        let r = scan(&model, &bath, &plus(), &grid, &settings(opts, 1e-10), &mut out)?;
        let fit_heom = fit_zeno_time(&grid, &r.gamma, 5).map_err(|e| e.to_string())?;
        for (label, tz) in [("exact", fit_exact.tau_z), ("heom", fit_heom.tau_z)] {
            let rel = (tz / expected - 1.0).abs();
            out.require(rel < 0.05, format!("{label} tau_Z at lambda {lambda:.3}: off by {:.1}%", 100.0 * rel));
        }
        out.record(format!("heom_rel_err_lambda_{lambda:.3}"), fit_heom.tau_z / expected - 1.0);
        exact_tz.push(fit_exact.tau_z);
        heom_tz.push(fit_heom.tau_z);
    }
    for (label, tz) in [("exact", &exact_tz), ("heom", &heom_tz)] {
        let slope = log_log_slope(&lambdas, tz);
        out.record(format!("{label}_log_slope"), slope);
        out.require((slope + 0.5).abs() <= 0.05, format!("{label} log-log slope {slope:.4}"));
    }
    Ok(out)
}

fn criterion_5(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let eps = 0.85;
    let model = biased_qubit(eps, -0.3 * eps);
    let grid = tau_grid(0.1, 60.0, 300, false).map_err(|e| e.to_string())?;
    for gamma0 in [0.02, 0.05] {
        let (_, bath) = lorentz(opts, gamma0, 5.0 * gamma0, 0.0)?;
        let r = scan(&model, &bath, &StateVector::basis(2, 0), &grid, &settings(opts, 1e-4), &mut out)?;
        out.record(format!("maxima_gamma0_{gamma0}"), r.maxima.len() as f64);
        out.require(r.maxima.len() >= 2, format!("gamma0 {gamma0}: {} maxima", r.maxima.len()));
    }
    Ok(out)
}

/// Fitted short-time slope a of Γ on `grid`.
fn short_slope(
    opts: &VerifyOptions,
    model: &ModelSpec,
    psi: &StateVector,
    gamma0: f64,
    lambda: f64,
    grid: &[f64],
    out: &mut Outcome,
) -> Result<f64, String> {
    let (_, bath) = lorentz(opts, gamma0, lambda, 0.0)?;
    let r = scan(model, &bath, psi, grid, &settings(opts, 1e-10), out)?;
    Ok(fit_zeno_time(grid, &r.gamma, 5).map_err(|e| e.to_string())?.slope)
}

fn criterion_6(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let coherent = su2_coherent_state(2, FRAC_PI_2, 0.0).map_err(|e| e.to_string())?;
    let cases: [(&str, ModelSpec, StateVector, f64); 4] = [
        ("dephasing_qubit", biased_qubit(1.0, 0.0), plus(), 0.5),
        ("biased_qubit", biased_qubit(0.85, -0.255), StateVector::basis(2, 0), 1.0),
        ("dephasing_qutrit", biased_qutrit(1.0, 0.0), coherent, 0.2),
        ("biased_qutrit", biased_qutrit(1.0, 0.5), StateVector::basis(3, 0), 0.5),
    ];
    for (label, model, psi, gamma0) in &cases {
        let (wide_l, narrow_l) = (10.0 * gamma0, 0.1 * gamma0);
        // one grid for both widths: Γ need not be linear in τ (eigenstates
        // of f start as τ³), so slopes compare only at equal τ
        let grid = short_grid(&[1.0 / wide_l, 1.0 / (gamma0 * wide_l).sqrt(), 1.0 / model.energy_scale()]);
        let wide = short_slope(opts, model, psi, *gamma0, wide_l, &grid, &mut out)?;
        let narrow = short_slope(opts, model, psi, *gamma0, narrow_l, &grid, &mut out)?;
        out.record(format!("{label}_slope_wide"), wide);
        out.record(format!("{label}_slope_narrow"), narrow);
        out.require(wide > narrow, format!("{label}: slope {wide:.3e} at 10 gamma0 vs {narrow:.3e} at 0.1 gamma0"));
    }
    Ok(out)
}

fn criterion_7(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let model = biased_qubit(1.0, -0.1);
    let j = SpectralDensity::ohmic_drude(0.05, 10.0).map_err(|e| e.to_string())?;
    let grid = tau_grid(0.02, 1.0, 10, false).map_err(|e| e.to_string())?;
    let mut slopes = Vec::new();
    for beta in [0.5, 0.1, 0.01] {
        let bath = BathSpec::Thermal { spectrum: j, beta, matsubara: None };
        let cutoff = bath.matsubara_cutoff().map_err(|e| e.to_string())?.unwrap_or(0);
        // Γ is of order 1e-4 here, so depths must agree far below the default
        let r = scan(&model, &bath, &StateVector::basis(2, 0), &grid, &settings(opts, 1e-9), &mut out)?;
        let fit = fit_zeno_time(&grid, &r.gamma, 5).map_err(|e| e.to_string())?;
        out.record(format!("slope_beta_{beta}"), fit.slope);
        out.record(format!("matsubara_beta_{beta}"), cutoff as f64);
        slopes.push(fit.slope);
    }
    out.require(slopes.windows(2).all(|w| w[1] > w[0]), "slope not strictly increasing with temperature");
    Ok(out)
}

fn criterion_9(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let gamma0 = 0.5;
    let (_, bath) = lorentz(opts, gamma0, 100.0 * gamma0, 0.0)?;
    let model = biased_qubit(1.0, 0.0);
    let times: Vec<f64> = (0..=20).map(|k| 1.0 + 0.2 * k as f64).collect();
    let rho0 = DensityMatrix::from_pure(&plus());
    let (traj, depth) = zeno::converged_trajectory(&model, &bath, &rho0, &times, &settings(opts, 1e-8))
        .map_err(|e| e.to_string())?;
    out.diagnostics.merge(&traj.diagnostics);
    let mut logs = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        logs.push(traj.reduced(k).map_err(|e| e.to_string())?.matrix().get(0, 1).norm().ln());
    }
    let n = times.len() as f64;
    let (mt, ml) = (times.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let cov: f64 = times.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let var: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let rate = -cov / var;
    let rel = rate / (2.0 * gamma0) - 1.0;
    out.record("rate", rate);
    out.record("relative_error", rel);
    out.record("depth", depth as f64);
    out.require(rel.abs() < 0.02, format!("rate {rate:.5} vs {:.5}", 2.0 * gamma0));
    Ok(out)
}

fn criterion_10(opts: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let gamma0 = 0.5;
    let model = biased_qubit(1.0, 0.0);
    let psi = plus();
    let rho0 = DensityMatrix::from_pure(&psi);
    let reference = DensityMatrix::from_pure(&infoflow::orthogonal_state(&psi).map_err(|e| e.to_string())?);
    // Δt = 0.025 on [0, 20]; every second sample gives the Δt = 0.05 grid
    let times: Vec<f64> = (0..=800).map(|k| 0.025 * k as f64).collect();
    for ratio in [0.1, 1.0, 10.0, 100.0] {
        let (_, bath) = lorentz(opts, gamma0, ratio * gamma0, 0.0)?;
        let (traj, _) = zeno::converged_trajectory(&model, &bath, &rho0, &times, &settings(opts, 1e-6))
            .map_err(|e| e.to_string())?;
        out.diagnostics.merge(&traj.diagnostics);
        let states: Vec<DensityMatrix> =
            (0..times.len()).map(|k| traj.reduced(k)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let frame = infoflow::rotating_frame(&model, &times, &states).map_err(|e| e.to_string())?;
        let fine = infoflow::flow_decomposition(&times, &frame, &reference).map_err(|e| e.to_string())?;
        let coarse_t: Vec<f64> = times.iter().step_by(2).copied().collect();
        let coarse_s: Vec<DensityMatrix> = frame.iter().step_by(2).cloned().collect();
        let coarse = infoflow::flow_decomposition(&coarse_t, &coarse_s, &reference).map_err(|e| e.to_string())?;
        let last = *coarse.distance.last().expect("non-empty grid");
        let identity = (last - (1.0 - coarse.info_loss + coarse.info_gain)).abs();
        let tag = format!("lambda_{ratio}g0");
        out.record(format!("identity_{tag}"), identity);
        out.record(format!("gain_{tag}"), coarse.info_gain);
        out.record(format!("bound_{tag}"), coarse.discretization_bound);
        out.record(
            format!("halving_change_{tag}"),
            (fine.info_loss - coarse.info_loss).abs().max((fine.info_gain - coarse.info_gain).abs()),
        );
        out.require(identity < 1e-4, format!("{tag}: identity residual {identity:.3e}"));
        if ratio == 100.0 {
            out.require(coarse.info_gain < 1e-4, format!("{tag}: gain {:.3e} >= 1e-4", coarse.info_gain));
        }
        if ratio == 0.1 {
            out.require(coarse.info_gain > 0.0, format!("{tag}: no backflow (gain {:.3e})", coarse.info_gain));
        }
    }
    Ok(out)
}

fn criterion_11(_: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    for (name, text) in SHIPPED_CONFIGS {
        let cfg = parse_config(text).map_err(|e| format!("{name}: {e}"))?;
        for (_, variant) in cfg.variants() {
            let bath = variant.bath_spec()?;
            let decomp = bath.decomposition().map_err(|e| e.to_string())?;
            let err = decomp.fidelity_error().map_err(|e| e.to_string())?;
            let limit = match bath.temperature() {
                Temperature::Zero => 1e-7,
                Temperature::Inverse(_) => 1e-4,
            };
            out.require(err < limit, format!("{name}: error {err:.3e} >= {limit:.0e}"));
            let key = format!("{name}_max_err");
            match out.measured.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => *v = v.max(err),
                None => out.record(key, err),
            }
        }
    }
    Ok(out)
}

fn criterion_12(_: &VerifyOptions) -> Check {
    let mut out = Outcome::new();
    let (_, text) = SHIPPED_CONFIGS[1];
    let cfg = parse_config(text).map_err(|e| e.to_string())?;
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| run_zeno_scan(&cfg)).map_err(|e| e.to_string())
    };
    let one = run_with(1)?;
    let eight = run_with(8)?;
    out.record("files", one.len() as f64);
    out.require(one == eight, "outputs differ between 1 and 8 threads");
    Ok(out)
}

fn structure_outcome(diag: &StructureDiagnostics) -> Outcome {
    let mut out = Outcome::new();
    out.record("max_trace_drift", diag.max_trace_drift);
    out.record("max_hermitian_residual", diag.max_hermitian_residual);
    out.record("min_eigenvalue", diag.min_eigenvalue);
    out.require(diag.max_trace_drift < POLICY.trace_drift, "trace drift");
    out.require(diag.max_hermitian_residual < POLICY.density_hermitian, "Hermiticity residual");
    out.require(diag.min_eigenvalue >= POLICY.density_min_eigenvalue, "negative eigenvalue");
    out
}

fn run_one(id: u8, opts: &VerifyOptions) -> Check {
    match id {
        1 => criterion_1(opts),
        2 => criterion_2(opts),
        3 => criterion_3(opts),
        4 => criterion_4(opts),
        5 => criterion_5(opts),
        6 => criterion_6(opts),
        7 => criterion_7(opts),
        9 => criterion_9(opts),
        10 => criterion_10(opts),
        11 => criterion_11(opts),
        12 => criterion_12(opts),
        _ => Err(format!("no criterion {id}")),
    }
}

fn name_of(id: u8) -> &'static str {
    CRITERIA.iter().find(|(i, _)| *i == id).map_or("unknown", |(_, n)| n)
}

/// Runs the selected criteria (all when empty), in id order. Criterion 8
/// covers the hierarchy runs made by the others; asked for alone, it runs
/// them all.
pub fn run_criteria(selection: &[u8], opts: &VerifyOptions) -> Vec<CriterionReport> {
    let mut wanted: Vec<u8> =
        if selection.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { selection.to_vec() };
    wanted.sort_unstable();
    wanted.dedup();
    let structure_only = wanted == [8];
    let mut reports = Vec::new();
    let mut all_diag = StructureDiagnostics::default();
    for &(id, name) in &CRITERIA {
        if id == 8 || !(structure_only || wanted.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let report = match run_one(id, opts) {
            Ok(o) => {
                all_diag.merge(&o.diagnostics);
                CriterionReport {
                    id,
                    name,
                    passed: o.passed,
                    measured: o.measured,
                    detail: o.detail,
                    seconds: start.elapsed().as_secs_f64(),
                    diagnostics: Some(o.diagnostics),
                }
            }
            Err(e) => CriterionReport {
                id,
                name,
                passed: false,
                measured: Vec::new(),
                detail: format!("run failed: {e}"),
                seconds: start.elapsed().as_secs_f64(),
                diagnostics: None,
            },
        };
        log::info!("{}", report.line());
        if !structure_only {
            reports.push(report);
        }
    }
    if wanted.contains(&8) {
        let o = structure_outcome(&all_diag);
        reports.push(CriterionReport {
            id: 8,
            name: name_of(8),
            passed: o.passed,
            measured: o.measured,
            detail: o.detail,
            seconds: 0.0,
            diagnostics: Some(all_diag),
        });
    }
    reports.sort_by_key(|r| r.id);
    for id in wanted.iter().filter(|&&id| !CRITERIA.iter().any(|c| c.0 == id)) {
        reports.push(CriterionReport {
            id: *id,
            name: "unknown",
            passed: false,
            measured: Vec::new(),
            detail: format!("no criterion {id}"),
            seconds: 0.0,
            diagnostics: None,
        });
    }
    reports
}

pub fn report_json(reports: &[CriterionReport]) -> String {
    let all = reports.iter().all(|r| r.passed);
    let body = json!({
        "passed": all,
        "criteria": reports.iter().map(CriterionReport::to_json).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&body).expect("plain JSON values serialize")
}
