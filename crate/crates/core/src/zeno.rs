//! Repeated projective measurement at interval τ: survival probability in
//! the frame rotating with H_s, effective decay rate Γ(τ) = −ln P(τ)/τ,
//! Zeno time and local extrema of Γ.
//!
//! The bath is taken to return to equilibrium after every measurement, so
//! N measurements give P(τ)^N and one interval per τ suffices. A whole scan
//! is therefore a single trajectory sampled at every grid point.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::bath::{self, BathError, SpectralDensity, Temperature};
use crate::heom::{
    self, build_finite_t_generator, build_zero_t_generator, HeomError, HeomGenerator, HeomOptions,
    HierarchyState, LinkConvention, StructureDiagnostics, Trajectory,
};
use crate::linalg::{matrix_exponential_unitary, ComplexMatrix, DensityMatrix, LinalgError, StateVector};
use crate::models::ModelSpec;
use crate::numeric::POLICY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZenoError {
    #[error(transparent)]
    Heom(#[from] HeomError),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("depth convergence failed at tau = {tau}: L reached {l_max}, last delta {delta:.3e}")]
    NotConverged { tau: f64, l_max: usize, delta: f64 },
    #[error("no Zeno regime: fitted short-time slope {slope:.3e} is not positive")]
    NoZenoRegime { slope: f64 },
}

pub type Result<T> = std::result::Result<T, ZenoError>;

/// Bath and the hierarchy used to represent it.
#[derive(Debug, Clone, PartialEq)]
pub enum BathSpec {
    /// Lorentzian at zero temperature.
    ZeroTemperature { spectrum: SpectralDensity, convention: LinkConvention },
    /// Ohmic–Drude at inverse temperature β with Matsubara terms 0..=ε;
    /// `None` selects ε by [`bath::auto_matsubara_cutoff`].
    Thermal { spectrum: SpectralDensity, beta: f64, matsubara: Option<usize> },
}

impl BathSpec {
    pub fn lorentzian(spectrum: SpectralDensity) -> Self {
        Self::ZeroTemperature { spectrum, convention: LinkConvention::Derived }
    }

    pub fn spectrum(&self) -> &SpectralDensity {
        match self {
            Self::ZeroTemperature { spectrum, .. } | Self::Thermal { spectrum, .. } => spectrum,
        }
    }

    pub fn temperature(&self) -> Temperature {
        match self {
            Self::ZeroTemperature { .. } => Temperature::Zero,
            Self::Thermal { beta, .. } => Temperature::Inverse(*beta),
        }
    }

    /// Matsubara cutoff in use, resolving the automatic rule.
    pub fn matsubara_cutoff(&self) -> Result<Option<usize>> {
        match self {
            Self::ZeroTemperature { .. } => Ok(None),
            Self::Thermal { matsubara: Some(e), .. } => Ok(Some(*e)),
            Self::Thermal { spectrum, beta, matsubara: None } => {
                Ok(Some(bath::auto_matsubara_cutoff(spectrum, *beta)?))
            }
        }
    }

    /// Exponential decomposition of C(t) represented by the hierarchy.
    pub fn decomposition(&self) -> Result<bath::BathDecomposition> {
        match self {
            Self::ZeroTemperature { spectrum, .. } => Ok(bath::lorentz_zero_t_decomposition(spectrum)?),
            Self::Thermal { spectrum, beta, .. } => {
                let eps = self.matsubara_cutoff()?.expect("thermal bath has a cutoff");
                Ok(bath::matsubara_decomposition(spectrum, *beta, eps)?)
            }
        }
    }

    pub fn generator(&self, model: &ModelSpec, depth: usize, options: HeomOptions) -> Result<HeomGenerator> {
        match self {
            Self::ZeroTemperature { spectrum, convention } => {
                Ok(build_zero_t_generator(model, spectrum, depth, *convention, options)?)
            }
            Self::Thermal { spectrum, beta, .. } => {
                let eps = self.matsubara_cutoff()?.expect("thermal bath has a cutoff");
                Ok(build_finite_t_generator(model, spectrum, *beta, eps, depth, options)?)
            }
        }
    }
}

/// Integrator step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// [`HeomGenerator::suggested_dt`] for each depth.
    Auto,
    Fixed(f64),
}

impl StepSize {
    pub fn resolve(&self, gen: &HeomGenerator) -> f64 {
        match *self {
            StepSize::Auto => gen.suggested_dt(),
            StepSize::Fixed(dt) => dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub dt: StepSize,
    pub l_start: usize,
    pub l_max: usize,
    /// Tolerance on Γ (scans) or on ρ entries (dynamics) between depths.
    pub conv_tol: f64,
    /// Report unconverged points instead of failing.
    pub allow_unconverged: bool,
    pub fit_window: usize,
    pub heom: HeomOptions,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt: StepSize::Auto,
            l_start: 2,
            l_max: 40,
            conv_tol: 1e-4,
            allow_unconverged: false,
            fit_window: 5,
            heom: HeomOptions::default(),
        }
    }
}

/// P = ⟨ψ| e^{iH_sτ} ρ(τ) e^{−iH_sτ} |ψ⟩, clamped into [0, 1] within the
/// policy slack.
pub fn survival_from_state(model: &ModelSpec, psi0: &StateVector, rho: &DensityMatrix, tau: f64) -> Result<f64> {
    let u = matrix_exponential_unitary(model.hamiltonian(), -tau)?;
    let v = psi0.evolve(&u);
    let p = v.sandwich(rho.matrix())?;
    if p.im.abs() > POLICY.imaginary_residual {
        return Err(ZenoError::Domain(format!("survival probability {p} is not real")));
    }
    let slack = POLICY.probability_slack;
    if p.re < -slack || p.re > 1.0 + slack {
        return Err(ZenoError::Domain(format!("survival probability {} outside [0, 1]", p.re)));
    }
    Ok(p.re.clamp(0.0, 1.0))
}

/// Γ = −ln(P)/τ
pub fn effective_decay_rate(p: f64, tau: f64) -> Result<f64> {
    if !(p > 0.0) || p > 1.0 + POLICY.probability_slack {
        return Err(ZenoError::Domain(format!("survival probability must lie in (0, 1], got {p}")));
    }
    if !(tau > 0.0) {
        return Err(ZenoError::Domain(format!("tau must be positive, got {tau}")));
    }
    let g = -p.min(1.0).ln() / tau;
    // −ln 1 is −0.0
    Ok(if g == 0.0 { 0.0 } else { g })
}

/// Through-origin fit Γ ≈ aτ on the leading grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct ZenoFit {
    pub tau_z: f64,
    pub slope: f64,
    /// Root-mean-square fit residual relative to the largest Γ in the window.
    pub residual: f64,
    pub window: usize,
    pub warning: Option<String>,
}

/// Relative fit residual above which the window is flagged as outside the
/// short-time regime.
pub const FIT_RESIDUAL_WARNING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoScan {
    pub tau_grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub gamma: Vec<f64>,
    pub converged_l: Vec<usize>,
    pub converged: Vec<bool>,
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
    pub zeno_time: Option<ZenoFit>,
    pub diagnostics: StructureDiagnostics,
    pub provenance: String,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(ZenoError::Domain("empty tau grid".into()));
    }
    if grid[0] <= 0.0 || !grid.windows(2).all(|w| w[1] > w[0]) || !grid.iter().all(|t| t.is_finite()) {
        return Err(ZenoError::Domain("tau grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn warn_if_cold(model: &ModelSpec, bath: &BathSpec) {
    if let BathSpec::Thermal { beta, .. } = bath {
        if let Some(msg) = bath::low_temperature_warning(*beta, model.energy_scale()) {
            log::warn!("{msg}");
        }
    }
}

/// Trajectory of ρ_s at `times` from ρ(0) = rho0 with a depth-L hierarchy.
pub fn trajectory_at_depth(
    model: &ModelSpec,
    bath: &BathSpec,
    rho0: &DensityMatrix,
    times: &[f64],
    depth: usize,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    let gen = bath.generator(model, depth, settings.heom)?;
    let state = HierarchyState::new(&gen, rho0)?;
    Ok(heom::evolve_sampled(&gen, &state, times, settings.dt.resolve(&gen))?)
}

/// Survival probabilities at every grid point for one depth.
fn survival_at_depth(
    model: &ModelSpec,
    bath: &BathSpec,
    psi0: &StateVector,
    grid: &[f64],
    depth: usize,
    settings: &SolverSettings,
) -> Result<(Vec<f64>, StructureDiagnostics)> {
    let rho0 = DensityMatrix::from_pure(psi0);
    let traj = trajectory_at_depth(model, bath, &rho0, grid, depth, settings)?;
    let p = grid
        .iter()
        .enumerate()
        .map(|(k, &tau)| survival_from_state(model, psi0, &traj.reduced(k)?, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok((p, traj.diagnostics))
}

/// Γ(τ) over a grid with depth convergence per point: point i is accepted at
/// the first L ≥ L_start with |Γ_L(τ_i) − Γ_{L−1}(τ_i)| < conv_tol.
pub fn scan(
    model: &ModelSpec,
    bath: &BathSpec,
    psi0: &StateVector,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<ZenoScan> {
    validate_grid(grid)?;
    if psi0.dim() != model.dim() {
        return Err(ZenoError::Domain(format!(
            "initial state dimension {} does not match model dimension {}",
            psi0.dim(),
            model.dim()
        )));
    }
    if settings.l_start == 0 || settings.l_max < settings.l_start {
        return Err(ZenoError::Domain("need 1 <= L_start <= L_max".into()));
    }
    warn_if_cold(model, bath);
    let n = grid.len();
    let gamma_of = |p: &[f64]| -> Result<Vec<f64>> {
        p.iter().zip(grid).map(|(&p, &tau)| effective_decay_rate(p, tau)).collect()
    };

    let (mut prev_p, mut diagnostics) = survival_at_depth(model, bath, psi0, grid, settings.l_start - 1, settings)?;
    let mut prev_gamma = gamma_of(&prev_p)?;
    let mut survival = vec![f64::NAN; n];
    let mut gamma = vec![f64::NAN; n];
    let mut converged_l = vec![0usize; n];
    let mut converged = vec![false; n];
    let mut deltas = vec![f64::INFINITY; n];
    for depth in settings.l_start..=settings.l_max {
        let (p, diag) = survival_at_depth(model, bath, psi0, grid, depth, settings)?;
        diagnostics.merge(&diag);
        let g = gamma_of(&p)?;
        for i in 0..n {
            if converged[i] {
                continue;
            }
            deltas[i] = (g[i] - prev_gamma[i]).abs();
            if deltas[i] < settings.conv_tol {
                converged[i] = true;
                converged_l[i] = depth;
                survival[i] = p[i];
                gamma[i] = g[i];
            }
        }
        log::debug!("depth {depth}: {} of {n} points converged", converged.iter().filter(|&&c| c).count());
        prev_p = p;
        prev_gamma = g;
        if converged.iter().all(|&c| c) {
            break;
        }
    }
    if let Some(i) = converged.iter().position(|&c| !c) {
        if !settings.allow_unconverged {
            return Err(ZenoError::NotConverged { tau: grid[i], l_max: settings.l_max, delta: deltas[i] });
        }
        for i in (0..n).filter(|&i| !converged[i]) {
            survival[i] = prev_p[i];
            gamma[i] = prev_gamma[i];
            converged_l[i] = settings.l_max;
        }
    }

    let (maxima, minima) = detect_crossovers(&gamma);
    let mut out = ZenoScan {
        tau_grid: grid.to_vec(),
        survival,
        gamma,
        converged_l,
        converged,
        maxima,
        minima,
        zeno_time: None,
        diagnostics,
        provenance: format!("{} | {:?} | {:?}", model.label(), bath, settings),
    };
    out.zeno_time = zeno_time(&out, settings.fit_window).ok();
    Ok(out)
}

/// Single-interval survival probability P(τ), depth-converged on Γ.
pub fn survival_probability(
    model: &ModelSpec,
    bath: &BathSpec,
    psi0: &StateVector,
    tau: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    Ok(scan(model, bath, psi0, &[tau], settings)?.survival[0])
}

/// τ_Z = a^{−1/2} from the through-origin least-squares slope a of Γ(τ) on
/// the first `fit_window` grid points.
pub fn zeno_time(scan: &ZenoScan, fit_window: usize) -> Result<ZenoFit> {
    fit_zeno_time(&scan.tau_grid, &scan.gamma, fit_window)
}

/// [`zeno_time`] on raw (τ, Γ) samples.
pub fn fit_zeno_time(tau: &[f64], gamma: &[f64], fit_window: usize) -> Result<ZenoFit> {
    if fit_window < 3 {
        return Err(ZenoError::Domain(format!("fit window must be >= 3, got {fit_window}")));
    }
    if tau.len() < fit_window || gamma.len() < fit_window {
        return Err(ZenoError::Domain(format!(
            "fit window {fit_window} exceeds the {} available points",
            tau.len().min(gamma.len())
        )));
    }
    let (t, g) = (&tau[..fit_window], &gamma[..fit_window]);
    let stt: f64 = t.iter().map(|x| x * x).sum();
    let stg: f64 = t.iter().zip(g).map(|(x, y)| x * y).sum();
    let slope = stg / stt;
    if !(slope > POLICY.gamma_floor) {
        return Err(ZenoError::NoZenoRegime { slope });
    }
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rms = (t.iter().zip(g).map(|(x, y)| (y - slope * x).powi(2)).sum::<f64>() / fit_window as f64).sqrt();
    let residual = if scale > 0.0 { rms / scale } else { 0.0 };
    let warning = (residual > FIT_RESIDUAL_WARNING).then(|| {
        format!("fit residual {residual:.3} suggests the window leaves the short-time regime")
    });
    Ok(ZenoFit { tau_z: slope.powf(-0.5), slope, residual, window: fit_window, warning })
}

/// Interior local maxima and minima of Γ. A maximum satisfies
/// Γ[i] > Γ[i−1] and Γ[i] ≥ Γ[i+1]; minima dually. Points with Γ below the
/// policy floor are ignored.
pub fn detect_crossovers(gamma: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    if gamma.len() < 3 {
        return (maxima, minima);
    }
    for i in 1..gamma.len() - 1 {
        let (a, b, c) = (gamma[i - 1], gamma[i], gamma[i + 1]);
        if b < POLICY.gamma_floor {
            continue;
        }
        if b > a && b >= c {
            maxima.push(i);
        } else if b < a && b <= c {
            minima.push(i);
        }
    }
    (maxima, minima)
}

/// Linear or logarithmic grid of `points` values on [lo, hi].
pub fn tau_grid(lo: f64, hi: f64, points: usize, log_spacing: bool) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi > lo) || points < 2 {
        return Err(ZenoError::Domain(format!("bad grid: [{lo}, {hi}] with {points} points")));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|k| {
            let s = k as f64 / last;
            if k + 1 == points {
                hi
            } else if log_spacing {
                lo * (hi / lo).powf(s)
            } else {
                lo + (hi - lo) * s
            }
        })
        .collect())
}

/// ρ_s on `times`, with the depth raised until successive depths agree to
/// `conv_tol` in every matrix entry at every time.
pub fn converged_trajectory(
    model: &ModelSpec,
    bath: &BathSpec,
    rho0: &DensityMatrix,
    times: &[f64],
    settings: &SolverSettings,
) -> Result<(Trajectory, usize)> {
    warn_if_cold(model, bath);
    let mut prev = trajectory_at_depth(model, bath, rho0, times, settings.l_start - 1, settings)?;
    let mut delta = f64::INFINITY;
    for depth in settings.l_start..=settings.l_max {
        let cur = trajectory_at_depth(model, bath, rho0, times, depth, settings)?;
        delta = cur
            .states
            .iter()
            .zip(&prev.states)
            .map(|(a, b)| (a - b).max_abs())
            .fold(0.0, f64::max);
        if delta < settings.conv_tol {
            return Ok((cur, depth));
        }
        prev = cur;
    }
    if settings.allow_unconverged {
        return Ok((prev, settings.l_max));
    }
    Err(ZenoError::NotConverged { tau: *times.last().unwrap_or(&0.0), l_max: settings.l_max, delta })
}

/// ⟨A⟩ on every sample of a trajectory.
pub fn expectation_series(traj: &Trajectory, a: &ComplexMatrix) -> Result<Vec<C64>> {
    (0..traj.times.len())
        .map(|k| Ok(crate::linalg::expectation(&traj.reduced(k)?, a)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::biased_qubit;
    use crate::oracle;
    use proptest::prelude::*;

    fn plus() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::new(vec![C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap()
    }

    #[test]
    fn decay_rate_examples() {
        assert_eq!(effective_decay_rate(1.0, 3.0).unwrap(), 0.0);
        assert!((effective_decay_rate((-2.0f64).exp(), 4.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(effective_decay_rate(0.0, 1.0).is_err());
        assert!(effective_decay_rate(0.5, 0.0).is_err());
    }

    #[test]
    fn crossover_examples() {
        assert_eq!(detect_crossovers(&[0.1, 0.2, 0.3, 0.4]), (vec![], vec![]));
        assert_eq!(detect_crossovers(&[0.1, 0.3, 0.2, 0.1, 0.4]), (vec![1], vec![3]));
        // plateau counted once at its left edge
        assert_eq!(detect_crossovers(&[0.1, 0.3, 0.3, 0.1]), (vec![1], vec![]));
        assert_eq!(detect_crossovers(&[0.0, 0.0, 0.0]), (vec![], vec![]));
    }

    #[test]
    fn fit_on_exact_curve() {
        let j = SpectralDensity::lorentzian(0.5, 0.05, 0.0).unwrap();
        let tz = oracle::short_time_zeno_time(&j).unwrap();
        let tau: Vec<f64> = (1..=5).map(|k| 0.002 * k as f64 * tz).collect();
        let gamma: Vec<f64> = tau.iter().map(|&t| oracle::dephasing_qubit_gamma(&j, t).unwrap()).collect();
        let fit = fit_zeno_time(&tau, &gamma, 5).unwrap();
        assert!((fit.tau_z / tz - 1.0).abs() < 0.03);
        assert!(matches!(fit_zeno_time(&tau, &[0.0; 5], 5), Err(ZenoError::NoZenoRegime { .. })));
    }

    #[test]
    fn closed_system_survival_is_one() {
        let model = biased_qubit(1.0, 0.4);
        let bath = BathSpec::lorentzian(SpectralDensity::lorentzian_allow_zero(0.0, 0.5, 0.0).unwrap());
        let settings = SolverSettings { l_start: 1, l_max: 2, ..SolverSettings::default() };
        let s = scan(&model, &bath, &plus(), &[0.5, 2.0, 7.0], &settings).unwrap();
        for p in &s.survival {
            assert!((p - 1.0).abs() < 1e-8, "{:?}", s.survival);
        }
        assert!(s.converged_l.iter().all(|&l| l == 1));
    }

    #[test]
    fn dephasing_survival_matches_oracle() {
        let j = SpectralDensity::lorentzian(0.5, 0.5, 0.0).unwrap();
        let model = biased_qubit(1.0, 0.0);
        let grid = [0.3, 1.0, 3.0, 8.0];
        // a Γ tolerance δ allows survival errors of about τδ
        let settings = SolverSettings { conv_tol: 1e-7, ..SolverSettings::default() };
        let s = scan(&model, &BathSpec::lorentzian(j), &plus(), &grid, &settings).unwrap();
        for (k, &tau) in grid.iter().enumerate() {
            let exact = 0.5 + 0.5 * (-oracle::kappa(&j, tau).unwrap()).exp();
            assert!((s.survival[k] - exact).abs() < 1e-5, "tau={tau} {} {exact} L={}", s.survival[k], s.converged_l[k]);
        }
    }

    #[test]
    fn dark_state() {
        let j = SpectralDensity::lorentzian(0.5, 0.05, 0.0).unwrap();
        let model = biased_qubit(1.0, 0.0);
        let grid = tau_grid(0.05, 40.0, 12, false).unwrap();
        let s = scan(&model, &BathSpec::lorentzian(j), &StateVector::basis(2, 0), &grid, &SolverSettings::default())
            .unwrap();
        assert!(s.gamma.iter().all(|&g| g < 1e-12));
        assert!(s.maxima.is_empty() && s.minima.is_empty());
        assert!(s.zeno_time.is_none());
    }

    #[test]
    fn unconverged_scan_reports_tau() {
        let j = SpectralDensity::lorentzian(0.5, 0.05, 0.0).unwrap();
        let model = biased_qubit(1.0, 0.0);
        let settings = SolverSettings { l_start: 1, l_max: 1, ..SolverSettings::default() };
        let err = scan(&model, &BathSpec::lorentzian(j), &plus(), &[5.0, 20.0], &settings).unwrap_err();
        assert!(matches!(err, ZenoError::NotConverged { l_max: 1, .. }));
        let lenient = SolverSettings { allow_unconverged: true, ..settings };
        let s = scan(&model, &BathSpec::lorentzian(j), &plus(), &[5.0, 20.0], &lenient).unwrap();
        assert!(!s.converged[1]);
    }

    #[test]
    fn grids() {
        let g = tau_grid(0.05, 40.0, 50, false).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[49], 40.0);
        let g = tau_grid(0.01, 10.0, 4, true).unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert!(tau_grid(0.0, 1.0, 5, false).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn repeated_measurement_identity(p in 1e-6f64..1.0, tau in 1e-3f64..50.0, n in 1u32..200) {
            let g = effective_decay_rate(p, tau).unwrap();
            prop_assert!(g >= 0.0);
            let lhs = p.powi(n as i32);
            let rhs = (-g * n as f64 * tau).exp();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300) * n as f64);
        }
    }
}
