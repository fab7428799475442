//! Exact results for the pure-dephasing models at zero temperature.
//!
//! With f = 2J_z and C(t) = ∫dω J(ω) e^{-iωt}, the density-matrix elements
//! in the J_z basis evolve as
//!
//! ρ_mm'(t) = ρ_mm'(0) e^{-iε(m-m')t} e^{-iφ(t)(m²-m'²)} e^{-κ(t)(m-m')²}
//!
//! with κ(t) = 4∫J(1 - cos ωt)/ω² and φ(t) = 4∫J(sin ωt - ωt)/ω². Both are
//! four times the real and imaginary parts of the double time integral of
//! C(t). Starting from the coherent state, the survival probability is the
//! binomial-weighted sum of these factors; the (|ς|/(1+|ς|²))^{4J} prefactor
//! is the square of the state's normalization and reduces to the qubit
//! result ½ + ½e^{-κ} at J = ½, ς = 1.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::bath::SpectralDensity;
use crate::numeric::POLICY;
use crate::quadrature::{self, Estimate, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("kernel quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical integrity: {0}")]
    Integrity(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Absolute accuracy requested from κ and φ.
pub const KERNEL_TOL: f64 = 1e-9;
const CORE_WIDTHS: f64 = 60.0;

/// Integration window [lo, hi] containing both the spectral peak and ω = 0.
fn core_window(j: &SpectralDensity) -> (f64, f64) {
    let radius = CORE_WIDTHS * j.width();
    if j.full_line() {
        let c = j.center();
        ((c - radius).min(-radius), (c + radius).max(radius))
    } else {
        (0.0, radius)
    }
}

/// Number of panels so each holds about one oscillation of frequency t.
fn oscillation_pieces(lo: f64, hi: f64, t: f64) -> usize {
    ((hi - lo) * t / std::f64::consts::TAU).ceil().max(1.0) as usize
}

/// ∫ J(ω) g(ω) dω over the spectral domain, where g = s(ω) + c·cos(ωt) +
/// q·sin(ωt) outside the core window.
fn kernel_integral<F>(j: &SpectralDensity, t: f64, core: F, smooth: fn(f64, f64) -> f64, cos_coef: f64, sin_mode: bool) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = core_window(j);
    let tol = KERNEL_TOL * 1e-2;
    let f = |w: f64| C64::new(j.value(w) * core(w), 0.0);
    let mut total = quadrature::integrate_split(&f, lo, hi, oscillation_pieces(lo, hi, t), tol)?;
    let mut tail = |a: f64, sign: f64| -> Result<()> {
        // integrate over x ≥ a with ω = sign·x
        let smooth_part = |x: f64| {
            let w = sign * x;
            C64::new(j.value(w) * smooth(w, t), 0.0)
        };
        total = total + quadrature::integrate_to_infinity(&smooth_part, a, a.max(1.0), tol)?;
        let osc = |x: f64| {
            let w = sign * x;
            let trig = if sin_mode { (w * t).sin() } else { (w * t).cos() };
            C64::new(cos_coef * j.value(w) * trig / (w * w), 0.0)
        };
        total = total + quadrature::integrate_oscillatory_tail(&osc, a, t, tol)?;
        Ok(())
    };
    tail(hi, 1.0)?;
    if j.full_line() {
        tail(-lo, -1.0)?;
    }
    Ok(total)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(OracleError::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// κ(τ) = 4∫dω J(ω)(1 - cos ωτ)/ω²
pub fn kappa(j: &SpectralDensity, tau: f64) -> Result<f64> {
    check_time(tau)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    // (1 - cos ωτ)/ω² = 2 sin²(ωτ/2)/ω², with limit τ²/2 at ω = 0
    let core = |w: f64| {
        if (w * tau).abs() < 1e-8 {
            0.5 * tau * tau
        } else {
            let s = (0.5 * w * tau).sin();
            2.0 * s * s / (w * w)
        }
    };
    let est = kernel_integral(j, tau, core, |w, _| 1.0 / (w * w), -1.0, false)?;
    Ok(4.0 * est.value.re)
}

/// φ(t) = 4∫dω J(ω)(sin ωt - ωt)/ω²
pub fn phi(j: &SpectralDensity, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let core = |w: f64| {
        let x = w * t;
        if x.abs() < 1e-3 {
            let x2 = x * x;
            // sin x - x = -x³/6 + x⁵/120 - x⁷/5040
            t * t * x * (-1.0 / 6.0 + x2 / 120.0 - x2 * x2 / 5040.0)
        } else {
            (x.sin() - x) / (w * w)
        }
    };
    let est = kernel_integral(j, t, core, |w, t| -t / w, 1.0, true)?;
    Ok(4.0 * est.value.re)
}

fn check_positive_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(OracleError::Domain(format!(
            "tau must be > 0 (the rate is 0/0 at the origin), got {tau}"
        )));
    }
    Ok(())
}

/// Γ(τ) = -(1/τ) ln[½ + ½e^{-κ(τ)}] given κ(τ).
pub fn qubit_gamma_from_kappa(kappa: f64, tau: f64) -> Result<f64> {
    check_positive_tau(tau)?;
    Ok(-(0.5 + 0.5 * (-kappa).exp()).ln() / tau)
}

/// Γ(τ) for the dephasing qubit prepared in |+⟩.
pub fn dephasing_qubit_gamma(j: &SpectralDensity, tau: f64) -> Result<f64> {
    check_positive_tau(tau)?;
    qubit_gamma_from_kappa(kappa(j, tau)?, tau)
}

fn check_projection(m: f64, two_j: Option<usize>) -> Result<()> {
    let twice = 2.0 * m;
    if (twice - twice.round()).abs() > 1e-12 {
        return Err(OracleError::Domain(format!("m = {m} is not a half-integer")));
    }
    if let Some(tj) = two_j {
        let jv = 0.5 * tj as f64;
        if m.abs() > jv + 1e-12 || ((jv - m).round() - (jv - m)).abs() > 1e-12 {
            return Err(OracleError::Domain(format!("m = {m} outside -J..J for J = {jv}")));
        }
    }
    Ok(())
}

/// Multiplicative factor e^{-iε(m-m')t} e^{-iφ(m²-m'²)} e^{-κ(m-m')²}
/// propagating ρ_mm'(0) to ρ_mm'(t), given the kernels at t.
pub fn element_factor(eps: f64, t: f64, m: f64, m_prime: f64, kappa: f64, phi: f64) -> C64 {
    let dm = m - m_prime;
    let phase = -eps * dm * t - phi * (m * m - m_prime * m_prime);
    C64::from_polar((-kappa * dm * dm).exp(), phase)
}

/// ρ_mm'(t)/ρ_mm'(0) for the dephasing spin with H_s = εJ_z, f = 2J_z.
pub fn dephasing_qutrit_rho_element(j: &SpectralDensity, eps: f64, t: f64, m: f64, m_prime: f64) -> Result<C64> {
    check_projection(m, None)?;
    check_projection(m_prime, None)?;
    Ok(element_factor(eps, t, m, m_prime, kappa(j, t)?, phi(j, t)?))
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Survival bracket for the coherent state |ς⟩ of spin J = two_j/2, given
/// the kernels at τ. Weights are formed in log space so large J cannot
/// overflow the binomials.
pub fn coherent_survival(varsigma_modulus: f64, two_j: usize, kappa: f64, phi: f64) -> Result<f64> {
    if !(varsigma_modulus > 0.0) || !varsigma_modulus.is_finite() {
        return Err(OracleError::Domain(format!(
            "|varsigma| must be positive and finite, got {varsigma_modulus}"
        )));
    }
    if two_j == 0 {
        return Err(OracleError::Domain("J must be positive".into()));
    }
    let jv = 0.5 * two_j as f64;
    let ln_s = varsigma_modulus.ln();
    let ln_norm = -(two_j as f64) * (1.0 + varsigma_modulus * varsigma_modulus).ln();
    // p = J + m; weight_p = |⟨J,m|ς⟩|², which sums to one
    let weights: Vec<f64> = (0..=two_j)
        .map(|p| (ln_binomial(two_j, p) + 2.0 * p as f64 * ln_s + ln_norm).exp())
        .collect();
    let mut bracket = C64::new(0.0, 0.0);
    for (p, wp) in weights.iter().enumerate() {
        let m = p as f64 - jv;
        for (q, wq) in weights.iter().enumerate() {
            let mp = q as f64 - jv;
            bracket += wp * wq * element_factor(0.0, 0.0, m, mp, kappa, phi);
        }
    }
    if bracket.im.abs() > POLICY.imaginary_residual || !(bracket.re > 0.0) {
        return Err(OracleError::Integrity(format!(
            "survival bracket {bracket} is not real and positive"
        )));
    }
    Ok(bracket.re)
}

/// Γ(τ) for the dephasing spin J = two_j/2 prepared in the coherent state ς.
pub fn dephasing_qutrit_gamma(j: &SpectralDensity, varsigma: C64, two_j: usize, tau: f64) -> Result<f64> {
    check_positive_tau(tau)?;
    let p = coherent_survival(varsigma.norm(), two_j, kappa(j, tau)?, phi(j, tau)?)?;
    Ok(-p.ln() / tau)
}

/// τ_Z = √(2/(γ₀λ)) from the short-time law Γ ≈ γ₀λτ/2 of the dephasing qubit.
/// Proportional to (γ₀λ)^{-1/2}.
pub fn short_time_zeno_time(j: &SpectralDensity) -> Result<f64> {
    match *j {
        SpectralDensity::Lorentzian { gamma0, lambda, omega0 } => {
            if omega0 != 0.0 {
                return Err(OracleError::Domain(format!("short-time Zeno time needs omega0 = 0, got {omega0}")));
            }
            Ok((2.0 / (gamma0 * lambda)).sqrt())
        }
        _ => Err(OracleError::Domain("short-time Zeno time needs a Lorentzian spectrum".into())),
    }
}

/// κ and φ for one spectral density, memoized per time point.
#[derive(Debug)]
pub struct DephasingKernel {
    spectrum: SpectralDensity,
    memo: RwLock<HashMap<u64, (f64, f64)>>,
}

impl DephasingKernel {
    pub fn new(spectrum: SpectralDensity) -> Self {
        Self { spectrum, memo: RwLock::new(HashMap::new()) }
    }

    pub fn spectrum(&self) -> &SpectralDensity {
        &self.spectrum
    }

    /// (κ(t), φ(t))
    pub fn kernels(&self, t: f64) -> Result<(f64, f64)> {
        let key = t.to_bits();
        if let Some(v) = self.memo.read().expect("memo lock poisoned").get(&key) {
            return Ok(*v);
        }
        let value = (kappa(&self.spectrum, t)?, phi(&self.spectrum, t)?);
        // concurrent inserts of the same key store identical values
        self.memo.write().expect("memo lock poisoned").insert(key, value);
        Ok(value)
    }

    pub fn kappa(&self, t: f64) -> Result<f64> {
        Ok(self.kernels(t)?.0)
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        Ok(self.kernels(t)?.1)
    }

    pub fn qubit_gamma(&self, tau: f64) -> Result<f64> {
        check_positive_tau(tau)?;
        qubit_gamma_from_kappa(self.kappa(tau)?, tau)
    }

    pub fn coherent_gamma(&self, varsigma_modulus: f64, two_j: usize, tau: f64) -> Result<f64> {
        check_positive_tau(tau)?;
        let (k, p) = self.kernels(tau)?;
        Ok(-coherent_survival(varsigma_modulus, two_j, k, p)?.ln() / tau)
    }

    pub fn element(&self, eps: f64, t: f64, m: f64, m_prime: f64) -> Result<C64> {
        let (k, p) = self.kernels(t)?;
        Ok(element_factor(eps, t, m, m_prime, k, p))
    }

    pub fn cached_points(&self) -> usize {
        self.memo.read().expect("memo lock poisoned").len()
    }
}
