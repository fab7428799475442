//! Bath spectral densities, correlation functions and their exponential
//! decompositions, plus an independent quadrature route for C(t).

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::quadrature::{self, Estimate, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("invalid bath parameter: {0}")]
    InvalidParameter(String),
    #[error("wrong spectral density variant: expected {expected}")]
    WrongVariant { expected: &'static str },
    #[error("singular Matsubara parameters: {0}")]
    SingularParameter(String),
    #[error("unsupported bath combination: {0}")]
    Unsupported(String),
    #[error("correlation quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("quadrature error estimate {achieved:.3e} above requested {requested:.1e}")]
    Accuracy { achieved: f64, requested: f64 },
}

pub type Result<T> = std::result::Result<T, BathError>;

/// Domain half-width, in units of the spectral width, of the central
/// quadrature region. Tails beyond it are integrated separately.
const CORE_WIDTHS: f64 = 60.0;
/// Requested absolute accuracy of the correlation quadrature.
pub const CORRELATION_QUAD_TOL: f64 = 1e-8;
/// Hard cap on the number of Matsubara terms chosen by the auto rule.
pub const MATSUBARA_CAP: usize = 64;
/// Relative size of the omitted Matsubara tail accepted by the auto rule.
pub const MATSUBARA_TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralDensity {
    /// J(ω) = (1/2π) γ₀ λ² / ((ω - ω₀)² + λ²)
    Lorentzian { gamma0: f64, lambda: f64, omega0: f64 },
    /// J(ω) = (1/π) 2χ ω_c ω / (ω² + ω_c²)
    OhmicDrude { chi: f64, omega_c: f64 },
}

impl SpectralDensity {
    pub fn lorentzian(gamma0: f64, lambda: f64, omega0: f64) -> Result<Self> {
        if !(gamma0 > 0.0) || !(lambda > 0.0) || !omega0.is_finite() {
            return Err(BathError::InvalidParameter(format!(
                "Lorentzian needs gamma0 > 0, lambda > 0 (got {gamma0}, {lambda}, {omega0})"
            )));
        }
        Ok(Self::Lorentzian { gamma0, lambda, omega0 })
    }

    /// A Lorentzian with γ₀ = 0 is allowed only through this constructor,
    /// for decoupled reference runs.
    pub fn lorentzian_allow_zero(gamma0: f64, lambda: f64, omega0: f64) -> Result<Self> {
        if gamma0 == 0.0 && lambda > 0.0 {
            return Ok(Self::Lorentzian { gamma0, lambda, omega0 });
        }
        Self::lorentzian(gamma0, lambda, omega0)
    }

    pub fn ohmic_drude(chi: f64, omega_c: f64) -> Result<Self> {
        if !(chi > 0.0) || !(omega_c > 0.0) {
            return Err(BathError::InvalidParameter(format!(
                "Ohmic-Drude needs chi > 0, omega_c > 0 (got {chi}, {omega_c})"
            )));
        }
        Ok(Self::OhmicDrude { chi, omega_c })
    }

    /// J(ω)
    pub fn value(&self, omega: f64) -> f64 {
        match *self {
            Self::Lorentzian { gamma0, lambda, omega0 } => {
                let dw = omega - omega0;
                gamma0 * lambda * lambda / (2.0 * PI * (dw * dw + lambda * lambda))
            }
            Self::OhmicDrude { chi, omega_c } => {
                2.0 * chi * omega_c * omega / (PI * (omega * omega + omega_c * omega_c))
            }
        }
    }

    /// Characteristic frequency width of the spectrum.
    pub fn width(&self) -> f64 {
        match *self {
            Self::Lorentzian { lambda, .. } => lambda,
            Self::OhmicDrude { omega_c, .. } => omega_c,
        }
    }

    /// Whether ω-integrals run over the whole real line (Lorentzian) or
    /// over ω > 0 only (Ohmic).
    pub fn full_line(&self) -> bool {
        matches!(self, Self::Lorentzian { .. })
    }

    /// Frequency about which the spectral weight is concentrated.
    pub fn center(&self) -> f64 {
        match *self {
            Self::Lorentzian { omega0, .. } => omega0,
            Self::OhmicDrude { .. } => 0.0,
        }
    }
}

impl fmt::Display for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lorentzian { gamma0, lambda, omega0 } => {
                write!(f, "lorentzian(gamma0={gamma0}, lambda={lambda}, omega0={omega0})")
            }
            Self::OhmicDrude { chi, omega_c } => write!(f, "ohmic_drude(chi={chi}, omega_c={omega_c})"),
        }
    }
}

/// Bath temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Zero,
    /// Finite temperature given by the inverse temperature β.
    Inverse(f64),
}

impl Temperature {
    pub fn beta(&self) -> f64 {
        match *self {
            Self::Zero => f64::INFINITY,
            Self::Inverse(b) => b,
        }
    }
}

/// One term ζ e^{-υ t} of an exponential decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub amplitude: C64,
    pub rate: C64,
}

/// C(t) = Σ_j ζ_j e^{-υ_j t}
#[derive(Debug, Clone, PartialEq)]
pub struct BathDecomposition {
    terms: Vec<ExpTerm>,
    temperature: Temperature,
    source: SpectralDensity,
}

impl BathDecomposition {
    pub fn new(terms: Vec<ExpTerm>, temperature: Temperature, source: SpectralDensity) -> Result<Self> {
        if let Some(bad) = terms.iter().find(|t| !(t.rate.re > 0.0)) {
            return Err(BathError::InvalidParameter(format!(
                "exponential rate {} does not decay",
                bad.rate
            )));
        }
        Ok(Self { terms, temperature, source })
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn source(&self) -> &SpectralDensity {
        &self.source
    }

    /// Σ_j ζ_j e^{-υ_j t}
    pub fn correlation(&self, t: f64) -> C64 {
        self.terms.iter().map(|term| term.amplitude * (-term.rate * t).exp()).sum()
    }

    pub fn max_rate(&self) -> f64 {
        self.terms.iter().map(|t| t.rate.re).fold(0.0, f64::max)
    }

    /// Times at which the decomposition is checked against quadrature.
    pub fn fidelity_times(&self) -> Vec<f64> {
        match self.source {
            SpectralDensity::Lorentzian { lambda, .. } => {
                [0.0, 0.1, 1.0, 5.0].iter().map(|k| k / lambda).collect()
            }
            SpectralDensity::OhmicDrude { omega_c, .. } => {
                // C(0) diverges logarithmically for the Drude spectrum, so the
                // check starts at the probe time of the auto cutoff rule.
                [0.5, 1.0, 5.0].iter().map(|k| k / omega_c).collect()
            }
        }
    }

    /// Largest |C_decomp(t) - C_quad(t)| over [`Self::fidelity_times`].
    pub fn fidelity_error(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for t in self.fidelity_times() {
            let quad = correlation_quadrature(&self.source, self.temperature, t)?;
            worst = worst.max((self.correlation(t) - quad.value).norm());
        }
        Ok(worst)
    }
}

/// J(ω) at ω.
pub fn spectral_density_value(j: &SpectralDensity, omega: f64) -> f64 {
    j.value(omega)
}

/// Zero-temperature Lorentzian: C(t) = (γ₀λ/2) e^{-(λ + iω₀)t}.
pub fn lorentz_zero_t_decomposition(j: &SpectralDensity) -> Result<BathDecomposition> {
    match *j {
        SpectralDensity::Lorentzian { gamma0, lambda, omega0 } => BathDecomposition::new(
            vec![ExpTerm {
                amplitude: C64::new(0.5 * gamma0 * lambda, 0.0),
                rate: C64::new(lambda, omega0),
            }],
            Temperature::Zero,
            *j,
        ),
        _ => Err(BathError::WrongVariant { expected: "lorentzian" }),
    }
}

fn matsubara_frequency(j: usize, beta: f64) -> f64 {
    2.0 * PI * j as f64 / beta
}

fn matsubara_amplitude(chi: f64, omega_c: f64, beta: f64, nu: f64) -> f64 {
    4.0 * chi * omega_c / beta * nu / (nu * nu - omega_c * omega_c)
}

fn check_drude(j: &SpectralDensity, beta: f64) -> Result<(f64, f64)> {
    let (chi, omega_c) = match *j {
        SpectralDensity::OhmicDrude { chi, omega_c } => (chi, omega_c),
        _ => return Err(BathError::WrongVariant { expected: "ohmic_drude" }),
    };
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(BathError::InvalidParameter(format!("beta must be positive and finite, got {beta}")));
    }
    let half = 0.5 * beta * omega_c;
    if half.sin().abs() < 1e-12 * half.max(1.0) {
        return Err(BathError::SingularParameter(format!(
            "beta*omega_c/2 = {half} is a pole of cot"
        )));
    }
    Ok((chi, omega_c))
}

/// Matsubara expansion of the Drude correlation function with terms j = 0..=epsilon.
pub fn matsubara_decomposition(j: &SpectralDensity, beta: f64, epsilon: usize) -> Result<BathDecomposition> {
    let (chi, omega_c) = check_drude(j, beta)?;
    let half = 0.5 * beta * omega_c;
    let mut terms = Vec::with_capacity(epsilon + 1);
    terms.push(ExpTerm {
        amplitude: C64::new(chi * omega_c / half.tan(), -chi * omega_c),
        rate: C64::new(omega_c, 0.0),
    });
    for k in 1..=epsilon {
        let nu = matsubara_frequency(k, beta);
        if ((nu - omega_c) / omega_c).abs() < 1e-12 {
            return Err(BathError::SingularParameter(format!(
                "Matsubara frequency {k} coincides with omega_c"
            )));
        }
        terms.push(ExpTerm {
            amplitude: C64::new(matsubara_amplitude(chi, omega_c, beta, nu), 0.0),
            rate: C64::new(nu, 0.0),
        });
    }
    BathDecomposition::new(terms, Temperature::Inverse(beta), *j)
}

/// Smallest Matsubara cutoff whose omitted tail Σ_{j>ε} |ζ_j| e^{-υ_j t_p},
/// at the probe time t_p = 0.5/ω_c, is below [`MATSUBARA_TAIL_TOL`]·|ζ₀|.
/// Capped at [`MATSUBARA_CAP`].
pub fn auto_matsubara_cutoff(j: &SpectralDensity, beta: f64) -> Result<usize> {
    let (chi, omega_c) = check_drude(j, beta)?;
    let probe = 0.5 / omega_c;
    let zeta0 = C64::new(chi * omega_c / (0.5 * beta * omega_c).tan(), -chi * omega_c).norm();
    let threshold = MATSUBARA_TAIL_TOL * zeta0;
    let term = |k: usize| {
        let nu = matsubara_frequency(k, beta);
        matsubara_amplitude(chi, omega_c, beta, nu).abs() * (-nu * probe).exp()
    };
    let tail = |eps: usize| {
        let mut sum = 0.0;
        let mut k = eps + 1;
        loop {
            let t = term(k);
            sum += t;
            // terms decay at least geometrically once nu > omega_c
            if t < 1e-20 * zeta0 || k > eps + 100_000 {
                break;
            }
            k += 1;
        }
        sum
    };
    for eps in 0..MATSUBARA_CAP {
        if tail(eps) < threshold {
            return Ok(eps);
        }
    }
    Ok(MATSUBARA_CAP)
}

/// Coefficient of the time-local correction -c f^× f^× in the finite
/// temperature hierarchy: c = 2χ/(βω_c) - iχ - Σ_{q≤ε} ζ_q/υ_q.
pub fn terminator_coefficient(decomp: &BathDecomposition) -> Result<C64> {
    let (chi, omega_c) = match *decomp.source() {
        SpectralDensity::OhmicDrude { chi, omega_c } => (chi, omega_c),
        _ => return Err(BathError::WrongVariant { expected: "ohmic_drude" }),
    };
    let beta = decomp.temperature().beta();
    let partial: C64 = decomp.terms().iter().map(|t| t.amplitude / t.rate).sum();
    Ok(C64::new(2.0 * chi / (beta * omega_c), -chi) - partial)
}

/// A warning when the bath is cold relative to `energy_scale`, where the
/// Matsubara series converges slowly.
pub fn low_temperature_warning(beta: f64, energy_scale: f64) -> Option<String> {
    (beta * energy_scale > 2.0).then(|| {
        format!(
            "beta*energy = {:.3} > 2: the Matsubara hierarchy may need many terms at this temperature",
            beta * energy_scale
        )
    })
}

/// ω coth(βω/2), regular at ω = 0.
fn omega_coth(omega: f64, beta: f64) -> f64 {
    let x = 0.5 * beta * omega;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        2.0 / beta * (1.0 + x2 / 3.0 - x2 * x2 / 45.0)
    } else {
        omega / x.tanh()
    }
}

/// C(t) = ∫dω J(ω)[coth(βω/2) cos ωt - i sin ωt] by direct quadrature.
///
/// The Lorentzian at zero temperature is integrated over the whole real line
/// with the thermal factor set to one. The Drude spectrum is integrated over
/// ω > 0; at t = 0 its real part diverges and an error is returned.
pub fn correlation_quadrature(j: &SpectralDensity, temperature: Temperature, t: f64) -> Result<Estimate> {
    if t < 0.0 {
        return Err(BathError::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    let tol = CORRELATION_QUAD_TOL * 1e-2;
    let est = match (*j, temperature) {
        (SpectralDensity::Lorentzian { lambda, omega0, .. }, Temperature::Zero) => {
            let radius = CORE_WIDTHS * lambda;
            let f = |w: f64| C64::from_polar(j.value(w), -w * t);
            let core = quadrature::integrate(&f, omega0 - radius, omega0 + radius, tol)?;
            let right = |x: f64| f(x);
            let left = |y: f64| f(-y);
            let (r, l) = if t == 0.0 {
                (
                    quadrature::integrate_to_infinity(&right, omega0 + radius, radius, tol)?,
                    quadrature::integrate_to_infinity(&left, radius - omega0, radius, tol)?,
                )
            } else {
                (
                    quadrature::integrate_oscillatory_tail(&right, omega0 + radius, t, tol)?,
                    quadrature::integrate_oscillatory_tail(&left, radius - omega0, t, tol)?,
                )
            };
            core + r + l
        }
        (SpectralDensity::Lorentzian { .. }, Temperature::Inverse(_)) => {
            return Err(BathError::Unsupported(
                "finite-temperature Lorentzian has no exponential decomposition here".into(),
            ))
        }
        (SpectralDensity::OhmicDrude { chi, omega_c }, temp) => {
            if t == 0.0 {
                return Err(BathError::Quadrature(QuadError::Divergent(
                    "Drude correlation diverges logarithmically at t = 0".into(),
                )));
            }
            let prefactor = 2.0 * chi * omega_c / PI;
            let f = |w: f64| {
                let denom = w * w + omega_c * omega_c;
                let thermal = match temp {
                    Temperature::Zero => w,
                    Temperature::Inverse(beta) => omega_coth(w, beta),
                };
                let (s, c) = (w * t).sin_cos();
                C64::new(prefactor * thermal * c / denom, -prefactor * w * s / denom)
            };
            let radius = CORE_WIDTHS * omega_c;
            let core = quadrature::integrate(&f, 0.0, radius, tol)?;
            core + quadrature::integrate_oscillatory_tail(&f, radius, t, tol)?
        }
    };
    if est.error > CORRELATION_QUAD_TOL {
        return Err(BathError::Accuracy { achieved: est.error, requested: CORRELATION_QUAD_TOL });
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_density_examples() {
        let j = SpectralDensity::lorentzian(0.5, 0.3, 1.2).unwrap();
        let peak = j.value(1.2);
        assert!((peak - 0.5 / (2.0 * PI)).abs() < 1e-15);
        assert!((j.value(1.5) - peak / 2.0).abs() < 1e-15);
        assert!((j.value(0.9) - peak / 2.0).abs() < 1e-15);
        let o = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        assert!((o.value(10.0) - 0.05 / PI).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SpectralDensity::lorentzian(0.0, 1.0, 0.0).is_err());
        assert!(SpectralDensity::lorentzian(1.0, -1.0, 0.0).is_err());
        assert!(SpectralDensity::ohmic_drude(0.1, 0.0).is_err());
    }

    #[test]
    fn lorentz_decomposition_examples() {
        let j = SpectralDensity::lorentzian(0.5, 0.05, 0.0).unwrap();
        let d = lorentz_zero_t_decomposition(&j).unwrap();
        assert_eq!(d.terms().len(), 1);
        assert_eq!(d.terms()[0].amplitude, C64::new(0.0125, 0.0));
        assert_eq!(d.terms()[0].rate, C64::new(0.05, 0.0));
        assert!((d.correlation(0.0) - C64::new(0.0125, 0.0)).norm() < 1e-16);
        let expected = 0.0125 * (-1.0f64).exp();
        assert!((d.correlation(1.0 / 0.05) - C64::new(expected, 0.0)).norm() < 1e-15);

        let j = SpectralDensity::lorentzian(1.0, 1.0, 2.0).unwrap();
        let d = lorentz_zero_t_decomposition(&j).unwrap();
        assert_eq!(d.terms()[0].rate, C64::new(1.0, 2.0));
        for t in [0.0, 0.4, 3.0] {
            assert!((d.correlation(t).norm() - 0.5 * (-t).exp()).abs() < 1e-15);
        }
        let o = SpectralDensity::ohmic_drude(0.1, 1.0).unwrap();
        assert!(matches!(lorentz_zero_t_decomposition(&o), Err(BathError::WrongVariant { .. })));
    }

    #[test]
    fn empty_decomposition_is_zero() {
        let j = SpectralDensity::lorentzian(1.0, 1.0, 0.0).unwrap();
        let d = BathDecomposition::new(vec![], Temperature::Zero, j).unwrap();
        assert_eq!(d.correlation(1.3), C64::new(0.0, 0.0));
    }

    #[test]
    fn matsubara_examples() {
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        let d = matsubara_decomposition(&j, 0.01, 0).unwrap();
        assert_eq!(d.terms().len(), 1);
        let z0 = d.terms()[0].amplitude;
        // high-temperature estimate 2χ/β - iχω_c
        assert!(((z0.re - 10.0) / 10.0).abs() < 2e-3);
        assert_eq!(z0.im, -0.5);

        let d = matsubara_decomposition(&j, 0.37, 5).unwrap();
        assert_eq!(d.terms()[1].rate.re, 2.0 * PI / 0.37);
        for term in &d.terms()[1..] {
            assert_eq!(term.amplitude.im, 0.0);
            let sign = term.amplitude.re.signum();
            let expected = if term.rate.re < 10.0 { -1.0 } else { 1.0 };
            assert_eq!(sign, expected);
        }
    }

    #[test]
    fn matsubara_singular_parameters() {
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        // β ω_c / 2 = π
        let beta = 2.0 * PI / 10.0;
        assert!(matches!(
            matsubara_decomposition(&j, beta, 3),
            Err(BathError::SingularParameter(_))
        ));
        let l = SpectralDensity::lorentzian(1.0, 1.0, 0.0).unwrap();
        assert!(matches!(matsubara_decomposition(&l, 1.0, 2), Err(BathError::WrongVariant { .. })));
    }

    #[test]
    fn terminator_high_temperature_limit() {
        // with ε = 0 and β → 0 the correction coefficient vanishes
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        let mut last = f64::INFINITY;
        for beta in [1e-2, 1e-3, 1e-4] {
            let d = matsubara_decomposition(&j, beta, 0).unwrap();
            let c = terminator_coefficient(&d).unwrap();
            assert!(c.im.abs() < 1e-15);
            assert!(c.norm() < last);
            last = c.norm();
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn lorentzian_quadrature_matches_exact_exponential() {
        for &(g, l, w0) in &[(0.5, 0.05, 0.0), (1.0, 1.0, 2.0), (0.2, 0.4, -0.7)] {
            let j = SpectralDensity::lorentzian(g, l, w0).unwrap();
            let d = lorentz_zero_t_decomposition(&j).unwrap();
            for t in d.fidelity_times() {
                let q = correlation_quadrature(&j, Temperature::Zero, t).unwrap();
                assert!(q.error <= CORRELATION_QUAD_TOL);
                let diff = (q.value - d.correlation(t)).norm();
                assert!(diff < 1e-7, "({g},{l},{w0}) t={t}: {diff}");
            }
        }
    }

    #[test]
    fn drude_quadrature_matches_matsubara_series() {
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        let d = matsubara_decomposition(&j, 0.01, 12).unwrap();
        for t in [0.02, 0.1, 0.25, 0.5] {
            let q = correlation_quadrature(&j, Temperature::Inverse(0.01), t).unwrap();
            let diff = (q.value - d.correlation(t)).norm();
            assert!(diff < 1e-4, "t={t}: {diff}");
        }
    }

    #[test]
    fn drude_quadrature_at_origin_diverges() {
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        assert!(correlation_quadrature(&j, Temperature::Inverse(0.1), 0.0).is_err());
    }

    #[test]
    fn auto_cutoff_and_fidelity() {
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        let mut previous = 0;
        for beta in [0.01, 0.1, 0.5, 1.0] {
            let eps = auto_matsubara_cutoff(&j, beta).unwrap();
            assert!(eps >= previous && eps < MATSUBARA_CAP);
            previous = eps;
            let d = matsubara_decomposition(&j, beta, eps).unwrap();
            let err = d.fidelity_error().unwrap();
            assert!(err < 1e-4, "beta={beta} eps={eps}: {err}");
        }
    }

    #[test]
    fn low_temperature_warning_threshold() {
        assert!(low_temperature_warning(0.5, 1.0).is_none());
        assert!(low_temperature_warning(3.0, 1.0).is_some());
    }
}
