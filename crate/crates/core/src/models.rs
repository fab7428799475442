//! Subsystem Hamiltonians, coupling operators and initial states.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{commutator_action, sigma_x, sigma_z, ComplexMatrix, LinalgError, StateVector};
use crate::numeric::POLICY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0} is not Hermitian (residual {1:.3e})")]
    NotHermitian(&'static str, f64),
    #[error("theta = pi puts the coherent state at |J,+J>; use that basis state directly")]
    CoherentAtPole,
    #[error("theta must lie in [0, pi), got {0}")]
    ThetaOutOfRange(f64),
    #[error("spin must be positive, got 2J = {0}")]
    InvalidSpin(usize),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// H = H_s + f(s)·B + H_B, described by the subsystem part only.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    label: String,
    hamiltonian: ComplexMatrix,
    coupling: ComplexMatrix,
    pure_dephasing: bool,
}

impl ModelSpec {
    pub fn new(label: impl Into<String>, hamiltonian: ComplexMatrix, coupling: ComplexMatrix) -> Result<Self> {
        let tol = POLICY.operator_hermitian;
        let rh = hamiltonian.hermitian_residual();
        if rh > tol {
            return Err(ModelError::NotHermitian("H_s", rh));
        }
        let rf = coupling.hermitian_residual();
        if rf > tol {
            return Err(ModelError::NotHermitian("coupling f", rf));
        }
        let comm = commutator_action(&hamiltonian, &coupling)?;
        let pure_dephasing = comm.max_abs() <= tol;
        Ok(Self { label: label.into(), hamiltonian, coupling, pure_dephasing })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    /// True when [H_s, f] vanishes.
    pub fn is_pure_dephasing(&self) -> bool {
        self.pure_dephasing
    }

    /// Largest |eigenvalue| of H_s, used to scale time steps and grids.
    pub fn energy_scale(&self) -> f64 {
        self.hamiltonian
            .hermitian_eigenvalues()
            .map(|ev| ev.iter().fold(0.0f64, |m, e| m.max(e.abs())))
            .unwrap_or_else(|_| self.hamiltonian.max_abs())
    }
}

/// H_s = (ε/2)σ_z − (Δ/2)σ_x, f = σ_z, in the basis (|e⟩, |g⟩).
pub fn biased_qubit(epsilon: f64, delta: f64) -> ModelSpec {
    let h = &sigma_z().scale(C64::new(0.5 * epsilon, 0.0)) - &sigma_x().scale(C64::new(0.5 * delta, 0.0));
    ModelSpec::new(format!("qubit(epsilon={epsilon}, delta={delta})"), h, sigma_z())
        .expect("Pauli combinations are Hermitian")
}

/// Spin-1 J_z in the basis m = +1, 0, −1.
pub fn spin1_jz() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]).unwrap()
}

/// Spin-1 J_x in the basis m = +1, 0, −1.
pub fn spin1_jx() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real_rows(3, &[0.0, s, 0.0, s, 0.0, s, 0.0, s, 0.0]).unwrap()
}

/// H_s = εJ_z + ΔJ_x, f = 2J_z.
pub fn biased_qutrit(epsilon: f64, delta: f64) -> ModelSpec {
    let jz = spin1_jz();
    let h = &jz.scale(C64::new(epsilon, 0.0)) + &spin1_jx().scale(C64::new(delta, 0.0));
    let f = jz.scale(C64::new(2.0, 0.0));
    ModelSpec::new(format!("qutrit(epsilon={epsilon}, delta={delta})"), h, f)
        .expect("spin matrices are Hermitian")
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Spin coherent state with ς = e^{iφ₀} tan(θ/2), for spin J = two_j/2.
///
/// Amplitudes are (1+|ς|²)^{−J} √C(2J, J+m) ς^{J+m}, listed for
/// m = +J, ..., −J.
pub fn su2_coherent_state(two_j: usize, theta: f64, phi0: f64) -> Result<StateVector> {
    if two_j == 0 {
        return Err(ModelError::InvalidSpin(two_j));
    }
    if (theta - PI).abs() < 1e-12 {
        return Err(ModelError::CoherentAtPole);
    }
    if !(0.0..PI).contains(&theta) {
        return Err(ModelError::ThetaOutOfRange(theta));
    }
    let dim = two_j + 1;
    let modulus = (0.5 * theta).tan();
    if modulus == 0.0 {
        return Ok(StateVector::basis(dim, dim - 1));
    }
    let j = 0.5 * two_j as f64;
    let ln_mod = modulus.ln();
    let ln_norm = -j * (1.0 + modulus * modulus).ln();
    let amplitudes: Vec<C64> = (0..dim)
        .map(|idx| {
            // idx = J − m, so J + m = 2J − idx
            let p = two_j - idx;
            let ln_amp = 0.5 * ln_binomial(two_j, p) + p as f64 * ln_mod + ln_norm;
            C64::from_polar(ln_amp.exp(), p as f64 * phi0)
        })
        .collect();
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        log::warn!("coherent state norm {norm} renormalized");
    }
    Ok(StateVector::normalized(amplitudes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn qubit_examples() {
        assert!(biased_qubit(1.0, 0.0).is_pure_dephasing());
        let m = biased_qubit(0.85, -0.3 * 0.85);
        assert!(!m.is_pure_dephasing());
        let ev = m.hamiltonian().hermitian_eigenvalues().unwrap();
        let split = (0.85f64.powi(2) + (0.3f64 * 0.85).powi(2)).sqrt();
        assert!((ev[1] - ev[0] - split).abs() < 1e-12);
        let zero = biased_qubit(0.0, 0.0);
        assert_eq!(zero.hamiltonian().max_abs(), 0.0);
        assert_eq!(zero.coupling(), &sigma_z());
    }

    #[test]
    fn qutrit_examples() {
        assert!(biased_qutrit(1.0, 0.0).is_pure_dephasing());
        assert!(!biased_qutrit(1.0, 0.5).is_pure_dephasing());
        let jx = spin1_jx();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // column for m = 0
        assert!((jx.get(0, 1).re - s).abs() < 1e-15);
        assert_eq!(jx.get(1, 1), C64::new(0.0, 0.0));
        assert!((jx.get(2, 1).re - s).abs() < 1e-15);
    }

    #[test]
    fn coherent_state_examples() {
        let psi = su2_coherent_state(2, PI / 2.0, 0.0).unwrap();
        let a = psi.amplitudes();
        assert!((a[0].re - 0.5).abs() < 1e-15);
        assert!((a[1].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((a[2].re - 0.5).abs() < 1e-15);
        let psi = su2_coherent_state(2, 0.0, 0.3).unwrap();
        assert_eq!(psi, StateVector::basis(3, 2));
        assert!(matches!(su2_coherent_state(2, PI, 0.0), Err(ModelError::CoherentAtPole)));
    }

    #[test]
    fn spin_half_coherent_state_is_plus() {
        let psi = su2_coherent_state(1, PI / 2.0, 0.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi.amplitudes()[0].re - s).abs() < 1e-15);
        assert!((psi.amplitudes()[1].re - s).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn builders_are_hermitian_and_flag_dephasing(eps in -3.0f64..3.0, delta in -3.0f64..3.0) {
            prop_assume!(delta == 0.0 || delta.abs() > 1e-9);
            for m in [biased_qubit(eps, delta), biased_qutrit(eps, delta)] {
                prop_assert!(m.hamiltonian().hermitian_residual() <= 1e-12);
                prop_assert!(m.coupling().hermitian_residual() <= 1e-12);
                prop_assert_eq!(m.is_pure_dephasing(), delta == 0.0);
            }
        }

        #[test]
        fn coherent_state_follows_binomial_law(theta in 0.0f64..3.1, phi0 in -3.0f64..3.0, two_j in 1usize..=3) {
            let psi = su2_coherent_state(two_j, theta, phi0).unwrap();
            prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
            let s2 = (0.5 * theta).tan().powi(2);
            let j = 0.5 * two_j as f64;
            for (idx, amp) in psi.amplitudes().iter().enumerate() {
                let p = two_j - idx;
                let expected = (1.0 + s2).powf(-2.0 * j) * ln_binomial(two_j, p).exp() * s2.powi(p as i32);
                prop_assert!((amp.norm_sqr() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dephasing_flag_on_grid() {
        for eps in [-1.0, 0.0, 0.5, 2.0] {
            for delta in [-0.7, 0.0, 0.1, 1.0] {
                let expect = delta == 0.0;
                assert_eq!(biased_qubit(eps, delta).is_pure_dephasing(), expect);
                assert_eq!(biased_qutrit(eps, delta).is_pure_dephasing(), expect);
            }
        }
    }
}
