//! Trace distance between the evolving state and the state orthogonal to
//! the initial one, its rate of change ϖ, and the split of that change into
//! information loss (ϖ < 0) and backflow (ϖ > 0).
//!
//! States are taken in the frame rotating with H_s, the frame in which the
//! survival probability is defined. For a two-level system with ρ written
//! in the basis (ψ₀, ψ₀^⊥) the distance is √(c₁₁² + |c₁₂|²) with c₁₁ = P.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{matrix_exponential_unitary, DensityMatrix, LinalgError, StateVector};
use crate::models::ModelSpec;
use crate::numeric::POLICY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("time grid is not uniform (step {step} vs {expected} at index {index})")]
    NonUniformGrid { index: usize, step: f64, expected: f64 },
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// Relative deviation tolerated between grid steps.
const UNIFORM_GRID_TOL: f64 = 1e-9;

/// ½ Tr|ρ − σ|
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(LinalgError::DimensionMismatch { left: rho.dim(), right: sigma.dim() }.into());
    }
    let diff = rho.matrix() - sigma.matrix();
    let ev = diff.hermitian_part().hermitian_eigenvalues()?;
    Ok((0.5 * ev.iter().map(|e| e.abs()).sum::<f64>()).clamp(0.0, 1.0))
}

/// √(c₁₁² + |c₁₂|²)
pub fn two_level_distance_formula(c11: f64, c12: C64) -> Result<f64> {
    let sq = c11 * c11 + c12.norm_sqr();
    if !(0.0..=1.0).contains(&c11) || sq > 1.0 + 1e-9 {
        return Err(FlowError::Precondition(format!(
            "need c11 in [0, 1] and c11^2 + |c12|^2 <= 1 (got {c11}, {c12})"
        )));
    }
    Ok(sq.sqrt())
}

/// A unit vector orthogonal to ψ: the computational basis vector with the
/// smallest overlap, with its ψ component projected out.
pub fn orthogonal_state(psi: &StateVector) -> Result<StateVector> {
    let amps = psi.amplitudes();
    let k = (0..amps.len())
        .min_by(|&a, &b| amps[a].norm().total_cmp(&amps[b].norm()))
        .ok_or_else(|| FlowError::Precondition("empty state".into()))?;
    let overlap = amps[k].conj();
    let v: Vec<C64> = amps
        .iter()
        .enumerate()
        .map(|(i, &a)| if i == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) } - a * overlap)
        .collect();
    Ok(StateVector::normalized(v)?)
}

/// ρ(t) → e^{iH_s t} ρ(t) e^{−iH_s t} for each sample.
pub fn rotating_frame(model: &ModelSpec, times: &[f64], states: &[DensityMatrix]) -> Result<Vec<DensityMatrix>> {
    times
        .iter()
        .zip(states)
        .map(|(&t, rho)| Ok(rho.transform(&matrix_exponential_unitary(model.hamiltonian(), t)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    /// dD/dt at each grid point.
    pub rate: Vec<f64>,
    /// Running −∫_{ϖ<0} ϖ dt up to each grid point.
    pub cum_loss: Vec<f64>,
    /// Running ∫_{ϖ>0} ϖ dt up to each grid point.
    pub cum_gain: Vec<f64>,
    pub info_loss: f64,
    pub info_gain: f64,
    /// |D(t_N) − (D(t_0) − loss + gain)|
    pub identity_residual: f64,
    /// 2Δt·max|dϖ/dt|, the discretization scale of the rate.
    pub discretization_bound: f64,
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    let step = times[1] - times[0];
    if !(step > 0.0) {
        return Err(FlowError::Precondition("times must increase".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        let s = w[1] - w[0];
        if (s - step).abs() > UNIFORM_GRID_TOL * step.max(w[1].abs()) {
            return Err(FlowError::NonUniformGrid { index: i, step: s, expected: step });
        }
    }
    Ok(step)
}

/// Centered differences inside, one-sided at the ends. With trapezoid
/// weights the rate integrates to exactly D(t_N) − D(t_0).
fn differentiate(values: &[f64], step: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| match k {
            0 => (values[1] - values[0]) / step,
            k if k + 1 == n => (values[n - 1] - values[n - 2]) / step,
            k => (values[k + 1] - values[k - 1]) / (2.0 * step),
        })
        .collect()
}

/// Distance to `reference` along the trajectory and its loss/gain split.
pub fn flow_decomposition(times: &[f64], states: &[DensityMatrix], reference: &DensityMatrix) -> Result<FlowTrajectory> {
    if times.len() < 3 || times.len() != states.len() {
        return Err(FlowError::Precondition(format!(
            "need at least 3 samples with one state each (got {} times, {} states)",
            times.len(),
            states.len()
        )));
    }
    let step = check_uniform(times)?;
    let distance = states.iter().map(|s| trace_distance(s, reference)).collect::<Result<Vec<_>>>()?;
    let rate = differentiate(&distance, step);
    let n = times.len();
    let mut cum_loss = Vec::with_capacity(n);
    let mut cum_gain = Vec::with_capacity(n);
    let (mut loss, mut gain) = (0.0, 0.0);
    for (k, &r) in rate.iter().enumerate() {
        let weight = if k == 0 || k + 1 == n { 0.5 * step } else { step };
        if r > POLICY.flow_rate_floor {
            gain += r * weight;
        } else if r < -POLICY.flow_rate_floor {
            loss -= r * weight;
        }
        cum_loss.push(loss);
        cum_gain.push(gain);
    }
    let identity_residual = (distance[n - 1] - (distance[0] - loss + gain)).abs();
    let rate_change = differentiate(&rate, step);
    let discretization_bound = 2.0 * step * rate_change.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(FlowTrajectory {
        times: times.to_vec(),
        distance,
        rate,
        cum_loss,
        cum_gain,
        info_loss: loss,
        info_gain: gain,
        identity_residual,
        discretization_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use proptest::prelude::*;

    fn qubit_state(c11: f64, c12: C64) -> DensityMatrix {
        DensityMatrix::new(
            ComplexMatrix::from_rows(2, &[C64::new(c11, 0.0), c12, c12.conj(), C64::new(1.0 - c11, 0.0)]).unwrap(),
        )
        .unwrap()
    }

    fn ground() -> DensityMatrix {
        DensityMatrix::from_pure(&StateVector::basis(2, 1))
    }

    #[test]
    fn distance_examples() {
        let a = DensityMatrix::from_pure(&StateVector::basis(2, 0));
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert!((trace_distance(&a, &ground()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(two_level_distance_formula(1.0, C64::new(0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(two_level_distance_formula(0.0, C64::new(0.0, 0.0)).unwrap(), 0.0);
        assert!(two_level_distance_formula(0.9, C64::new(0.9, 0.0)).is_err());
        let other = DensityMatrix::maximally_mixed(3);
        assert!(trace_distance(&a, &other).is_err());
    }

    #[test]
    fn orthogonal_state_is_orthogonal() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::new(vec![C64::new(s, 0.0), C64::new(0.0, s)]).unwrap();
        let perp = orthogonal_state(&psi).unwrap();
        let overlap: C64 = psi.amplitudes().iter().zip(perp.amplitudes()).map(|(a, b)| a.conj() * b).sum();
        assert!(overlap.norm() < 1e-15);
        let e = StateVector::basis(3, 0);
        let perp = orthogonal_state(&e).unwrap();
        assert_eq!(perp.amplitudes()[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn frozen_trajectory() {
        let e = DensityMatrix::from_pure(&StateVector::basis(2, 0));
        let times: Vec<f64> = (0..6).map(|k| 0.5 * k as f64).collect();
        let f = flow_decomposition(&times, &vec![e; 6], &ground()).unwrap();
        assert!(f.rate.iter().all(|&r| r == 0.0));
        assert_eq!((f.info_loss, f.info_gain), (0.0, 0.0));
        assert!(f.distance.iter().all(|&d| (d - 1.0).abs() < 1e-15));
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let e = DensityMatrix::from_pure(&StateVector::basis(2, 0));
        let res = flow_decomposition(&[0.0, 1.0, 3.0], &vec![e; 3], &ground());
        assert!(matches!(res, Err(FlowError::NonUniformGrid { .. })));
    }

    #[test]
    fn identity_holds_for_oscillating_distance() {
        let times: Vec<f64> = (0..400).map(|k| 0.05 * k as f64).collect();
        let states: Vec<DensityMatrix> = times
            .iter()
            .map(|&t| qubit_state(0.5 + 0.5 * (-0.1 * t).exp() * (t.cos()).abs().max(0.2), C64::new(0.0, 0.0)))
            .collect();
        let f = flow_decomposition(&times, &states, &ground()).unwrap();
        assert!(f.info_gain > 0.0 && f.info_loss > 0.0);
        assert!(f.identity_residual < 1e-12);
    }

    proptest! {
        #[test]
        fn formula_matches_eigenvalues(c11 in 0.0f64..1.0, r in 0.0f64..1.0, arg in -3.1f64..3.1) {
            // |c12|² ≤ c11(1 − c11) keeps the state positive
            let c12 = C64::from_polar(r * (c11 * (1.0 - c11)).sqrt(), arg);
            let rho = qubit_state(c11, c12);
            let d = trace_distance(&rho, &ground()).unwrap();
            prop_assert!((d - two_level_distance_formula(c11, c12).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn formula_increases_with_c11(a in 0.0f64..0.99, da in 1e-6f64..0.01, m in 0.0f64..0.1) {
            let c12 = C64::new(m, 0.0);
            let lo = two_level_distance_formula(a, c12).unwrap();
            let hi = two_level_distance_formula(a + da, c12).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn metric_properties(p in 0.0f64..1.0, q in 0.0f64..1.0, s in 0.0f64..1.0, x in -0.4f64..0.4) {
            let a = qubit_state(p, C64::new(x * (p * (1.0 - p)).sqrt(), 0.0));
            let b = qubit_state(q, C64::new(0.0, x * (q * (1.0 - q)).sqrt()));
            let c = qubit_state(s, C64::new(-x * (s * (1.0 - s)).sqrt(), 0.0));
            let ab = trace_distance(&a, &b).unwrap();
            prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-10);
            prop_assert!(ab <= trace_distance(&a, &c).unwrap() + trace_distance(&c, &b).unwrap() + 1e-10);
        }
    }
}
