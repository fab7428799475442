//! Numeric policy: every tolerance the library checks against lives here.

/// Tolerances used by invariant checks throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy {
    /// Hermiticity of operators built from model parameters.
    pub operator_hermitian: f64,
    /// Trace of a density matrix.
    pub density_trace: f64,
    /// Hermiticity of a density matrix.
    pub density_hermitian: f64,
    /// Most negative eigenvalue tolerated in a density matrix.
    pub density_min_eigenvalue: f64,
    /// Norm of a pure state.
    pub state_norm: f64,
    /// Trace drift of the physical ADO during integration.
    pub trace_drift: f64,
    /// Slack allowed when clamping a survival probability into [0, 1].
    pub probability_slack: f64,
    /// Floor below which a decay rate is not considered for extremum detection.
    pub gamma_floor: f64,
    /// Imaginary part tolerated in quantities that must be real.
    pub imaginary_residual: f64,
    /// Flow rates below this magnitude count as neither gain nor loss.
    pub flow_rate_floor: f64,
}

impl NumericPolicy {
    pub const fn standard() -> Self {
        Self {
            operator_hermitian: 1e-12,
            density_trace: 1e-10,
            density_hermitian: 1e-10,
            density_min_eigenvalue: -1e-6,
            state_norm: 1e-12,
            trace_drift: 1e-8,
            probability_slack: 1e-9,
            gamma_floor: 1e-12,
            imaginary_residual: 1e-10,
            flow_rate_floor: 1e-12,
        }
    }
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::standard()
    }
}

/// The policy used by library code when none is supplied.
pub const POLICY: NumericPolicy = NumericPolicy::standard();
