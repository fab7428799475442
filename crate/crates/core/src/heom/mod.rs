//! Hierarchical equations of motion for a subsystem linearly coupled to a
//! bath whose correlation function is a finite sum of exponentials.
//!
//! For modes p with rates ν_p and link coefficients (a_p, b_p) the auxiliary
//! density operators obey
//!
//! dρ_ℓ/dt = −i[H_s, ρ_ℓ] − (ℓ·ν)ρ_ℓ − i[f, Σ_p ρ_{ℓ+e_p}]
//!           + Σ_p l_p (a_p f ρ_{ℓ−e_p} + b_p ρ_{ℓ−e_p} f) − c[f, [f, ρ_ℓ]]
//!
//! with ADOs beyond depth L set to zero. A correlation term ζe^{−υt} gives a
//! mode (υ, −iζ, 0) and its conjugate C*(t) gives (υ*, 0, iζ*); when υ is
//! real the two share a rate and merge into (υ, −iζ, iζ*).

mod generator;
mod integrate;
mod layout;

use thiserror::Error;

use crate::bath::BathError;
use crate::linalg::LinalgError;

pub use generator::{
    build_finite_t_generator, build_zero_t_generator, HeomGenerator, HeomOptions, LinkConvention, Mode,
};
pub use integrate::{
    converge_in_depth, evolve, evolve_sampled, reduced_state, HierarchyState, StructureDiagnostics, Trajectory,
};
pub use layout::{binomial, HierarchyLayout, NO_NEIGHBOR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeomError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("hierarchy of {requested} ADOs exceeds the budget of {budget}")]
    Capacity { requested: usize, budget: usize },
    #[error("time step {dt} violates the stability guard; use dt < {suggested:.3e}")]
    StepSize { dt: f64, suggested: f64 },
    #[error("integration diverged (non-finite ADO) at t = {t}")]
    Divergence { t: f64 },
    #[error("trace drift {drift:.3e} exceeds tolerance at t = {t}")]
    Integrity { drift: f64, t: f64 },
    #[error("depth convergence failed: L reached {l_max} with last delta {last_delta:.3e}")]
    NotConverged { l_max: usize, last_delta: f64 },
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, HeomError>;
