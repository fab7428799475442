use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::generator::HeomGenerator;
use super::layout::HierarchyLayout;
use super::{HeomError, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix};
use crate::numeric::POLICY;

const ZERO: C64 = C64::new(0.0, 0.0);
/// Times closer than this fraction of a step are treated as equal.
const TIME_EPS: f64 = 1e-12;
/// Step halvings attempted when the trace-drift check fails.
const MAX_HALVINGS: usize = 3;

/// The full stack of ADOs at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    layout: Arc<HierarchyLayout>,
    dim: usize,
    ados: Vec<C64>,
    t: f64,
}

impl HierarchyState {
    /// ρ_0 = ρ_s(0) and every other ADO zero (factorized initial bath).
    pub fn new(gen: &HeomGenerator, rho0: &DensityMatrix) -> Result<Self> {
        let d = gen.dim();
        if rho0.dim() != d {
            return Err(HeomError::InvalidInput(format!(
                "initial state has dimension {}, model has {d}",
                rho0.dim()
            )));
        }
        let mut ados = vec![ZERO; gen.layout().len() * d * d];
        ados[..d * d].copy_from_slice(&rho0.matrix().to_row_major());
        Ok(Self { layout: Arc::clone(gen.layout()), dim: d, ados, t: 0.0 })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn layout(&self) -> &HierarchyLayout {
        &self.layout
    }

    pub fn ados(&self) -> &[C64] {
        &self.ados
    }

    pub fn ado(&self, i: usize) -> ComplexMatrix {
        let d2 = self.dim * self.dim;
        ComplexMatrix::from_rows(self.dim, &self.ados[i * d2..(i + 1) * d2]).expect("slice has d² entries")
    }

    /// ρ_0 as stored, without Hermitization.
    pub fn physical(&self) -> ComplexMatrix {
        self.ado(0)
    }
}

/// Worst-case structure measures of ρ_0 over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureDiagnostics {
    pub max_trace_drift: f64,
    pub max_hermitian_residual: f64,
    pub min_eigenvalue: f64,
}

impl Default for StructureDiagnostics {
    fn default() -> Self {
        Self { max_trace_drift: 0.0, max_hermitian_residual: 0.0, min_eigenvalue: f64::INFINITY }
    }
}

impl StructureDiagnostics {
    pub fn observe(&mut self, rho: &ComplexMatrix) {
        let tr = rho.trace();
        self.max_trace_drift = self.max_trace_drift.max((tr - C64::new(1.0, 0.0)).norm());
        self.max_hermitian_residual = self.max_hermitian_residual.max(rho.hermitian_residual());
        if let Ok(ev) = rho.hermitian_part().hermitian_eigenvalues() {
            self.min_eigenvalue = self.min_eigenvalue.min(ev[0]);
        }
    }

    pub fn merge(&mut self, other: &StructureDiagnostics) {
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_hermitian_residual = self.max_hermitian_residual.max(other.max_hermitian_residual);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    /// Trace drift, Hermiticity and positivity within the numeric policy.
    pub fn acceptable(&self) -> bool {
        self.max_trace_drift < POLICY.trace_drift
            && self.max_hermitian_residual < POLICY.density_hermitian
            && self.min_eigenvalue >= POLICY.density_min_eigenvalue
    }
}

/// ρ_0 sampled at requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub diagnostics: StructureDiagnostics,
    /// Step size that produced the run (after any halving).
    pub dt: f64,
}

impl Trajectory {
    pub fn reduced(&self, k: usize) -> Result<DensityMatrix> {
        reduced_from_raw(&self.states[k], self.times[k])
    }
}

fn reduced_from_raw(raw: &ComplexMatrix, t: f64) -> Result<DensityMatrix> {
    let herm = raw.hermitian_part();
    let tr = herm.trace().re;
    let drift = (raw.trace() - C64::new(1.0, 0.0)).norm();
    if drift > POLICY.trace_drift {
        return Err(HeomError::Integrity { drift, t });
    }
    Ok(DensityMatrix::new_unchecked(herm.scale(C64::new(1.0 / tr, 0.0))))
}

/// ρ_0 Hermitized and trace-renormalized; fails when the trace drifted.
pub fn reduced_state(state: &HierarchyState) -> Result<DensityMatrix> {
    reduced_from_raw(&state.physical(), state.t)
}

struct Workspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { k1: vec![ZERO; n], k2: vec![ZERO; n], k3: vec![ZERO; n], k4: vec![ZERO; n], tmp: vec![ZERO; n] }
    }
}

fn rk4_step(gen: &HeomGenerator, x: &mut [C64], h: f64, ws: &mut Workspace) {
    let Workspace { k1, k2, k3, k4, tmp } = ws;
    gen.derivative(x, k1);
    for ((t, &xv), &k) in tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
        *t = xv + k * (0.5 * h);
    }
    gen.derivative(tmp, k2);
    for ((t, &xv), &k) in tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
        *t = xv + k * (0.5 * h);
    }
    gen.derivative(tmp, k3);
    for ((t, &xv), &k) in tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
        *t = xv + k * h;
    }
    gen.derivative(tmp, k4);
    let w = h / 6.0;
    for i in 0..x.len() {
        x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
    }
}

fn check_guard(gen: &HeomGenerator, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(HeomError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if dt * gen.max_decay() >= 0.5 {
        return Err(HeomError::StepSize { dt, suggested: gen.guard_limit() });
    }
    Ok(())
}

fn all_finite(x: &[C64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// One pass at fixed dt: full steps of dt, the last step before each sample
/// time shortened to land on it.
fn run(
    gen: &HeomGenerator,
    start: &HierarchyState,
    times: &[f64],
    dt: f64,
) -> Result<(HierarchyState, Vec<ComplexMatrix>, StructureDiagnostics)> {
    let mut state = start.clone();
    let mut ws = Workspace::new(state.ados.len());
    let mut samples = Vec::with_capacity(times.len());
    let mut diag = StructureDiagnostics::default();
    for &target in times {
        loop {
            let remaining = target - state.t;
            if remaining <= TIME_EPS * dt {
                break;
            }
            let h = if remaining < dt * (1.0 + TIME_EPS) { remaining } else { dt };
            rk4_step(gen, &mut state.ados, h, &mut ws);
            state.t = if h == remaining { target } else { state.t + h };
            if !all_finite(&state.ados[..gen.dim() * gen.dim()]) {
                return Err(HeomError::Divergence { t: state.t });
            }
        }
        if !all_finite(&state.ados) {
            return Err(HeomError::Divergence { t: state.t });
        }
        let rho = state.physical();
        diag.observe(&rho);
        samples.push(rho);
    }
    Ok((state, samples, diag))
}

fn validate_times(start: f64, times: &[f64]) -> Result<()> {
    let mut last = start;
    for &t in times {
        if !t.is_finite() || t < last {
            return Err(HeomError::InvalidInput(format!(
                "sample times must be non-decreasing from {start}; got {t} after {last}"
            )));
        }
        last = t;
    }
    Ok(())
}

/// Fixed-step RK4 with the trace-drift retry: if ρ_0's trace drifts past
/// the policy the run is repeated with dt halved.
fn run_with_retry(
    gen: &HeomGenerator,
    state: &HierarchyState,
    times: &[f64],
    dt: f64,
) -> Result<(HierarchyState, Vec<ComplexMatrix>, StructureDiagnostics, f64)> {
    check_guard(gen, dt)?;
    validate_times(state.t, times)?;
    let mut step = dt;
    for attempt in 0..=MAX_HALVINGS {
        let (end, samples, diag) = run(gen, state, times, step)?;
        if diag.max_trace_drift <= POLICY.trace_drift {
            return Ok((end, samples, diag, step));
        }
        if attempt == MAX_HALVINGS {
            return Err(HeomError::Integrity { drift: diag.max_trace_drift, t: end.t });
        }
        log::warn!("trace drift {:.3e} at dt = {step}; halving", diag.max_trace_drift);
        step *= 0.5;
    }
    unreachable!("loop returns on its last attempt")
}

/// Integrate to t_final.
pub fn evolve(gen: &HeomGenerator, state: &HierarchyState, t_final: f64, dt: f64) -> Result<HierarchyState> {
    Ok(run_with_retry(gen, state, &[t_final], dt)?.0)
}

/// Integrate through `times`, recording ρ_0 at each.
pub fn evolve_sampled(gen: &HeomGenerator, state: &HierarchyState, times: &[f64], dt: f64) -> Result<Trajectory> {
    let (_, states, diagnostics, used) = run_with_retry(gen, state, times, dt)?;
    Ok(Trajectory { times: times.to_vec(), states, diagnostics, dt: used })
}

/// Smallest L ≥ l_start with |v(L) − v(L−1)| < tol, and v at that L.
pub fn converge_in_depth<F>(mut value: F, l_start: usize, l_max: usize, tol: f64) -> Result<(usize, f64)>
where
    F: FnMut(usize) -> Result<f64>,
{
    if l_start == 0 || l_max < l_start || !(tol > 0.0) {
        return Err(HeomError::InvalidInput(format!(
            "need 1 <= L_start <= L_max and tol > 0 (got {l_start}, {l_max}, {tol})"
        )));
    }
    let mut previous = value(l_start - 1)?;
    let mut last_delta = f64::INFINITY;
    for l in l_start..=l_max {
        let v = value(l)?;
        last_delta = (v - previous).abs();
        if last_delta < tol {
            return Ok((l, v));
        }
        previous = v;
    }
    Err(HeomError::NotConverged { l_max, last_delta })
}
