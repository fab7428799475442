use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::layout::{HierarchyLayout, NO_NEIGHBOR};
use super::{HeomError, Result};
use crate::bath::{self, BathDecomposition, SpectralDensity};
use crate::models::ModelSpec;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest subsystem dimension handled by the fixed-size scratch buffers.
pub const MAX_DIM: usize = 8;

/// How the zero-temperature Lorentzian modes are paired with their links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkConvention {
    /// f·X travels with e^{−(λ+iω₀)t}, X·f with e^{−(λ−iω₀)t}. This pairing
    /// reproduces the exact dephasing dynamics for ω₀ ≠ 0.
    #[default]
    Derived,
    /// f·X attached to the rate λ − iω₀. Equivalent to flipping the sign of
    /// ω₀; identical to [`Self::Derived`] when ω₀ = 0.
    SwappedPairing,
    /// Derived pairing with both down-link coefficients negated. Kept as a
    /// mutation fixture: it must fail the dephasing checks.
    MisSigned,
}

/// One exponential of the hierarchy: decay rate and down-link coefficients
/// of X ↦ left·f X + right·X f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub rate: C64,
    pub left: C64,
    pub right: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeomOptions {
    /// Largest number of ADOs a layout may hold.
    pub max_ados: usize,
    /// ADO count above which the derivative is evaluated in parallel.
    pub parallel_threshold: usize,
}

impl Default for HeomOptions {
    fn default() -> Self {
        Self { max_ados: 2_000_000, parallel_threshold: 512 }
    }
}

/// Linear map on row-major vectorized d×d matrices.
#[derive(Debug, Clone, PartialEq)]
enum SuperOp {
    Diagonal(Vec<C64>),
    Dense { n: usize, entries: Vec<C64> },
}

impl SuperOp {
    fn from_matrix(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let diagonal = (0..n).all(|r| (0..n).all(|c| r == c || m[(r, c)] == ZERO));
        if diagonal {
            SuperOp::Diagonal((0..n).map(|k| m[(k, k)]).collect())
        } else {
            let mut entries = Vec::with_capacity(n * n);
            for r in 0..n {
                for c in 0..n {
                    entries.push(m[(r, c)]);
                }
            }
            SuperOp::Dense { n, entries }
        }
    }

    /// out += scale · S x
    #[inline]
    fn apply_add(&self, x: &[C64], scale: C64, out: &mut [C64]) {
        match self {
            SuperOp::Diagonal(d) => {
                for ((o, &s), &xv) in out.iter_mut().zip(d).zip(x) {
                    *o += scale * s * xv;
                }
            }
            SuperOp::Dense { n, entries } => {
                for (r, o) in out.iter_mut().enumerate() {
                    let row = &entries[r * n..(r + 1) * n];
                    let mut acc = ZERO;
                    for (&s, &xv) in row.iter().zip(x) {
                        acc += s * xv;
                    }
                    *o += scale * acc;
                }
            }
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            SuperOp::Diagonal(d) => d.iter().all(|&v| v == ZERO),
            SuperOp::Dense { entries, .. } => entries.iter().all(|&v| v == ZERO),
        }
    }
}

/// Matrix of X ↦ ca·A X + cb·X B on row-major vectorization.
fn left_right(a: &DMatrix<C64>, b: &DMatrix<C64>, ca: C64, cb: C64) -> DMatrix<C64> {
    let d = a.nrows();
    let n = d * d;
    let mut s = DMatrix::from_element(n, n, ZERO);
    for r in 0..d {
        for c in 0..d {
            let row = r * d + c;
            for k in 0..d {
                // (A X)_rc = Σ_k A_rk X_kc
                s[(row, k * d + c)] += ca * a[(r, k)];
                // (X B)_rc = Σ_k X_rk B_kc
                s[(row, r * d + k)] += cb * b[(k, c)];
            }
        }
    }
    s
}

/// Right-hand side of the truncated hierarchy.
#[derive(Debug, Clone)]
pub struct HeomGenerator {
    layout: Arc<HierarchyLayout>,
    model: ModelSpec,
    modes: Vec<Mode>,
    terminator: Option<C64>,
    local: SuperOp,
    up_link: SuperOp,
    down_links: Vec<SuperOp>,
    decay: Vec<C64>,
    max_decay: f64,
    parallel_threshold: usize,
}

impl HeomGenerator {
    /// Generator for arbitrary modes and an optional −c[f,[f,·]] correction.
    pub fn from_modes(
        model: &ModelSpec,
        modes: Vec<Mode>,
        terminator: Option<C64>,
        depth: usize,
        options: HeomOptions,
    ) -> Result<Self> {
        let d = model.dim();
        if d > MAX_DIM {
            return Err(HeomError::InvalidInput(format!("subsystem dimension {d} exceeds {MAX_DIM}")));
        }
        if let Some(bad) = modes.iter().find(|m| !(m.rate.re > 0.0)) {
            return Err(HeomError::InvalidInput(format!("mode rate {} does not decay", bad.rate)));
        }
        let layout = Arc::new(HierarchyLayout::new(modes.len(), depth, options.max_ados)?);
        let h = model.hamiltonian().as_nalgebra();
        let f = model.coupling().as_nalgebra();
        let one = C64::new(1.0, 0.0);

        let mut local = left_right(h, h, -I, I);
        if let Some(c) = terminator {
            let fx = left_right(f, f, one, -one);
            local -= (&fx * &fx) * c;
        }
        let up_link = left_right(f, f, -I, I);
        let down_links = modes.iter().map(|m| SuperOp::from_matrix(&left_right(f, f, m.left, m.right))).collect();

        let decay: Vec<C64> = (0..layout.len())
            .map(|i| layout.multi_index(i).iter().zip(&modes).map(|(&l, m)| m.rate * l as f64).sum())
            .collect();
        let max_decay = decay.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self {
            layout,
            model: model.clone(),
            modes,
            terminator,
            local: SuperOp::from_matrix(&local),
            up_link: SuperOp::from_matrix(&up_link),
            down_links,
            decay,
            max_decay,
            parallel_threshold: options.parallel_threshold,
        })
    }

    pub fn layout(&self) -> &Arc<HierarchyLayout> {
        &self.layout
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn terminator(&self) -> Option<C64> {
        self.terminator
    }

    pub fn depth(&self) -> usize {
        self.layout.depth()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// max |ℓ·ν| over the layout.
    pub fn max_decay(&self) -> f64 {
        self.max_decay
    }

    /// True when every down link vanishes, so the physical ADO evolves unitarily.
    pub fn is_decoupled(&self) -> bool {
        self.down_links.iter().all(SuperOp::is_zero) && self.terminator.is_none_or(|c| c == ZERO)
    }

    /// Largest step allowed by the stability guard dt·max|ℓ·ν| < 0.5.
    pub fn guard_limit(&self) -> f64 {
        if self.max_decay == 0.0 {
            f64::INFINITY
        } else {
            0.5 / self.max_decay
        }
    }

    /// Step size that satisfies the guard with margin and resolves the
    /// fastest coherent frequency of the hierarchy with ~0.05 rad per step.
    pub fn suggested_dt(&self) -> f64 {
        let f = self.model.coupling();
        let f_norm = f.hermitian_eigenvalues().map(|ev| ev.iter().fold(0.0f64, |m, e| m.max(e.abs()))).unwrap_or(0.0);
        let spread = self
            .model
            .hamiltonian()
            .hermitian_eigenvalues()
            .map(|ev| ev.last().copied().unwrap_or(0.0) - ev.first().copied().unwrap_or(0.0))
            .unwrap_or(0.0);
        let strength: f64 = self.modes.iter().map(|m| m.left.norm() + m.right.norm()).sum();
        let link_freq = 2.0 * f_norm * (strength * self.depth().max(1) as f64).sqrt();
        let term_rate = self.terminator.map_or(0.0, |c| 4.0 * c.norm() * f_norm * f_norm);
        let imag_decay = self.decay.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let freq = spread.max(link_freq).max(imag_decay);
        let mut dt = 0.4 / (self.max_decay + term_rate).max(1e-300);
        if freq > 0.0 {
            dt = dt.min(0.05 / freq);
        }
        dt
    }

    fn ado_derivative(&self, i: usize, x: &[C64], out: &mut [C64]) {
        let d2 = out.len();
        let xi = &x[i * d2..(i + 1) * d2];
        out.fill(ZERO);
        self.local.apply_add(xi, C64::new(1.0, 0.0), out);
        let g = self.decay[i];
        for (o, &v) in out.iter_mut().zip(xi) {
            *o -= g * v;
        }
        let mut sum = [ZERO; MAX_DIM * MAX_DIM];
        let sum = &mut sum[..d2];
        let mut any_up = false;
        for p in 0..self.modes.len() {
            let j = self.layout.up(i, p);
            if j != NO_NEIGHBOR {
                any_up = true;
                for (s, &v) in sum.iter_mut().zip(&x[j * d2..(j + 1) * d2]) {
                    *s += v;
                }
            }
        }
        if any_up {
            self.up_link.apply_add(sum, C64::new(1.0, 0.0), out);
        }
        let idx = self.layout.multi_index(i);
        for (p, link) in self.down_links.iter().enumerate() {
            if idx[p] > 0 {
                let j = self.layout.down(i, p);
                link.apply_add(&x[j * d2..(j + 1) * d2], C64::new(idx[p] as f64, 0.0), out);
            }
        }
    }

    /// out = dx/dt for the flattened ADO stack x.
    pub fn derivative(&self, x: &[C64], out: &mut [C64]) {
        let d2 = self.dim() * self.dim();
        debug_assert_eq!(x.len(), self.layout.len() * d2);
        if self.layout.len() >= self.parallel_threshold {
            out.par_chunks_mut(d2).enumerate().for_each(|(i, o)| self.ado_derivative(i, x, o));
        } else {
            out.chunks_mut(d2).enumerate().for_each(|(i, o)| self.ado_derivative(i, x, o));
        }
    }
}

/// Zero-temperature Lorentzian hierarchy with two modes.
pub fn build_zero_t_generator(
    model: &ModelSpec,
    spectrum: &SpectralDensity,
    depth: usize,
    convention: LinkConvention,
    options: HeomOptions,
) -> Result<HeomGenerator> {
    let (gamma0, lambda, omega0) = match *spectrum {
        SpectralDensity::Lorentzian { gamma0, lambda, omega0 } => (gamma0, lambda, omega0),
        _ => return Err(bath::BathError::WrongVariant { expected: "lorentzian" }.into()),
    };
    let zeta = C64::new(0.5 * gamma0 * lambda, 0.0);
    let minus = C64::new(lambda, -omega0);
    let plus = C64::new(lambda, omega0);
    let modes = match convention {
        LinkConvention::Derived => vec![
            Mode { rate: minus, left: ZERO, right: I * zeta },
            Mode { rate: plus, left: -I * zeta, right: ZERO },
        ],
        LinkConvention::SwappedPairing => vec![
            Mode { rate: minus, left: -I * zeta, right: ZERO },
            Mode { rate: plus, left: ZERO, right: I * zeta },
        ],
        LinkConvention::MisSigned => vec![
            Mode { rate: minus, left: ZERO, right: -I * zeta },
            Mode { rate: plus, left: I * zeta, right: ZERO },
        ],
    };
    HeomGenerator::from_modes(model, modes, None, depth, options)
}

/// Modes (υ_q, −iζ_q, iζ_q*) of a decomposition with real rates.
fn real_rate_modes(decomp: &BathDecomposition) -> Result<Vec<Mode>> {
    decomp
        .terms()
        .iter()
        .map(|t| {
            if t.rate.im != 0.0 {
                return Err(HeomError::InvalidInput(format!("Matsubara rate {} is not real", t.rate)));
            }
            Ok(Mode { rate: t.rate, left: -I * t.amplitude, right: I * t.amplitude.conj() })
        })
        .collect()
}

/// Finite-temperature Drude hierarchy with Matsubara terms 0..=epsilon and
/// the time-local correction for the omitted terms.
pub fn build_finite_t_generator(
    model: &ModelSpec,
    spectrum: &SpectralDensity,
    beta: f64,
    epsilon: usize,
    depth: usize,
    options: HeomOptions,
) -> Result<HeomGenerator> {
    let decomp = bath::matsubara_decomposition(spectrum, beta, epsilon)?;
    let c = bath::terminator_coefficient(&decomp)?;
    HeomGenerator::from_modes(model, real_rate_modes(&decomp)?, Some(c), depth, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator_action, ComplexMatrix};
    use crate::models::{biased_qubit, biased_qutrit};

    fn apply(op: &SuperOp, x: &ComplexMatrix) -> ComplexMatrix {
        let d = x.dim();
        let mut out = vec![ZERO; d * d];
        op.apply_add(&x.to_row_major(), C64::new(1.0, 0.0), &mut out);
        ComplexMatrix::from_rows(d, &out).unwrap()
    }

    fn sample(d: usize) -> ComplexMatrix {
        let entries: Vec<C64> = (0..d * d).map(|k| C64::new(0.3 * k as f64 - 0.5, 0.1 * (k * k) as f64)).collect();
        ComplexMatrix::from_rows(d, &entries).unwrap()
    }

    #[test]
    fn superoperators_match_matrix_algebra() {
        let model = biased_qutrit(0.7, 0.4);
        let gen = HeomGenerator::from_modes(
            &model,
            vec![Mode { rate: C64::new(1.0, 0.0), left: C64::new(0.2, -0.1), right: C64::new(0.0, 0.3) }],
            Some(C64::new(0.05, 0.0)),
            1,
            HeomOptions::default(),
        )
        .unwrap();
        let x = sample(3);
        let h = model.hamiltonian();
        let f = model.coupling();
        let fx = commutator_action(f, &x).unwrap();
        let expect_local = &commutator_action(h, &x).unwrap().scale(-I)
            - &commutator_action(f, &fx).unwrap().scale(C64::new(0.05, 0.0));
        assert!((&apply(&gen.local, &x) - &expect_local).max_abs() < 1e-14);
        assert!((&apply(&gen.up_link, &x) - &fx.scale(-I)).max_abs() < 1e-14);
        let expect_down = &(f * &x).scale(C64::new(0.2, -0.1)) + &(&x * f).scale(C64::new(0.0, 0.3));
        assert!((&apply(&gen.down_links[0], &x) - &expect_down).max_abs() < 1e-14);
        assert!(matches!(gen.down_links[0], SuperOp::Diagonal(_)));
    }

    #[test]
    fn zero_t_rates() {
        let model = biased_qubit(1.0, 0.0);
        let j = SpectralDensity::lorentzian(0.5, 0.05, 0.0).unwrap();
        let gen = build_zero_t_generator(&model, &j, 1, LinkConvention::Derived, HeomOptions::default()).unwrap();
        assert_eq!(gen.layout().len(), 3);
        assert_eq!(gen.modes()[0].rate, C64::new(0.05, 0.0));
        assert_eq!(gen.modes()[1].rate, C64::new(0.05, 0.0));
        let j = SpectralDensity::lorentzian(0.5, 0.05, 1.5).unwrap();
        let gen = build_zero_t_generator(&model, &j, 2, LinkConvention::Derived, HeomOptions::default()).unwrap();
        assert_eq!(gen.modes()[0].rate, C64::new(0.05, -1.5));
        assert_eq!(gen.modes()[1].rate, C64::new(0.05, 1.5));
        assert!((gen.max_decay() - 2.0 * C64::new(0.05, 1.5).norm()).abs() < 1e-15);
    }

    #[test]
    fn printed_link_form_matches_swapped_pairing() {
        // (i/4)γ₀λ[(−1)^p {f,X} − [f,X]] for p = 1, 2
        let model = biased_qubit(1.0, 0.3);
        let (g0, lam) = (0.5, 0.2);
        let j = SpectralDensity::lorentzian(g0, lam, 0.7).unwrap();
        let gen =
            build_zero_t_generator(&model, &j, 1, LinkConvention::SwappedPairing, HeomOptions::default()).unwrap();
        let x = sample(2);
        let f = model.coupling();
        for p in 1..=2 {
            let anti = &(f * &x) + &(&x * f);
            let comm = commutator_action(f, &x).unwrap();
            let sign = if p == 1 { -1.0 } else { 1.0 };
            let printed = (&anti.scale(C64::new(sign, 0.0)) - &comm).scale(I * 0.25 * g0 * lam);
            assert!((&apply(&gen.down_links[p - 1], &x) - &printed).max_abs() < 1e-15);
        }
    }

    #[test]
    fn decoupled_generator() {
        let model = biased_qubit(1.0, 0.0);
        let j = SpectralDensity::lorentzian_allow_zero(0.0, 0.3, 0.0).unwrap();
        let gen = build_zero_t_generator(&model, &j, 3, LinkConvention::Derived, HeomOptions::default()).unwrap();
        assert!(gen.is_decoupled());
    }

    #[test]
    fn finite_t_layout_and_terminator() {
        let model = biased_qubit(1.0, -0.1);
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        let gen = build_finite_t_generator(&model, &j, 0.5, 2, 3, HeomOptions::default()).unwrap();
        assert_eq!(gen.layout().len(), 20);
        let c = gen.terminator().unwrap();
        assert!(c.im.abs() < 1e-14 && c.re > 0.0);
        let gen0 = build_finite_t_generator(&model, &j, 0.5, 2, 0, HeomOptions::default()).unwrap();
        assert_eq!(gen0.layout().len(), 1);
        for mode in gen.modes() {
            // merged conjugate pair: right = conj(left)
            assert!((mode.right - mode.left.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn capacity_error() {
        let model = biased_qubit(1.0, 0.0);
        let j = SpectralDensity::ohmic_drude(0.05, 10.0).unwrap();
        let opts = HeomOptions { max_ados: 1000, ..HeomOptions::default() };
        assert!(matches!(
            build_finite_t_generator(&model, &j, 1.0, 11, 6, opts),
            Err(HeomError::Capacity { .. })
        ));
    }
}
