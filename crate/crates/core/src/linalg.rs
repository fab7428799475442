//! Small dense complex linear algebra: operators, density matrices, pure
//! states and the superoperator actions the hierarchy is built from.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::numeric::POLICY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operator is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("state vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("matrix entries length {len} is not a square of dimension {dim}")]
    BadShape { dim: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Square complex matrix of small dimension.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(LinalgError::BadShape { dim, len: entries.len() });
        }
        Ok(Self(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(dim, &c)
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Self {
        assert!(m.is_square(), "ComplexMatrix must be square");
        Self(m)
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.0[(row, col)] = value;
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<C64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from Hermiticity, max |M - M†|.
    pub fn hermitian_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// (M + M†)/2
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.0[(i, j)].norm() <= tol))
    }

    /// Eigenvalues of a Hermitian matrix in ascending order.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let residual = self.hermitian_residual();
        if residual > 1e-8 * self.max_abs().max(1.0) {
            return Err(LinalgError::NotHermitian { residual });
        }
        let eig = self.hermitian_part().0.symmetric_eigen();
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(values)
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dim();
        write!(f, "ComplexMatrix({d}x{d}) [")?;
        for i in 0..d {
            write!(f, "[")?;
            for j in 0..d {
                let z = self.0[(i, j)];
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn sigma_y() -> ComplexMatrix {
    let i = C64::i();
    ComplexMatrix::from_rows(2, &[C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0)]).unwrap()
}

/// Pauli z in the ordered basis (|e>, |g>).
pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
}

/// [A, X] = AX - XA
pub fn commutator_action(a: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_dims(x)?;
    Ok(&(a * x) - &(x * a))
}

/// {A, X} = AX + XA
pub fn anticommutator_action(a: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_dims(x)?;
    Ok(&(a * x) + &(x * a))
}

/// Tr(rho A)
pub fn expectation(rho: &DensityMatrix, a: &ComplexMatrix) -> Result<C64> {
    rho.matrix().check_dims(a)?;
    Ok((rho.matrix() * a).trace())
}

/// exp(i H t) for Hermitian H, through its eigendecomposition.
pub fn matrix_exponential_unitary(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let residual = h.hermitian_residual();
    if residual > POLICY.operator_hermitian * h.max_abs().max(1.0) {
        return Err(LinalgError::NotHermitian { residual });
    }
    let eig = h.hermitian_part().0.symmetric_eigen();
    let phases = DVector::from_iterator(
        h.dim(),
        eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, e * t)),
    );
    let v = &eig.eigenvectors;
    let u = v * DMatrix::from_diagonal(&phases) * v.adjoint();
    Ok(ComplexMatrix(u))
}

/// Normalized pure state of the measured subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    /// Accepts amplitudes whose norm is 1 within the state-norm tolerance.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > POLICY.state_norm {
            return Err(LinalgError::NotNormalized { norm });
        }
        Ok(Self(v))
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(LinalgError::NotNormalized { norm });
        }
        Ok(Self(v / C64::new(norm, 0.0)))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_nalgebra(&self) -> &DVector<C64> {
        &self.0
    }

    /// |psi><psi|
    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * self.0.adjoint())
    }

    /// <psi| M |psi>
    pub fn sandwich(&self, m: &ComplexMatrix) -> Result<C64> {
        if m.dim() != self.dim() {
            return Err(LinalgError::DimensionMismatch { left: m.dim(), right: self.dim() });
        }
        Ok((self.0.adjoint() * m.as_nalgebra() * &self.0)[(0, 0)])
    }

    /// U |psi>
    pub fn evolve(&self, u: &ComplexMatrix) -> Self {
        Self(u.as_nalgebra() * &self.0)
    }
}

/// Physical reduced state: unit trace, Hermitian, positive up to slack.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let trace = matrix.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > POLICY.density_trace {
            return Err(LinalgError::InvalidDensity(format!("trace {trace}")));
        }
        let residual = matrix.hermitian_residual();
        if residual > POLICY.density_hermitian {
            return Err(LinalgError::InvalidDensity(format!("hermitian residual {residual:.3e}")));
        }
        let min = matrix.hermitian_eigenvalues()?.first().copied().unwrap_or(0.0);
        if min < POLICY.density_min_eigenvalue {
            return Err(LinalgError::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(matrix))
    }

    /// Wraps a matrix without validation; for states mid-integration.
    pub fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self(matrix)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        Self(psi.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .hermitian_part()
            .hermitian_eigenvalues()
            .ok()
            .and_then(|v| v.first().copied())
            .unwrap_or(f64::NAN)
    }

    /// U rho U†
    pub fn transform(&self, u: &ComplexMatrix) -> Self {
        Self(&(u * &self.0) * &u.adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
        let diff = (a - b).max_abs();
        assert!(diff < tol, "matrices differ by {diff}: {a:?} vs {b:?}");
    }

    fn ket_e() -> StateVector {
        StateVector::basis(2, 0)
    }

    fn ket_g() -> StateVector {
        StateVector::basis(2, 1)
    }

    fn outer(a: &StateVector, b: &StateVector) -> ComplexMatrix {
        ComplexMatrix::from_nalgebra(a.as_nalgebra() * b.as_nalgebra().adjoint())
    }

    #[test]
    fn commutator_examples() {
        let x = ComplexMatrix::from_rows(2, &[c(0.3, 1.0), c(2.0, -1.0), c(-0.5, 0.0), c(4.0, 2.0)])
            .unwrap();
        let zero = commutator_action(&ComplexMatrix::identity(2), &x).unwrap();
        assert!(zero.max_abs() < 1e-15);

        let got = commutator_action(&sigma_z(), &sigma_x()).unwrap();
        assert_close(&got, &sigma_y().scale(c(0.0, 2.0)), 1e-15);

        let eg = outer(&ket_e(), &ket_g());
        let got = commutator_action(&sigma_z(), &eg).unwrap();
        assert_close(&got, &eg.scale(c(2.0, 0.0)), 1e-15);
    }

    #[test]
    fn anticommutator_examples() {
        let x = ComplexMatrix::from_rows(2, &[c(1.0, 0.0), c(0.0, 3.0), c(2.0, 0.0), c(0.5, 0.5)])
            .unwrap();
        let got = anticommutator_action(&ComplexMatrix::identity(2), &x).unwrap();
        assert_close(&got, &x.scale(c(2.0, 0.0)), 1e-15);
        let got = anticommutator_action(&sigma_z(), &sigma_z()).unwrap();
        assert_close(&got, &ComplexMatrix::identity(2).scale(c(2.0, 0.0)), 1e-15);
        let got = anticommutator_action(&sigma_z(), &sigma_x()).unwrap();
        assert!(got.max_abs() < 1e-15);
    }

    #[test]
    fn superoperators_reject_mismatched_dims() {
        let err = commutator_action(&sigma_z(), &ComplexMatrix::identity(3)).unwrap_err();
        assert_eq!(err, LinalgError::DimensionMismatch { left: 2, right: 3 });
        assert!(anticommutator_action(&ComplexMatrix::identity(3), &sigma_x()).is_err());
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(expectation(&rho, &sigma_z()).is_err());
    }

    #[test]
    fn expectation_examples() {
        let rho_e = DensityMatrix::from_pure(&ket_e());
        assert!((expectation(&rho_e, &sigma_z()).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!(expectation(&mixed, &sigma_z()).unwrap().norm() < 1e-15);
        let plus = StateVector::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let rho_plus = DensityMatrix::from_pure(&plus);
        assert!((expectation(&rho_plus, &sigma_x()).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unitary_examples() {
        let h = ComplexMatrix::from_rows(2, &[c(0.4, 0.0), c(0.1, -0.3), c(0.1, 0.3), c(-1.2, 0.0)])
            .unwrap();
        assert_close(&matrix_exponential_unitary(&h, 0.0).unwrap(), &ComplexMatrix::identity(2), 1e-14);

        let eps = 1.7;
        let h = sigma_z().scale(c(eps / 2.0, 0.0));
        let u = matrix_exponential_unitary(&h, 2.0 * std::f64::consts::PI / eps).unwrap();
        assert_close(&u, &ComplexMatrix::identity(2).scale(c(-1.0, 0.0)), 1e-12);
    }

    #[test]
    fn unitary_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            matrix_exponential_unitary(&m, 1.0),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
        let bad = ComplexMatrix::from_real_rows(2, &[1.5, 0.0, 0.0, -0.5]).unwrap();
        assert!(DensityMatrix::new(bad).is_err());
        assert!(DensityMatrix::new(DensityMatrix::maximally_mixed(3).matrix().clone()).is_ok());
    }

    #[test]
    fn state_vector_norm_enforced() {
        assert!(StateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(StateVector::normalized(vec![c(0.0, 0.0)]).is_err());
        let s = StateVector::normalized(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    fn hermitian(dim: usize, raw: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                if i == j {
                    m.set(i, i, c(raw[k], 0.0));
                    k += 1;
                } else {
                    let z = c(raw[k], raw[k + 1]);
                    m.set(i, j, z);
                    m.set(j, i, z.conj());
                    k += 2;
                }
            }
        }
        m
    }

    proptest! {
        #[test]
        fn commutator_of_hermitians_is_anti_hermitian(
            a in proptest::collection::vec(-2.0f64..2.0, 9),
            x in proptest::collection::vec(-2.0f64..2.0, 9),
        ) {
            let a = hermitian(3, &a);
            let x = hermitian(3, &x);
            let comm = commutator_action(&a, &x).unwrap();
            let sum = &comm + &comm.adjoint();
            prop_assert!(sum.max_abs() < 1e-12);
        }

        #[test]
        fn expectation_is_linear(
            a in proptest::collection::vec(-2.0f64..2.0, 4),
            b in proptest::collection::vec(-2.0f64..2.0, 4),
            alpha in -3.0f64..3.0,
            theta in 0.0f64..3.0,
        ) {
            let a = hermitian(2, &a);
            let b = hermitian(2, &b);
            let psi = StateVector::normalized(vec![c(theta.cos(), 0.0), c(0.3, theta.sin())]).unwrap();
            let rho = DensityMatrix::from_pure(&psi);
            let combo = &a.scale(c(alpha, 0.0)) + &b;
            let lhs = expectation(&rho, &combo).unwrap();
            let rhs = expectation(&rho, &a).unwrap() * alpha + expectation(&rho, &b).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-12);
            prop_assert!(lhs.im.abs() < 1e-10);
        }

        #[test]
        fn unitary_group_property(
            h in proptest::collection::vec(-2.0f64..2.0, 9),
            s in -3.0f64..3.0,
            t in -3.0f64..3.0,
        ) {
            let h = hermitian(3, &h);
            let us = matrix_exponential_unitary(&h, s).unwrap();
            let ut = matrix_exponential_unitary(&h, t).unwrap();
            let ust = matrix_exponential_unitary(&h, s + t).unwrap();
            prop_assert!((&(&us * &ut) - &ust).max_abs() < 1e-9);
            let u1 = matrix_exponential_unitary(&h, 1.0).unwrap();
            prop_assert!((&(&u1.adjoint() * &u1) - &ComplexMatrix::identity(3)).max_abs() < 1e-10);
        }
    }
}
