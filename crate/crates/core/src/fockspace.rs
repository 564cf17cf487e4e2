//! Truncated Fock-space linear algebra.
//!
//! Operators and states live on the basis `|0>, ..., |dim-1>` with `hbar = 1`
//! and energies measured in units of the Kerr coefficient.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{KpoError, Result};

pub type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-8;

/// Dense complex operator on a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(KpoError::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        check_dim(entries.nrows())?;
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            entries: DMatrix::identity(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    /// Largest entry of `|A - A^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        same_dim(self.dim(), psi.dim())?;
        Ok(StateVector {
            amplitudes: &self.entries * &psi.amplitudes,
        })
    }

    /// `<psi| A |psi>`.
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        same_dim(self.dim(), psi.dim())?;
        Ok(psi.amplitudes.dotc(&(&self.entries * &psi.amplitudes)))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self {
            entries: &self.entries * &other.entries - &other.entries * &self.entries,
        })
    }
}

impl std::ops::Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            entries: &self.entries * &rhs.entries,
        }
    }
}

/// Complex amplitude vector on the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn from_amplitudes(amplitudes: DVector<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        Ok(Self { amplitudes })
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(KpoError::InvalidState(format!(
                "Fock level {n} outside a {dim}-dimensional space"
            )));
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[n] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(KpoError::InvalidState("cannot normalize a null vector".into()));
        }
        Ok(Self {
            amplitudes: self.amplitudes.unscale(norm),
        })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.map(|z| z * factor),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self {
            amplitudes: &self.amplitudes + &other.amplitudes,
        })
    }

    /// `|self><self|`.
    pub fn projector(&self) -> DMatrix<C64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix on the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(entries)?;
        let herm = rho.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(KpoError::InvalidState(format!("not Hermitian: {herm:e}")));
        }
        let trace_err = (rho.trace() - C64::new(1.0, 0.0)).norm();
        if trace_err > TRACE_TOL {
            return Err(KpoError::InvalidState(format!("trace error {trace_err:e}")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(KpoError::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(rho)
    }

    /// Only checks shape; used for integrator output whose invariants are
    /// audited separately.
    pub fn from_matrix_unchecked(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(KpoError::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        check_dim(entries.nrows())?;
        Ok(Self { entries })
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        Self::new(psi.normalized()?.projector())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        hermitian_eigen(&self.entries).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `<psi| rho |phi>`.
    pub fn element(&self, psi: &StateVector, phi: &StateVector) -> Result<C64> {
        same_dim(self.dim(), psi.dim())?;
        same_dim(self.dim(), phi.dim())?;
        Ok(psi.amplitudes.dotc(&(&self.entries * &phi.amplitudes)))
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        same_dim(self.dim(), op.dim())?;
        Ok((&self.entries * op.matrix()).trace())
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(KpoError::InvalidDimension { dim })
    } else {
        Ok(())
    }
}

pub(crate) fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(KpoError::DimensionMismatch { expected, found })
    }
}

pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix (input is symmetrized first).
/// Eigenvalues come back in the solver's order.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues, eig.eigenvectors)
}

/// Square root of a PSD matrix; negative eigenvalues are clamped to zero.
pub(crate) fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(m);
    let roots = DMatrix::from_diagonal(&vals.map(|v| C64::new(v.max(0.0).sqrt(), 0.0)));
    &vecs * roots * vecs.adjoint()
}

pub fn annihilation(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix { entries: m })
}

pub fn creation(dim: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let diag = DVector::from_fn(dim, |n, _| C64::new(n as f64, 0.0));
    Ok(OperatorMatrix {
        entries: DMatrix::from_diagonal(&diag),
    })
}

/// Parity `exp(i pi a^dagger a)`, diagonal `(-1)^n`.
pub fn parity(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let diag = DVector::from_fn(dim, |n, _| C64::new(parity_sign(n), 0.0));
    Ok(OperatorMatrix {
        entries: DMatrix::from_diagonal(&diag),
    })
}

fn parity_sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Smallest dimension accepted by [`displacement`] for a given `|alpha|`.
pub fn min_displacement_dim(alpha_abs: f64) -> f64 {
    alpha_abs * alpha_abs + 6.0 * alpha_abs + 4.0
}

/// Displacement operator `D(alpha) = exp(alpha a^dagger - alpha^* a)`.
///
/// The exponential of the truncated generator is exactly unitary; its entries
/// match the untruncated operator wherever `D` does not reach the cutoff, which
/// the dimension guard keeps true for the low columns.
pub fn displacement(alpha: C64, dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let r = alpha.norm();
    let required = min_displacement_dim(r);
    if (dim as f64) <= required {
        return Err(KpoError::TruncationWarning {
            alpha_abs: r,
            dim,
            required,
        });
    }
    if r == 0.0 {
        return OperatorMatrix::identity(dim);
    }
    // Hermitian generator G = i (alpha a^dagger - alpha^* a), D = exp(-i G).
    let mut g = DMatrix::<C64>::zeros(dim, dim);
    let i = C64::new(0.0, 1.0);
    for n in 1..dim {
        let s = (n as f64).sqrt();
        g[(n, n - 1)] = i * alpha * s;
        g[(n - 1, n)] = -i * alpha.conj() * s;
    }
    let (vals, vecs) = hermitian_eigen(&g);
    let phases = DMatrix::from_diagonal(&vals.map(|v| C64::from_polar(1.0, -v)));
    Ok(OperatorMatrix {
        entries: &vecs * phases * vecs.adjoint(),
    })
}

/// Coherent state `|alpha> = D(alpha)|0>`, renormalized after truncation.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<StateVector> {
    let d = displacement(alpha, dim)?;
    StateVector {
        amplitudes: d.entries.column(0).into_owned(),
    }
    .normalized()
}

/// Wigner function `W(z) = 2 Tr[rho D(z) P D(-z)] / pi` on the given points.
///
/// Uses `D(z) P D(-z) = D(2z) P` and builds the needed block
/// of `D(2z)` column by column from the ladder relations
/// `a^dagger D = D (a^dagger + beta^*)`, which involve only lower indices and
/// so carry no truncation error.
pub fn wigner(rho: &DensityMatrix, grid: &[C64]) -> Vec<f64> {
    wigner_complex(rho, grid).into_iter().map(|w| w.re).collect()
}

/// Same as [`wigner`] but also returns the largest imaginary residue, which
/// vanishes for Hermitian input.
pub fn wigner_with_residue(rho: &DensityMatrix, grid: &[C64]) -> (Vec<f64>, f64) {
    let raw = wigner_complex(rho, grid);
    let residue = raw.iter().map(|w| w.im.abs()).fold(0.0, f64::max);
    (raw.into_iter().map(|w| w.re).collect(), residue)
}

fn wigner_complex(rho: &DensityMatrix, grid: &[C64]) -> Vec<C64> {
    let dim = rho.dim();
    let sqrt_n: Vec<f64> = (0..dim + 1).map(|n| (n as f64).sqrt()).collect();
    let mut prev = vec![C64::new(0.0, 0.0); dim];
    let mut col = vec![C64::new(0.0, 0.0); dim];
    grid.iter()
        .map(|&z| {
            let beta = 2.0 * z;
            let beta_c = beta.conj();
            // column m = 0: D_{n0} = e^{-|beta|^2/2} beta^n / sqrt(n!)
            col[0] = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
            for n in 1..dim {
                col[n] = col[n - 1] * beta / sqrt_n[n];
            }
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..dim {
                if m > 0 {
                    std::mem::swap(&mut prev, &mut col);
                    // D_{n,m} = (sqrt(n) D_{n-1,m-1} - beta^* D_{n,m-1}) / sqrt(m)
                    col[0] = -beta_c * prev[0] / sqrt_n[m];
                    for n in 1..dim {
                        col[n] = (sqrt_n[n] * prev[n - 1] - beta_c * prev[n]) / sqrt_n[m];
                    }
                }
                let mut row_sum = C64::new(0.0, 0.0);
                for n in 0..dim {
                    row_sum += rho.entries[(m, n)] * col[n];
                }
                acc += parity_sign(m) * row_sum;
            }
            2.0 * acc / PI
        })
        .collect()
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clamped to `[0, 1]`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let root = psd_sqrt(&rho.entries);
    let inner = &root * &sigma.entries * &root;
    let (vals, _) = hermitian_eigen(&inner);
    let tr: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ladder_matrix_dim3() {
        let a = annihilation(3).unwrap();
        let m = a.matrix();
        assert_eq!(m[(0, 1)], c(1.0, 0.0));
        assert!((m[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        let nonzero = m.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn annihilation_kills_vacuum() {
        let a = annihilation(8).unwrap();
        let out = a.apply(&StateVector::fock(0, 8).unwrap()).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn rejects_small_dimension() {
        assert_eq!(annihilation(1), Err(KpoError::InvalidDimension { dim: 1 }));
        assert!(matches!(parity(0), Err(KpoError::InvalidDimension { .. })));
    }

    #[test]
    fn canonical_commutator_on_lower_block() {
        let dim = 12;
        let a = annihilation(dim).unwrap();
        let ad = creation(dim).unwrap();
        let comm = a.commutator(&ad).unwrap();
        for i in 0..dim - 1 {
            for j in 0..dim - 1 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((comm.matrix()[(i, j)] - c(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_of_zero_is_identity() {
        let d = displacement(c(0.0, 0.0), 20).unwrap();
        assert_eq!(d, OperatorMatrix::identity(20).unwrap());
    }

    #[test]
    fn displacement_truncation_guard() {
        let err = displacement(c(3.0, 0.0), 20).unwrap_err();
        assert!(matches!(err, KpoError::TruncationWarning { dim: 20, .. }));
    }

    #[test]
    fn displacement_inverse_and_unitarity() {
        let dim = 40;
        let alpha = c(1.3, -0.7);
        let d = displacement(alpha, dim).unwrap();
        let dm = displacement(-alpha, dim).unwrap();
        let prod = &d * &dm;
        let unit = d.matrix() * d.matrix().adjoint();
        let keep = 2 * dim / 3;
        for i in 0..keep {
            for j in 0..keep {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod.matrix()[(i, j)] - c(e, 0.0)).norm() < 1e-8);
                assert!((unit[(i, j)] - c(e, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn coherent_state_matches_closed_form() {
        let dim = 40;
        let alpha = c(1.1, 0.6);
        let psi = coherent_state(alpha, dim).unwrap();
        // closed form e^{-|a|^2/2} a^n / sqrt(n!), built by its own recursion
        let mut amp = c((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..dim {
            if n > 0 {
                amp = amp * alpha / (n as f64).sqrt();
            }
            assert!((psi.amplitudes()[n] - amp).norm() < 1e-12, "n = {n}");
        }
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_eigenrelation() {
        let dim = 40;
        let alpha = c(2.0, 0.0);
        let psi = coherent_state(alpha, dim).unwrap();
        let a_psi = annihilation(dim).unwrap().apply(&psi).unwrap();
        let diff = a_psi.add(&psi.scaled(-alpha)).unwrap();
        assert!(diff.norm() < 1e-8);
    }

    #[test]
    fn coherent_overlap_is_gaussian() {
        let dim = 48;
        let plus = coherent_state(c(3.0, 0.0), dim).unwrap();
        let minus = coherent_state(c(-3.0, 0.0), dim).unwrap();
        let ov = plus.inner(&minus).unwrap();
        assert!((ov.re - (-18f64).exp()).abs() < 1e-12);
        assert!(ov.im.abs() < 1e-15);
    }

    #[test]
    fn coherent_zero_is_vacuum_and_poisson_mode() {
        let vac = coherent_state(c(0.0, 0.0), 10).unwrap();
        assert_eq!(vac, StateVector::fock(0, 10).unwrap());
        let psi = coherent_state(c(3.0, 0.0), 40).unwrap();
        let probs: Vec<f64> = psi.amplitudes().iter().map(|z| z.norm_sqr()).collect();
        // Poisson(9) has equal weight at 8 and 9; nothing else is larger.
        let max = probs.iter().copied().fold(0.0, f64::max);
        assert!((probs[9] - max).abs() < 1e-15 || (probs[8] - max).abs() < 1e-15);
        assert!((probs[8] - probs[9]).abs() < 1e-12);
    }

    #[test]
    fn vacuum_wigner_at_origin() {
        let rho = DensityMatrix::from_pure(&StateVector::fock(0, 10).unwrap()).unwrap();
        let w = wigner(&rho, &[c(0.0, 0.0), c(0.5, 0.0)]);
        assert!((w[0] - 2.0 / PI).abs() < 1e-14);
        assert!((w[1] - 2.0 / PI * (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn coherent_wigner_peaks_at_alpha() {
        let alpha = c(1.5, 0.5);
        let rho = DensityMatrix::from_pure(&coherent_state(alpha, 30).unwrap()).unwrap();
        let grid: Vec<C64> = (0..41)
            .flat_map(|i| (0..41).map(move |j| c(-2.0 + 0.1 * i as f64, -2.0 + 0.1 * j as f64)))
            .collect();
        let w = wigner(&rho, &grid);
        let (best, _) = w
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!((grid[best] - alpha).norm() < 1e-9);
    }

    #[test]
    fn fidelity_basics() {
        let dim = 6;
        let zero = DensityMatrix::from_pure(&StateVector::fock(0, dim).unwrap()).unwrap();
        let one = DensityMatrix::from_pure(&StateVector::fock(1, dim).unwrap()).unwrap();
        assert!((state_fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(state_fidelity(&zero, &one).unwrap() < 1e-12);
        let other = DensityMatrix::new(zero.matrix().clone()).unwrap();
        let bigger = DensityMatrix::from_pure(&StateVector::fock(0, dim + 1).unwrap()).unwrap();
        assert!(state_fidelity(&other, &bigger).is_err());
    }

    #[test]
    fn fidelity_of_pure_states_is_squared_overlap() {
        let dim = 30;
        let psi = coherent_state(c(0.8, 0.1), dim).unwrap();
        let phi = coherent_state(c(-0.2, 0.4), dim).unwrap();
        let f = state_fidelity(
            &DensityMatrix::from_pure(&psi).unwrap(),
            &DensityMatrix::from_pure(&phi).unwrap(),
        )
        .unwrap();
        let ov = psi.inner(&phi).unwrap().norm_sqr();
        assert!((f - ov).abs() < 1e-7, "{f} vs {ov}");
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = c(1.2, 0.0);
        m[(1, 1)] = c(-0.2, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }
}
