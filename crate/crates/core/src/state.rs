//! State and operator representations: density matrices, Hermitian
//! operators, Pauli matrices and the single- and two-qubit Bloch maps.

use ndarray::{array, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, dagger, eigvalsh, hermiticity_error, identity, tensor_product, trace, ComplexMatrix,
    ONE, ZERO,
};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;
pub const OPERATOR_HERMITIAN_TOL: f64 = 1e-12;

pub fn pauli_x() -> ComplexMatrix {
    array![[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> ComplexMatrix {
    array![[ZERO, -linalg::I], [linalg::I, ZERO]]
}

pub fn pauli_z() -> ComplexMatrix {
    array![[ONE, ZERO], [ZERO, -ONE]]
}

/// `(sigma_x - i sigma_y) / 2`, mapping the `+1` eigenvector of `sigma_z`
/// onto the `-1` eigenvector.
pub fn sigma_minus() -> ComplexMatrix {
    array![[ZERO, ZERO], [ONE, ZERO]]
}

/// Pauli matrix by index: 0 = identity, 1 = x, 2 = y, 3 = z.
pub fn pauli(index: usize) -> ComplexMatrix {
    match index {
        0 => identity(2),
        1 => pauli_x(),
        2 => pauli_y(),
        3 => pauli_z(),
        _ => panic!("Pauli index {index} out of range"),
    }
}

/// Embeds a single-qubit operator on `qubit` (0-based) of an `n_qubits`
/// register; qubit 0 is the leading tensor factor.
pub fn embed(op: &ComplexMatrix, qubit: usize, n_qubits: usize) -> ComplexMatrix {
    let mut out = if qubit == 0 { op.clone() } else { identity(2) };
    for q in 1..n_qubits {
        let factor = if q == qubit { op.clone() } else { identity(2) };
        out = tensor_product(&out, &factor);
    }
    out
}

/// A Hermitian operator (Hamiltonian or observable).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        linalg::require_square(&matrix)?;
        let err = hermiticity_error(&matrix);
        if err > OPERATOR_HERMITIAN_TOL {
            return Err(Error::NotHermitian(err));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }
}

/// Eigenvalues (ascending) and eigenvectors (columns of a unitary) of a
/// Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigendecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

pub fn hermitian_eigendecomposition(h: &HermitianOperator) -> Eigendecomposition {
    let (values, vectors) = linalg::eigh_unchecked(h.matrix());
    Eigendecomposition { values, vectors }
}

/// Checked variant for raw matrices.
pub fn eigendecompose(m: &ComplexMatrix) -> Result<Eigendecomposition> {
    Ok(hermitian_eigendecomposition(&HermitianOperator::new(
        m.clone(),
    )?))
}

/// A one- or two-qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let dim = linalg::require_square(&matrix)?;
        if dim != 2 && dim != 4 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let state = Self { matrix };
        state.check()?;
        Ok(state)
    }

    /// Wraps a matrix known to be a valid state (e.g. the output of a
    /// completely positive map); verified only in debug builds.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        let state = Self { matrix };
        debug_assert!(state.check().is_ok(), "{:?}", state.check());
        state
    }

    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let n = amplitudes.len();
        let matrix = Array2::from_shape_fn((n, n), |(i, j)| {
            amplitudes[i] * amplitudes[j].conj() / (norm * norm)
        });
        Self::new(matrix)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::new(identity(dim) / Complex64::from(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        linalg::hs_inner(&self.matrix, &self.matrix).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&linalg::hermitian_part(&self.matrix))
    }

    /// Checks the density-matrix invariants at the crate tolerances.
    pub fn check(&self) -> Result<()> {
        let herm = hermiticity_error(&self.matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "Hermiticity violated by {herm:.3e}"
            )));
        }
        let tr = trace(&self.matrix);
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = self.eigenvalues()[0];
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    /// `U rho U^dagger`.
    pub fn transformed(&self, unitary: &ComplexMatrix) -> Result<Self> {
        Self::new(unitary.dot(&self.matrix).dot(&dagger(unitary)))
    }
}

/// Principal square root of a state; eigenvalues below zero (round-off
/// from propagation) are clamped to zero.
pub fn psd_matrix_sqrt(rho: &DensityMatrix) -> ComplexMatrix {
    linalg::psd_sqrt(&linalg::hermitian_part(rho.matrix()))
}

/// Single-qubit Bloch vector `r_i = Tr(rho sigma_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector3 {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl BlochVector3 {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Self {
        Self { r1, r2, r3 }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.r1 * other.r1 + self.r2 * other.r2 + self.r3 * other.r3
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(k * self.r1, k * self.r2, k * self.r3)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.r1 - other.r1, self.r2 - other.r2, self.r3 - other.r3)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r1, self.r2, self.r3]
    }
}

pub fn bloch_from_state(rho: &DensityMatrix) -> Result<BlochVector3> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(bloch_components(rho.matrix()))
}

/// Bloch components of any 2x2 matrix (no state validation).
pub(crate) fn bloch_components(m: &ComplexMatrix) -> BlochVector3 {
    let component = |p: ComplexMatrix| trace(&m.dot(&p)).re;
    BlochVector3::new(
        component(pauli_x()),
        component(pauli_y()),
        component(pauli_z()),
    )
}

pub fn state_from_bloch(r: &BlochVector3) -> Result<DensityMatrix> {
    let len = r.norm();
    if len > 1.0 + 1e-9 {
        return Err(Error::BlochOutOfRange(len));
    }
    let m = (identity(2)
        + pauli_x() * Complex64::from(r.r1)
        + pauli_y() * Complex64::from(r.r2)
        + pauli_z() * Complex64::from(r.r3))
        * Complex64::from(0.5);
    DensityMatrix::new(m)
}

/// Coordinates of a two-qubit state in the orthonormal basis
/// `sigma_a (x) sigma_b / 2`, `(a, b) != (0, 0)`, ordered with `a` major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedBlochVector15 {
    pub components: [f64; 15],
}

impl GeneralizedBlochVector15 {
    pub fn dot(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(other.components.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Component along `sigma_a (x) sigma_b / 2`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.components[basis_index(a, b)]
    }
}

fn basis_index(a: usize, b: usize) -> usize {
    assert!(a < 4 && b < 4 && (a, b) != (0, 0));
    4 * a + b - 1
}

/// The 15 basis elements, in component order.
pub fn generalized_bloch_basis() -> Vec<ComplexMatrix> {
    (0..4)
        .flat_map(|a| (0..4).map(move |b| (a, b)))
        .filter(|&ab| ab != (0, 0))
        .map(|(a, b)| tensor_product(&pauli(a), &pauli(b)) * Complex64::from(0.5))
        .collect()
}

pub fn generalized_bloch(rho: &DensityMatrix) -> Result<GeneralizedBlochVector15> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let mut components = [0.0; 15];
    for (c, g) in components.iter_mut().zip(generalized_bloch_basis()) {
        *c = trace(&rho.matrix().dot(&g)).re;
    }
    Ok(GeneralizedBlochVector15 { components })
}

pub fn state_from_generalized_bloch(v: &GeneralizedBlochVector15) -> Result<DensityMatrix> {
    let mut m = identity(4) * Complex64::from(0.25);
    for (c, g) in v.components.iter().zip(generalized_bloch_basis()) {
        m.scaled_add(Complex64::from(*c), &g);
    }
    DensityMatrix::new(m)
}
