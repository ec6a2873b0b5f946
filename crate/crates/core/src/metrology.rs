//! Distinguishability and information measures.
//!
//! Three routes to the quantum Fisher information are provided and are
//! cross-checked against each other in tests:
//!
//! * [`qfi_sld`] from a state and its parameter derivative, in the
//!   eigenbasis of the state (the symmetric logarithmic derivative route);
//! * [`qfi_from_pair`] from the Bures distance of two neighbouring states;
//! * [`qfi_bloch_single_qubit`] from a Bloch vector and its derivative.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, dagger, eigh_unchecked, eigvalsh, hermitian_part, tensor_product, ComplexMatrix,
};
use crate::state::{
    bloch_components, generalized_bloch, pauli_y, psd_matrix_sqrt, BlochVector3, DensityMatrix,
};

/// Default parameter offset for finite-difference tangents.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Eigenvalue sums at or below this are treated as null directions of the
/// state in the SLD sum.
pub const SLD_CUTOFF: f64 = 1e-12;

/// Two states evolved at neighbouring parameter values, `delta` apart.
#[derive(Debug, Clone)]
pub struct StatePair {
    pub rho_minus: DensityMatrix,
    pub rho_plus: DensityMatrix,
    pub delta: f64,
}

impl StatePair {
    pub fn new(rho_minus: DensityMatrix, rho_plus: DensityMatrix, delta: f64) -> Result<Self> {
        if rho_minus.dim() != rho_plus.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho_minus.dim(),
                found: rho_plus.dim(),
            });
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pair offset must be positive, got {delta}"
            )));
        }
        Ok(Self {
            rho_minus,
            rho_plus,
            delta,
        })
    }

    pub fn difference(&self) -> ComplexMatrix {
        self.rho_minus.matrix() - self.rho_plus.matrix()
    }
}

/// Hilbert-Schmidt terminal cost `1 - Tr[(rho_a - rho_b)^2] / 2`.
pub fn hs_terminal_cost(pair: &StatePair) -> f64 {
    1.0 - 0.5 * hs_distance_squared(pair.rho_minus.matrix(), pair.rho_plus.matrix())
}

/// `Tr[(a - b)^+ (a - b)]`.
pub fn hs_distance_squared(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Uhlmann fidelity `Tr sqrt(sqrt(a) b sqrt(a))` (root convention).
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    1.0 - infidelity(a, b)
}

/// Bures distance `sqrt(2 - 2 F)`.
pub fn bures_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    (2.0 * infidelity(a, b)).max(0.0).sqrt()
}

/// `1 - F`. For qubits this is evaluated from the Bloch vectors in a form
/// free of cancellation, so it stays accurate when `a` and `b` nearly
/// coincide.
fn infidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    if a.dim() == 2 && b.dim() == 2 {
        let r = bloch_components(a.matrix());
        let d = bloch_components(&(b.matrix() - a.matrix()));
        let mixedness = 1.0 - r.dot(&r);
        if mixedness > 1e-8 {
            let rd = r.dot(&d);
            let eps = ((2.0 * rd + d.dot(&d)) / mixedness).min(1.0);
            let q = (1.0 - eps).sqrt();
            let one_minus_sq = 0.5 * (d.dot(&d) + rd * eps / (1.0 + q)) / (1.0 + q);
            let f = (1.0 - one_minus_sq).max(0.0).sqrt();
            return one_minus_sq / (1.0 + f);
        }
    }
    let root = psd_matrix_sqrt(a);
    let inner = hermitian_part(&root.dot(b.matrix()).dot(&root));
    1.0 - eigvalsh(&inner).iter().map(|l| l.max(0.0).sqrt()).sum::<f64>()
}

/// `4 D_B^2 / delta^2`.
pub fn qfi_from_pair(pair: &StatePair) -> f64 {
    let d = bures_distance(&pair.rho_minus, &pair.rho_plus);
    4.0 * d * d / (pair.delta * pair.delta)
}

/// QFI of a single qubit from its Bloch vector and the vector's derivative:
/// `|dr|^2 + (r.dr)^2 / (1 - |r|^2)`.
///
/// For pure states the second term is taken as zero when `r.dr` vanishes
/// (a tangent derivative); a pure state with a non-tangent derivative is
/// unphysical and rejected.
pub fn qfi_bloch_single_qubit(r: &BlochVector3, dr: &BlochVector3) -> Result<f64> {
    let len2 = r.dot(r);
    if len2 > 1.0 + 1e-9 {
        return Err(Error::BlochOutOfRange(len2.sqrt()));
    }
    let radial = r.dot(dr);
    let mixedness = 1.0 - len2;
    let second = if mixedness <= 1e-12 {
        if radial.abs() < 1e-8 {
            0.0
        } else {
            return Err(Error::NonTangentDerivative(radial));
        }
    } else {
        radial * radial / mixedness
    };
    Ok(dr.dot(dr) + second)
}

/// QFI from the symmetric logarithmic derivative, evaluated in the
/// eigenbasis `{|i>}` of `rho` as
/// `sum_{l_i + l_j > eps} 2 |<i|drho|j>|^2 / (l_i + l_j)`.
pub fn qfi_sld(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<f64> {
    if drho.dim() != (rho.dim(), rho.dim()) {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: drho.nrows(),
        });
    }
    let (values, vectors) = eigh_unchecked(&hermitian_part(rho.matrix()));
    let rotated = dagger(&vectors).dot(&hermitian_part(drho)).dot(&vectors);
    let n = values.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let denom = values[i] + values[j];
            if denom > SLD_CUTOFF {
                total += 2.0 * rotated[[i, j]].norm_sqr() / denom;
            }
        }
    }
    Ok(total)
}

/// Central-difference tangent `(rho_plus - rho_minus) / (2 delta)` for states
/// evaluated at `x - delta` and `x + delta`.
pub fn central_difference(
    rho_minus: &DensityMatrix,
    rho_plus: &DensityMatrix,
    delta: f64,
) -> ComplexMatrix {
    (rho_plus.matrix() - rho_minus.matrix()) / Complex64::from(2.0 * delta)
}

/// Wootters concurrence `max(0, l1 - l2 - l3 - l4)`, with `l_i` the
/// decreasing square roots of the eigenvalues of `rho (Y(x)Y) rho^* (Y(x)Y)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let yy = tensor_product(&pauli_y(), &pauli_y());
    let flipped = yy.dot(&rho.matrix().mapv(|z| z.conj())).dot(&yy);
    // sqrt(rho) flipped sqrt(rho) is Hermitian and shares the spectrum of rho flipped.
    let root = psd_matrix_sqrt(rho);
    let r = hermitian_part(&root.dot(&flipped).dot(&root));
    let mut lambdas: Vec<f64> = eigvalsh(&r).iter().map(|l| l.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// Difference in length and angle (radians) between the generalised Bloch
/// vectors of two two-qubit states. The angle is zero when either vector
/// vanishes.
pub fn bloch_pair_diagnostics(a: &DensityMatrix, b: &DensityMatrix) -> Result<(f64, f64)> {
    let va = generalized_bloch(a)?;
    let vb = generalized_bloch(b)?;
    let (la, lb) = (va.norm(), vb.norm());
    let length_diff = (la - lb).abs();
    let angle = if la < 1e-15 || lb < 1e-15 {
        0.0
    } else {
        (va.dot(&vb) / (la * lb)).clamp(-1.0, 1.0).acos()
    };
    Ok((length_diff, angle))
}

/// Purity-based linear entropy `1 - Tr rho^2`.
pub fn linear_entropy(rho: &DensityMatrix) -> f64 {
    1.0 - linalg::hs_inner(rho.matrix(), rho.matrix()).re
}
