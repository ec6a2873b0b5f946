//! Dense complex linear algebra for the small matrices used throughout the
//! crate: 2x2 and 4x4 operators and their 4x4 / 16x16 superoperators.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = Array2<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn identity(n: usize) -> ComplexMatrix {
    Array2::from_diag_elem(n, ONE)
}

pub fn zeros(n: usize) -> ComplexMatrix {
    Array2::zeros((n, n))
}

/// Conjugate transpose.
pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diag().sum()
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.dot(b) - b.dot(a)
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.dot(b) + b.dot(a)
}

/// Hilbert-Schmidt inner product `Tr(a^dagger b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && hermiticity_error(m) <= tol
}

/// Elementwise comparison with an absolute tolerance.
pub fn approx_eq(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    a.dim() == b.dim() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() <= tol)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Kronecker product; `a` acts on the leading (slow) index.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            let mut block = out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.zip_mut_with(b, |o, &bv| *o = aij * bv);
        }
    }
    out
}

/// Column-stacking vectorisation, `vec(A rho B) = (B^T (x) A) vec(rho)`.
pub fn vectorize(m: &ComplexMatrix) -> Array1<Complex64> {
    m.t().iter().copied().collect()
}

pub fn unvectorize(v: &Array1<Complex64>, dim: usize) -> ComplexMatrix {
    debug_assert_eq!(v.len(), dim * dim);
    Array2::from_shape_fn((dim, dim), |(i, j)| v[i + j * dim])
}

fn one_norm(m: &ComplexMatrix) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: ComplexMatrix, mut b: ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[[x, col]].norm().total_cmp(&a[[y, col]].norm()))
            .unwrap_or(col);
        if pivot != col {
            for k in 0..n {
                a.swap([col, k], [pivot, k]);
            }
            for k in 0..b.ncols() {
                b.swap([col, k], [pivot, k]);
            }
        }
        let inv = ONE / a[[col, col]];
        for row in col + 1..n {
            let factor = a[[row, col]] * inv;
            if factor == ZERO {
                continue;
            }
            for k in col..n {
                let v = a[[col, k]];
                a[[row, k]] -= factor * v;
            }
            for k in 0..b.ncols() {
                let v = b[[col, k]];
                b[[row, k]] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = ONE / a[[col, col]];
        for k in 0..b.ncols() {
            let mut acc = b[[col, k]];
            for j in col + 1..n {
                acc -= a[[col, j]] * b[[j, k]];
            }
            b[[col, k]] = acc * inv;
        }
    }
    b
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn pade_low(a: &ComplexMatrix, coeffs: &[f64]) -> ComplexMatrix {
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut power = identity(n);
    let mut u = zeros(n);
    let mut v = zeros(n);
    for (k, pair) in coeffs.chunks(2).enumerate() {
        if k > 0 {
            power = power.dot(&a2);
        }
        v.scaled_add(Complex64::from(pair[0]), &power);
        u.scaled_add(Complex64::from(pair[1]), &power);
    }
    let u = a.dot(&u);
    solve(&v - &u, &v + &u)
}

fn pade13(a: &ComplexMatrix) -> ComplexMatrix {
    let b = |k: usize| Complex64::from(PADE13[k]);
    let n = a.nrows();
    let id = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = a6.dot(&inner_u) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = a.dot(&u);
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = a6.dot(&inner_v) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    solve(&v - &u, &v + &u)
}

/// Matrix exponential by scaling and squaring with a Pade approximant whose
/// degree is chosen from the 1-norm (Higham 2005).
pub fn matrix_exponential(m: &ComplexMatrix) -> ComplexMatrix {
    assert!(m.is_square(), "matrix_exponential needs a square matrix");
    let norm = one_norm(m);
    if norm == 0.0 {
        return identity(m.nrows());
    }
    for &(degree, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(m, coeffs);
        }
    }
    let squarings = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = m * Complex64::from(0.5_f64.powi(squarings));
    let mut result = pade13(&scaled);
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Eigenvalues ascend; eigenvectors are the columns of the
/// returned unitary. The input is assumed Hermitian.
pub(crate) fn eigh_unchecked(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = identity(n);
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G acts on the (p, q) plane: G = diag(phase, 1) * [[c, s], [-s, c]].
                let gpp = phase * c;
                let gpq = phase * s;
                let gqp = Complex64::from(-s);
                let gqq = Complex64::from(c);
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp * gpp + akq * gqp;
                    a[[k, q]] = akp * gpq + akq * gqq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = gpp.conj() * apk + gqp.conj() * aqk;
                    a[[q, k]] = gpq.conj() * apk + gqq.conj() * aqk;
                }
                a[[p, q]] = ZERO;
                a[[q, p]] = ZERO;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp * gpp + vkq * gqp;
                    v[[k, q]] = vkp * gpq + vkq * gqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[[x, x]].re.total_cmp(&a[[y, y]].re));
    let values = order.iter().map(|&k| a[[k, k]].re).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| v[[i, order[j]]]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub(crate) fn eigvalsh(h: &ComplexMatrix) -> Vec<f64> {
    eigh_unchecked(h).0
}

/// `V f(Lambda) V^dagger` for a Hermitian matrix.
pub(crate) fn hermitian_function(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let (values, vectors) = eigh_unchecked(h);
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        let fl = f(lam);
        scaled.column_mut(j).mapv_inplace(|z| z * fl);
    }
    scaled.dot(&dagger(&vectors))
}

/// Square root of a positive semidefinite Hermitian matrix; eigenvalues
/// below zero are clamped.
pub(crate) fn psd_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    hermitian_function(m, |lam| lam.max(0.0).sqrt())
}

/// Averages `m` with its conjugate transpose.
pub(crate) fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + &dagger(m)) * Complex64::from(0.5)
}

pub(crate) fn require_square(m: &ComplexMatrix) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}
