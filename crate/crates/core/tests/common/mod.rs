#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use qoctrl_core::linalg::{dagger, matrix_exponential, trace, ComplexMatrix};
use qoctrl_core::state::DensityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
    Array2::from_shape_fn((n, n), |_| {
        Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
    })
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
    let a = random_matrix(rng, n, scale);
    (&a + &dagger(&a)) * Complex64::from(0.5)
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let h = random_hermitian(rng, n, 2.0);
    matrix_exponential(&(h * Complex64::new(0.0, 1.0)))
}

/// Full-rank random state `A A^+ / Tr(A A^+)`.
pub fn random_state(rng: &mut impl Rng, n: usize) -> DensityMatrix {
    let a = random_matrix(rng, n, 1.0);
    let m = a.dot(&dagger(&a));
    let tr = trace(&m);
    DensityMatrix::new(m / tr).unwrap()
}
