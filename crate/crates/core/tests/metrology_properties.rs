mod common;

use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use qoctrl_core::dynamics::{propagate_forward, ControlSchedule, LindbladModel, LindbladTerm, TimeGrid};
use qoctrl_core::linalg::{dagger, tensor_product, ComplexMatrix};
use qoctrl_core::metrology::{
    central_difference, concurrence, fidelity, qfi_bloch_single_qubit, qfi_from_pair, qfi_sld,
    StatePair,
};
use qoctrl_core::state::{pauli, pauli_z, state_from_bloch, BlochVector3, DensityMatrix, HermitianOperator};
use rand::Rng;

/// A random single-qubit model whose drift depends linearly on `x`, with
/// its initial state and control schedule.
struct RandomModel {
    generator: ComplexMatrix,
    offset: ComplexMatrix,
    jump: ComplexMatrix,
    rate: f64,
    rho0: DensityMatrix,
    schedule: ControlSchedule,
}

impl RandomModel {
    fn new(rng: &mut impl Rng) -> Self {
        Self {
            generator: common::random_hermitian(rng, 2, 1.0),
            offset: common::random_hermitian(rng, 2, 1.0),
            jump: common::random_matrix(rng, 2, 1.0),
            rate: rng.gen_range(0.01..0.3),
            rho0: common::random_state(rng, 2),
            schedule: ControlSchedule::new(Array2::from_shape_fn((3, 20), |_| rng.gen_range(-1.0..1.0)))
                .unwrap(),
        }
    }

    fn state(&self, x: f64) -> DensityMatrix {
        let drift = &self.generator * Complex64::from(x) + &self.offset;
        let controls = (1..4).map(|a| HermitianOperator::new(pauli(a)).unwrap()).collect();
        let model = LindbladModel::new(
            HermitianOperator::new(drift).unwrap(),
            controls,
            vec![LindbladTerm { operator: self.jump.clone(), rate: self.rate }],
        )
        .unwrap();
        let grid = TimeGrid::new(2.0, 20).unwrap();
        propagate_forward(&model, &self.schedule, &grid, &self.rho0).unwrap().last().clone()
    }
}

fn pair_qfi(m: &RandomModel, x: f64, delta: f64) -> f64 {
    let pair = StatePair::new(m.state(x - delta / 2.0), m.state(x + delta / 2.0), delta).unwrap();
    qfi_from_pair(&pair)
}

fn dephase(rho: &DensityMatrix, p: f64) -> DensityMatrix {
    let z = pauli_z();
    let m = rho.matrix() * Complex64::from(1.0 - p) + z.dot(rho.matrix()).dot(&z) * Complex64::from(p);
    DensityMatrix::new(m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn pair_estimate_converges_to_sld(seed in any::<u64>()) {
        let m = RandomModel::new(&mut common::rng(seed));
        let h = 1e-4;
        let tangent = central_difference(&m.state(0.5 - h), &m.state(0.5 + h), h);
        let sld = qfi_sld(&m.state(0.5), &tangent).unwrap();
        prop_assume!(sld > 1e-3);
        let coarse = (pair_qfi(&m, 0.5, 1e-3) - sld).abs() / sld;
        let fine = (pair_qfi(&m, 0.5, 1e-4) - sld).abs() / sld;
        prop_assert!(coarse < 5e-3, "delta 1e-3: {coarse}");
        prop_assert!(fine < 5e-5, "delta 1e-4: {fine}");
    }

    #[test]
    fn bloch_formula_matches_sld(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let mut v = || rng.gen_range(-1.0..1.0);
        let r = BlochVector3::new(v(), v(), v());
        let r = r.scaled(0.95 * v().abs() / r.norm());
        let dr = BlochVector3::new(v(), v(), v());
        let rho = state_from_bloch(&r).unwrap();
        let dr_arr = dr.to_array();
        let drho = (1..4).fold(ComplexMatrix::zeros((2, 2)), |acc, a| {
            acc + pauli(a) * Complex64::from(dr_arr[a - 1] / 2.0)
        });
        let sld = qfi_sld(&rho, &drho).unwrap();
        let bloch = qfi_bloch_single_qubit(&r, &dr).unwrap();
        prop_assert!((sld - bloch).abs() <= 1e-6 * bloch.max(1e-12), "{sld} vs {bloch}");
    }

    #[test]
    fn dephasing_never_lowers_fidelity(seed in any::<u64>(), p in 0.0..0.5f64) {
        let mut rng = common::rng(seed);
        let a = common::random_state(&mut rng, 2);
        let b = common::random_state(&mut rng, 2);
        prop_assert!(fidelity(&dephase(&a, p), &dephase(&b, p)) >= fidelity(&a, &b) - 1e-9);
    }

    #[test]
    fn concurrence_is_local_unitary_invariant(seed in any::<u64>(), mix in 0.0..1.0f64) {
        let mut rng = common::rng(seed);
        // Mixing a random state with a Bell state gives a spread of concurrences.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&[h, 0.0, 0.0, h].map(Complex64::from)).unwrap();
        let noise = common::random_state(&mut rng, 4);
        let rho = DensityMatrix::new(
            bell.matrix() * Complex64::from(mix) + noise.matrix() * Complex64::from(1.0 - mix),
        )
        .unwrap();
        let u = tensor_product(&common::random_unitary(&mut rng, 2), &common::random_unitary(&mut rng, 2));
        let rotated = DensityMatrix::new(u.dot(rho.matrix()).dot(&dagger(&u))).unwrap();
        let (c, c_rot) = (concurrence(&rho).unwrap(), concurrence(&rotated).unwrap());
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!((c - c_rot).abs() < 1e-9, "{c} vs {c_rot}");
    }
}
