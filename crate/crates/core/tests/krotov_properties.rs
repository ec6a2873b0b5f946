mod common;

use ndarray::Array2;
use proptest::prelude::*;
use qoctrl_core::dynamics::{ControlSchedule, TimeGrid};
use qoctrl_core::krotov::{default_guess, final_pair, optimize, KrotovConfig, ShapeSpec};
use qoctrl_core::metrology::hs_distance_squared;
use qoctrl_core::scenarios::{Probe, ScenarioSpec, SCENARIO_NAMES};
use rand::Rng;

fn pair_distance(spec: &ScenarioSpec, x: f64, delta: f64, grid: &TimeGrid, u: &ControlSchedule) -> f64 {
    let pair = final_pair(spec, x, delta, grid, u).unwrap();
    hs_distance_squared(pair.rho_minus.matrix(), pair.rho_plus.matrix())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cost_history_never_increases(
        name in prop::sample::select(SCENARIO_NAMES.to_vec()),
        log_lambda in (0.1f64).ln()..(100.0f64).ln(),
    ) {
        let spec = ScenarioSpec::named(name).unwrap();
        let grid = TimeGrid::with_dt(3.0, 0.05).unwrap();
        let config = KrotovConfig {
            lambda: vec![log_lambda.exp()],
            max_iterations: 15,
            ..KrotovConfig::default()
        };
        let guess = default_guess(spec.control_mask.count(), &grid, &config.shape);
        let r = optimize(&spec, spec.nominal_value(), &grid, &guess, &config).unwrap();
        for w in r.cost_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn first_iteration_update_is_the_cost_gradient(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let probe = common::random_state(&mut rng, 2);
        // Every control direction acts at first order here.
        let spec = ScenarioSpec::named("sq-dir-noisy")
            .unwrap()
            .with_probe(Probe::Custom(Some(probe)));
        let grid = TimeGrid::new(0.003, 3).unwrap();
        let delta = rng.gen_range(0.2..0.8);
        let lambda = 1e2;
        let config = KrotovConfig {
            lambda: vec![lambda],
            max_iterations: 1,
            delta,
            ..KrotovConfig::default()
        };
        let guess = ControlSchedule::new(Array2::from_shape_fn((3, 3), |_| rng.gen_range(-1e-3..1e-3))).unwrap();
        let x = spec.nominal_value();
        let r = optimize(&spec, x, &grid, &guess, &config).unwrap();
        let h = 0.1;
        let mut pairs = Vec::new();
        for j in 0..3 {
            for k in 0..3 {
                let mut plus = guess.amplitudes().clone();
                let mut minus = guess.amplitudes().clone();
                plus[[j, k]] += h;
                minus[[j, k]] -= h;
                let d = |a: Array2<f64>| pair_distance(&spec, x, delta, &grid, &ControlSchedule::new(a).unwrap());
                // J_T = 1 - D / 2
                let fd = -(d(plus) - d(minus)) / (4.0 * h);
                let du = r.schedule.get(j, k) - guess.get(j, k);
                pairs.push(((j, k), -du * lambda * delta * delta * grid.dt(), fd));
            }
        }
        // Relative to the gradient as a whole: single entries can vanish.
        let scale = pairs.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
        for ((j, k), krotov, fd) in pairs {
            prop_assert!((krotov - fd).abs() <= 1e-5 * scale, "({j},{k}): {krotov} vs {fd}");
        }
    }
}

fn relaxation_run(spec: &ScenarioSpec, guess: &ControlSchedule, grid: &TimeGrid) -> f64 {
    let config = KrotovConfig {
        max_iterations: 600,
        ..KrotovConfig::default()
    };
    optimize(spec, 1.0, grid, guess, &config).unwrap().qfi_final
}

#[test]
fn achieved_qfi_is_insensitive_to_guess_and_probe() {
    let spec = ScenarioSpec::named("sq-amp-relaxation").unwrap();
    let grid = TimeGrid::with_dt(20.0, 0.05).unwrap();
    let shape = ShapeSpec::default();
    let small = default_guess(3, &grid, &shape);
    let other = ControlSchedule::new(small.amplitudes() * &ndarray::arr2(&[[-10.0], [5.0], [0.0]])).unwrap();
    let base = relaxation_run(&spec, &small, &grid);
    let second = relaxation_run(&spec, &other, &grid);
    assert!((base - second).abs() / base < 0.1, "guesses: {base} vs {second}");
    let from_zero = relaxation_run(&spec.clone().with_probe(Probe::Zero), &small, &grid);
    assert!((base - from_zero).abs() / base < 0.1, "probes: {base} vs {from_zero}");
}
