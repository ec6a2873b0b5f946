//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any of them failed.
//!
//! Optimisations use dt = 0.05 (0.02 for the noiseless Heisenberg run) so
//! the whole suite fits in a few minutes on one core.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use qoctrl::config::parse_config_str;
use qoctrl::runner::run_robustness;
use qoctrl_core::dynamics::{propagate_forward, ControlSchedule, TimeGrid};
use qoctrl_core::krotov::{default_guess, final_pair, optimize, KrotovConfig, OptimizationResult};
use qoctrl_core::linalg::{dagger, hermiticity_error, trace, ComplexMatrix};
use qoctrl_core::metrology::{
    central_difference, concurrence, hs_distance_squared, qfi_bloch_single_qubit, qfi_from_pair, qfi_sld,
    StatePair,
};
use qoctrl_core::scenarios::{
    build_model, default_probe, simulated_qfi, simulated_qfi_trace, Probe, ScenarioSpec, SCENARIO_NAMES,
};
use qoctrl_core::state::{state_from_bloch, BlochVector3, DensityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OPT_DT: f64 = 0.05;
/// Single-qubit runs use the default budget; two-qubit runs stop at
/// `TWO_QUBIT_ITERATIONS` (16x16 superoperators).
const DEFAULT_ITERATIONS: usize = 2000;
const TWO_QUBIT_ITERATIONS: usize = 100;
/// Uncontrolled maximum of the amplitude-sensing scenarios, `100 e^{-2}`.
const AMP_UNCONTROLLED_MAX: f64 = 13.53352832366127;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spec(name: &str) -> ScenarioSpec {
    ScenarioSpec::named(name).expect("catalog scenario")
}

fn zeros(spec: &ScenarioSpec, grid: &TimeGrid) -> ControlSchedule {
    ControlSchedule::zeros(spec.control_mask.count(), grid.n_steps())
}

fn uncontrolled_qfi(spec: &ScenarioSpec, t: f64, dt: f64) -> f64 {
    let grid = TimeGrid::new(t, (t / dt).ceil() as usize).unwrap();
    simulated_qfi(spec, spec.nominal_value(), &grid, &zeros(spec, &grid), 1e-3).unwrap()
}

/// `(T, QFI)` at the maximum of the uncontrolled curve over `(0, t_max]`.
fn uncontrolled_peak(spec: &ScenarioSpec, t_max: f64, dt: f64) -> (f64, f64) {
    let grid = TimeGrid::with_dt(t_max, dt).unwrap();
    let trace = simulated_qfi_trace(spec, spec.nominal_value(), &grid, &zeros(spec, &grid), 1e-3).unwrap();
    let (k, q) = trace
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (k, &q)| if q > best.1 { (k, q) } else { best });
    (grid.node(k), q)
}

fn controlled(name: &str, t: f64, dt: f64, iterations: usize) -> (OptimizationResult, TimeGrid) {
    let s = spec(name);
    let grid = TimeGrid::with_dt(t, dt).unwrap();
    let config = KrotovConfig {
        max_iterations: iterations,
        ..KrotovConfig::default()
    };
    let guess = default_guess(s.control_mask.count(), &grid, &config.shape);
    (optimize(&s, s.nominal_value(), &grid, &guess, &config).unwrap(), grid)
}

fn analytic_baseline(name: &str, rate: f64) -> Outcome {
    let s = spec(name);
    let mut worst: f64 = 0.0;
    for t in [1.0, 5.0, 10.0, 20.0, 30.0] {
        let exact = t * t * (-rate * t).exp();
        worst = worst.max((uncontrolled_qfi(&s, t, 0.01) - exact).abs() / exact);
    }
    let (t_peak, q_peak) = uncontrolled_peak(&s, 30.0, 0.01);
    check(
        worst < 5e-3 && (t_peak - 10.0).abs() <= 0.05 && (q_peak - 13.53).abs() / 13.53 < 5e-3,
        format!("max rel err {worst:.2e} (< 5e-3), peak {q_peak:.4} at T = {t_peak:.2}"),
    )
}

fn c1() -> Outcome {
    analytic_baseline("sq-amp-dephasing", 0.2)
}

fn c2() -> Outcome {
    analytic_baseline("sq-amp-relaxation", 0.2)
}

fn c3() -> Outcome {
    let s = spec("sq-dir-noiseless");
    let mut worst: f64 = 0.0;
    for t in [FRAC_PI_4, FRAC_PI_2, 2.0, 5.0] {
        worst = worst.max((uncontrolled_qfi(&s, t, 0.01) - 4.0 * t.sin().powi(2)).abs());
    }
    check(worst < 1e-3, format!("max abs err {worst:.2e} (< 1e-3)"))
}

fn c4() -> Outcome {
    let (r30, _) = controlled("sq-amp-dephasing", 30.0, OPT_DT, DEFAULT_ITERATIONS);
    let (r40, _) = controlled("sq-amp-dephasing", 40.0, OPT_DT, DEFAULT_ITERATIONS);
    let (q30, q40) = (r30.qfi_final, r40.qfi_final);
    let ratio = q30 / AMP_UNCONTROLLED_MAX;
    let drift = (q40 - q30).abs() / q30;
    check(
        ratio >= 2.0 && drift <= 0.15,
        format!("QFI(30) = {q30:.3} ({ratio:.3}x, need >= 2x), QFI(40) = {q40:.3} (drift {drift:.3}, need <= 0.15)"),
    )
}

fn c5() -> Outcome {
    let (r, _) = controlled("sq-amp-relaxation", 20.0, OPT_DT, DEFAULT_ITERATIONS);
    let ratio = r.qfi_final / AMP_UNCONTROLLED_MAX;
    check(
        ratio >= 4.0,
        format!("QFI(20) = {:.3} ({ratio:.3}x, need >= 4x)", r.qfi_final),
    )
}

fn c6() -> Outcome {
    let (r, _) = controlled("sq-dir-noiseless", 10.0, 0.02, DEFAULT_ITERATIONS);
    check(
        r.qfi_final >= 320.0,
        format!("QFI(10) = {:.2} (need >= 320)", r.qfi_final),
    )
}

fn c7() -> Outcome {
    let (t_peak, q_peak) = uncontrolled_peak(&spec("sq-dir-noisy"), 30.0, 0.01);
    let (r, _) = controlled("sq-dir-noisy", 30.0, OPT_DT, DEFAULT_ITERATIONS);
    let ratio = r.qfi_final / q_peak;
    check(
        ratio >= 5.0,
        format!(
            "QFI(30) = {:.3}, uncontrolled max {q_peak:.4} at T = {t_peak:.2} ({ratio:.2}x, need >= 5x)",
            r.qfi_final
        ),
    )
}

struct TwoQubitRun {
    result: OptimizationResult,
    grid: TimeGrid,
}

fn c8(xx: &TwoQubitRun) -> Outcome {
    let (t_peak, q_peak) = uncontrolled_peak(&spec("tq-int-xx"), 30.0, 0.02);
    let ratio = xx.result.qfi_final / q_peak;
    check(
        ratio >= 3.0,
        format!(
            "QFI(20) = {:.3}, uncontrolled max {q_peak:.3} at T = {t_peak:.2} ({ratio:.2}x, need >= 3x)",
            xx.result.qfi_final
        ),
    )
}

fn robustness_window(name: &str, lo: f64, hi: f64) -> Result<String, String> {
    let config = parse_config_str(&format!(
        "scenario = \"{name}\"\nT = 15.0\ndt = {OPT_DT}\nmax_iterations = 300\nsweep = \"robustness\"\nrobustness_range = [{lo}, {hi}, 11]\n"
    ))
    .unwrap();
    let table = run_robustness(&config).unwrap().table;
    let x_hat = table.numbers("x_hat").unwrap();
    let ctl = table.numbers("qfi_controlled").unwrap();
    let unc = table.numbers("qfi_uncontrolled").unwrap()[0];
    let (k, worst) = ctl
        .iter()
        .enumerate()
        .fold((0, f64::MAX), |w, (k, &q)| if q < w.1 { (k, q) } else { w });
    let detail = format!(
        "{name}: min controlled {worst:.3} at x_hat = {:.2} vs uncontrolled {unc:.3}",
        x_hat[k]
    );
    if worst >= unc {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9() -> Outcome {
    let a = robustness_window("sq-amp-dephasing", 0.9, 1.1);
    let b = robustness_window("sq-amp-relaxation", 0.8, 1.2);
    let ok = a.is_ok() && b.is_ok();
    let text = |r: Result<String, String>| r.unwrap_or_else(|e| e);
    check(ok, format!("{}; {}", text(a), text(b)))
}

fn c10() -> Outcome {
    let mut worst = f64::MIN;
    for name in SCENARIO_NAMES {
        let s = spec(name);
        let grid = TimeGrid::with_dt(5.0, OPT_DT).unwrap();
        let config = KrotovConfig {
            max_iterations: 30,
            ..KrotovConfig::default()
        };
        let guess = default_guess(s.control_mask.count(), &grid, &config.shape);
        let r = optimize(&s, s.nominal_value(), &grid, &guess, &config).unwrap();
        for w in r.cost_history.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    check(
        worst <= 1e-9,
        format!("largest per-iteration change of J_T over 8 scenarios: {worst:.2e} (<= 1e-9)"),
    )
}

fn random_bloch(rng: &mut ChaCha8Rng) -> BlochVector3 {
    loop {
        let r = BlochVector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if r.norm() < 0.95 {
            return r;
        }
    }
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let delta = 1e-3;
    let (mut pair_err, mut bloch_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let r = random_bloch(&mut rng);
        let dr = BlochVector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let at = |s: f64| {
            let [a, b, c] = r.to_array();
            let [da, db, dc] = dr.to_array();
            state_from_bloch(&BlochVector3::new(a + s * da, b + s * db, c + s * dc)).unwrap()
        };
        let (minus, plus) = (at(-delta / 2.0), at(delta / 2.0));
        let sld = qfi_sld(&at(0.0), &central_difference(&minus, &plus, delta / 2.0)).unwrap();
        let pair = qfi_from_pair(&StatePair::new(minus, plus, delta).unwrap());
        let bloch = qfi_bloch_single_qubit(&r, &dr).unwrap();
        pair_err = pair_err.max((pair - sld).abs() / sld);
        bloch_err = bloch_err.max((bloch - sld).abs() / sld);
    }
    check(
        pair_err < 5e-3 && bloch_err < 1e-6,
        format!("pair vs sld {pair_err:.2e} (< 5e-3), Bloch vs sld {bloch_err:.2e} (< 1e-6), 50 states"),
    )
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let a = Array2::from_shape_fn((n, n), |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = a.dot(&dagger(&a));
    let tr = trace(&m);
    DensityMatrix::new(m / tr).unwrap()
}

fn c12() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probe = random_state(&mut rng, 2);
        let s = spec("sq-dir-noisy").with_probe(Probe::Custom(Some(probe)));
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
        let x = s.nominal_value();
        let r = optimize(&s, x, &grid, &guess, &config).unwrap();
        let distance = |a: Array2<f64>| {
            let p = final_pair(&s, x, delta, &grid, &ControlSchedule::new(a).unwrap()).unwrap();
            hs_distance_squared(p.rho_minus.matrix(), p.rho_plus.matrix())
        };
        let h = 0.1;
        let mut pairs = Vec::new();
        for j in 0..3 {
            for k in 0..3 {
                let mut plus = guess.amplitudes().clone();
                let mut minus = guess.amplitudes().clone();
                plus[[j, k]] += h;
                minus[[j, k]] -= h;
                // J_T = 1 - D / 2
                let fd = -(distance(plus) - distance(minus)) / (4.0 * h);
                let du = r.schedule.get(j, k) - guess.get(j, k);
                pairs.push((-du * lambda * delta * delta * grid.dt(), fd));
            }
        }
        let scale = pairs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        for (krotov, fd) in pairs {
            worst = worst.max((krotov - fd).abs() / scale);
        }
    }
    check(
        worst <= 1e-5,
        format!("max |krotov - fd| / max|fd| = {worst:.2e} over 20 toys (<= 1e-5)"),
    )
}

fn pure(amplitudes: &[f64]) -> DensityMatrix {
    let v: Vec<Complex64> = amplitudes.iter().map(|&a| Complex64::from(a)).collect();
    DensityMatrix::pure(&v).unwrap()
}

fn c13() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut tr_err, mut herm_err, mut min_eig): (f64, f64, f64) = (0.0, 0.0, f64::MAX);
    let mut count = 0;
    for name in SCENARIO_NAMES {
        let s = spec(name);
        let grid = TimeGrid::with_dt(10.0, OPT_DT).unwrap();
        let controls = ControlSchedule::new(Array2::from_shape_fn((s.control_mask.count(), grid.n_steps()), |_| {
            rng.gen_range(-2.0..2.0)
        }))
        .unwrap();
        for sched in [zeros(&s, &grid), controls] {
            let model = build_model(&s, s.nominal_value()).unwrap();
            let traj = propagate_forward(&model, &sched, &grid, &default_probe(&s).unwrap()).unwrap();
            for rho in &traj.states {
                tr_err = tr_err.max((trace(rho.matrix()) - Complex64::from(1.0)).norm());
                herm_err = herm_err.max(hermiticity_error(rho.matrix()));
                min_eig = min_eig.min(rho.eigenvalues()[0]);
                count += 1;
            }
        }
    }
    let h = FRAC_1_SQRT_2;
    let phi_plus = pure(&[h, 0.0, 0.0, h]);
    let plus_plus = pure(&[0.5, 0.5, 0.5, 0.5]);
    let werner: ComplexMatrix = phi_plus.matrix() * Complex64::from(0.5)
        + Array2::<Complex64>::eye(4) * Complex64::from(0.125);
    let werner = DensityMatrix::new(werner).unwrap();
    let c = [
        concurrence(&phi_plus).unwrap() - 1.0,
        concurrence(&plus_plus).unwrap(),
        concurrence(&werner).unwrap() - 0.25,
    ];
    let c_err = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check(
        tr_err <= 1e-9 && herm_err <= 1e-10 && min_eig >= -1e-9 && c_err <= 1e-9,
        format!(
            "{count} states: trace err {tr_err:.1e}, Hermiticity err {herm_err:.1e}, min eigenvalue {min_eig:.1e}; concurrence err {c_err:.1e}"
        ),
    )
}

fn concurrence_trace(name: &str, grid: &TimeGrid, schedule: &ControlSchedule) -> Vec<f64> {
    let s = spec(name);
    let model = build_model(&s, s.nominal_value()).unwrap();
    let traj = propagate_forward(&model, schedule, grid, &default_probe(&s).unwrap()).unwrap();
    traj.states.iter().map(|rho| concurrence(rho).unwrap()).collect()
}

fn c14(xx: &TwoQubitRun) -> Outcome {
    let (zz, zz_grid) = controlled("tq-int-zz", 20.0, OPT_DT, TWO_QUBIT_ITERATIONS);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let peak = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let zz_unc = concurrence_trace("tq-int-zz", &zz_grid, &zeros(&spec("tq-int-zz"), &zz_grid));
    let zz_ctl = concurrence_trace("tq-int-zz", &zz_grid, &zz.schedule);
    let xx_unc = concurrence_trace("tq-int-xx", &xx.grid, &zeros(&spec("tq-int-xx"), &xx.grid));
    let xx_ctl = concurrence_trace("tq-int-xx", &xx.grid, &xx.result.schedule);
    let (a, b) = (mean(&zz_ctl), mean(&zz_unc));
    let (c, d) = (peak(&xx_ctl), peak(&xx_unc));
    check(
        a < b && c > d,
        format!("ZZ mean C controlled {a:.4} < uncontrolled {b:.4}; XX peak C controlled {c:.4} > uncontrolled {d:.4}"),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |id: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let outcome = run();
        let secs = t0.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("C{id:02} {tag} {name}: {detail} [{secs:.1}s]");
    };
    report(1, "analytic dephasing baseline", &mut c1);
    report(2, "analytic relaxation baseline", &mut c2);
    report(3, "non-commuting noiseless baseline", &mut c3);
    report(4, "controlled dephasing", &mut c4);
    report(5, "controlled relaxation", &mut c5);
    report(6, "near-Heisenberg recovery", &mut c6);
    report(7, "noisy non-commuting", &mut c7);
    let (result, grid) = controlled("tq-int-xx", 20.0, OPT_DT, TWO_QUBIT_ITERATIONS);
    let xx = TwoQubitRun { result, grid };
    report(8, "two-qubit XX interaction estimation", &mut || c8(&xx));
    report(9, "robustness windows", &mut c9);
    report(10, "Krotov monotonicity", &mut c10);
    report(11, "QFI estimator equivalence", &mut c11);
    report(12, "gradient oracle", &mut c12);
    report(13, "state sanity", &mut c13);
    report(14, "entanglement phenomenology", &mut || c14(&xx));
    println!(
        "acceptance: {}/14 passed in {:.0}s",
        14 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
