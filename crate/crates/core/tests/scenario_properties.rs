use std::f64::consts::FRAC_PI_2;

use qoctrl_core::dynamics::{ControlSchedule, TimeGrid};
use qoctrl_core::scenarios::{
    analytic_uncontrolled_qfi, simulated_qfi, ControlMask, ScenarioSpec, SCENARIO_NAMES,
};

fn uncontrolled(spec: &ScenarioSpec, t: f64) -> f64 {
    let grid = TimeGrid::with_dt(t, 0.01).unwrap();
    let zeros = ControlSchedule::zeros(spec.control_mask.count(), grid.n_steps());
    simulated_qfi(spec, spec.nominal_value(), &grid, &zeros, 1e-3).unwrap()
}

#[test]
fn simulated_uncontrolled_qfi_matches_closed_forms() {
    let mut covered = 0;
    for name in SCENARIO_NAMES {
        let spec = ScenarioSpec::named(name).unwrap();
        if analytic_uncontrolled_qfi(&spec, 1.0).is_none() {
            continue;
        }
        covered += 1;
        for t in [1.0, 5.0, 10.0, 20.0] {
            let exact = analytic_uncontrolled_qfi(&spec, t).unwrap();
            let sim = uncontrolled(&spec, t);
            assert!((sim - exact).abs() / exact < 5e-3, "{name} T={t}: {sim} vs {exact}");
        }
    }
    assert_eq!(covered, 3);
}

#[test]
fn noiseless_commuting_case_is_heisenberg_limited() {
    let spec = ScenarioSpec {
        noise: vec![],
        ..ScenarioSpec::named("sq-amp-dephasing").unwrap()
    };
    for t in [0.5, 3.0, FRAC_PI_2, 12.0] {
        assert!((analytic_uncontrolled_qfi(&spec, t).unwrap() - t * t).abs() < 1e-12);
        let sim = uncontrolled(&spec, t);
        assert!((sim - t * t).abs() / (t * t) < 1e-3, "T={t}: {sim}");
    }
}

#[test]
fn masking_controls_does_not_change_free_evolution() {
    let spec = ScenarioSpec::named("tq-int-xx").unwrap();
    let partial = spec.clone().with_mask(ControlMask::parse("2:y", 2).unwrap());
    let a = uncontrolled(&spec, 3.0);
    let b = uncontrolled(&partial, 3.0);
    assert!((a - b).abs() < 1e-12 * a);
}
