//! Krotov optimisation of piecewise-constant controls.
//!
//! Two copies of the system are evolved at neighbouring parameter values
//! `x` and `x + delta` under one shared schedule. The terminal cost
//!
//! ```text
//! J_T = 1 - Tr[(rho_x(T) - rho_{x+delta}(T))^2] / 2
//! ```
//!
//! is lowered by pulling the two final states apart. Each iteration
//! propagates the costates backward under the old controls and then
//! updates the controls interval by interval while propagating the states
//! forward under the new ones:
//!
//! ```text
//! du_j(t) = S(t) / lambda_j * sum_pair Re Tr[chi(t)^+ (-i [Hc_j, rho_new(t)])]
//! ```
//!
//! Costates are seeded with the terminal gradient divided by `delta^2`, so
//! that step sizes and the convergence tolerance are measured on the scale
//! of the Fisher information rather than of `delta^2`. The update for an
//! interval is evaluated at its midpoint, using half-interval propagators.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::dynamics::{
    propagate_forward, ControlSchedule, Generator, LindbladModel, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::{commutator, hs_inner, matrix_exponential, vectorize, ComplexMatrix, I};
use crate::metrology::{StatePair, DEFAULT_DELTA};
use crate::scenarios::{build_model, default_probe, simulated_qfi, ScenarioSpec};
use crate::state::DensityMatrix;

/// Consecutive accepted iterations after which the step weights are halved.
const HALVING_PERIOD: usize = 20;

/// Flat-top envelope with sine-squared ramps of `ramp_fraction * T` at
/// both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSpec {
    pub ramp_fraction: f64,
}

impl Default for ShapeSpec {
    fn default() -> Self {
        Self {
            ramp_fraction: 0.05,
        }
    }
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "ramp fraction must lie in (0, 0.5), got {}",
                self.ramp_fraction
            )));
        }
        Ok(())
    }

    fn value(&self, t: f64, t_final: f64) -> f64 {
        let ramp = self.ramp_fraction * t_final;
        let edge = t.min(t_final - t).max(0.0);
        if edge >= ramp {
            1.0
        } else {
            (std::f64::consts::FRAC_PI_2 * edge / ramp).sin().powi(2)
        }
    }
}

pub fn shape_function(t: f64, grid: &TimeGrid, spec: &ShapeSpec) -> Result<f64> {
    let t_final = grid.t_final();
    let slack = 1e-12 * t_final.max(1.0);
    if !(t >= -slack && t <= t_final + slack) {
        return Err(Error::TimeOutOfRange { t, t_final });
    }
    spec.validate()?;
    Ok(spec.value(t, t_final))
}

/// Shape values at the interval midpoints.
fn midpoint_shape(grid: &TimeGrid, spec: &ShapeSpec) -> Vec<f64> {
    grid.midpoints().map(|t| spec.value(t, grid.t_final())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrotovConfig {
    /// Step weights, either one value for every control or one per control.
    pub lambda: Vec<f64>,
    pub shape: ShapeSpec,
    pub max_iterations: usize,
    /// Stop once `|dJ_T| / delta^2` falls below this.
    pub cost_tolerance: f64,
    pub delta: f64,
    pub amplitude_cap: Option<f64>,
}

impl Default for KrotovConfig {
    fn default() -> Self {
        Self {
            lambda: vec![1.0],
            shape: ShapeSpec::default(),
            max_iterations: 2000,
            cost_tolerance: 1e-6,
            delta: DEFAULT_DELTA,
            amplitude_cap: None,
        }
    }
}

impl KrotovConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_empty() || self.lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {:?}",
                self.lambda
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.cost_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost tolerance must be non-negative, got {}",
                self.cost_tolerance
            )));
        }
        if let Some(cap) = self.amplitude_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "amplitude cap must be positive, got {cap}"
                )));
            }
        }
        self.shape.validate()
    }

    /// Step weight of control `j`.
    pub fn lambda_for(&self, j: usize) -> f64 {
        if self.lambda.len() == 1 {
            self.lambda[0]
        } else {
            self.lambda[j]
        }
    }

    fn lambdas(&self, n_controls: usize) -> Result<Vec<f64>> {
        if self.lambda.len() != 1 && self.lambda.len() != n_controls {
            return Err(Error::ShapeMismatch(format!(
                "{} lambda values for {} controls",
                self.lambda.len(),
                n_controls
            )));
        }
        Ok((0..n_controls).map(|j| self.lambda_for(j)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub schedule: ControlSchedule,
    /// `J_T` of the guess followed by one entry per accepted iteration.
    pub cost_history: Vec<f64>,
    pub qfi_final: f64,
    /// Iterations attempted, including rejected ones.
    pub iterations_used: usize,
    pub converged: bool,
    pub lambda_final: Vec<f64>,
}

/// Terminal costates `(chi_minus, chi_plus) = (rho_minus - rho_plus, rho_plus - rho_minus)`,
/// the negative gradients of `J_T` with respect to each final state.
pub fn costate_boundary(pair: &StatePair) -> (ComplexMatrix, ComplexMatrix) {
    let d = pair.difference();
    let neg = -&d;
    (d, neg)
}

/// `-i [Hc_j, rho]`.
pub fn control_gradient(model: &LindbladModel, j: usize, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    let control = model.controls().get(j).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "control index {j} out of range for {} controls",
            model.n_controls()
        ))
    })?;
    if rho.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    Ok(commutator(control.matrix(), rho.matrix()) * (-I))
}

/// Update of control `j` at node `k`, summed over the members of the pair:
/// `S(t_k) / lambda_j * sum_m Re Tr[chi_m(t_k)^+ (-i [Hc_j, rho_m(t_k)])]`.
pub fn krotov_update(
    chi: &[Trajectory<ComplexMatrix>],
    rho_new: &[Trajectory],
    model: &LindbladModel,
    config: &KrotovConfig,
    j: usize,
    k: usize,
) -> Result<f64> {
    if chi.len() != rho_new.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} costate trajectories for {} state trajectories",
            chi.len(),
            rho_new.len()
        )));
    }
    let mut sum = 0.0;
    let mut grid = None;
    for (c, r) in chi.iter().zip(rho_new) {
        if c.grid != r.grid || grid.is_some_and(|g| g != c.grid) {
            return Err(Error::GridMismatch(
                "costate and state trajectories live on different grids".into(),
            ));
        }
        grid = Some(c.grid);
        let (ck, rk) = match (c.states.get(k), r.states.get(k)) {
            (Some(ck), Some(rk)) => (ck, rk),
            _ => {
                return Err(Error::GridMismatch(format!(
                    "node {k} outside a trajectory of {} nodes",
                    c.states.len().min(r.states.len())
                )))
            }
        };
        sum += hs_inner(ck, &control_gradient(model, j, rk)?).re;
    }
    let Some(grid) = grid else {
        return Ok(0.0);
    };
    let s = shape_function(grid.node(k), &grid, &config.shape)?;
    Ok(s / config.lambda_for(j) * sum)
}

/// Small constant guess `0.01` on every control, switched on and off by
/// the shape.
pub fn default_guess(n_controls: usize, grid: &TimeGrid, shape: &ShapeSpec) -> ControlSchedule {
    let s = midpoint_shape(grid, shape);
    let amplitudes = Array2::from_shape_fn((n_controls, grid.n_steps()), |(_, k)| 0.01 * s[k]);
    ControlSchedule::new(amplitudes).expect("finite amplitudes")
}

/// Smooths the shape-normalised controls with a centred moving average of
/// `window` intervals (truncated at the ends) and reapplies the shape.
pub fn reseed(
    result: &OptimizationResult,
    window: usize,
    grid: &TimeGrid,
    shape: &ShapeSpec,
) -> Result<ControlSchedule> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be at least 1".into()));
    }
    let u = result.schedule.amplitudes();
    if u.ncols() != grid.n_steps() {
        return Err(Error::GridMismatch(format!(
            "schedule has {} intervals, grid has {}",
            u.ncols(),
            grid.n_steps()
        )));
    }
    if window == 1 {
        return Ok(result.schedule.clone());
    }
    let s = midpoint_shape(grid, shape);
    let n = grid.n_steps();
    let mut out = Array2::zeros(u.raw_dim());
    for (j, row) in u.rows().into_iter().enumerate() {
        let base: Vec<f64> = row.iter().zip(&s).map(|(v, sk)| v / sk).collect();
        for k in 0..n {
            let start = k.saturating_sub((window - 1) / 2);
            let end = (start + window).min(n);
            let mean = base[start..end].iter().sum::<f64>() / (end - start) as f64;
            out[[j, k]] = mean * s[k];
        }
    }
    ControlSchedule::new(out)
}

fn matvec(m: &ComplexMatrix, v: &Array1<Complex64>) -> Array1<Complex64> {
    m.dot(v)
}

/// `m^+ v`.
fn adjoint_matvec(m: &ComplexMatrix, v: &Array1<Complex64>) -> Array1<Complex64> {
    let n = m.nrows();
    let mut out = Array1::zeros(n);
    for (row, &vi) in m.rows().into_iter().zip(v) {
        for (o, mij) in out.iter_mut().zip(row) {
            *o += mij.conj() * vi;
        }
    }
    out
}

/// `Re <a, b>` for column-stacked matrices.
fn inner_re(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

struct PairMember {
    generator: Generator,
    /// `exp(dt/2 L(u_k))` for the current schedule.
    half: Vec<ComplexMatrix>,
}

impl PairMember {
    fn half_step(&self, u: &[f64], dt: f64) -> ComplexMatrix {
        matrix_exponential(&(self.generator.superoperator(u) * Complex64::from(0.5 * dt)))
    }
}

/// Squared Hilbert-Schmidt distance of two column-stacked states.
fn distance_squared(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Optimises `guess` for the scenario at parameter value `x`.
///
/// An iteration that raises `J_T` is discarded and retried with doubled
/// step weights, so the recorded history never increases; after
/// [`HALVING_PERIOD`] consecutive accepted iterations the weights are
/// halved again.
pub fn optimize(
    scenario: &ScenarioSpec,
    x: f64,
    grid: &TimeGrid,
    guess: &ControlSchedule,
    config: &KrotovConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let model_a = build_model(scenario, x)?;
    let model_b = build_model(scenario, x + config.delta)?;
    guess.check_against(&model_a, grid)?;
    let n_c = model_a.n_controls();
    let mut lambda = config.lambdas(n_c)?;
    let probe = default_probe(scenario)?;
    let rho0 = vectorize(probe.matrix());
    let n = grid.n_steps();
    let dt = grid.dt();
    let scale = 1.0 / (config.delta * config.delta);
    let shape = midpoint_shape(grid, &config.shape);

    let mut members = [model_a, model_b].map(|m| PairMember {
        generator: Generator::new(&m),
        half: Vec::with_capacity(n),
    });
    let controls: Vec<ComplexMatrix> = (0..n_c)
        .map(|j| members[0].generator.control(j).clone())
        .collect();

    let mut schedule = guess.clone();
    let mut finals = Vec::with_capacity(2);
    for m in members.iter_mut() {
        let mut v = rho0.clone();
        let mut prev: Option<(Vec<f64>, ComplexMatrix)> = None;
        for k in 0..n {
            let u = schedule.interval(k);
            let p = match &prev {
                Some((pu, p)) if *pu == u => p.clone(),
                _ => m.half_step(&u, dt),
            };
            v = matvec(&p, &matvec(&p, &v));
            prev = Some((u, p.clone()));
            m.half.push(p);
        }
        finals.push(v);
    }
    let mut cost = 1.0 - 0.5 * distance_squared(&finals[0], &finals[1]);
    if !cost.is_finite() {
        return Err(Error::NonFiniteCost(0));
    }
    let mut history = vec![cost];
    let mut converged = false;
    let mut iterations = 0;
    let mut streak = 0;

    if n_c > 0 {
        let mut new_half: [Vec<ComplexMatrix>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut chi_mid: [Vec<Array1<Complex64>>; 2] =
            [vec![Array1::zeros(0); n], vec![Array1::zeros(0); n]];
        let mut chi_node: [Vec<Array1<Complex64>>; 2] =
            [vec![Array1::zeros(0); n + 1], vec![Array1::zeros(0); n + 1]];
        while iterations < config.max_iterations {
            iterations += 1;
            // Backward pass under the current schedule.
            let seed = (&finals[0] - &finals[1]).mapv(|z| z * scale);
            for (m, member) in members.iter().enumerate() {
                let mut chi = if m == 0 { seed.clone() } else { -&seed };
                for k in (0..n).rev() {
                    let mid = adjoint_matvec(&member.half[k], &chi);
                    chi_node[m][k + 1] = chi;
                    chi = adjoint_matvec(&member.half[k], &mid);
                    chi_mid[m][k] = mid;
                }
                chi_node[m][0] = chi;
            }
            // Sequential forward pass with immediate updates.
            let mut updated = schedule.clone();
            let mut states = [rho0.clone(), rho0.clone()];
            for buf in new_half.iter_mut() {
                buf.clear();
            }
            for k in 0..n {
                let mids: Vec<Array1<Complex64>> = (0..2)
                    .map(|m| matvec(&members[m].half[k], &states[m]))
                    .collect();
                let ends: Vec<Array1<Complex64>> = (0..2)
                    .map(|m| matvec(&members[m].half[k], &mids[m]))
                    .collect();
                let old_u = schedule.interval(k);
                let mut u = old_u.clone();
                for j in 0..n_c {
                    // Simpson weights over the interval, old controls inside it.
                    let mut g = 0.0;
                    for m in 0..2 {
                        let c = &controls[j];
                        g += (inner_re(&chi_node[m][k], &matvec(c, &states[m]))
                            + 4.0 * inner_re(&chi_mid[m][k], &matvec(c, &mids[m]))
                            + inner_re(&chi_node[m][k + 1], &matvec(c, &ends[m])))
                            / 6.0;
                    }
                    u[j] += shape[k] / lambda[j] * g;
                    if let Some(cap) = config.amplitude_cap {
                        u[j] = u[j].clamp(-cap, cap);
                    }
                }
                for m in 0..2 {
                    let p = if u == old_u {
                        members[m].half[k].clone()
                    } else {
                        members[m].half_step(&u, dt)
                    };
                    states[m] = matvec(&p, &matvec(&p, &states[m]));
                    new_half[m].push(p);
                }
                updated.amplitudes_mut().column_mut(k).assign(&Array1::from(u));
            }
            let new_cost = 1.0 - 0.5 * distance_squared(&states[0], &states[1]);
            if !new_cost.is_finite() || updated.amplitudes().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCost(iterations));
            }
            if new_cost > cost + 1e-13 {
                lambda.iter_mut().for_each(|l| *l *= 2.0);
                streak = 0;
                continue;
            }
            let change = (cost - new_cost) * scale;
            cost = new_cost;
            history.push(cost);
            schedule = updated;
            for m in 0..2 {
                std::mem::swap(&mut members[m].half, &mut new_half[m]);
            }
            let [a, b] = states;
            finals = vec![a, b];
            if change.abs() < config.cost_tolerance {
                converged = true;
                break;
            }
            streak += 1;
            if streak == HALVING_PERIOD {
                lambda.iter_mut().for_each(|l| *l *= 0.5);
                streak = 0;
            }
        }
    } else {
        converged = true;
    }

    let qfi_final = simulated_qfi(scenario, x, grid, &schedule, config.delta)?;
    Ok(OptimizationResult {
        schedule,
        cost_history: history,
        qfi_final,
        iterations_used: iterations,
        converged,
        lambda_final: lambda,
    })
}

/// Final states of the pair at `x` and `x + delta` under `schedule`.
pub fn final_pair(
    scenario: &ScenarioSpec,
    x: f64,
    delta: f64,
    grid: &TimeGrid,
    schedule: &ControlSchedule,
) -> Result<StatePair> {
    let probe = default_probe(scenario)?;
    let run = |v: f64| -> Result<DensityMatrix> {
        let model = build_model(scenario, v)?;
        Ok(propagate_forward(&model, schedule, grid, &probe)?.last().clone())
    };
    StatePair::new(run(x)?, run(x + delta)?, delta)
}
