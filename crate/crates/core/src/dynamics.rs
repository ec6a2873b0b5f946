//! Controlled Lindblad dynamics with piecewise-constant controls.
//!
//! The generator acting on a density matrix is
//!
//! ```text
//! L_u(rho) = -i [H0 + sum_j u_j Hc_j, rho] + sum_k g_k (L_k rho L_k^+ - 1/2 {L_k^+ L_k, rho})
//! ```
//!
//! Each interval of the time grid carries one constant control vector, so
//! propagation over an interval is the exact superoperator exponential
//! `exp(dt L_u)` acting on the column-stacked state. Costates evolve under
//! the Hilbert-Schmidt adjoint of the same map, backward in time.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    anticommutator, commutator, dagger, identity, matrix_exponential, tensor_product, unvectorize,
    vectorize, ComplexMatrix, I,
};
use crate::state::{DensityMatrix, HermitianOperator};

/// Uniform time grid: states live on the `n_steps + 1` nodes, controls on
/// the `n_steps` interval midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be positive".into()));
        }
        Ok(Self { t_final, n_steps })
    }

    /// Grid with the step closest to `dt` that divides `t_final` evenly.
    pub fn with_dt(t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let n_steps = (t_final / dt).round().max(1.0) as usize;
        Self::new(t_final, n_steps)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_steps).map(move |k| self.midpoint(k))
    }
}

/// One dissipative channel `rate * (L rho L^+ - 1/2 {L^+ L, rho})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladTerm {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    drift: HermitianOperator,
    controls: Vec<HermitianOperator>,
    lindblads: Vec<LindbladTerm>,
}

impl LindbladModel {
    pub fn new(
        drift: HermitianOperator,
        controls: Vec<HermitianOperator>,
        lindblads: Vec<LindbladTerm>,
    ) -> Result<Self> {
        let dim = drift.dim();
        for c in &controls {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.dim(),
                });
            }
        }
        for term in &lindblads {
            if term.operator.dim() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: term.operator.nrows(),
                });
            }
            if !(term.rate >= 0.0 && term.rate.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "Lindblad rate must be non-negative, got {}",
                    term.rate
                )));
            }
        }
        Ok(Self {
            drift,
            controls,
            lindblads,
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn drift(&self) -> &HermitianOperator {
        &self.drift
    }

    pub fn controls(&self) -> &[HermitianOperator] {
        &self.controls
    }

    pub fn lindblads(&self) -> &[LindbladTerm] {
        &self.lindblads
    }

    /// `H0 + sum_j u_j Hc_j`.
    pub fn hamiltonian(&self, u: &[f64]) -> Result<ComplexMatrix> {
        self.check_controls(u)?;
        let mut h = self.drift.matrix().clone();
        for (c, &uj) in self.controls.iter().zip(u) {
            h.scaled_add(Complex64::from(uj), c.matrix());
        }
        Ok(h)
    }

    fn check_controls(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.controls.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} control values for {} control Hamiltonians",
                u.len(),
                self.controls.len()
            )));
        }
        Ok(())
    }

    fn check_operand(&self, m: &ComplexMatrix) -> Result<()> {
        if m.dim() != (self.dim(), self.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(())
    }
}

/// Control amplitudes, one row per control and one column per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    amplitudes: Array2<f64>,
}

impl ControlSchedule {
    pub fn new(amplitudes: Array2<f64>) -> Result<Self> {
        if amplitudes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "control amplitudes must be finite".into(),
            ));
        }
        Ok(Self { amplitudes })
    }

    pub fn zeros(n_controls: usize, n_steps: usize) -> Self {
        Self {
            amplitudes: Array2::zeros((n_controls, n_steps)),
        }
    }

    pub fn n_controls(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.amplitudes.ncols()
    }

    pub fn amplitudes(&self) -> &Array2<f64> {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut Array2<f64> {
        &mut self.amplitudes
    }

    /// Control vector on interval `k`.
    pub fn interval(&self, k: usize) -> Vec<f64> {
        self.amplitudes.column(k).to_vec()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.amplitudes[[j, k]]
    }

    pub fn max_abs(&self) -> f64 {
        self.amplitudes.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_against(&self, model: &LindbladModel, grid: &TimeGrid) -> Result<()> {
        if self.n_controls() != model.n_controls() {
            return Err(Error::ShapeMismatch(format!(
                "schedule has {} controls, model has {}",
                self.n_controls(),
                model.n_controls()
            )));
        }
        if self.n_steps() != grid.n_steps() {
            return Err(Error::ShapeMismatch(format!(
                "schedule has {} intervals, grid has {}",
                self.n_steps(),
                grid.n_steps()
            )));
        }
        Ok(())
    }
}

/// States on the nodes of a grid. Forward trajectories hold density
/// matrices; costate trajectories hold general Hermitian matrices.
#[derive(Debug, Clone)]
pub struct Trajectory<S = DensityMatrix> {
    pub states: Vec<S>,
    pub grid: TimeGrid,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory is never empty")
    }
}

/// `L_u(rho)` evaluated directly on the matrix.
pub fn lindbladian_apply(
    model: &LindbladModel,
    u: &[f64],
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    model.check_operand(rho)?;
    let h = model.hamiltonian(u)?;
    let mut out = commutator(&h, rho) * (-I);
    for term in model.lindblads() {
        let l = &term.operator;
        let ld = dagger(l);
        let jump = l.dot(rho).dot(&ld);
        let decay = anticommutator(&ld.dot(l), rho) * Complex64::from(0.5);
        out.scaled_add(Complex64::from(term.rate), &(jump - decay));
    }
    Ok(out)
}

/// Hilbert-Schmidt adjoint `L_u^+(a)`, defined by `Tr(a^+ L(b)) = Tr(L^+(a)^+ b)`.
pub fn adjoint_lindbladian_apply(
    model: &LindbladModel,
    u: &[f64],
    a: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    model.check_operand(a)?;
    let h = model.hamiltonian(u)?;
    let mut out = commutator(&h, a) * I;
    out += &dissipator_adjoint(model, a);
    Ok(out)
}

fn dissipator_adjoint(model: &LindbladModel, a: &ComplexMatrix) -> ComplexMatrix {
    let mut out = Array2::zeros(a.raw_dim());
    for term in model.lindblads() {
        let l = &term.operator;
        let ld = dagger(l);
        let jump = ld.dot(a).dot(l);
        let decay = anticommutator(&ld.dot(l), a) * Complex64::from(0.5);
        out.scaled_add(Complex64::from(term.rate), &(jump - decay));
    }
    out
}

/// Right-hand side of the costate equation,
/// `d chi / dt = -i [H, chi] - L_D^+(chi)`, i.e. `-L_u^+(chi)`.
pub fn adjoint_generator_apply(
    model: &LindbladModel,
    u: &[f64],
    chi: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    model.check_operand(chi)?;
    let h = model.hamiltonian(u)?;
    Ok(commutator(&h, chi) * (-I) - dissipator_adjoint(model, chi))
}

/// Superoperator `-i [h, .]` in the column-stacking convention.
pub(crate) fn hamiltonian_superoperator(h: &ComplexMatrix) -> ComplexMatrix {
    let id = identity(h.nrows());
    (tensor_product(&id, h) - tensor_product(&h.t().to_owned(), &id)) * (-I)
}

fn dissipator_superoperator(term: &LindbladTerm) -> ComplexMatrix {
    let l = &term.operator;
    let id = identity(l.nrows());
    let ldl = dagger(l).dot(l);
    let jump = tensor_product(&l.mapv(|z| z.conj()), l);
    let decay = tensor_product(&id, &ldl) + tensor_product(&ldl.t().to_owned(), &id);
    (jump - decay * Complex64::from(0.5)) * Complex64::from(term.rate)
}

/// The generator split into its control-independent part and one
/// superoperator per control, `L_u = drift + sum_j u_j controls[j]`.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    drift: ComplexMatrix,
    controls: Vec<ComplexMatrix>,
}

impl Generator {
    pub fn new(model: &LindbladModel) -> Self {
        let mut drift = hamiltonian_superoperator(model.drift().matrix());
        for term in model.lindblads() {
            drift += &dissipator_superoperator(term);
        }
        let controls = model
            .controls()
            .iter()
            .map(|c| hamiltonian_superoperator(c.matrix()))
            .collect();
        Self {
            dim: model.dim(),
            drift,
            controls,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn control(&self, j: usize) -> &ComplexMatrix {
        &self.controls[j]
    }

    pub fn superoperator(&self, u: &[f64]) -> ComplexMatrix {
        let mut l = self.drift.clone();
        for (c, &uj) in self.controls.iter().zip(u) {
            if uj != 0.0 {
                l.scaled_add(Complex64::from(uj), c);
            }
        }
        l
    }

    /// `exp(dt L_u)`.
    pub fn propagator(&self, u: &[f64], dt: f64) -> ComplexMatrix {
        matrix_exponential(&(self.superoperator(u) * Complex64::from(dt)))
    }
}

/// Superoperator `exp(dt L_u)` for one piecewise-constant interval, acting
/// on column-stacked density matrices.
pub fn step_propagator(model: &LindbladModel, u: &[f64], dt: f64) -> Result<ComplexMatrix> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    model.check_controls(u)?;
    Ok(Generator::new(model).propagator(u, dt))
}

/// Per-interval propagators, reusing the previous exponential when the
/// control vector does not change between consecutive intervals.
fn interval_propagators<'a>(
    generator: &'a Generator,
    schedule: &'a ControlSchedule,
    grid: &'a TimeGrid,
) -> impl Iterator<Item = ComplexMatrix> + 'a {
    let dt = grid.dt();
    let mut cached: Option<(Vec<f64>, ComplexMatrix)> = None;
    (0..grid.n_steps()).map(move |k| {
        let u = schedule.interval(k);
        match &cached {
            Some((prev, p)) if *prev == u => p.clone(),
            _ => {
                let p = generator.propagator(&u, dt);
                cached = Some((u, p.clone()));
                p
            }
        }
    })
}

pub fn propagate_forward(
    model: &LindbladModel,
    schedule: &ControlSchedule,
    grid: &TimeGrid,
    rho0: &DensityMatrix,
) -> Result<Trajectory> {
    schedule.check_against(model, grid)?;
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    let generator = Generator::new(model);
    let dim = model.dim();
    let mut states = Vec::with_capacity(grid.n_steps() + 1);
    states.push(rho0.clone());
    let mut v = vectorize(rho0.matrix());
    for p in interval_propagators(&generator, schedule, grid) {
        v = p.dot(&v);
        states.push(DensityMatrix::from_trusted(unvectorize(&v, dim)));
    }
    Ok(Trajectory {
        states,
        grid: *grid,
    })
}

pub fn propagate_backward(
    model: &LindbladModel,
    schedule: &ControlSchedule,
    grid: &TimeGrid,
    chi_final: &ComplexMatrix,
) -> Result<Trajectory<ComplexMatrix>> {
    schedule.check_against(model, grid)?;
    model.check_operand(chi_final)?;
    let generator = Generator::new(model);
    let dim = model.dim();
    let propagators: Vec<ComplexMatrix> =
        interval_propagators(&generator, schedule, grid).collect();
    let mut states = vec![chi_final.clone(); grid.n_steps() + 1];
    let mut v: Array1<Complex64> = vectorize(chi_final);
    for k in (0..grid.n_steps()).rev() {
        v = dagger(&propagators[k]).dot(&v);
        states[k] = unvectorize(&v, dim);
    }
    Ok(Trajectory {
        states,
        grid: *grid,
    })
}
