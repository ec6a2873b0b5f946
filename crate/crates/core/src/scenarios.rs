//! Catalog of single- and two-qubit sensing configurations.
//!
//! A [`ScenarioSpec`] fixes the system, noise, coupling, probe and control
//! mask; [`build_model`] instantiates it at a value of the parameter of
//! interest. Catalog entries are addressed by stable names such as
//! `sq-amp-dephasing` (see [`SCENARIO_NAMES`]).

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dynamics::{propagate_forward, ControlSchedule, LindbladModel, LindbladTerm, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{commutator, tensor_product, trace, ComplexMatrix};
use crate::metrology::{central_difference, qfi_sld};
use crate::state::{
    bloch_from_state, embed, pauli, pauli_x, pauli_z, sigma_minus, state_from_bloch, BlochVector3,
    DensityMatrix, HermitianOperator,
};

pub const SCENARIO_NAMES: [&str; 8] = [
    "sq-amp-dephasing",
    "sq-amp-relaxation",
    "sq-dir-noiseless",
    "sq-dir-noisy",
    "tq-freq-zz",
    "tq-freq-xx",
    "tq-int-zz",
    "tq-int-xx",
];

const AXES: [char; 3] = ['x', 'y', 'z'];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    SingleQubit,
    TwoQubit,
}

impl System {
    pub fn n_qubits(self) -> usize {
        match self {
            System::SingleQubit => 1,
            System::TwoQubit => 2,
        }
    }

    pub fn dim(self) -> usize {
        1 << self.n_qubits()
    }
}

/// Noise channels. Rates are the physical rates; the dephasing channels are
/// stored in the generator with rate `gamma / 2` on `sigma_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    ParallelDephasing(f64),
    Relaxation(f64),
    LocalDephasing(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    None,
    Zz,
    Xx,
}

/// `B` and `omega` for one qubit, `phi1`, `phi2` and `g` for two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianParams {
    pub b: f64,
    pub omega: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub g: f64,
}

impl Default for HamiltonianParams {
    fn default() -> Self {
        Self {
            b: 1.0,
            omega: 0.0,
            phi1: 1.0,
            phi2: 1.0,
            g: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    /// Field amplitude.
    B,
    /// Field direction.
    Omega,
    /// Common qubit frequency `phi1 = phi2`.
    Phi,
    /// Interaction strength.
    G,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Plus,
    Zero,
    PlusPlus,
    BellPhiPlus,
    Custom(Option<DensityMatrix>),
}

impl Probe {
    /// Parses `plus`, `zero`, `plus_plus`, `bell_phi_plus` and the custom
    /// pure states `one`, `minus`, `zero_zero`, `field_aligned`; the last needs a
    /// spec and is resolved by [`ScenarioSpec::with_probe_name`].
    fn parse_fixed(name: &str) -> Option<Probe> {
        let h = FRAC_1_SQRT_2;
        let probe = match name {
            "plus" => Probe::Plus,
            "zero" => Probe::Zero,
            "plus_plus" => Probe::PlusPlus,
            "bell_phi_plus" => Probe::BellPhiPlus,
            "one" => Probe::Custom(Some(pure(&[0.0, 1.0]))),
            "minus" => Probe::Custom(Some(pure(&[h, -h]))),
            "zero_zero" => Probe::Custom(Some(pure(&[1.0, 0.0, 0.0, 0.0]))),
            _ => return None,
        };
        Some(probe)
    }
}

/// Enabled control axes for each qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlMask {
    qubits: Vec<[bool; 3]>,
}

impl ControlMask {
    pub fn new(qubits: Vec<[bool; 3]>) -> Self {
        Self { qubits }
    }

    pub fn full(n_qubits: usize) -> Self {
        Self::new(vec![[true; 3]; n_qubits])
    }

    pub fn none(n_qubits: usize) -> Self {
        Self::new(vec![[false; 3]; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubit(&self, q: usize) -> [bool; 3] {
        self.qubits[q]
    }

    pub fn count(&self) -> usize {
        self.qubits.iter().flatten().filter(|&&b| b).count()
    }

    /// Enabled `(qubit, axis)` pairs in control order: qubit-major, then
    /// x, y, z. Axis indices are 1-based Pauli indices.
    pub fn enabled(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.qubits.iter().enumerate().flat_map(|(q, axes)| {
            (0..3).filter(move |&a| axes[a]).map(move |a| (q, a + 1))
        })
    }

    /// Parses `"xyz"` (same axes on every qubit), `"none"`, or per-qubit
    /// lists such as `"1:xz,2:y"` with 1-based qubit indices.
    pub fn parse(text: &str, n_qubits: usize) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("control mask {text:?}: {msg}"));
        let axes_of = |s: &str| -> Result<[bool; 3]> {
            let mut axes = [false; 3];
            for c in s.chars() {
                let a = AXES
                    .iter()
                    .position(|&x| x == c)
                    .ok_or_else(|| bad(format!("unknown axis '{c}'")))?;
                axes[a] = true;
            }
            Ok(axes)
        };
        let text = text.trim();
        if text == "none" || text.is_empty() {
            return Ok(Self::none(n_qubits));
        }
        if !text.contains(':') {
            return Ok(Self::new(vec![axes_of(text)?; n_qubits]));
        }
        let mut mask = Self::none(n_qubits);
        for part in text.split(',') {
            let (q, axes) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| bad(format!("expected qubit:axes, got {part:?}")))?;
            let q: usize = q
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad qubit index {q:?}")))?;
            if q == 0 || q > n_qubits {
                return Err(bad(format!("qubit {q} outside 1..={n_qubits}")));
            }
            mask.qubits[q - 1] = axes_of(axes.trim())?;
        }
        Ok(mask)
    }
}

impl fmt::Display for ControlMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axes = |a: &[bool; 3]| -> String {
            AXES.iter().zip(a).filter(|(_, &on)| on).map(|(c, _)| c).collect()
        };
        if self.count() == 0 {
            return write!(f, "none");
        }
        if self.qubits.windows(2).all(|w| w[0] == w[1]) {
            return write!(f, "{}", axes(&self.qubits[0]));
        }
        let parts: Vec<String> = self
            .qubits
            .iter()
            .enumerate()
            .filter(|(_, a)| a.iter().any(|&b| b))
            .map(|(q, a)| format!("{}:{}", q + 1, axes(a)))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub system: System,
    pub noise: Vec<Noise>,
    pub coupling: Coupling,
    pub params: HamiltonianParams,
    pub parameter: Parameter,
    pub probe: Probe,
    pub control_mask: ControlMask,
}

fn pure(amplitudes: &[f64]) -> DensityMatrix {
    let v: Vec<Complex64> = amplitudes.iter().map(|&a| Complex64::from(a)).collect();
    DensityMatrix::pure(&v).expect("normalised literal state")
}

fn field_aligned(omega: f64) -> DensityMatrix {
    state_from_bloch(&BlochVector3::new(omega.sin(), 0.0, omega.cos()))
        .expect("unit Bloch vector")
}

impl ScenarioSpec {
    /// Catalog entry by name.
    pub fn named(name: &str) -> Result<Self> {
        let single = |noise, parameter, params, probe| ScenarioSpec {
            name: name.to_string(),
            system: System::SingleQubit,
            noise,
            coupling: Coupling::None,
            params,
            parameter,
            probe,
            control_mask: ControlMask::full(1),
        };
        let amp = HamiltonianParams::default();
        let dir = HamiltonianParams {
            b: 2.0,
            omega: FRAC_PI_4,
            ..HamiltonianParams::default()
        };
        let dir_probe = Probe::Custom(Some(field_aligned(FRAC_PI_4)));
        let two = |coupling, parameter| ScenarioSpec {
            name: name.to_string(),
            system: System::TwoQubit,
            noise: vec![Noise::LocalDephasing(0.1)],
            coupling,
            params: HamiltonianParams {
                g: 0.1,
                ..HamiltonianParams::default()
            },
            parameter,
            probe: Probe::PlusPlus,
            control_mask: ControlMask::full(2),
        };
        let spec = match name {
            "sq-amp-dephasing" => single(
                vec![Noise::ParallelDephasing(0.1)],
                Parameter::B,
                amp,
                Probe::Plus,
            ),
            "sq-amp-relaxation" => {
                single(vec![Noise::Relaxation(0.2)], Parameter::B, amp, Probe::Plus)
            }
            "sq-dir-noiseless" => single(vec![], Parameter::Omega, dir, dir_probe),
            "sq-dir-noisy" => single(
                vec![Noise::ParallelDephasing(0.1), Noise::Relaxation(0.2)],
                Parameter::Omega,
                dir,
                dir_probe,
            ),
            "tq-freq-zz" => two(Coupling::Zz, Parameter::Phi),
            "tq-freq-xx" => two(Coupling::Xx, Parameter::Phi),
            "tq-int-zz" => two(Coupling::Zz, Parameter::G),
            "tq-int-xx" => two(Coupling::Xx, Parameter::G),
            _ => {
                return Err(Error::InvalidScenario(format!(
                    "unknown scenario {name:?} (expected one of {})",
                    SCENARIO_NAMES.join(", ")
                )))
            }
        };
        Ok(spec)
    }

    pub fn n_qubits(&self) -> usize {
        self.system.n_qubits()
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Value of the parameter of interest stored in `params`.
    pub fn nominal_value(&self) -> f64 {
        match self.parameter {
            Parameter::B => self.params.b,
            Parameter::Omega => self.params.omega,
            Parameter::Phi => self.params.phi1,
            Parameter::G => self.params.g,
        }
    }

    /// Parameters with the parameter of interest set to `x`.
    pub fn params_at(&self, x: f64) -> HamiltonianParams {
        let mut p = self.params;
        match self.parameter {
            Parameter::B => p.b = x,
            Parameter::Omega => p.omega = x,
            Parameter::Phi => {
                p.phi1 = x;
                p.phi2 = x;
            }
            Parameter::G => p.g = x,
        }
        p
    }

    pub fn with_mask(mut self, mask: ControlMask) -> Self {
        self.control_mask = mask;
        self
    }

    pub fn with_probe(mut self, probe: Probe) -> Self {
        self.probe = probe;
        self
    }

    /// Overrides the probe by name; `field_aligned` points along the field
    /// at the nominal direction.
    pub fn with_probe_name(self, name: &str) -> Result<Self> {
        let probe = match name {
            "field_aligned" if self.system == System::SingleQubit => {
                let p = self.params;
                let omega = if self.parameter == Parameter::Omega {
                    self.nominal_value()
                } else {
                    p.omega
                };
                Probe::Custom(Some(field_aligned(omega)))
            }
            _ => Probe::parse_fixed(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown probe {name:?}")))?,
        };
        let spec = self.with_probe(probe);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScenario(format!("{}: {msg}", self.name)));
        let single = self.system == System::SingleQubit;
        let param_ok = match self.parameter {
            Parameter::B | Parameter::Omega => single,
            Parameter::Phi | Parameter::G => !single,
        };
        if !param_ok {
            return bad("parameter of interest does not belong to the system");
        }
        if single && self.coupling != Coupling::None {
            return bad("a single qubit has no coupling");
        }
        for n in &self.noise {
            let (rate, ok) = match *n {
                Noise::ParallelDephasing(g) | Noise::Relaxation(g) => (g, single),
                Noise::LocalDephasing(g) => (g, !single),
            };
            if !ok {
                return bad("noise channel does not match the system");
            }
            if !(rate >= 0.0 && rate.is_finite()) {
                return bad("noise rates must be non-negative");
            }
        }
        if self.control_mask.n_qubits() != self.n_qubits() {
            return bad("control mask does not match the number of qubits");
        }
        let probe_dim = match &self.probe {
            Probe::Plus | Probe::Zero => 2,
            Probe::PlusPlus | Probe::BellPhiPlus => 4,
            Probe::Custom(Some(rho)) => rho.dim(),
            Probe::Custom(None) => return bad("custom probe without a state"),
        };
        if probe_dim != self.dim() {
            return bad("probe dimension does not match the system");
        }
        Ok(())
    }

    /// Column labels `u_<axis>_q<qubit>` in control order.
    pub fn control_labels(&self) -> Vec<String> {
        self.control_mask
            .enabled()
            .map(|(q, a)| format!("u_{}_q{}", AXES[a - 1], q + 1))
            .collect()
    }

    fn drift(&self, p: &HamiltonianParams) -> ComplexMatrix {
        match self.system {
            System::SingleQubit => {
                let half_b = Complex64::from(p.b / 2.0);
                (pauli_x() * Complex64::from(p.omega.sin())
                    + pauli_z() * Complex64::from(p.omega.cos()))
                    * half_b
            }
            System::TwoQubit => {
                let z1 = embed(&pauli_z(), 0, 2);
                let z2 = embed(&pauli_z(), 1, 2);
                z1 * Complex64::from(p.phi1)
                    + z2 * Complex64::from(p.phi2)
                    + self.interaction() * Complex64::from(p.g)
            }
        }
    }

    fn interaction(&self) -> ComplexMatrix {
        let a = match self.coupling {
            Coupling::Zz => pauli_z(),
            Coupling::Xx => pauli_x(),
            Coupling::None => return ComplexMatrix::zeros((self.dim(), self.dim())),
        };
        tensor_product(&a, &a)
    }

    fn lindblad_terms(&self) -> Vec<LindbladTerm> {
        let mut terms = Vec::new();
        for n in &self.noise {
            match *n {
                Noise::ParallelDephasing(g) => terms.push(LindbladTerm {
                    operator: pauli_z(),
                    rate: g / 2.0,
                }),
                Noise::Relaxation(g) => terms.push(LindbladTerm {
                    operator: sigma_minus(),
                    rate: g,
                }),
                Noise::LocalDephasing(g) => {
                    for q in 0..self.n_qubits() {
                        terms.push(LindbladTerm {
                            operator: embed(&pauli_z(), q, self.n_qubits()),
                            rate: g / 2.0,
                        });
                    }
                }
            }
        }
        terms
    }
}

impl FromStr for ScenarioSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioSpec::named(s)
    }
}

/// The scenario's Lindblad model at parameter value `x`.
pub fn build_model(spec: &ScenarioSpec, x: f64) -> Result<LindbladModel> {
    spec.validate()?;
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("parameter value {x}")));
    }
    let p = spec.params_at(x);
    let n = spec.n_qubits();
    let controls = spec
        .control_mask
        .enabled()
        .map(|(q, a)| HermitianOperator::new(embed(&pauli(a), q, n)))
        .collect::<Result<Vec<_>>>()?;
    LindbladModel::new(
        HermitianOperator::new(spec.drift(&p))?,
        controls,
        spec.lindblad_terms(),
    )
}

/// Analytic derivative of the drift with respect to the parameter of
/// interest, at `x`.
pub fn drift_derivative(spec: &ScenarioSpec, x: f64) -> ComplexMatrix {
    let p = spec.params_at(x);
    match spec.parameter {
        Parameter::B => {
            (pauli_x() * Complex64::from(p.omega.sin()) + pauli_z() * Complex64::from(p.omega.cos()))
                * Complex64::from(0.5)
        }
        Parameter::Omega => {
            (pauli_x() * Complex64::from(p.omega.cos()) - pauli_z() * Complex64::from(p.omega.sin()))
                * Complex64::from(p.b / 2.0)
        }
        Parameter::Phi => embed(&pauli_z(), 0, 2) + embed(&pauli_z(), 1, 2),
        Parameter::G => spec.interaction(),
    }
}

pub fn default_probe(spec: &ScenarioSpec) -> Result<DensityMatrix> {
    let h = FRAC_1_SQRT_2;
    Ok(match &spec.probe {
        Probe::Plus => pure(&[h, h]),
        Probe::Zero => pure(&[1.0, 0.0]),
        Probe::PlusPlus => pure(&[0.5, 0.5, 0.5, 0.5]),
        Probe::BellPhiPlus => pure(&[h, 0.0, 0.0, h]),
        Probe::Custom(Some(rho)) => rho.clone(),
        Probe::Custom(None) => {
            return Err(Error::InvalidScenario(format!(
                "{}: custom probe without a state",
                spec.name
            )))
        }
    })
}

/// Closed-form QFI of the uncontrolled evolution at the nominal parameter
/// value, where one is known:
///
/// * dephasing amplitude sensing from a pure equatorial probe, `T^2 e^{-2 gamma T}`;
/// * relaxation amplitude sensing from a pure equatorial probe, `T^2 e^{-gamma T}`;
/// * noiseless direction sensing from a probe along the field, `4 sin^2 T`;
/// * noiseless sensing with a drift commuting with its derivative, from a
///   pure probe, `4 Var(dH) T^2`.
pub fn analytic_uncontrolled_qfi(spec: &ScenarioSpec, t: f64) -> Option<f64> {
    let probe = default_probe(spec).ok()?;
    let pure = (probe.purity() - 1.0).abs() < 1e-9;
    if !pure || t < 0.0 {
        return None;
    }
    let x0 = spec.nominal_value();
    let active: Vec<Noise> = spec
        .noise
        .iter()
        .copied()
        .filter(|n| match *n {
            Noise::ParallelDephasing(g) | Noise::Relaxation(g) | Noise::LocalDephasing(g) => {
                g > 0.0
            }
        })
        .collect();
    let single = spec.system == System::SingleQubit;
    let r = if single {
        bloch_from_state(&probe).ok()
    } else {
        None
    };
    let equatorial = r.map(|r| r.r3.abs() < 1e-9).unwrap_or(false);
    let z_field = spec.params.omega == 0.0;
    match (spec.parameter, active.as_slice()) {
        (Parameter::B, [Noise::ParallelDephasing(g)]) if z_field && equatorial => {
            Some(t * t * (-2.0 * g * t).exp())
        }
        (Parameter::B, [Noise::Relaxation(g)]) if z_field && equatorial => {
            Some(t * t * (-g * t).exp())
        }
        (Parameter::Omega, []) => {
            let r = r?;
            let p = spec.params_at(x0);
            let axis = BlochVector3::new(p.omega.sin(), 0.0, p.omega.cos());
            if r.sub(&axis).norm() < 1e-9 {
                Some(4.0 * (p.b / 2.0 * t).sin().powi(2))
            } else {
                None
            }
        }
        (_, []) => {
            let h = spec.drift(&spec.params_at(x0));
            let dh = drift_derivative(spec, x0);
            if commutator(&h, &dh).iter().any(|z| z.norm() > 1e-12) {
                return None;
            }
            let m = probe.matrix();
            let mean = trace(&m.dot(&dh)).re;
            let second = trace(&m.dot(&dh).dot(&dh)).re;
            Some(4.0 * (second - mean * mean) * t * t)
        }
        _ => None,
    }
}

/// `4 N^2 sin^2(T / N)`: the QFI reached by `N` optimally placed rotations in
/// noiseless direction sensing.
pub fn n_rotation_qfi(n: usize, t: f64) -> f64 {
    let n = n.max(1) as f64;
    4.0 * n * n * (t / n).sin().powi(2)
}

/// QFI at the final time of the evolution under `schedule` at parameter `x`,
/// from `qfi_sld` with central-difference tangents of half-width `delta`.
pub fn simulated_qfi(
    spec: &ScenarioSpec,
    x: f64,
    grid: &TimeGrid,
    schedule: &ControlSchedule,
    delta: f64,
) -> Result<f64> {
    Ok(*simulated_qfi_trace(spec, x, grid, schedule, delta)?
        .last()
        .expect("grid has at least one node"))
}

/// QFI at every node of `grid` (index `k` is the QFI of a protocol of
/// duration `t_k` with the controls applied so far).
pub fn simulated_qfi_trace(
    spec: &ScenarioSpec,
    x: f64,
    grid: &TimeGrid,
    schedule: &ControlSchedule,
    delta: f64,
) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let probe = default_probe(spec)?;
    let run = |v: f64| -> Result<Vec<DensityMatrix>> {
        Ok(propagate_forward(&build_model(spec, v)?, schedule, grid, &probe)?.states)
    };
    let (minus, centre, plus) = (run(x - delta)?, run(x)?, run(x + delta)?);
    centre
        .iter()
        .zip(minus.iter().zip(&plus))
        .map(|(rho, (m, p))| qfi_sld(rho, &central_difference(m, p, delta)))
        .collect()
}
