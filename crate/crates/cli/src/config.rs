//! Experiment configuration files.
//!
//! A config is a flat TOML table. Everything except `scenario`, `T` and
//! `sweep` has a default; unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qoctrl_core::krotov::{KrotovConfig, ShapeSpec};
use qoctrl_core::scenarios::{ControlMask, ScenarioSpec, SCENARIO_NAMES};
use serde::Deserialize;

pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}")]
    Missing {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("key `scenario`: unknown scenario {name:?} (known: {known})")]
    UnknownScenario { name: String, known: String },
    #[error("key `sweep`: unknown sweep {0:?}")]
    UnknownSweep(String),
    #[error("key `{key}`: {message}")]
    Range { key: &'static str, message: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn range(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key,
        message: message.into(),
    }
}

fn invalid(key: &'static str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    QfiVsT,
    NormalizedQfi,
    Robustness,
    Trajectory,
    ConcurrenceTrace,
    BlochDiagnostics,
    UncontrolledBaseline,
}

impl SweepKind {
    pub const ALL: [SweepKind; 7] = [
        SweepKind::QfiVsT,
        SweepKind::NormalizedQfi,
        SweepKind::Robustness,
        SweepKind::Trajectory,
        SweepKind::ConcurrenceTrace,
        SweepKind::BlochDiagnostics,
        SweepKind::UncontrolledBaseline,
    ];

    /// Sweeps over something other than the duration.
    pub fn single_duration(self) -> bool {
        matches!(
            self,
            SweepKind::Robustness
                | SweepKind::Trajectory
                | SweepKind::ConcurrenceTrace
                | SweepKind::BlochDiagnostics
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::QfiVsT => "qfi_vs_T",
            SweepKind::NormalizedQfi => "normalized_qfi",
            SweepKind::Robustness => "robustness",
            SweepKind::Trajectory => "trajectory",
            SweepKind::ConcurrenceTrace => "concurrence_trace",
            SweepKind::BlochDiagnostics => "bloch_diagnostics",
            SweepKind::UncontrolledBaseline => "uncontrolled_baseline",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        SweepKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownSweep(s.to_string()))
    }
}

/// Time resolution: a fixed step or a fixed number of intervals per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    Dt(f64),
    Steps(usize),
}

/// One control-mask / probe combination of a normalised-QFI sweep,
/// written `mask@probe`; either side may be `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub mask: Option<String>,
    pub probe: Option<String>,
}

impl Variant {
    pub fn parse(text: &str) -> Variant {
        let (mask, probe) = text.split_once('@').unwrap_or((text, "default"));
        let side = |s: &str| {
            let s = s.trim();
            (!s.is_empty() && s != "default").then(|| s.to_string())
        };
        Variant {
            mask: side(mask),
            probe: side(probe),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}@{}",
            self.mask.as_deref().unwrap_or("default"),
            self.probe.as_deref().unwrap_or("default")
        )
    }

    pub fn apply(&self, spec: &ScenarioSpec) -> Result<ScenarioSpec, ConfigError> {
        let mut spec = spec.clone();
        if let Some(mask) = &self.mask {
            let mask = ControlMask::parse(mask, spec.n_qubits()).map_err(|e| invalid("variants", e))?;
            spec = spec.with_mask(mask);
        }
        if let Some(probe) = &self.probe {
            spec = spec.with_probe_name(probe).map_err(|e| invalid("variants", e))?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRange {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl RobustnessRange {
    pub fn points(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n_points - 1) as f64;
        (0..self.n_points).map(|i| self.lo + step * i as f64).collect()
    }
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub probe: Option<String>,
    pub control_mask: Option<String>,
    pub true_value: f64,
    pub durations: Vec<f64>,
    pub resolution: Resolution,
    pub krotov: KrotovConfig,
    pub sweep: SweepKind,
    pub variants: Vec<Variant>,
    pub robustness_range: Option<RobustnessRange>,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub save_pulses: bool,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    true_value: Option<f64>,
    #[serde(rename = "T")]
    t: Option<OneOrMany>,
    dt: Option<f64>,
    n_steps: Option<i64>,
    probe: Option<String>,
    control_mask: Option<String>,
    lambda: Option<OneOrMany>,
    ramp_fraction: Option<f64>,
    delta: Option<f64>,
    cost_tolerance: Option<f64>,
    max_iterations: Option<i64>,
    amplitude_cap: Option<f64>,
    sweep: Option<String>,
    variants: Option<Vec<String>>,
    robustness_range: Option<Vec<f64>>,
    output_dir: Option<PathBuf>,
    workers: Option<i64>,
    save_pulses: Option<bool>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Missing {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text).map_err(|e| match e {
        ConfigError::Syntax { message, .. } => ConfigError::Syntax {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        path: PathBuf::from("<inline>"),
        message: e.message().to_string(),
    })?;
    resolve(raw)
}

fn positive(key: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(range(key, format!("must be positive, got {v}")))
    }
}

fn count(key: &'static str, v: i64) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v as usize)
    } else {
        Err(range(key, format!("must be at least 1, got {v}")))
    }
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let name = raw.scenario.ok_or(ConfigError::MissingKey("scenario"))?;
    let mut scenario = ScenarioSpec::named(&name).map_err(|_| ConfigError::UnknownScenario {
        name: name.clone(),
        known: SCENARIO_NAMES.join(", "),
    })?;
    if let Some(mask) = &raw.control_mask {
        let mask = ControlMask::parse(mask, scenario.n_qubits()).map_err(|e| invalid("control_mask", e))?;
        scenario = scenario.with_mask(mask);
    }
    if let Some(probe) = &raw.probe {
        scenario = scenario.with_probe_name(probe).map_err(|e| invalid("probe", e))?;
    }

    let true_value = match raw.true_value {
        Some(v) if v.is_finite() => v,
        Some(v) => return Err(range("true_value", format!("must be finite, got {v}"))),
        None => scenario.nominal_value(),
    };

    let sweep: SweepKind = raw.sweep.ok_or(ConfigError::MissingKey("sweep"))?.parse()?;
    let durations = raw.t.ok_or(ConfigError::MissingKey("T"))?.into_vec();
    if durations.is_empty() {
        return Err(range("T", "needs at least one duration"));
    }
    for &t in &durations {
        positive("T", t)?;
    }
    if sweep.single_duration() && durations.len() != 1 {
        return Err(invalid("T", format!("{sweep} takes a single duration, got {}", durations.len())));
    }

    let resolution = match (raw.dt, raw.n_steps) {
        (Some(_), Some(_)) => {
            return Err(invalid("n_steps", "give either `dt` or `n_steps`, not both"))
        }
        (Some(dt), None) => Resolution::Dt(positive("dt", dt)?),
        (None, Some(n)) => Resolution::Steps(count("n_steps", n)?),
        (None, None) => Resolution::Dt(DEFAULT_DT),
    };
    if let Resolution::Dt(dt) = resolution {
        if let Some(&t) = durations.iter().find(|&&t| dt > t) {
            return Err(range("dt", format!("{dt} exceeds the duration T = {t}")));
        }
    }

    let mut krotov = KrotovConfig::default();
    if let Some(lambda) = raw.lambda {
        let lambda = lambda.into_vec();
        let n_c = scenario.control_mask.count();
        if lambda.is_empty() || (lambda.len() != 1 && lambda.len() != n_c) {
            return Err(invalid(
                "lambda",
                format!("expected 1 or {n_c} values, got {}", lambda.len()),
            ));
        }
        for &l in &lambda {
            positive("lambda", l)?;
        }
        krotov.lambda = lambda;
    }
    if let Some(r) = raw.ramp_fraction {
        if !(r > 0.0 && r < 0.5) {
            return Err(range("ramp_fraction", format!("must lie in (0, 0.5), got {r}")));
        }
        krotov.shape = ShapeSpec { ramp_fraction: r };
    }
    if let Some(d) = raw.delta {
        krotov.delta = positive("delta", d)?;
    }
    if let Some(tol) = raw.cost_tolerance {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(range("cost_tolerance", format!("must be non-negative, got {tol}")));
        }
        krotov.cost_tolerance = tol;
    }
    if let Some(n) = raw.max_iterations {
        if n < 0 {
            return Err(range("max_iterations", format!("must be non-negative, got {n}")));
        }
        krotov.max_iterations = n as usize;
    }
    if let Some(cap) = raw.amplitude_cap {
        krotov.amplitude_cap = Some(positive("amplitude_cap", cap)?);
    }

    let variants = match raw.variants {
        Some(list) if list.is_empty() => return Err(range("variants", "needs at least one entry")),
        Some(list) => list.iter().map(|v| Variant::parse(v)).collect(),
        None => vec![Variant::parse("default@default")],
    };
    for v in &variants {
        v.apply(&scenario)?;
    }

    let robustness_range = match raw.robustness_range {
        None if sweep == SweepKind::Robustness => {
            return Err(ConfigError::MissingKey("robustness_range"))
        }
        None => None,
        Some(r) => {
            let [lo, hi, n] = r[..] else {
                return Err(invalid(
                    "robustness_range",
                    format!("expected [lo, hi, n_points], got {} values", r.len()),
                ));
            };
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(range("robustness_range", format!("need lo <= hi, got [{lo}, {hi}]")));
            }
            if !(n >= 1.0 && n.fract() == 0.0) || (n == 1.0 && lo != hi) {
                return Err(range(
                    "robustness_range",
                    format!("n_points must be a positive integer (1 only when lo = hi), got {n}"),
                ));
            }
            if true_value < lo || true_value > hi {
                return Err(range(
                    "robustness_range",
                    format!("[{lo}, {hi}] does not contain true_value {true_value}"),
                ));
            }
            Some(RobustnessRange {
                lo,
                hi,
                n_points: n as usize,
            })
        }
    };

    if matches!(sweep, SweepKind::ConcurrenceTrace | SweepKind::BlochDiagnostics)
        && scenario.n_qubits() != 2
    {
        return Err(invalid(
            "sweep",
            format!("{sweep} needs a two-qubit scenario, {} has one qubit", scenario.name),
        ));
    }

    Ok(ExperimentConfig {
        scenario,
        probe: raw.probe,
        control_mask: raw.control_mask,
        true_value,
        durations,
        resolution,
        krotov,
        sweep,
        variants,
        robustness_range,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("results")),
        workers: raw.workers.map(|w| count("workers", w)).transpose()?.unwrap_or(1),
        save_pulses: raw.save_pulses.unwrap_or(true),
    })
}

impl ExperimentConfig {
    /// `key = value` lines describing the resolved config, in a fixed order.
    /// `workers` and `output_dir` are left out: they do not change results.
    pub fn provenance(&self) -> Vec<String> {
        let list = |v: &[f64]| {
            let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("[{}]", items.join(", "))
        };
        let k = &self.krotov;
        let mut lines = vec![
            format!("scenario = {}", self.scenario.name),
            format!("true_value = {}", self.true_value),
            format!("T = {}", list(&self.durations)),
            match self.resolution {
                Resolution::Dt(dt) => format!("dt = {dt}"),
                Resolution::Steps(n) => format!("n_steps = {n}"),
            },
            format!("probe = {}", self.probe.as_deref().unwrap_or("default")),
            format!("control_mask = {}", self.scenario.control_mask),
            format!("lambda = {}", list(&k.lambda)),
            format!("ramp_fraction = {}", k.shape.ramp_fraction),
            format!("delta = {}", k.delta),
            format!("cost_tolerance = {}", k.cost_tolerance),
            format!("max_iterations = {}", k.max_iterations),
            format!(
                "amplitude_cap = {}",
                k.amplitude_cap.map_or("none".to_string(), |c| c.to_string())
            ),
            format!("sweep = {}", self.sweep),
        ];
        if self.sweep == SweepKind::NormalizedQfi {
            let labels: Vec<String> = self.variants.iter().map(Variant::label).collect();
            lines.push(format!("variants = [{}]", labels.join(", ")));
        }
        if let Some(r) = &self.robustness_range {
            lines.push(format!("robustness_range = [{}, {}, {}]", r.lo, r.hi, r.n_points));
        }
        lines
    }
}
