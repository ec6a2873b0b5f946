//! Sweep execution. Every optimisation in a sweep is an independent task;
//! tasks run on a rayon pool of `workers` threads and results are gathered
//! in index order, so outputs do not depend on the worker count.

use std::fs;
use std::path::{Path, PathBuf};

use qoctrl_core::dynamics::{propagate_forward, ControlSchedule, TimeGrid};
use qoctrl_core::krotov::{default_guess, optimize, KrotovConfig, OptimizationResult};
use qoctrl_core::metrology::{bloch_pair_diagnostics, concurrence};
use qoctrl_core::pulses::save_pulses;
use qoctrl_core::scenarios::{
    analytic_uncontrolled_qfi, build_model, default_probe, simulated_qfi, ScenarioSpec,
};
use qoctrl_core::state::{bloch_from_state, generalized_bloch, DensityMatrix};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Resolution, SweepKind};
use crate::table::{Cell, Table};

/// Scenario whose controlled column reports `max(controlled, uncontrolled)`.
pub const MAX_CONVENTION_SCENARIO: &str = "tq-int-zz";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] qoctrl_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Optimised pulses produced by a sweep, keyed by a short tag.
#[derive(Debug, Clone)]
pub struct SavedPulses {
    pub tag: String,
    pub grid: TimeGrid,
    pub labels: Vec<String>,
    pub schedule: ControlSchedule,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub table: Table,
    pub pulses: Vec<SavedPulses>,
}

pub fn grid_for(config: &ExperimentConfig, t: f64) -> Result<TimeGrid, RunError> {
    Ok(match config.resolution {
        Resolution::Dt(dt) => TimeGrid::with_dt(t, dt)?,
        Resolution::Steps(n) => TimeGrid::new(t, n)?,
    })
}

/// Krotov run from the default guess. `None` marks a diverged run.
pub fn optimize_from_default(
    spec: &ScenarioSpec,
    x: f64,
    grid: &TimeGrid,
    krotov: &KrotovConfig,
) -> Result<Option<OptimizationResult>, RunError> {
    let guess = default_guess(spec.control_mask.count(), grid, &krotov.shape);
    match optimize(spec, x, grid, &guess, krotov) {
        Ok(r) if r.qfi_final.is_finite() => Ok(Some(r)),
        Ok(_) | Err(qoctrl_core::Error::NonFiniteCost(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn uncontrolled_qfi(spec: &ScenarioSpec, x: f64, grid: &TimeGrid, delta: f64) -> Result<f64, RunError> {
    let zeros = ControlSchedule::zeros(spec.control_mask.count(), grid.n_steps());
    Ok(simulated_qfi(spec, x, grid, &zeros, delta)?)
}

fn status(r: &Option<OptimizationResult>) -> Cell {
    if r.is_some() { "ok" } else { "diverged" }.into()
}

fn in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

fn par_map<I: Sync, T: Send>(
    items: &[I],
    f: impl Fn(&I) -> Result<T, RunError> + Sync + Send,
) -> Result<Vec<T>, RunError> {
    items.par_iter().map(f).collect()
}

fn pulses(tag: String, spec: &ScenarioSpec, grid: &TimeGrid, r: &OptimizationResult) -> SavedPulses {
    SavedPulses {
        tag,
        grid: *grid,
        labels: spec.control_labels(),
        schedule: r.schedule.clone(),
    }
}

fn header(columns: &[&str]) -> Vec<String> {
    columns.iter().map(|s| s.to_string()).collect()
}

fn provenance(config: &ExperimentConfig, table: &mut Table) {
    table.comments.push(format!("qoctrl {}", env!("CARGO_PKG_VERSION")));
    table.comments.extend(config.provenance());
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    let mut out = in_pool(config.workers, || match config.sweep {
        SweepKind::QfiVsT => run_qfi_vs_t(config),
        SweepKind::NormalizedQfi => run_normalized_qfi(config),
        SweepKind::Robustness => run_robustness(config),
        SweepKind::Trajectory => run_trajectory(config),
        SweepKind::ConcurrenceTrace => run_concurrence_trace(config),
        SweepKind::BlochDiagnostics => run_bloch_diagnostics(config),
        SweepKind::UncontrolledBaseline => run_uncontrolled_baseline(config),
    })??;
    // Provenance first, sweep-specific notes after it.
    let notes = std::mem::take(&mut out.table.comments);
    provenance(config, &mut out.table);
    out.table.comments.extend(notes);
    Ok(out)
}

/// `T`, uncontrolled QFI (simulated and closed form where known), and the
/// optimised QFI. For the interaction-strength ZZ scenario the
/// `qfi_controlled` column is `max(optimised, uncontrolled)`.
pub fn run_qfi_vs_t(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    let spec = &config.scenario;
    let x = config.true_value;
    let delta = config.krotov.delta;
    let use_max = spec.name == MAX_CONVENTION_SCENARIO;
    let rows = par_map(&config.durations, |&t| {
        let grid = grid_for(config, t)?;
        let unc = uncontrolled_qfi(spec, x, &grid, delta)?;
        let r = optimize_from_default(spec, x, &grid, &config.krotov)?;
        Ok((t, grid, unc, r))
    })?;
    let mut table = Table::new(header(&[
        "T",
        "qfi_uncontrolled",
        "qfi_uncontrolled_analytic",
        "qfi_optimized",
        "qfi_controlled",
        "iterations",
        "converged",
        "status",
    ]));
    if use_max {
        table
            .comments
            .push("qfi_controlled = max(qfi_optimized, qfi_uncontrolled)".into());
    }
    let mut saved = Vec::new();
    for (t, grid, unc, r) in rows {
        let analytic = (x == spec.nominal_value())
            .then(|| analytic_uncontrolled_qfi(spec, t))
            .flatten();
        let optimized = r.as_ref().map(|r| r.qfi_final);
        let controlled = optimized.map(|q| if use_max { q.max(unc) } else { q });
        table.push(vec![
            t.into(),
            unc.into(),
            analytic.into(),
            optimized.into(),
            controlled.into(),
            r.as_ref().map_or(Cell::Empty, |r| r.iterations_used.into()),
            r.as_ref().map_or(Cell::Empty, |r| r.converged.into()),
            status(&r),
        ]);
        if let Some(r) = &r {
            saved.push(pulses(format!("T{t}"), spec, &grid, r));
        }
    }
    Ok(SweepOutput { table, pulses: saved })
}

/// QFI / T without control and for every configured mask/probe variant.
pub fn run_normalized_qfi(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    let x = config.true_value;
    let delta = config.krotov.delta;
    let specs = config
        .variants
        .iter()
        .map(|v| v.apply(&config.scenario).map(|s| (v.label(), s)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| RunError::Unsupported(e.to_string()))?;
    let tasks: Vec<(usize, usize)> = (0..config.durations.len())
        .flat_map(|i| (0..specs.len()).map(move |v| (i, v)))
        .collect();
    let runs = par_map(&tasks, |&(i, v)| {
        let grid = grid_for(config, config.durations[i])?;
        optimize_from_default(&specs[v].1, x, &grid, &config.krotov)
    })?;
    let uncontrolled = par_map(&config.durations, |&t| {
        uncontrolled_qfi(&config.scenario, x, &grid_for(config, t)?, delta)
    })?;

    let mut columns = header(&["T", "qfi_over_T_uncontrolled"]);
    columns.extend(specs.iter().map(|(label, _)| format!("qfi_over_T[{}]", label.replace(',', ";"))));
    columns.push("status".into());
    let mut table = Table::new(columns);
    let mut saved = Vec::new();
    for (i, &t) in config.durations.iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into(), (uncontrolled[i] / t).into()];
        let mut diverged = Vec::new();
        for (v, (label, spec)) in specs.iter().enumerate() {
            let r = &runs[i * specs.len() + v];
            row.push(r.as_ref().map(|r| r.qfi_final / t).into());
            match r {
                Some(r) => {
                    let tag = format!("T{t}_{label}");
                    saved.push(pulses(tag, spec, &grid_for(config, t)?, r));
                }
                None => diverged.push(label.replace(',', ";")),
            }
        }
        row.push(if diverged.is_empty() {
            "ok".into()
        } else {
            Cell::Text(format!("diverged:{}", diverged.join("|")))
        });
        table.push(row);
    }
    Ok(SweepOutput { table, pulses: saved })
}

/// Controls optimised at each estimate `x_hat`, evaluated on the dynamics at
/// the true value.
pub fn run_robustness(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    let spec = &config.scenario;
    let x0 = config.true_value;
    let delta = config.krotov.delta;
    let range = config
        .robustness_range
        .as_ref()
        .ok_or_else(|| RunError::Unsupported("robustness sweep without a range".into()))?;
    let grid = grid_for(config, config.durations[0])?;
    let unc = uncontrolled_qfi(spec, x0, &grid, delta)?;
    let rows = par_map(&range.points(), |&x_hat| {
        let r = optimize_from_default(spec, x_hat, &grid, &config.krotov)?;
        let at_true = match &r {
            Some(r) => Some(simulated_qfi(spec, x0, &grid, &r.schedule, delta)?),
            None => None,
        };
        Ok((x_hat, r, at_true))
    })?;
    let mut table = Table::new(header(&[
        "x_hat",
        "qfi_uncontrolled",
        "qfi_controlled",
        "qfi_at_x_hat",
        "iterations",
        "status",
    ]));
    let mut saved = Vec::new();
    for (x_hat, r, at_true) in rows {
        table.push(vec![
            x_hat.into(),
            unc.into(),
            at_true.into(),
            r.as_ref().map(|r| r.qfi_final).into(),
            r.as_ref().map_or(Cell::Empty, |r| r.iterations_used.into()),
            status(&r),
        ]);
        if let Some(r) = &r {
            saved.push(pulses(format!("xhat{x_hat}"), spec, &grid, r));
        }
    }
    Ok(SweepOutput { table, pulses: saved })
}

/// States of the pair members `x` and `x + delta`, uncontrolled and under
/// the optimised controls (if the optimisation converged to finite values).
struct PairTrajectories {
    grid: TimeGrid,
    uncontrolled: [Vec<DensityMatrix>; 2],
    controlled: Option<[Vec<DensityMatrix>; 2]>,
    result: Option<OptimizationResult>,
}

fn pair_trajectories(config: &ExperimentConfig) -> Result<PairTrajectories, RunError> {
    let spec = &config.scenario;
    let x = config.true_value;
    let delta = config.krotov.delta;
    let grid = grid_for(config, config.durations[0])?;
    let probe = default_probe(spec)?;
    let run = |schedule: &ControlSchedule| -> Result<[Vec<DensityMatrix>; 2], RunError> {
        let a = propagate_forward(&build_model(spec, x)?, schedule, &grid, &probe)?.states;
        let b = propagate_forward(&build_model(spec, x + delta)?, schedule, &grid, &probe)?.states;
        Ok([a, b])
    };
    let uncontrolled = run(&ControlSchedule::zeros(spec.control_mask.count(), grid.n_steps()))?;
    let result = optimize_from_default(spec, x, &grid, &config.krotov)?;
    let controlled = result.as_ref().map(|r| run(&r.schedule)).transpose()?;
    Ok(PairTrajectories {
        grid,
        uncontrolled,
        controlled,
        result,
    })
}

fn trajectory_pulses(config: &ExperimentConfig, p: &PairTrajectories) -> Vec<SavedPulses> {
    p.result
        .iter()
        .map(|r| pulses(format!("T{}", config.durations[0]), &config.scenario, &p.grid, r))
        .collect()
}

fn status_text(p: &PairTrajectories) -> Cell {
    status(&p.result)
}

const PAULI_LABELS: [&str; 4] = ["i", "x", "y", "z"];

/// Bloch components of both pair members, uncontrolled (`unc_a`, `unc_b`)
/// and controlled (`ctl_a`, `ctl_b`). Two-qubit runs export the 15
/// generalised components `<a><b>` (coefficient of sigma_a x sigma_b / 2)
/// and the length/angle diagnostics of each pair.
pub fn run_trajectory(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    let p = pair_trajectories(config)?;
    let two = config.scenario.n_qubits() == 2;
    let components: Vec<String> = if two {
        (0..4)
            .flat_map(|a| (0..4).map(move |b| (a, b)))
            .filter(|&ab| ab != (0, 0))
            .map(|(a, b)| format!("{}{}", PAULI_LABELS[a], PAULI_LABELS[b]))
            .collect()
    } else {
        header(&["r1", "r2", "r3"])
    };
    let mut columns = vec!["t".to_string()];
    for group in ["unc_a", "unc_b", "ctl_a", "ctl_b"] {
        columns.extend(components.iter().map(|c| format!("{group}_{c}")));
    }
    if two {
        columns.extend(header(&["unc_length_diff", "unc_angle", "ctl_length_diff", "ctl_angle"]));
    }
    columns.push("status".into());
    let mut table = Table::new(columns);

    let coords = |rho: &DensityMatrix| -> Result<Vec<f64>, RunError> {
        Ok(if two {
            generalized_bloch(rho)?.components.to_vec()
        } else {
            bloch_from_state(rho)?.to_array().to_vec()
        })
    };
    let blank = vec![Cell::Empty; components.len()];
    for (k, t) in p.grid.nodes().enumerate() {
        let mut row: Vec<Cell> = vec![t.into()];
        for member in &p.uncontrolled {
            row.extend(coords(&member[k])?.into_iter().map(Cell::from));
        }
        match &p.controlled {
            Some(c) => {
                for member in c {
                    row.extend(coords(&member[k])?.into_iter().map(Cell::from));
                }
            }
            None => {
                row.extend(blank.iter().cloned());
                row.extend(blank.iter().cloned());
            }
        }
        if two {
            let (l, a) = bloch_pair_diagnostics(&p.uncontrolled[0][k], &p.uncontrolled[1][k])?;
            row.extend([l.into(), a.into()]);
            match &p.controlled {
                Some(c) => {
                    let (l, a) = bloch_pair_diagnostics(&c[0][k], &c[1][k])?;
                    row.extend([l.into(), a.into()]);
                }
                None => row.extend([Cell::Empty, Cell::Empty]),
            }
        }
        row.push(status_text(&p));
        table.push(row);
    }
    Ok(SweepOutput {
        pulses: trajectory_pulses(config, &p),
        table,
    })
}

fn require_two_qubits(config: &ExperimentConfig) -> Result<(), RunError> {
    if config.scenario.n_qubits() == 2 {
        Ok(())
    } else {
        Err(RunError::Unsupported(format!(
            "{} needs a two-qubit scenario, {} has one qubit",
            config.sweep, config.scenario.name
        )))
    }
}

/// Concurrence of the state at the true value, with and without control.
pub fn run_concurrence_trace(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    require_two_qubits(config)?;
    let p = pair_trajectories(config)?;
    let mut table = Table::new(header(&["t", "concurrence_uncontrolled", "concurrence_controlled", "status"]));
    for (k, t) in p.grid.nodes().enumerate() {
        let ctl = match &p.controlled {
            Some(c) => Some(concurrence(&c[0][k])?),
            None => None,
        };
        table.push(vec![
            t.into(),
            concurrence(&p.uncontrolled[0][k])?.into(),
            ctl.into(),
            status_text(&p),
        ]);
    }
    Ok(SweepOutput {
        pulses: trajectory_pulses(config, &p),
        table,
    })
}

/// Length difference and angle between the generalised Bloch vectors of the
/// pair members, with and without control.
pub fn run_bloch_diagnostics(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    require_two_qubits(config)?;
    let p = pair_trajectories(config)?;
    let mut table = Table::new(header(&[
        "t",
        "unc_length_diff",
        "unc_angle",
        "ctl_length_diff",
        "ctl_angle",
        "status",
    ]));
    for (k, t) in p.grid.nodes().enumerate() {
        let (ul, ua) = bloch_pair_diagnostics(&p.uncontrolled[0][k], &p.uncontrolled[1][k])?;
        let (cl, ca) = match &p.controlled {
            Some(c) => {
                let (l, a) = bloch_pair_diagnostics(&c[0][k], &c[1][k])?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        table.push(vec![t.into(), ul.into(), ua.into(), cl.into(), ca.into(), status_text(&p)]);
    }
    Ok(SweepOutput {
        pulses: trajectory_pulses(config, &p),
        table,
    })
}

/// Uncontrolled QFI per duration, simulated and in closed form where known.
pub fn run_uncontrolled_baseline(config: &ExperimentConfig) -> Result<SweepOutput, RunError> {
    let spec = &config.scenario;
    let x = config.true_value;
    let values = par_map(&config.durations, |&t| {
        uncontrolled_qfi(spec, x, &grid_for(config, t)?, config.krotov.delta)
    })?;
    let mut table = Table::new(header(&["T", "qfi_uncontrolled", "qfi_uncontrolled_analytic"]));
    for (&t, q) in config.durations.iter().zip(values) {
        let analytic = (x == spec.nominal_value())
            .then(|| analytic_uncontrolled_qfi(spec, t))
            .flatten();
        table.push(vec![t.into(), q.into(), analytic.into()]);
    }
    Ok(SweepOutput {
        table,
        pulses: Vec::new(),
    })
}

fn sanitize(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-@".contains(c) { c } else { '_' })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the CSV (and pulse tables when enabled) under `dir`; returns the
/// files written, CSV first.
pub fn write_outputs(config: &ExperimentConfig, out: &SweepOutput, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let stem = format!("{}_{}", config.scenario.name, config.sweep);
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, out.table.to_csv()).map_err(io_err(&csv))?;
    let mut written = vec![csv];
    if config.save_pulses && !out.pulses.is_empty() {
        let pulse_dir = dir.join("pulses");
        fs::create_dir_all(&pulse_dir).map_err(io_err(&pulse_dir))?;
        for p in &out.pulses {
            let path = pulse_dir.join(format!("{stem}_{}.txt", sanitize(&p.tag)));
            save_pulses(&path, &p.schedule, &p.grid, &p.labels).map_err(|e| match e {
                qoctrl_core::Error::Io(source) => RunError::Io {
                    path: path.clone(),
                    source,
                },
                other => other.into(),
            })?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Runs the configured sweep and writes its outputs under `config.output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<PathBuf>, RunError> {
    let out = run_sweep(config)?;
    write_outputs(config, &out, &config.output_dir)
}
