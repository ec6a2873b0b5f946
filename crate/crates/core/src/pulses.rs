//! Plain-text pulse tables: a `t,<label>,...` header followed by one row
//! per interval midpoint, values in decimal notation with 12 significant
//! digits. Lines starting with `#` are comments.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::dynamics::{ControlSchedule, TimeGrid};
use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Decimal rendering with `digits` significant digits and no exponent.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    // Rounding can carry into a new leading digit (9.99.. -> 10.0..).
    let int_digits = s.trim_start_matches('-').split('.').next().map_or(0, |p| {
        p.trim_start_matches('0').len()
    });
    if decimals > 0 && int_digits as i64 > magnitude + 1 && int_digits > 0 {
        s = format!("{v:.prec$}", prec = decimals - 1);
    }
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn write_pulses<W: Write>(
    mut out: W,
    schedule: &ControlSchedule,
    grid: &TimeGrid,
    labels: &[String],
) -> Result<()> {
    if labels.len() != schedule.n_controls() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} controls",
            labels.len(),
            schedule.n_controls()
        )));
    }
    if schedule.n_steps() != grid.n_steps() {
        return Err(Error::GridMismatch(format!(
            "schedule has {} intervals, grid has {}",
            schedule.n_steps(),
            grid.n_steps()
        )));
    }
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    for (k, t) in grid.midpoints().enumerate() {
        let mut row = vec![format_significant(t, SIGNIFICANT_DIGITS)];
        row.extend(
            (0..schedule.n_controls())
                .map(|j| format_significant(schedule.get(j, k), SIGNIFICANT_DIGITS)),
        );
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_pulses(
    path: &Path,
    schedule: &ControlSchedule,
    grid: &TimeGrid,
    labels: &[String],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_pulses(&mut out, schedule, grid, labels)?;
    out.flush()?;
    Ok(())
}

/// Reads a table written by [`write_pulses`] and checks it against `grid`.
pub fn read_pulses<R: BufRead>(input: R, grid: &TimeGrid) -> Result<(Vec<String>, ControlSchedule)> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty() && !l.starts_with('#')));
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::MalformedPulses("missing header".into())),
    };
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if columns[0] != "t" {
        return Err(Error::MalformedPulses(format!(
            "first column must be 't', found {:?}",
            columns[0]
        )));
    }
    let labels = columns[1..].to_vec();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (index, line) in lines {
        let line = line?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::MalformedPulses(format!(
                "line {}: {} fields, expected {}",
                index + 1,
                fields.len(),
                columns.len()
            )));
        }
        let parsed = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::MalformedPulses(format!("line {}: {e}", index + 1)))?;
        times.push(parsed[0]);
        values.extend_from_slice(&parsed[1..]);
    }
    if times.len() != grid.n_steps() {
        return Err(Error::GridMismatch(format!(
            "table has {} rows, grid has {} intervals",
            times.len(),
            grid.n_steps()
        )));
    }
    let tol = 1e-9 * grid.t_final().max(1.0);
    for (k, (t, expected)) in times.iter().zip(grid.midpoints()).enumerate() {
        if (t - expected).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "row {k}: t = {t}, grid midpoint {expected}"
            )));
        }
    }
    let by_row = Array2::from_shape_vec((times.len(), labels.len()), values)
        .map_err(|e| Error::MalformedPulses(e.to_string()))?;
    let schedule = ControlSchedule::new(by_row.reversed_axes().as_standard_layout().to_owned())
        .map_err(|e| Error::MalformedPulses(e.to_string()))?;
    Ok((labels, schedule))
}

pub fn load_pulses(path: &Path, grid: &TimeGrid) -> Result<(Vec<String>, ControlSchedule)> {
    read_pulses(BufReader::new(File::open(path)?), grid)
}
