//! CSV and JSON serialization of grid data, trajectories and reports.
//!
//! All numeric output is written at full double precision (17 significant
//! digits) so artifacts are reproducible bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::control_search::IterationRecord;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::heat::HeatTrajectory;
use crate::obstruction::ExperimentTable;
use crate::shallow_water::SWTrajectory;

/// Render with 17 significant digits; round-trips every finite f64.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `x,value`, one row per node.
pub fn grid_function_csv(f: &GridFunction) -> String {
    let mut out = String::from("x,value\n");
    for (i, x) in f.grid().nodes().enumerate() {
        let _ = writeln!(out, "{},{}", format_full(x), format_full(f.value(i)));
    }
    out
}

/// Parse the `x,value` CSV produced by [`grid_function_csv`]. The abscissae
/// must form a uniform grid on [0,1].
pub fn grid_function_from_csv(text: &str) -> Result<GridFunction> {
    let mut values = Vec::new();
    let mut count = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(xs), Some(vs)) = (parts.next(), parts.next()) else {
            return Err(Error::invalid(format!("line {}: need x,value", lineno + 1)));
        };
        let x: f64 = xs
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("line {}: bad x", lineno + 1)))?;
        let v: f64 = vs
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("line {}: bad value", lineno + 1)))?;
        let _ = x;
        values.push(v);
        count += 1;
    }
    if count < 2 {
        return Err(Error::invalid("grid CSV needs at least two nodes"));
    }
    let grid = Grid::new(count - 1)?;
    GridFunction::new(grid, values)
}

/// CSV with columns `t,x,value` over a whole heat trajectory.
pub fn heat_trajectory_csv(trajectory: &HeatTrajectory) -> String {
    let mut out = String::from("t,x,value\n");
    for (k, t) in trajectory.time_grid().nodes().enumerate() {
        let snap = trajectory.snapshot(k);
        for (i, x) in snap.grid().nodes().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_full(t),
                format_full(x),
                format_full(snap.value(i))
            );
        }
    }
    out
}

/// CSV with columns `t,x,value` for one field of a shallow water trajectory.
pub fn sw_field_csv(trajectory: &SWTrajectory, field: SWField) -> String {
    let mut out = String::from("t,x,value\n");
    for state in trajectory.states() {
        let f = match field {
            SWField::Depth => state.h(),
            SWField::Velocity => state.u(),
        };
        for (i, x) in f.grid().nodes().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_full(state.time()),
                format_full(x),
                format_full(f.value(i))
            );
        }
    }
    out
}

/// Field selector for [`sw_field_csv`].
#[derive(Debug, Clone, Copy)]
pub enum SWField {
    Depth,
    Velocity,
}

/// CSV `iter,misfit,step_size,grad_norm`.
pub fn iteration_log_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("iter,misfit,step_size,grad_norm\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iter,
            format_full(r.misfit),
            format_full(r.step_size),
            format_full(r.grad_norm)
        );
    }
    out
}

/// CSV `control_id,terminal_pairing,u_H1_distance,gap,passed`.
pub fn experiment_table_csv(table: &ExperimentTable) -> String {
    let mut out = String::from("control_id,terminal_pairing,u_H1_distance,gap,passed\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.control_id,
            format_full(r.terminal_pairing),
            format_full(r.u_h1_distance),
            format_full(r.gap),
            r.passed
        );
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("JSON serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Write a file, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| Error::invalid(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}
