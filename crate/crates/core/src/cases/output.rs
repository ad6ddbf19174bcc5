//! Field, time-series and report writers.

use std::fmt::Write as _;
use std::path::Path;

use super::{CaseOutcome, Trajectory, component_names};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn vtk_cell_type(dim: usize, nodes: usize) -> u8 {
    match (dim, nodes) {
        (2, 3) => 5,
        (2, 4) => 9,
        (2, _) => 7,
        (3, 4) => 10,
        (3, 8) => 12,
        _ => 42,
    }
}

/// Legacy ASCII VTK unstructured grid with cell arrays `u`, `phi`, `sigma`
/// (row-major `d×d`) and `mu`.
pub fn vtk_string(mesh: &Mesh, q: &[f64], stresses: &[(Vec<f64>, Vec<f64>)]) -> String {
    let dim = mesh.dim();
    let r = if dim == 2 { 1 } else { 3 };
    let per = dim + r;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ncosserat-dem\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices().len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]);
    }
    let size: usize = mesh.cells().iter().map(|c| c.vertices.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.num_cells(), size);
    for c in mesh.cells() {
        let _ = write!(s, "{}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.num_cells());
    for c in mesh.cells() {
        let _ = writeln!(s, "{}", vtk_cell_type(dim, c.vertices.len()));
    }
    let n = mesh.num_cells();
    let _ = writeln!(s, "CELL_DATA {n}\nFIELD FieldData 4");
    let mut array = |name: &str, width: usize, value: &dyn Fn(usize, usize) -> f64| {
        let _ = writeln!(s, "{name} {width} {n} double");
        for c in 0..n {
            let row: Vec<String> = (0..width).map(|k| format!("{:e}", value(c, k))).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    };
    array("u", dim, &|c, k| q[c * per + k]);
    array("phi", r, &|c, k| q[c * per + dim + k]);
    array("sigma", dim * dim, &|c, k| stresses[c].0[k]);
    array("mu", stresses.first().map_or(0, |s| s.1.len()), &|c, k| stresses[c].1[k]);
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, q: &[f64], stresses: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
    write_file(path, &vtk_string(mesh, q, stresses))
}

/// One row per cell: barycenter, dofs, stresses.
pub fn write_cell_csv(path: &Path, mesh: &Mesh, q: &[f64], stresses: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
    let dim = mesh.dim();
    let r = if dim == 2 { 1 } else { 3 };
    let per = dim + r;
    let axes = ["x", "y", "z"];
    let (sn, mn) = component_names(dim);
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend((0..dim).map(|i| axes[i].to_string()));
    header.extend((0..dim).map(|i| format!("u{}", axes[i])));
    header.extend((0..r).map(|k| if r == 1 { "phi".to_string() } else { format!("phi{}", axes[k]) }));
    header.extend(sn);
    header.extend(mn);
    let mut s = header.join(",");
    s.push('\n');
    for (c, cell) in mesh.cells().iter().enumerate() {
        let mut row = vec![c.to_string()];
        row.extend((0..dim).map(|i| format!("{:e}", cell.barycenter[i])));
        row.extend((0..per).map(|k| format!("{:e}", q[c * per + k])));
        row.extend(stresses[c].0.iter().chain(&stresses[c].1).map(|v| format!("{v:e}")));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    write_file(path, &s)
}

/// Columns `step, t, <probe names...>`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = String::from("step,t");
    for n in &traj.names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (k, t) in traj.times.iter().enumerate() {
        let _ = write!(s, "{k},{t:e}");
        for v in &traj.values {
            let _ = write!(s, ",{:e}", v[k]);
        }
        s.push('\n');
    }
    s
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_file(path, &trajectory_csv(traj))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.4e}"))
}

/// Plain-text summary of an outcome.
pub fn report_text(outcome: &CaseOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "case {}", outcome.name);
    let _ = writeln!(s, "cells {}  dofs {}  time {:.2} s", outcome.cells, outcome.dofs, outcome.seconds);
    if let Some(r) = outcome.residual {
        let _ = writeln!(s, "relative residual {r:.3e}");
    }
    let _ = writeln!(s, "{:<6} {:>12} {:>12} {:>12} {:>12} {:>12}", "comp", "min", "max", "expected", "max rel err", "max abs err");
    for c in &outcome.report.components {
        let _ = writeln!(
            s,
            "{:<6} {:>12.5e} {:>12.5e} {:>12} {:>12} {:>12}",
            c.name,
            c.min,
            c.max,
            c.expected.clone().unwrap_or_else(|| "-".into()),
            fmt_opt(c.max_relative_error),
            fmt_opt(c.max_absolute_error)
        );
    }
    if let Some(e) = outcome.report.l2_displacement {
        let _ = writeln!(s, "relative L2 error u   {e:.4e}");
    }
    if let Some(e) = outcome.report.l2_rotation {
        let _ = writeln!(s, "relative L2 error phi {e:.4e}");
    }
    if let Some(t) = &outcome.trajectory {
        let _ = writeln!(s, "steps {}  max |q| {:.4e}  non-finite values {}", t.times.len().saturating_sub(1), t.max_abs, t.non_finite);
    }
    for (name, v) in &outcome.metrics {
        let _ = writeln!(s, "{name} = {v:.6e}");
    }
    s
}

/// `<name>_report.txt` and `<name>_report.json`.
pub fn write_report(dir: &Path, outcome: &CaseOutcome) -> Result<()> {
    write_file(&dir.join(format!("{}_report.txt", outcome.name)), &report_text(outcome))?;
    let json = serde_json::to_string_pretty(outcome).map_err(|e| Error::Other(e.to_string()))?;
    write_file(&dir.join(format!("{}_report.json", outcome.name)), &json)
}
