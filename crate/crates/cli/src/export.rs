//! CSV tables and legacy-VTK snapshots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use evi_plast::adjoint::{tracking_integrand, FdReport, TrackingTarget};
use evi_plast::evolution::{elastic_energy, z_from_q, ControlTrajectory, ConvergenceTable, StateTrajectory};
use evi_plast::mesh::DiscreteOperators;
use evi_plast::optimize::{IterationRecord, StageResult, Termination};
use evi_plast::resolvent::TripleField;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSummary {
    pub time: f64,
    pub energy: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    pub norm_q: f64,
    pub objective_integrand: f64,
}

pub fn node_summary(t: f64, x: &TripleField<f64>, target: &TripleField<f64>, ops: &DiscreteOperators<f64>) -> NodeSummary {
    NodeSummary {
        time: t,
        energy: elastic_energy(x, ops),
        norm_u: ops.mass_inner(&x.u, &x.u).sqrt(),
        norm_v: ops.mass_inner(&x.v, &x.v).sqrt(),
        norm_q: ops.q_inner(&x.q, &x.q).sqrt(),
        objective_integrand: tracking_integrand(x, target, ops),
    }
}

pub fn time_series(traj: &StateTrajectory<f64>, target: &TrackingTarget<f64>, ops: &DiscreteOperators<f64>) -> Vec<NodeSummary> {
    traj.states
        .iter()
        .enumerate()
        .map(|(k, x)| node_summary(traj.grid.time(k), x, &target.states[k], ops))
        .collect()
}

pub const TIME_SERIES_HEADER: [&str; 6] = ["t", "energy", "norm_u", "norm_v", "norm_q", "objective_integrand"];

pub fn write_time_series(path: &Path, rows: &[NodeSummary]) -> anyhow::Result<()> {
    write_table(
        path,
        &TIME_SERIES_HEADER,
        rows.iter().map(|r| {
            [r.time, r.energy, r.norm_u, r.norm_v, r.norm_q, r.objective_integrand].into_iter().map(fmt).collect()
        }),
    )
}

pub fn read_time_series(path: &Path) -> anyhow::Result<Vec<NodeSummary>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec.iter().map(str::parse).collect::<Result<_, _>>()?;
        anyhow::ensure!(v.len() == 6, "time series row with {} fields", v.len());
        out.push(NodeSummary { time: v[0], energy: v[1], norm_u: v[2], norm_v: v[3], norm_q: v[4], objective_integrand: v[5] });
    }
    Ok(out)
}

pub fn write_convergence(path: &Path, table: &ConvergenceTable<f64>) -> anyhow::Result<()> {
    write_table(
        path,
        &["lambda", "lambda_next", "distance"],
        table.distances.iter().enumerate().map(|(i, &d)| vec![fmt(table.lambdas[i]), fmt(table.lambdas[i + 1]), fmt(d)]),
    )
}

pub fn write_gradcheck(path: &Path, report: &FdReport<f64>) -> anyhow::Result<()> {
    write_table(
        path,
        &["direction", "finite_difference", "adjoint", "relative_error"],
        report.entries.iter().enumerate().map(|(i, e)| {
            vec![i.to_string(), fmt(e.finite_difference), fmt(e.adjoint), fmt(e.relative_error)]
        }),
    )
}

pub fn write_history(path: &Path, history: &[IterationRecord<f64>]) -> anyhow::Result<()> {
    write_table(
        path,
        &["iteration", "value", "grad_norm", "step", "backtracks", "steepest_descent"],
        history.iter().enumerate().map(|(i, h)| {
            vec![i.to_string(), fmt(h.value), fmt(h.grad_norm), fmt(h.step), h.backtracks.to_string(), h.steepest_descent.to_string()]
        }),
    )
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIterations => "max_iterations",
        Termination::LineSearchFailed => "line_search_failed",
    }
}

pub fn write_stages(path: &Path, stages: &[StageResult<f64>]) -> anyhow::Result<()> {
    write_table(
        path,
        &["stage", "lambda", "smoothing", "value", "grad_norm", "iterations", "control_change", "termination"],
        stages.iter().enumerate().map(|(i, s)| {
            vec![
                i.to_string(),
                fmt(s.lambda),
                fmt(s.smoothing),
                fmt(s.result.value),
                fmt(s.result.grad_norm),
                (s.result.history.len() - 1).to_string(),
                fmt(s.control_change),
                termination_name(s.result.termination).to_string(),
            ]
        }),
    )
}

/// One row per time node: `t` followed by the free-dof load coefficients.
pub fn write_control(path: &Path, f: &ControlTrajectory<f64>) -> anyhow::Result<()> {
    let n = f.values.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("f{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        path,
        &header,
        f.values.iter().enumerate().map(|(k, v)| {
            let mut row = vec![fmt(f.grid.time(k))];
            row.extend(v.iter().map(|&x| fmt(x)));
            row
        }),
    )
}

fn vectors_3d(full: &[f64], dim: usize) -> Vec<[f64; 3]> {
    full.chunks(dim)
        .map(|c| {
            let mut v = [0.0; 3];
            v[..dim].copy_from_slice(c);
            v
        })
        .collect()
}

/// Legacy-VTK ASCII snapshot with nodal `u`, `v` and cell tensors `z`, `q`.
pub fn write_vtk(path: &Path, x: &TripleField<f64>, time: f64, ops: &DiscreteOperators<f64>) -> anyhow::Result<()> {
    let space = &ops.space;
    let mesh = &space.mesh;
    let dim = ops.dim();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "evi-plast t={}", fmt(time))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.coords.len())?;
    for c in &mesh.coords {
        let y = if dim == 2 { c[1] } else { 0.0 };
        writeln!(w, "{} {} {}", fmt(c[0]), fmt(y), fmt(0.0))?;
    }
    let per_cell = mesh.cells.first().map_or(0, Vec::len);
    writeln!(w, "CELLS {} {}", mesh.cells.len(), mesh.cells.len() * (per_cell + 1))?;
    for cell in &mesh.cells {
        let ids: Vec<String> = cell.iter().map(usize::to_string).collect();
        writeln!(w, "{} {}", cell.len(), ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.cells.len())?;
    let cell_type = if dim == 2 { 5 } else { 3 };
    for _ in &mesh.cells {
        writeln!(w, "{cell_type}")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.coords.len())?;
    for (name, field) in [("u", &x.u), ("v", &x.v)] {
        writeln!(w, "VECTORS {name} double")?;
        for v in vectors_3d(&space.prolong_zero(field), dim) {
            writeln!(w, "{} {} {}", fmt(v[0]), fmt(v[1]), fmt(v[2]))?;
        }
    }
    let z = z_from_q(&x.u, &x.q, ops);
    writeln!(w, "CELL_DATA {}", mesh.cells.len())?;
    for (name, field) in [("z", &z), ("q", &x.q)] {
        writeln!(w, "TENSORS {name} double")?;
        for p in 0..ops.n_points() {
            let m = ops.point(field, p).to_matrix();
            for row in m {
                writeln!(w, "{} {} {}", fmt(row[0]), fmt(row[1]), fmt(row[2]))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
