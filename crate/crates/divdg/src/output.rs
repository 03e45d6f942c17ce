use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use divdg_core::adaptivity::AdaptiveTrace;
use divdg_core::control::SolutionBundle;
use divdg_core::convergence::{ConvergenceRow, RATE_COLUMNS};
use divdg_core::estimate::ErrorReport;
use divdg_core::fem::bdm::CellBasis;
use divdg_core::fem::layout::local_coeffs;
use divdg_core::fem::FemError;
use divdg_core::math::Vector;
use divdg_core::sparse::SparseMatrix;
use divdg_core::Mesh;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("bundle does not match the mesh ({0})")]
    Mismatch(&'static str),
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

const ERROR_COLUMNS: [&str; 12] = [
    "l2_y", "energy_y", "pressure_p", "l2_w", "energy_w", "pressure_r", "l2_u", "jumps_y", "jumps_w", "total",
    "upsilon", "efficiency",
];

fn error_fields(e: Option<&ErrorReport>) -> Vec<String> {
    match e {
        Some(e) => [e.l2_y, e.energy_y, e.pressure_p, e.l2_w, e.energy_w, e.pressure_r, e.l2_u, e.jumps_y, e.jumps_w, e.total, e.upsilon]
            .into_iter()
            .map(num)
            .chain([opt(e.efficiency)])
            .collect(),
        None => vec![String::new(); ERROR_COLUMNS.len()],
    }
}

/// Header of [`write_convergence_csv`].
pub fn convergence_header() -> Vec<String> {
    ["level", "n", "h", "cells", "dofs"]
        .iter()
        .chain(ERROR_COLUMNS.iter())
        .chain(["pdas_iterations", "max_divergence"].iter())
        .map(|s| s.to_string())
        .chain(RATE_COLUMNS.iter().map(|c| format!("rate_{c}")))
        .collect()
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], w: impl Write) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(convergence_header())?;
    for r in rows {
        let mut rec = vec![r.level.to_string(), r.n.to_string(), num(r.h), r.cells.to_string(), r.dofs.to_string()];
        rec.extend(error_fields(Some(&r.errors)));
        rec.push(r.pdas_iterations.to_string());
        rec.push(num(r.max_divergence));
        match r.rates {
            Some(rates) => rec.extend(rates.into_iter().map(num)),
            None => rec.extend(RATE_COLUMNS.iter().map(|_| String::new())),
        }
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Header of [`write_trace_csv`].
pub fn trace_header() -> Vec<String> {
    ["level", "cells", "dofs", "eta_y", "eta_w", "eta_u", "theta_y", "theta_w"]
        .iter()
        .chain(ERROR_COLUMNS.iter())
        .chain(["marked_fraction", "pdas_iterations", "max_divergence", "min_diameter"].iter())
        .map(|s| s.to_string())
        .collect()
}

/// Adaptive trace; `upsilon` is always filled, error columns only with a
/// closed-form solution.
pub fn write_trace_csv(trace: &AdaptiveTrace, w: impl Write) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(trace_header())?;
    for l in &trace.levels {
        let mut rec = vec![l.level.to_string(), l.cells.to_string(), l.dofs.to_string()];
        rec.extend([l.eta_y, l.eta_w, l.eta_u, l.theta_y, l.theta_w].map(num));
        let mut errs = error_fields(l.errors.as_ref());
        errs[10] = num(l.upsilon);
        rec.extend(errs);
        rec.extend([num(l.marked_fraction), l.pdas_iterations.to_string(), num(l.max_divergence), num(l.min_diameter)]);
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Cell-constant data of one snapshot.
pub struct CellFields<'a> {
    pub bundle: &'a SolutionBundle,
    /// `Upsilon_K` (not squared), one per cell.
    pub upsilon: &'a [f64],
}

fn cell_average(mesh: &Mesh, basis: &CellBasis, full: &[f64], t: usize) -> Vector {
    basis.field_value(&local_coeffs(mesh, full, t), [1.0 / 3.0, 1.0 / 3.0])
}

/// Legacy ASCII VTK unstructured grid of triangles with cell data.
pub fn vtk_string(mesh: &Mesh, fields: &CellFields, title: &str) -> Result<String, OutputError> {
    let nc = mesh.num_triangles();
    let b = fields.bundle;
    let nv = 2 * mesh.num_edges();
    if b.p.len() != nc || b.r.len() != nc || b.u.len() != nc || fields.upsilon.len() != nc {
        return Err(OutputError::Mismatch("cell arrays"));
    }
    if b.y.len() != nv || b.w.len() != nv {
        return Err(OutputError::Mismatch("velocity arrays"));
    }
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", num(v[0]), num(v[1]));
    }
    let _ = writeln!(s, "CELLS {} {}", nc, 4 * nc);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {nc}");
    let mut scalar = |name: &str, values: &mut dyn Iterator<Item = f64>| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{}", num(v));
        }
    };
    scalar("p", &mut b.p.iter().copied());
    scalar("r", &mut b.r.iter().copied());
    scalar("u_1", &mut b.u.iter().map(|u| u[0]));
    scalar("u_2", &mut b.u.iter().map(|u| u[1]));
    scalar("upsilon", &mut fields.upsilon.iter().copied());
    for (name, full) in [("y", &b.y), ("w", &b.w)] {
        let _ = writeln!(s, "VECTORS {name} double");
        for t in 0..nc {
            let basis = CellBasis::new(mesh, t)?;
            let v = cell_average(mesh, &basis, full, t);
            let _ = writeln!(s, "{} {} 0", num(v[0]), num(v[1]));
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, fields: &CellFields, title: &str, path: &Path) -> Result<(), OutputError> {
    std::fs::write(path, vtk_string(mesh, fields, title)?)?;
    Ok(())
}

/// MatrixMarket coordinate format, one-based indices.
pub fn write_matrix_market(m: &SparseMatrix, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.iter() {
        writeln!(w, "{} {} {}", i + 1, j + 1, num(v))?;
    }
    Ok(())
}
