//! Text and CSV outputs.

use std::io::{self, Write};
use std::path::Path;

use tlsc_core::solvers::WorkReport;
use tlsc_core::Mesh;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub example: String,
    pub method: String,
    pub coarse_sub: usize,
    pub fine_sub: usize,
    pub coarse_degree: usize,
    pub fine_degree: usize,
    pub norm: String,
    pub error: f64,
    pub newton_iters: usize,
    pub linear_solves: usize,
    pub wall_seconds: f64,
}

pub const RESULTS_HEADER: [&str; 11] =
    ["example", "method", "H_sub", "h_sub", "P", "p", "norm", "error", "newton_iters", "linear_solves", "wall_seconds"];

pub fn write_results(path: &Path, rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.example.clone(),
            r.method.clone(),
            r.coarse_sub.to_string(),
            r.fine_sub.to_string(),
            r.coarse_degree.to_string(),
            r.fine_degree.to_string(),
            r.norm.clone(),
            format!("{:.17e}", r.error),
            r.newton_iters.to_string(),
            r.linear_solves.to_string(),
            format!("{:.6}", r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `results.csv` back; used by tests and by comparisons across runs.
pub fn read_results(path: &Path) -> csv::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let num = |i: usize| field(i).parse::<usize>().unwrap_or(0);
        rows.push(ResultRow {
            example: field(0),
            method: field(1),
            coarse_sub: num(2),
            fine_sub: num(3),
            coarse_degree: num(4),
            fine_degree: num(5),
            norm: field(6),
            error: field(7).parse().unwrap_or(f64::NAN),
            newton_iters: num(8),
            linear_solves: num(9),
            wall_seconds: field(10).parse().unwrap_or(f64::NAN),
        });
    }
    Ok(rows)
}

/// One line of `work.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkLine {
    pub method: String,
    pub levels: String,
    pub report: WorkReport,
}

pub fn write_work(path: &Path, lines: &[WorkLine], notes: &[String]) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    for note in notes {
        writeln!(f, "# {note}")?;
    }
    writeln!(f, "method, levels, stage, points, newton_iters_total, linear_solves, avg_cg_iters")?;
    for l in lines {
        let r = &l.report;
        writeln!(
            f,
            "{}, {}, {}, {}, {}, {}, {:.2}",
            l.method,
            l.levels,
            r.stage,
            r.points,
            r.newton_iters_total,
            r.linear_solves,
            r.avg_cg_iters()
        )?;
    }
    f.flush()
}

pub fn write_kl_spectrum(path: &Path, eigenvalues: &[f64]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "lambda_n"])?;
    for (n, l) in eigenvalues.iter().enumerate() {
        w.write_record([(n + 1).to_string(), format!("{l:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `vertices V triangles T`, then `x y boundary_flag` lines, then `i j k` lines.
pub fn write_mesh(out: &mut impl Write, mesh: &Mesh) -> io::Result<()> {
    writeln!(out, "vertices {} triangles {}", mesh.num_vertices(), mesh.num_triangles())?;
    for (v, b) in mesh.vertices().iter().zip(mesh.boundary_mask()) {
        writeln!(out, "{:?} {:?} {}", v[0], v[1], u8::from(*b))?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// One fitted convergence rate for `slope.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeLine {
    pub method: String,
    pub norm: String,
    pub kind: String,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
    pub points: usize,
    pub note: String,
}

pub fn write_slopes(path: &Path, lines: &[SlopeLine]) -> io::Result<()> {
    let mut f = io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "method, norm, fit, slope, r_squared, points, note")?;
    let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    for l in lines {
        writeln!(f, "{}, {}, {}, {}, {}, {}, {}", l.method, l.norm, l.kind, opt(l.slope), opt(l.r_squared), l.points, l.note)?;
    }
    f.flush()
}
