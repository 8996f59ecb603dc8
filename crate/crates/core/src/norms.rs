//! Errors in `L²_ρ(Γ) ⊗ L²(D)` and `L²_ρ(Γ) ⊗ H¹₀(D)`, and convergence-slope fits.
//!
//! The expectation over `Γ` is taken on a separate validation grid so the
//! interpolation error of the collocation solution is visible; the spatial
//! integrals use the degree-4 triangle rule on the finer of the two meshes.

use alloc::vec::Vec;

use crate::collocation::{CollocationError, TensorGrid};
use crate::exec::PointExecutor;
use crate::fem::Assembler;
use crate::mesh::{Location, Mesh, MeshError};
use crate::solvers::StochasticSolution;
use crate::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormError {
    #[error(transparent)]
    Collocation(#[from] CollocationError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("solution and reference meshes are not nested ({a} and {b} subdivisions)")]
    NotNested { a: usize, b: usize },
    #[error("slope fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("slope fit needs positive values, got {0}")]
    NonPositive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    /// Gradient seminorm.
    H1Seminorm,
}

/// Exact solution `u(y, x)` with its spatial gradient.
pub trait AnalyticSolution: Send + Sync {
    fn value(&self, y: &[f64], x: Point) -> f64;
    fn gradient(&self, y: &[f64], x: Point) -> [f64; 2];
}

/// What a [`StochasticSolution`] is compared against.
#[derive(Clone, Copy)]
pub enum Reference<'a> {
    Analytic(&'a dyn AnalyticSolution),
    Discrete(&'a StochasticSolution),
}

/// Both error norms from one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
}

impl ErrorNorms {
    pub fn get(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.l2,
            Norm::H1Seminorm => self.h1,
        }
    }
}

/// Validation grid with `extra` more degrees per dimension than `grid`.
pub fn validation_grid(grid: &TensorGrid, extra: usize) -> Result<TensorGrid, CollocationError> {
    let degrees: Vec<usize> = grid.degrees().iter().map(|p| p + extra).collect();
    TensorGrid::new(&degrees)
}

/// Spatial squared errors at one parameter value.
fn spatial_errors(
    asm: &Assembler<'_>,
    approx: &dyn Fn(usize, &Location) -> (f64, [f64; 2]),
    locs: &[Location],
    reference: &dyn Fn(usize, Point) -> (f64, [f64; 2]),
) -> (f64, f64) {
    let nq = asm.rule().len();
    let weights = asm.rule().weights();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (t, chunk) in asm.quad_points().chunks_exact(nq).enumerate() {
        let mut tl2 = 0.0;
        let mut th1 = 0.0;
        for (q, qp) in chunk.iter().enumerate() {
            let (u, gu) = approx(qp.index, &locs[qp.index]);
            let (r, gr) = reference(qp.index, qp.x);
            let e = u - r;
            let (ex, ey) = (gu[0] - gr[0], gu[1] - gr[1]);
            tl2 += weights[q] * e * e;
            th1 += weights[q] * (ex * ex + ey * ey);
        }
        let area = asm.area(t);
        l2 += area * tl2;
        h1 += area * th1;
    }
    (l2, h1)
}

/// Both error norms of `sol` against `reference`.
pub fn error_norms(
    sol: &StochasticSolution,
    reference: Reference<'_>,
    validation: &TensorGrid,
    exec: &impl PointExecutor,
) -> Result<ErrorNorms, NormError> {
    if validation.dims() != sol.grid.dims() {
        return Err(CollocationError::LengthMismatch { expected: sol.grid.dims(), got: validation.dims() }.into());
    }
    if validation.degrees().iter().zip(sol.grid.degrees()).any(|(v, s)| *v < s + 2) {
        log::warn!("validation grid {:?} is not 2 degrees above {:?}", validation.degrees(), sol.grid.degrees());
    }

    // Integrate on the finer mesh; the other one must be nested in it.
    let integration_mesh: &Mesh = match reference {
        Reference::Analytic(_) => &sol.mesh,
        Reference::Discrete(r) => {
            if sol.mesh.is_refined_by(&r.mesh) {
                &r.mesh
            } else if r.mesh.is_refined_by(&sol.mesh) {
                &sol.mesh
            } else {
                return Err(NormError::NotNested { a: sol.mesh.subdivisions(), b: r.mesh.subdivisions() });
            }
        }
    };
    let asm = Assembler::new(integration_mesh);
    let sol_locs: Vec<Location> =
        asm.quad_points().iter().map(|q| sol.mesh.locate(q.x)).collect::<Result<_, _>>()?;
    let ref_locs: Option<Vec<Location>> = match reference {
        Reference::Discrete(r) => {
            Some(asm.quad_points().iter().map(|q| r.mesh.locate(q.x)).collect::<Result<_, _>>()?)
        }
        Reference::Analytic(_) => None,
    };

    let per_point = exec.map_indexed(validation.len(), |k| -> Result<(f64, f64), NormError> {
        let y = validation.point(k);
        let u = sol.nodal_at(y)?;
        let approx = |_: usize, loc: &Location| {
            (sol.mesh.evaluate_at(&u, loc), sol.mesh.gradient_on(&u, loc.triangle))
        };
        match reference {
            Reference::Analytic(exact) => {
                let r = |_: usize, x: Point| (exact.value(y, x), exact.gradient(y, x));
                Ok(spatial_errors(&asm, &approx, &sol_locs, &r))
            }
            Reference::Discrete(rs) => {
                let ru = rs.nodal_at(y)?;
                let locs = ref_locs.as_ref().expect("discrete reference locations");
                let r = |i: usize, _: Point| {
                    let loc = &locs[i];
                    (rs.mesh.evaluate_at(&ru, loc), rs.mesh.gradient_on(&ru, loc.triangle))
                };
                Ok(spatial_errors(&asm, &approx, &sol_locs, &r))
            }
        }
    });

    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (w, r) in validation.weights().iter().zip(per_point) {
        let (a, b) = r?;
        l2 += w * a;
        h1 += w * b;
    }
    Ok(ErrorNorms { l2: libm::sqrt(l2), h1: libm::sqrt(h1) })
}

/// One error norm of `sol` against `reference`.
pub fn error_norm(
    sol: &StochasticSolution,
    reference: Reference<'_>,
    norm: Norm,
    validation: &TensorGrid,
    exec: &impl PointExecutor,
) -> Result<f64, NormError> {
    Ok(error_norms(sol, reference, validation, exec)?.get(norm))
}

/// Abscissa transform for [`fit_slope`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeScale {
    /// `log(error)` against `log(resolution)`: algebraic order in `h`.
    LogLog,
    /// `log(error)` against `resolution`: exponential rate in `p`.
    SemiLog,
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares fit of `ys` against `xs`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit, NormError> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return Err(NormError::TooFewPoints { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs[..n].iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys[..n].iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LineFit { slope, intercept, r_squared })
}

/// Fits `(resolution, error)` pairs; needs at least three pairs with positive errors.
pub fn fit_slope(pairs: &[(f64, f64)], scale: SlopeScale) -> Result<LineFit, NormError> {
    if pairs.len() < 3 {
        return Err(NormError::TooFewPoints { needed: 3, got: pairs.len() });
    }
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(r, e) in pairs {
        if !(e > 0.0) {
            return Err(NormError::NonPositive(e));
        }
        let x = match scale {
            SlopeScale::LogLog => {
                if !(r > 0.0) {
                    return Err(NormError::NonPositive(r));
                }
                libm::log(r)
            }
            SlopeScale::SemiLog => r,
        };
        xs.push(x);
        ys.push(libm::log(e));
    }
    fit_line(&xs, &ys)
}
