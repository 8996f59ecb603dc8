//! Deterministic solves at frozen parameters and the stochastic drivers.
//!
//! Direct stochastic collocation runs a Newton solve on the fine mesh at
//! every fine collocation point. The two-level driver runs those Newton solves
//! only on a coarse mesh with a low-degree grid, then performs one linearized
//! solve per fine collocation point around the interpolated coarse solution.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::collocation::{CollocationError, TensorGrid};
use crate::exec::PointExecutor;
use crate::fem::{Assembler, DirichletMap, FemError, QuadPoint};
use crate::mesh::{Location, Mesh, MeshError, Rect};
use crate::random_field::{verify_coercivity, CoefficientField, CoefficientSamples, FieldError};
use crate::sparse::{pcg_solve, CgParams, SparseError};
use crate::Point;

/// Floor for the Newton stopping rule when the iterate norm vanishes.
pub const ZERO_SOLUTION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Collocation(#[from] CollocationError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("Newton did not converge in {iterations} iterations (relative increments {increments:?})")]
    NewtonNotConverged { iterations: usize, increments: Vec<f64> },
    #[error("f' does not match finite differences of f at u = {u}: {analytic} vs {numeric}")]
    DerivativeMismatch { u: f64, analytic: f64, numeric: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("parameter has {got} entries, the problem has {expected} random dimensions")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{stage} failed at collocation point {index} (y = {y:?}): {source}")]
    AtPoint { stage: Stage, index: usize, y: Vec<f64>, source: Box<SolverError> },
}

/// The pointwise nonlinearity `f(u)`.
#[derive(Debug, Clone, Copy)]
pub enum Nonlinearity {
    /// `f(u) = u³`.
    Cubic,
    /// `f(u) = u`.
    Linear,
    /// `f(u) = 0`.
    Zero,
    Custom { f: fn(f64) -> f64, df: fn(f64) -> f64 },
}

impl Nonlinearity {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => u * u * u,
            Nonlinearity::Linear => u,
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Custom { f, .. } => f(u),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => 3.0 * u * u,
            Nonlinearity::Linear => 1.0,
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Custom { df, .. } => df(u),
        }
    }

    /// Compares `f'` with central differences at `u ∈ {-1, 0, 1, 2}`.
    pub fn check_derivative(&self) -> Result<(), SolverError> {
        const STEP: f64 = 1e-5;
        for u in [-1.0, 0.0, 1.0, 2.0] {
            let numeric = (self.value(u + STEP) - self.value(u - STEP)) / (2.0 * STEP);
            let analytic = self.derivative(u);
            if (numeric - analytic).abs() > 1e-6 * analytic.abs().max(1.0) {
                return Err(SolverError::DerivativeMismatch { u, analytic, numeric });
            }
        }
        Ok(())
    }
}

/// Additive source `g(y, x)`.
pub type Forcing = Box<dyn Fn(&[f64], Point) -> f64 + Send + Sync>;

/// `-∇·(a_N(y, x) ∇u) + f(u) + g(y, x) = 0` in `D`, `u = 0` on `∂D`.
pub struct Problem {
    pub domain: Rect,
    pub coefficient: CoefficientField,
    pub nonlinearity: Nonlinearity,
    pub forcing: Forcing,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("domain", &self.domain)
            .field("coefficient", &self.coefficient)
            .field("nonlinearity", &self.nonlinearity)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn dims(&self) -> usize {
        self.coefficient.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonParams {
    /// Stop when `‖U^{l+1} - U^l‖₂ ≤ rel_tol ‖U^{l+1}‖₂`.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Linear solver settings for every Newton step.
    pub cg: CgParams,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams { rel_tol: 1e-2, max_iters: 25, cg: CgParams::default() }
    }
}

impl NewtonParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rel_tol > 0.0) {
            return Err(SolverError::InvalidParameter("Newton tolerance must be positive"));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidParameter("Newton needs at least one iteration"));
        }
        if !(self.cg.tol > 0.0) {
            return Err(SolverError::InvalidParameter("CG tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Relative increments `‖U^{l+1} - U^l‖ / ‖U^{l+1}‖`, one per iteration.
    pub increments: Vec<f64>,
    pub cg_iterations: usize,
}

impl NewtonOutcome {
    /// Whether the increment norms decreased strictly.
    pub fn increments_decreasing(&self) -> bool {
        self.increments.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOutcome {
    pub u: Vec<f64>,
    pub cg_iterations: usize,
}

/// Per-mesh data shared by all collocation points of one stage.
pub struct Discretization<'m> {
    assembler: Assembler<'m>,
    dirichlet: DirichletMap,
    coefficient: CoefficientSamples,
}

impl<'m> Discretization<'m> {
    pub fn new(mesh: &'m Mesh, problem: &Problem) -> Result<Self, SolverError> {
        let assembler = Assembler::new(mesh);
        let coefficient = problem.coefficient.sample_parts(&assembler)?;
        Ok(Discretization { dirichlet: DirichletMap::new(mesh), assembler, coefficient })
    }

    pub fn assembler(&self) -> &Assembler<'m> {
        &self.assembler
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.assembler.mesh()
    }

    fn check_dims(problem: &Problem, y: &[f64]) -> Result<(), SolverError> {
        if y.len() != problem.dims() {
            return Err(SolverError::DimensionMismatch { expected: problem.dims(), got: y.len() });
        }
        Ok(())
    }

    fn forcing_samples(&self, problem: &Problem, y: &[f64]) -> Vec<f64> {
        self.assembler.quad_points().iter().map(|q| (problem.forcing)(y, q.x)).collect()
    }

    /// Solves `(A + M(f'(v))) u = (-f(v) - g + f'(v) v, φ)` with `v` given at quadrature points.
    fn linearized_step(
        &self,
        problem: &Problem,
        stiffness: &crate::sparse::CsrMatrix,
        forcing: &[f64],
        v: &[f64],
        cg: &CgParams,
    ) -> Result<LinearOutcome, SolverError> {
        let nl = problem.nonlinearity;
        let weight: Vec<f64> = v.iter().map(|&v| nl.derivative(v)).collect();
        let source: Vec<f64> =
            v.iter().zip(forcing).map(|(&v, &g)| -nl.value(v) - g + nl.derivative(v) * v).collect();
        let mass = self.assembler.mass_from_samples(&weight)?;
        let system = stiffness.add_scaled(1.0, &mass)?;
        let load = self.assembler.load_from_samples(&source)?;
        let reduced = self.dirichlet.reduce_matrix(&system);
        let rhs = self.dirichlet.reduce_vector(&load);
        let sol = pcg_solve(&reduced, &rhs, cg)?;
        Ok(LinearOutcome { u: self.dirichlet.expand(&sol.x), cg_iterations: sol.iterations })
    }

    /// Newton iteration from the zero vector at the frozen parameter `y`.
    pub fn solve_semilinear(
        &self,
        problem: &Problem,
        y: &[f64],
        params: &NewtonParams,
    ) -> Result<NewtonOutcome, SolverError> {
        params.validate()?;
        Self::check_dims(problem, y)?;
        let stiffness = self.assembler.stiffness_from_samples(&self.coefficient.at(y)?)?;
        let forcing = self.forcing_samples(problem, y);

        let mut u = vec![0.0; self.mesh().num_vertices()];
        let mut increments = Vec::new();
        let mut cg_iterations = 0;
        for iter in 1..=params.max_iters {
            let v = self.assembler.sample_nodal(&u);
            let step = self.linearized_step(problem, &stiffness, &forcing, &v, &params.cg)?;
            cg_iterations += step.cg_iterations;
            let diff = norm2_diff(&step.u, &u);
            let size = norm2(&step.u);
            u = step.u;
            let done = if size < ZERO_SOLUTION_FLOOR {
                increments.push(diff);
                diff < ZERO_SOLUTION_FLOOR
            } else {
                increments.push(diff / size);
                diff <= params.rel_tol * size
            };
            if done {
                return Ok(NewtonOutcome { u, iterations: iter, increments, cg_iterations });
            }
        }
        Err(SolverError::NewtonNotConverged { iterations: params.max_iters, increments })
    }

    /// One linearized solve around `v`, given by its values at this mesh's quadrature points.
    pub fn solve_linearized(
        &self,
        problem: &Problem,
        y: &[f64],
        v: &[f64],
        cg: &CgParams,
    ) -> Result<LinearOutcome, SolverError> {
        Self::check_dims(problem, y)?;
        if v.len() != self.assembler.num_samples() {
            return Err(FemError::SampleCount { expected: self.assembler.num_samples(), got: v.len() }.into());
        }
        let stiffness = self.assembler.stiffness_from_samples(&self.coefficient.at(y)?)?;
        let forcing = self.forcing_samples(problem, y);
        self.linearized_step(problem, &stiffness, &forcing, v, cg)
    }

    /// One Newton update of the nodal iterate `u` on this mesh.
    pub fn newton_update(
        &self,
        problem: &Problem,
        y: &[f64],
        u: &[f64],
        cg: &CgParams,
    ) -> Result<LinearOutcome, SolverError> {
        self.mesh().check_len(u)?;
        self.solve_linearized(problem, y, &self.assembler.sample_nodal(u), cg)
    }
}

fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(a.iter().map(|x| x * x).sum::<f64>())
}

fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

/// Newton solve on `mesh` at the frozen parameter `y`.
pub fn solve_semilinear(
    mesh: &Mesh,
    problem: &Problem,
    y: &[f64],
    params: &NewtonParams,
) -> Result<NewtonOutcome, SolverError> {
    Discretization::new(mesh, problem)?.solve_semilinear(problem, y, params)
}

/// Linearized solve around the field `v`, evaluated at the quadrature points of `mesh`.
pub fn solve_linearized(
    mesh: &Mesh,
    problem: &Problem,
    y: &[f64],
    v: impl Fn(&QuadPoint) -> f64,
    cg: &CgParams,
) -> Result<LinearOutcome, SolverError> {
    let disc = Discretization::new(mesh, problem)?;
    let samples = disc.assembler.sample(v)?;
    disc.solve_linearized(problem, y, &samples, cg)
}

/// Which approximation a [`StochasticSolution`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// Newton solves on the coarse mesh and grid (`u_{H,P}`).
    CoarseNonlinear,
    /// Newton solves on the fine mesh and grid (`u_{h,p}`).
    DirectSc,
    /// Linearized fine solves around the coarse solution (`u^{h,p}`).
    TwoLevel,
}

/// Nodal solutions at every collocation point, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSolution {
    pub grid: TensorGrid,
    pub mesh: Mesh,
    pub nodal: Vec<Vec<f64>>,
    pub kind: SolutionKind,
}

impl StochasticSolution {
    /// Interpolated nodal vector `Σ_k u_k ψ_k(y)`.
    pub fn nodal_at(&self, y: &[f64]) -> Result<Vec<f64>, CollocationError> {
        self.grid.interpolate_vectors(&self.nodal, y)
    }

    /// Checks vector count, vector length and zero boundary values.
    pub fn check_invariants(&self) -> bool {
        self.nodal.len() == self.grid.len()
            && self.nodal.iter().all(|u| {
                u.len() == self.mesh.num_vertices()
                    && u.iter().zip(self.mesh.boundary_mask()).all(|(x, b)| !*b || *x == 0.0)
            })
    }

    /// Same data with every nodal value multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.nodal.iter_mut().flatten().for_each(|x| *x *= alpha);
        out
    }
}

/// Stage names used in reports and errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Coarse,
    Direct,
    Fine,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Coarse => "coarse",
            Stage::Direct => "direct",
            Stage::Fine => "fine",
        })
    }
}

/// Work counters for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkReport {
    pub stage: Stage,
    pub points: usize,
    pub newton_iters_total: usize,
    pub linear_solves: usize,
    pub cg_iters_total: usize,
    /// Newton iteration count per collocation point (empty for linear stages).
    pub newton_iters: Vec<usize>,
    /// Points whose Newton increments did not decrease strictly.
    pub nonmonotone_points: Vec<usize>,
}

impl WorkReport {
    pub fn avg_cg_iters(&self) -> f64 {
        if self.linear_solves == 0 {
            0.0
        } else {
            self.cg_iters_total as f64 / self.linear_solves as f64
        }
    }
}

fn at_point(stage: Stage, grid: &TensorGrid, index: usize) -> impl Fn(SolverError) -> SolverError + '_ {
    move |e| SolverError::AtPoint { stage, index, y: grid.point(index).to_vec(), source: Box::new(e) }
}

/// Checks the coefficient is positive at every grid point and quadrature point.
pub fn check_coercivity(disc: &Discretization<'_>, problem: &Problem, grid: &TensorGrid) -> Result<f64, SolverError> {
    let xs: Vec<Point> = disc.assembler().quad_points().iter().map(|q| q.x).collect();
    Ok(verify_coercivity(&problem.coefficient, grid.points(), &xs)?)
}

fn newton_stage(
    stage: Stage,
    kind: SolutionKind,
    mesh: &Mesh,
    grid: &TensorGrid,
    problem: &Problem,
    params: &NewtonParams,
    exec: &impl PointExecutor,
) -> Result<(StochasticSolution, WorkReport), SolverError> {
    params.validate()?;
    problem.nonlinearity.check_derivative()?;
    if grid.dims() != problem.dims() {
        return Err(SolverError::DimensionMismatch { expected: problem.dims(), got: grid.dims() });
    }
    let disc = Discretization::new(mesh, problem)?;
    check_coercivity(&disc, problem, grid)?;

    let results = exec.map_indexed(grid.len(), |k| {
        disc.solve_semilinear(problem, grid.point(k), params).map_err(at_point(stage, grid, k))
    });
    let mut nodal = Vec::with_capacity(grid.len());
    let mut report = WorkReport {
        stage,
        points: grid.len(),
        newton_iters_total: 0,
        linear_solves: 0,
        cg_iters_total: 0,
        newton_iters: Vec::with_capacity(grid.len()),
        nonmonotone_points: Vec::new(),
    };
    for (k, r) in results.into_iter().enumerate() {
        let out = r?;
        report.newton_iters_total += out.iterations;
        report.linear_solves += out.iterations;
        report.cg_iters_total += out.cg_iterations;
        report.newton_iters.push(out.iterations);
        if !out.increments_decreasing() {
            log::warn!("{stage} stage: Newton increments not strictly decreasing at point {k}: {:?}", out.increments);
            report.nonmonotone_points.push(k);
        }
        nodal.push(out.u);
    }
    Ok((StochasticSolution { grid: grid.clone(), mesh: mesh.clone(), nodal, kind }, report))
}

/// Direct stochastic collocation: one Newton solve per collocation point.
pub fn run_direct_sc(
    mesh: &Mesh,
    grid: &TensorGrid,
    problem: &Problem,
    params: &NewtonParams,
    exec: &impl PointExecutor,
) -> Result<(StochasticSolution, WorkReport), SolverError> {
    newton_stage(Stage::Direct, SolutionKind::DirectSc, mesh, grid, problem, params, exec)
}

/// Output of [`run_two_level`].
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelResult {
    /// `u_{H,P}`.
    pub coarse: StochasticSolution,
    /// `u^{h,p}`.
    pub fine: StochasticSolution,
    pub coarse_report: WorkReport,
    pub fine_report: WorkReport,
}

/// Two-level collocation.
///
/// Step 1 solves the nonlinear problem on `(coarse_mesh, coarse_grid)`.
/// Step 2 interpolates that solution in `y` at each fine collocation point,
/// evaluates it on the coarse mesh at the fine quadrature points, and solves
/// the linearized problem once on the fine mesh.
pub fn run_two_level(
    coarse: (&Mesh, &TensorGrid),
    fine: (&Mesh, &TensorGrid),
    problem: &Problem,
    params: &NewtonParams,
    exec: &impl PointExecutor,
) -> Result<TwoLevelResult, SolverError> {
    let (coarse_mesh, coarse_grid) = coarse;
    let (fine_mesh, fine_grid) = fine;
    if coarse_mesh.h() < fine_mesh.h() {
        log::warn!("coarse mesh size {} is below fine mesh size {}", coarse_mesh.h(), fine_mesh.h());
    }
    if coarse_grid.degrees().iter().zip(fine_grid.degrees()).any(|(c, f)| c > f) {
        log::warn!("coarse degrees {:?} exceed fine degrees {:?}", coarse_grid.degrees(), fine_grid.degrees());
    }
    if fine_grid.dims() != problem.dims() {
        return Err(SolverError::DimensionMismatch { expected: problem.dims(), got: fine_grid.dims() });
    }

    let (coarse_sol, coarse_report) =
        newton_stage(Stage::Coarse, SolutionKind::CoarseNonlinear, coarse_mesh, coarse_grid, problem, params, exec)?;

    let disc = Discretization::new(fine_mesh, problem)?;
    check_coercivity(&disc, problem, fine_grid)?;
    let locations: Vec<Location> = disc
        .assembler()
        .quad_points()
        .iter()
        .map(|q| coarse_mesh.locate(q.x))
        .collect::<Result<_, _>>()?;

    let results = exec.map_indexed(fine_grid.len(), |k| {
        let y = fine_grid.point(k);
        let run = || -> Result<LinearOutcome, SolverError> {
            let v_nodal = coarse_sol.nodal_at(y)?;
            let v: Vec<f64> = locations.iter().map(|loc| coarse_mesh.evaluate_at(&v_nodal, loc)).collect();
            disc.solve_linearized(problem, y, &v, &params.cg)
        };
        run().map_err(at_point(Stage::Fine, fine_grid, k))
    });

    let mut nodal = Vec::with_capacity(fine_grid.len());
    let mut fine_report = WorkReport {
        stage: Stage::Fine,
        points: fine_grid.len(),
        newton_iters_total: 0,
        linear_solves: 0,
        cg_iters_total: 0,
        newton_iters: Vec::new(),
        nonmonotone_points: Vec::new(),
    };
    for r in results {
        let out = r?;
        fine_report.linear_solves += 1;
        fine_report.cg_iters_total += out.cg_iterations;
        nodal.push(out.u);
    }
    Ok(TwoLevelResult {
        coarse: coarse_sol,
        fine: StochasticSolution { grid: fine_grid.clone(), mesh: fine_mesh.clone(), nodal, kind: SolutionKind::TwoLevel },
        coarse_report,
        fine_report,
    })
}
