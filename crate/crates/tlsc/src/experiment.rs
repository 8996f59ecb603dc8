//! Runs configured solves and measures their errors.

use std::path::Path;
use std::time::Instant;

use tlsc_core::benchmarks::{example1, example2, Example1Exact};
use tlsc_core::norms::{error_norms, fit_slope, validation_grid, ErrorNorms, Norm, Reference, SlopeScale};
use tlsc_core::random_field::AffineField;
use tlsc_core::solvers::{run_direct_sc, run_two_level, NewtonParams, StochasticSolution, WorkReport};
use tlsc_core::sparse::CgParams;
use tlsc_core::{CoefficientField, Mesh, PointExecutor, Problem, TensorGrid};

use crate::cache;
use crate::config::{Example, ExperimentConfig, LevelPair, Method, ReferenceSpec};
use crate::formats::{ResultRow, SlopeLine, WorkLine};
use crate::study::floor_fit;
use crate::AppError;

/// Mesh and degree levels of one measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Levels {
    pub coarse_sub: usize,
    pub fine_sub: usize,
    pub coarse_degree: usize,
    pub fine_degree: usize,
}

impl Levels {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Levels {
            coarse_sub: cfg.coarse_sub,
            fine_sub: cfg.fine_sub,
            coarse_degree: cfg.coarse_degree,
            fine_degree: cfg.fine_degree,
        }
    }

    /// Levels a method actually uses; single-level methods repeat their level.
    pub fn used_by(&self, method: Method) -> Self {
        match method {
            Method::TwoLevel => *self,
            Method::DirectSc => Levels { coarse_sub: self.fine_sub, coarse_degree: self.fine_degree, ..*self },
            Method::CoarseOnly => Levels { fine_sub: self.coarse_sub, fine_degree: self.coarse_degree, ..*self },
        }
    }
}

/// A benchmark or custom problem with its exact solution when one exists.
pub struct Setup {
    pub problem: Problem,
    pub exact: Option<Example1Exact>,
    /// Lines echoed at the top of `work.txt`.
    pub notes: Vec<String>,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Setup, AppError> {
    match cfg.example {
        Example::Example1 => {
            let (problem, exact) = example1();
            Ok(Setup { problem, exact: Some(exact), notes: Vec::new() })
        }
        Example::Example2 => {
            let problem = example2(&cfg.kl)?;
            let mut notes = Vec::new();
            if let CoefficientField::KarhunenLoeve(kl) = &problem.coefficient {
                let l: Vec<String> = kl.eigenvalues().iter().map(|l| format!("{l:.6e}")).collect();
                notes.push(format!("KL eigenvalues (kl_n = {}): {}", cfg.kl.kl_n, l.join(", ")));
            }
            Ok(Setup { problem, exact: None, notes })
        }
        Example::Custom => {
            let c = cfg.custom()?;
            let forcing = c.forcing;
            let problem = Problem {
                domain: tlsc_core::Rect::reference_square(),
                coefficient: CoefficientField::Affine(AffineField::constant(c.mean, c.amplitudes)),
                nonlinearity: c.nonlinearity,
                forcing: Box::new(move |_, _| forcing),
            };
            Ok(Setup { problem, exact: None, notes: Vec::new() })
        }
    }
}

/// The solution errors are measured against.
pub enum ResolvedReference {
    Analytic(Example1Exact),
    Discrete(Box<StochasticSolution>),
}

impl ResolvedReference {
    pub fn as_reference(&self) -> Reference<'_> {
        match self {
            ResolvedReference::Analytic(e) => Reference::Analytic(e),
            ResolvedReference::Discrete(s) => Reference::Discrete(s),
        }
    }
}

pub fn newton_params(cfg: &ExperimentConfig) -> NewtonParams {
    NewtonParams { rel_tol: cfg.newton_eps, cg: CgParams::with_tol(cfg.cg_tol), ..Default::default() }
}

/// Resolves the configured reference.
///
/// Without an explicit choice, example 1 uses its exact solution and the
/// others compute direct collocation with `4 × finest_sub` subdivisions and
/// degree `max_degree + 2`.
pub fn resolve_reference(
    cfg: &ExperimentConfig,
    setup: &Setup,
    finest_sub: usize,
    max_degree: usize,
    exec: &impl PointExecutor,
) -> Result<ResolvedReference, AppError> {
    let spec = match (&cfg.reference, &setup.exact) {
        (Some(s), _) => s.clone(),
        (None, Some(_)) => ReferenceSpec::Analytic,
        (None, None) => ReferenceSpec::Compute { h_sub: 4 * finest_sub, p: max_degree + 2 },
    };
    match spec {
        ReferenceSpec::Analytic => {
            setup.exact.map(ResolvedReference::Analytic).ok_or_else(|| AppError::Usage("no analytic reference".into()))
        }
        ReferenceSpec::Cached(path) => {
            log::info!("loading reference from {}", path.display());
            Ok(ResolvedReference::Discrete(Box::new(cache::load(&path, setup.problem.domain)?)))
        }
        ReferenceSpec::Compute { h_sub, p } => {
            log::info!("computing reference with {h_sub} subdivisions and degree {p}");
            let mesh = Mesh::uniform(setup.problem.domain, h_sub)?;
            let grid = TensorGrid::isotropic(setup.problem.dims(), p)?;
            let (sol, _) = run_direct_sc(&mesh, &grid, &setup.problem, &newton_params(cfg), exec)?;
            if let Some(path) = &cfg.reference_cache {
                cache::save(&sol, path, &cfg.to_text())?;
                log::info!("reference cached at {}", path.display());
            }
            Ok(ResolvedReference::Discrete(Box::new(sol)))
        }
    }
}

/// One method at one set of levels.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub method: Method,
    pub levels: Levels,
    pub norms: ErrorNorms,
    pub newton_iters: usize,
    pub linear_solves: usize,
    pub wall_seconds: f64,
    pub reports: Vec<WorkReport>,
}

impl Measurement {
    pub fn rows(&self, example: Example) -> Vec<ResultRow> {
        let l = self.levels.used_by(self.method);
        [(Norm::L2, "L2"), (Norm::H1Seminorm, "H1")]
            .into_iter()
            .map(|(norm, name)| ResultRow {
                example: example.name().into(),
                method: self.method.name().into(),
                coarse_sub: l.coarse_sub,
                fine_sub: l.fine_sub,
                coarse_degree: l.coarse_degree,
                fine_degree: l.fine_degree,
                norm: name.into(),
                error: self.norms.get(norm),
                newton_iters: self.newton_iters,
                linear_solves: self.linear_solves,
                wall_seconds: self.wall_seconds,
            })
            .collect()
    }

    pub fn work_lines(&self) -> Vec<WorkLine> {
        let l = self.levels.used_by(self.method);
        let levels = format!("H_sub={} h_sub={} P={} p={}", l.coarse_sub, l.fine_sub, l.coarse_degree, l.fine_degree);
        self.reports.iter().map(|r| WorkLine { method: self.method.name().into(), levels: levels.clone(), report: r.clone() }).collect()
    }
}

/// Solves with `method` at `levels`; returns the measured solution and the measurement.
pub fn run_method(
    cfg: &ExperimentConfig,
    setup: &Setup,
    reference: &ResolvedReference,
    method: Method,
    levels: Levels,
    exec: &impl PointExecutor,
) -> Result<(StochasticSolution, Measurement), AppError> {
    let problem = &setup.problem;
    let params = newton_params(cfg);
    let dims = problem.dims();
    let start = Instant::now();
    let (sol, reports) = match method {
        Method::DirectSc | Method::CoarseOnly => {
            let l = levels.used_by(method);
            let mesh = Mesh::uniform(problem.domain, l.fine_sub)?;
            let grid = TensorGrid::isotropic(dims, l.fine_degree)?;
            let (sol, report) = run_direct_sc(&mesh, &grid, problem, &params, exec)?;
            (sol, vec![report])
        }
        Method::TwoLevel => {
            let cm = Mesh::uniform(problem.domain, levels.coarse_sub)?;
            let fm = Mesh::uniform(problem.domain, levels.fine_sub)?;
            let cg = TensorGrid::isotropic(dims, levels.coarse_degree)?;
            let fg = TensorGrid::isotropic(dims, levels.fine_degree)?;
            let r = run_two_level((&cm, &cg), (&fm, &fg), problem, &params, exec)?;
            (r.fine, vec![r.coarse_report, r.fine_report])
        }
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    for r in &reports {
        if !r.nonmonotone_points.is_empty() {
            log::warn!("{}: Newton increments not monotone at points {:?}", method.name(), r.nonmonotone_points);
        }
    }
    let validation = validation_grid(&sol.grid, cfg.validation_extra_degree)?;
    let norms = error_norms(&sol, reference.as_reference(), &validation, exec)?;
    let measurement = Measurement {
        method,
        levels,
        norms,
        newton_iters: reports.iter().map(|r| r.newton_iters_total).sum(),
        linear_solves: reports.iter().map(|r| r.linear_solves).sum(),
        wall_seconds,
        reports,
    };
    log::info!(
        "{} {:?}: L2 = {:.4e}, H1 = {:.4e} ({:.2} s)",
        method.name(),
        levels.used_by(method),
        norms.l2,
        norms.h1,
        wall_seconds
    );
    Ok((sol, measurement))
}

/// Every configured method at every level set, in configuration order.
pub fn run_all(
    cfg: &ExperimentConfig,
    setup: &Setup,
    reference: &ResolvedReference,
    level_sets: &[Levels],
    exec: &impl PointExecutor,
) -> Result<Vec<Measurement>, AppError> {
    let mut out = Vec::new();
    for &levels in level_sets {
        for &method in &cfg.methods {
            out.push(run_method(cfg, setup, reference, method, levels, exec)?.1);
        }
    }
    Ok(out)
}

pub fn h_level_sets(cfg: &ExperimentConfig, ladder: &[LevelPair]) -> Vec<Levels> {
    ladder.iter().map(|&(c, f)| Levels { coarse_sub: c, fine_sub: f, ..Levels::from_config(cfg) }).collect()
}

pub fn p_level_sets(cfg: &ExperimentConfig, ladder: &[LevelPair]) -> Vec<Levels> {
    ladder.iter().map(|&(c, f)| Levels { coarse_degree: c, fine_degree: f, ..Levels::from_config(cfg) }).collect()
}

fn distinct(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Log-log fits of error against mesh size per method and norm.
pub fn h_slopes(cfg: &ExperimentConfig, measurements: &[Measurement]) -> Vec<SlopeLine> {
    let mut lines = Vec::new();
    for &method in &cfg.methods {
        for (norm, name) in [(Norm::L2, "L2"), (Norm::H1Seminorm, "H1")] {
            let pairs: Vec<(f64, f64)> = measurements
                .iter()
                .filter(|m| m.method == method)
                .map(|m| (2.0 / m.levels.used_by(method).fine_sub as f64, m.norms.get(norm)))
                .collect();
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let (slope, r2, note) = if distinct(&xs) < 3 {
                (None, None, "fewer than 3 distinct mesh sizes".to_string())
            } else {
                match fit_slope(&pairs, SlopeScale::LogLog) {
                    Ok(f) => (Some(f.slope), Some(f.r_squared), String::new()),
                    Err(e) => (None, None, e.to_string()),
                }
            };
            lines.push(SlopeLine {
                method: method.name().into(),
                norm: name.into(),
                kind: "loglog_h".into(),
                slope,
                r_squared: r2,
                points: pairs.len(),
                note,
            });
        }
    }
    lines
}

/// Semi-log fits of the stochastic error component against degree.
pub fn p_slopes(cfg: &ExperimentConfig, measurements: &[Measurement]) -> Vec<SlopeLine> {
    let mut lines = Vec::new();
    for &method in &cfg.methods {
        for (norm, name) in [(Norm::L2, "L2"), (Norm::H1Seminorm, "H1")] {
            let mut pairs: Vec<(f64, f64)> = measurements
                .iter()
                .filter(|m| m.method == method)
                .map(|m| (m.levels.used_by(method).fine_degree as f64, m.norms.get(norm)))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs.dedup_by(|a, b| a.0 == b.0);
            let line = match floor_fit(&pairs) {
                Ok(f) => SlopeLine {
                    method: method.name().into(),
                    norm: name.into(),
                    kind: "semilog_p_floor_corrected".into(),
                    slope: f.fit.map(|x| x.slope),
                    r_squared: f.fit.map(|x| x.r_squared),
                    points: f.pre_floor.len(),
                    note: format!(
                        "floor={:.4e} decreasing_until_floor={} pre_floor={:?}",
                        f.floor, f.decreasing_until_floor, f.pre_floor
                    ),
                },
                Err(e) => SlopeLine {
                    method: method.name().into(),
                    norm: name.into(),
                    kind: "semilog_p_floor_corrected".into(),
                    slope: None,
                    r_squared: None,
                    points: pairs.len(),
                    note: e.to_string(),
                },
            };
            lines.push(line);
        }
    }
    lines
}

/// `results.csv` rows for every measurement.
pub fn result_rows(cfg: &ExperimentConfig, measurements: &[Measurement]) -> Vec<ResultRow> {
    measurements.iter().flat_map(|m| m.rows(cfg.example)).collect()
}

/// Comparison table in the layout `u - u_{H,P}`, `u - u_{h,p}`, `u - u^{h,p}`.
pub fn format_table(measurements: &[Measurement]) -> String {
    let mut s = String::from("solution        L2             H1\n");
    for method in Method::ALL {
        if let Some(m) = measurements.iter().find(|m| m.method == method) {
            let label = match method {
                Method::CoarseOnly => "u - u_{H,P}",
                Method::DirectSc => "u - u_{h,p}",
                Method::TwoLevel => "u - u^{h,p}",
            };
            s.push_str(&format!("{label:<15} {:<14.4e} {:.4e}\n", m.norms.l2, m.norms.h1));
        }
    }
    s
}

pub fn ensure_dir(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|source| AppError::Io { path: dir.into(), source })
}
