//! Random diffusion coefficients `a_N(y, x) = ā(x) + Σ_n c_n(x) y_n`.
//!
//! Two forms are supported: an affine field with user-supplied mean and mode
//! functions, and a truncated Karhunen–Loève expansion whose modes are
//! `√λ_n b_n(x)` computed from a covariance kernel.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::collocation::{check_gamma, CollocationError};
use crate::dense::{self, EigenError};
use crate::fem::Assembler;
use crate::mesh::{Location, Mesh, MeshError, Rect};
use crate::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Parameter(#[from] CollocationError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("covariance kernel is not positive semidefinite (eigenvalue {eigenvalue:.3e}, largest {largest:.3e})")]
    KernelNotPsd { eigenvalue: f64, largest: f64 },
    #[error("requested {requested} KL modes but the grid has only {available} vertices")]
    TooManyModes { requested: usize, available: usize },
    #[error("coefficient {value} is not positive at y = {y:?}, x = {x:?}")]
    NotCoercive { y: Vec<f64>, x: Point, value: f64 },
    #[error("coercivity check needs at least one parameter and one spatial sample")]
    NoSamples,
}

/// Covariance kernels `Cov_a(x, x')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceKernel {
    /// `σ²` everywhere (rank one).
    Constant { sigma: f64 },
    /// `σ² exp(-‖x - x'‖₂ / ℓ)` with the Euclidean distance.
    Exponential { sigma: f64, correlation_length: f64 },
    /// `σ² exp(-(|x₁ - x₁'| + |x₂ - x₂'|) / ℓ)`.
    SeparableExponential { sigma: f64, correlation_length: f64 },
}

impl CovarianceKernel {
    pub fn eval(&self, a: Point, b: Point) -> f64 {
        match *self {
            CovarianceKernel::Constant { sigma } => sigma * sigma,
            CovarianceKernel::Exponential { sigma, correlation_length } => {
                sigma * sigma * libm::exp(-libm::hypot(a[0] - b[0], a[1] - b[1]) / correlation_length)
            }
            CovarianceKernel::SeparableExponential { sigma, correlation_length } => {
                let d = (a[0] - b[0]).abs() + (a[1] - b[1]).abs();
                sigma * sigma * libm::exp(-d / correlation_length)
            }
        }
    }
}

/// Truncated Karhunen–Loève expansion on a P1 grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KlExpansion {
    grid: Mesh,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Vec<f64>>,
}

/// Nyström discretization of the covariance operator on a `kl_n × kl_n` grid.
///
/// With `W` the lumped P1 vertex weights and `K` the kernel matrix over grid
/// vertices, the symmetric matrix `W^½ K W^½` is decomposed; eigenfunction
/// nodal values are `W^-½ v`, which makes them orthonormal in the lumped
/// `L²(D)` inner product. The mean field starts at zero, see
/// [`KlExpansion::with_mean`].
pub fn compute_kl(
    kernel: &CovarianceKernel,
    domain: Rect,
    kl_n: usize,
    truncation: usize,
) -> Result<KlExpansion, FieldError> {
    let grid = Mesh::uniform(domain, kl_n)?;
    let nv = grid.num_vertices();
    if truncation > nv {
        return Err(FieldError::TooManyModes { requested: truncation, available: nv });
    }
    let weights = grid.vertex_weights();
    let sqrt_w: Vec<f64> = weights.iter().map(|w| libm::sqrt(*w)).collect();
    let verts = grid.vertices();
    let mut matrix = vec![0.0; nv * nv];
    for i in 0..nv {
        for j in i..nv {
            let v = sqrt_w[i] * kernel.eval(verts[i], verts[j]) * sqrt_w[j];
            matrix[i * nv + j] = v;
            matrix[j * nv + i] = v;
        }
    }

    let pairs = if nv <= 160 {
        let all = dense::symmetric_eigen(&matrix, nv)?;
        check_psd(&all.values)?;
        let mut all = all;
        all.values.truncate(truncation);
        all.vectors.truncate(truncation);
        all
    } else {
        let top = dense::top_eigenpairs(&matrix, nv, truncation)?;
        check_psd(&top.values)?;
        top
    };

    let mut eigenvalues = Vec::with_capacity(truncation);
    let mut eigenfunctions = Vec::with_capacity(truncation);
    for (lambda, v) in pairs.values.into_iter().zip(pairs.vectors) {
        let mut b: Vec<f64> = v.iter().zip(&sqrt_w).map(|(v, s)| v / s).collect();
        let norm = libm::sqrt(b.iter().zip(&weights).map(|(b, w)| w * b * b).sum::<f64>());
        b.iter_mut().for_each(|x| *x /= norm);
        orient(&mut b, &weights);
        eigenvalues.push(lambda.max(0.0));
        eigenfunctions.push(b);
    }
    Ok(KlExpansion { mean: vec![0.0; nv], grid, eigenvalues, eigenfunctions })
}

fn check_psd(values: &[f64]) -> Result<(), FieldError> {
    let largest = values.iter().cloned().fold(0.0f64, f64::max);
    if let Some(&bad) = values.iter().find(|&&v| v < -1e-10 * largest) {
        return Err(FieldError::KernelNotPsd { eigenvalue: bad, largest });
    }
    Ok(())
}

/// Deterministic sign: positive weighted mean, else positive first significant entry.
fn orient(b: &mut [f64], weights: &[f64]) {
    let mean: f64 = b.iter().zip(weights).map(|(b, w)| b * w).sum();
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let flip = if mean.abs() > 1e-10 * scale {
        mean < 0.0
    } else {
        b.iter().find(|x| x.abs() > 1e-8 * scale).is_some_and(|x| *x < 0.0)
    };
    if flip {
        b.iter_mut().for_each(|x| *x = -*x);
    }
}

impl KlExpansion {
    /// Replaces the mean field by `mean` sampled at the KL grid vertices.
    pub fn with_mean(mut self, mean: impl Fn(Point) -> f64) -> Self {
        self.mean = self.grid.vertices().iter().map(|&x| mean(x)).collect();
        self
    }

    /// Keeps only the leading `n` modes.
    pub fn truncated(mut self, n: usize) -> Self {
        self.eigenvalues.truncate(n);
        self.eigenfunctions.truncate(n);
        self
    }

    pub fn grid(&self) -> &Mesh {
        &self.grid
    }

    pub fn mean_nodal(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Vec<f64>] {
        &self.eigenfunctions
    }

    pub fn truncation(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_n λ_n b_n(x) b_n(x')` at two grid vertices.
    pub fn covariance_at_vertices(&self, i: usize, j: usize) -> f64 {
        self.eigenvalues.iter().zip(&self.eigenfunctions).map(|(l, b)| l * b[i] * b[j]).sum()
    }

    fn parts_at(&self, loc: &Location, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.grid.evaluate_at(&self.mean, loc));
        for (l, b) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            out.push(libm::sqrt(*l) * self.grid.evaluate_at(b, loc));
        }
    }
}

pub type SpatialFn = Box<dyn Fn(Point) -> f64 + Send + Sync>;

/// `ā(x) + Σ_n c_n(x) y_n` with arbitrary mean and mode functions.
pub struct AffineField {
    mean: SpatialFn,
    modes: Vec<SpatialFn>,
}

impl AffineField {
    pub fn new(mean: SpatialFn, modes: Vec<SpatialFn>) -> Self {
        AffineField { mean, modes }
    }

    /// Spatially constant mean and mode amplitudes.
    pub fn constant(mean: f64, amplitudes: &[f64]) -> Self {
        AffineField {
            mean: Box::new(move |_| mean),
            modes: amplitudes.iter().map(|&c| Box::new(move |_: Point| c) as SpatialFn).collect(),
        }
    }
}

impl fmt::Debug for AffineField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineField").field("modes", &self.modes.len()).finish_non_exhaustive()
    }
}

/// Random diffusion coefficient in one of the supported forms.
#[derive(Debug)]
pub enum CoefficientField {
    Affine(AffineField),
    KarhunenLoeve(KlExpansion),
}

impl CoefficientField {
    /// Number of random parameters `N`.
    pub fn dims(&self) -> usize {
        match self {
            CoefficientField::Affine(a) => a.modes.len(),
            CoefficientField::KarhunenLoeve(kl) => kl.truncation(),
        }
    }

    /// Mean followed by the `N` mode values at `x`.
    pub fn parts(&self, x: Point) -> Result<Vec<f64>, FieldError> {
        let mut out = Vec::with_capacity(self.dims() + 1);
        match self {
            CoefficientField::Affine(a) => {
                out.push((a.mean)(x));
                out.extend(a.modes.iter().map(|m| m(x)));
            }
            CoefficientField::KarhunenLoeve(kl) => {
                let loc = kl.grid.locate(x)?;
                kl.parts_at(&loc, &mut out);
            }
        }
        Ok(out)
    }

    /// `a_N(y, x)`; rejects `y` outside `Γ`.
    pub fn evaluate(&self, y: &[f64], x: Point) -> Result<f64, FieldError> {
        check_gamma(y, self.dims())?;
        let parts = self.parts(x)?;
        Ok(combine(&parts, y))
    }

    /// Mean and mode values at every quadrature point of `assembler`.
    pub fn sample_parts(&self, assembler: &Assembler<'_>) -> Result<CoefficientSamples, FieldError> {
        let stride = self.dims() + 1;
        let mut data = Vec::with_capacity(stride * assembler.num_samples());
        let mut buf = Vec::with_capacity(stride);
        for q in assembler.quad_points() {
            match self {
                CoefficientField::KarhunenLoeve(kl) => {
                    let loc = kl.grid.locate(q.x)?;
                    kl.parts_at(&loc, &mut buf);
                }
                _ => buf = self.parts(q.x)?,
            }
            data.extend_from_slice(&buf);
        }
        Ok(CoefficientSamples { stride, data })
    }
}

fn combine(parts: &[f64], y: &[f64]) -> f64 {
    parts[0] + parts[1..].iter().zip(y).map(|(c, y)| c * y).sum::<f64>()
}

/// Coefficient decomposition cached at a fixed set of spatial points.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSamples {
    stride: usize,
    data: Vec<f64>,
}

impl CoefficientSamples {
    pub fn len(&self) -> usize {
        self.data.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Coefficient values at every cached point for parameter `y`.
    pub fn at(&self, y: &[f64]) -> Result<Vec<f64>, FieldError> {
        check_gamma(y, self.stride - 1)?;
        Ok(self.data.chunks_exact(self.stride).map(|p| combine(p, y)).collect())
    }
}

/// Smallest coefficient value over all `(y, x)` sample pairs.
///
/// Fails with the offending pair when that minimum is not positive.
pub fn verify_coercivity(
    field: &CoefficientField,
    y_samples: &[Vec<f64>],
    x_samples: &[Point],
) -> Result<f64, FieldError> {
    if y_samples.is_empty() || x_samples.is_empty() {
        return Err(FieldError::NoSamples);
    }
    let parts = x_samples.iter().map(|&x| field.parts(x)).collect::<Result<Vec<_>, _>>()?;
    let mut min = f64::INFINITY;
    let mut arg = (0, 0);
    for (iy, y) in y_samples.iter().enumerate() {
        check_gamma(y, field.dims())?;
        for (ix, p) in parts.iter().enumerate() {
            let v = combine(p, y);
            if v < min || v.is_nan() {
                min = v;
                arg = (iy, ix);
            }
        }
    }
    if !(min > 0.0) {
        return Err(FieldError::NotCoercive { y: y_samples[arg.0].clone(), x: x_samples[arg.1], value: min });
    }
    Ok(min)
}
