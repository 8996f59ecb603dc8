//! The two benchmark problems on `D = Γ = [-1, 1]²` with `f(u) = u³`.

use alloc::boxed::Box;

use core::f64::consts::PI;

use crate::mesh::Rect;
use crate::norms::AnalyticSolution;
use crate::random_field::{compute_kl, AffineField, CoefficientField, CovarianceKernel, FieldError};
use crate::solvers::{Nonlinearity, Problem};
use crate::Point;

/// `u(y, x) = sin(πx₁) sin(πx₂) / (3 + y₁ + y₂)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Example1Exact;

fn example1_coefficient(y: &[f64]) -> f64 {
    3.0 + y[0] + y[1]
}

impl AnalyticSolution for Example1Exact {
    fn value(&self, y: &[f64], x: Point) -> f64 {
        libm::sin(PI * x[0]) * libm::sin(PI * x[1]) / example1_coefficient(y)
    }

    fn gradient(&self, y: &[f64], x: Point) -> [f64; 2] {
        let a = example1_coefficient(y);
        let (s0, c0) = (libm::sin(PI * x[0]), libm::cos(PI * x[0]));
        let (s1, c1) = (libm::sin(PI * x[1]), libm::cos(PI * x[1]));
        [PI * c0 * s1 / a, PI * s0 * c1 / a]
    }
}

/// Coefficient `3 + y₁ + y₂` with the forcing that makes [`Example1Exact`] the solution.
///
/// Since `a` is constant in `x`, `-∇·(a∇u) = 2π² sin(πx₁) sin(πx₂)`, so
/// `g = -(2π² sin(πx₁) sin(πx₂) + u³)`.
pub fn example1() -> (Problem, Example1Exact) {
    let forcing = |y: &[f64], x: Point| {
        let s = libm::sin(PI * x[0]) * libm::sin(PI * x[1]);
        let u = Example1Exact.value(y, x);
        -(2.0 * PI * PI * s + u * u * u)
    };
    let problem = Problem {
        domain: Rect::reference_square(),
        coefficient: CoefficientField::Affine(AffineField::constant(3.0, &[1.0, 1.0])),
        nonlinearity: Nonlinearity::Cubic,
        forcing: Box::new(forcing),
    };
    (problem, Example1Exact)
}

/// Settings of the KL coefficient of the second benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlSettings {
    pub kl_n: usize,
    pub sigma: f64,
    pub correlation_length: f64,
    pub truncation: usize,
}

impl Default for KlSettings {
    fn default() -> Self {
        KlSettings { kl_n: 64, sigma: 0.4, correlation_length: 1.0, truncation: 2 }
    }
}

/// `g(x) = 2 (0.5 - |x|²)`.
pub fn example2_forcing(x: Point) -> f64 {
    2.0 * (0.5 - x[0] * x[0] - x[1] * x[1])
}

/// KL coefficient with mean 1 and kernel `σ² exp(-‖x - x'‖ / ℓ)`; no exact solution.
pub fn example2(settings: &KlSettings) -> Result<Problem, FieldError> {
    let domain = Rect::reference_square();
    let kernel = CovarianceKernel::Exponential { sigma: settings.sigma, correlation_length: settings.correlation_length };
    let kl = compute_kl(&kernel, domain, settings.kl_n, settings.truncation)?.with_mean(|_| 1.0);
    Ok(Problem {
        domain,
        coefficient: CoefficientField::KarhunenLoeve(kl),
        nonlinearity: Nonlinearity::Cubic,
        forcing: Box::new(|_, x| example2_forcing(x)),
    })
}
