//! Tensor-product Gauss–Legendre collocation on `Γ = [-1, 1]^N`.
//!
//! Each parameter is uniformly distributed with density 1/2, so the
//! normalized 1D weights sum to one and expectations are plain weighted sums.
//! Interpolation uses the barycentric form of the Lagrange basis.

use alloc::vec;
use alloc::vec::Vec;

/// Slack accepted when checking that a parameter lies in `[-1, 1]`.
pub const GAMMA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CollocationError {
    #[error("a Gauss rule needs at least one point")]
    NoPoints,
    #[error("degree vector is empty")]
    EmptyDegrees,
    #[error("parameter y[{dim}] = {value} lies outside [-1, 1]")]
    OutsideGamma { dim: usize, value: f64 },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Nodes of the `n`-point Gauss–Legendre rule on `[-1, 1]` (ascending) with
/// weights normalized to sum to one.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>), CollocationError> {
    if n == 0 {
        return Err(CollocationError::NoPoints);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Chebyshev-like initial guess for the i-th largest root.
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        // Normalized weight: (2 / ((1 - x²) P'(x)²)) / 2.
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() > 0.0 { nf * (x * p1 - p0) / (x * x - 1.0) } else { 0.0 };
    (p1, d)
}

/// One-dimensional factor of a tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub barycentric: Vec<f64>,
}

impl GaussRule1d {
    pub fn new(points: usize) -> Result<Self, CollocationError> {
        let (nodes, weights) = gauss_legendre(points)?;
        let barycentric = (0..points)
            .map(|j| {
                let prod: f64 = (0..points).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product();
                1.0 / prod
            })
            .collect();
        Ok(GaussRule1d { nodes, weights, barycentric })
    }

    /// Values of all Lagrange basis polynomials at `y`.
    pub fn lagrange_basis(&self, y: f64) -> Vec<f64> {
        if let Some(j) = self.nodes.iter().position(|&x| x == y) {
            let mut out = vec![0.0; self.nodes.len()];
            out[j] = 1.0;
            return out;
        }
        let terms: Vec<f64> = self.nodes.iter().zip(&self.barycentric).map(|(x, w)| w / (y - x)).collect();
        let denom: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / denom).collect()
    }
}

/// Tensor Gauss–Legendre grid with isotropic or anisotropic degrees.
///
/// Points are flattened lexicographically with the first dimension varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    degrees: Vec<usize>,
    rules: Vec<GaussRule1d>,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TensorGrid {
    /// Grid with `p_n + 1` Gauss points in dimension `n`.
    pub fn new(degrees: &[usize]) -> Result<Self, CollocationError> {
        if degrees.is_empty() {
            return Err(CollocationError::EmptyDegrees);
        }
        let rules = degrees.iter().map(|&p| GaussRule1d::new(p + 1)).collect::<Result<Vec<_>, _>>()?;
        let count: usize = degrees.iter().map(|p| p + 1).product();
        let mut grid = TensorGrid { degrees: degrees.to_vec(), rules, points: Vec::with_capacity(count), weights: Vec::with_capacity(count) };
        for k in 0..count {
            let m = grid.multi_index(k);
            grid.points.push(m.iter().enumerate().map(|(d, &i)| grid.rules[d].nodes[i]).collect());
            grid.weights.push(m.iter().enumerate().map(|(d, &i)| grid.rules[d].weights[i]).product());
        }
        Ok(grid)
    }

    /// Same degree `p` in each of `dims` dimensions.
    pub fn isotropic(dims: usize, p: usize) -> Result<Self, CollocationError> {
        Self::new(&vec![p; dims])
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn dims(&self) -> usize {
        self.degrees.len()
    }

    /// `N_p = Π (p_n + 1)`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rules(&self) -> &[GaussRule1d] {
        &self.rules
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Tensor quadrature weights (sum to one).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut m = vec![0; self.degrees.len()];
        for d in (0..self.degrees.len()).rev() {
            let size = self.degrees[d] + 1;
            m[d] = flat % size;
            flat /= size;
        }
        m
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.degrees).fold(0, |acc, (&i, &p)| acc * (p + 1) + i)
    }

    pub fn check_parameter(&self, y: &[f64]) -> Result<(), CollocationError> {
        check_gamma(y, self.dims())
    }

    /// Tensor Lagrange basis values `ψ_k(y)` for every grid point `k`.
    pub fn basis_at(&self, y: &[f64]) -> Result<Vec<f64>, CollocationError> {
        self.check_parameter(y)?;
        let per_dim: Vec<Vec<f64>> = self.rules.iter().zip(y).map(|(r, &yn)| r.lagrange_basis(yn)).collect();
        Ok((0..self.len())
            .map(|k| self.multi_index(k).iter().enumerate().map(|(d, &i)| per_dim[d][i]).product())
            .collect())
    }

    /// Interpolant of scalar point values at `y`.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> Result<f64, CollocationError> {
        self.check_values(values.len())?;
        let basis = self.basis_at(y)?;
        Ok(basis.iter().zip(values).map(|(b, v)| b * v).sum())
    }

    /// Interpolant of per-point vectors (e.g. nodal solutions) at `y`.
    pub fn interpolate_vectors(&self, values: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, CollocationError> {
        self.check_values(values.len())?;
        let basis = self.basis_at(y)?;
        let len = values.first().map_or(0, Vec::len);
        let mut out = vec![0.0; len];
        for (b, v) in basis.iter().zip(values) {
            if v.len() != len {
                return Err(CollocationError::LengthMismatch { expected: len, got: v.len() });
            }
            if *b == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v) {
                *o += b * x;
            }
        }
        Ok(out)
    }

    /// `E[μ] ≈ Σ_k w_k μ(ŷ_k)`.
    pub fn expectation(&self, values: &[f64]) -> Result<f64, CollocationError> {
        self.check_values(values.len())?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    fn check_values(&self, got: usize) -> Result<(), CollocationError> {
        if got != self.len() {
            return Err(CollocationError::LengthMismatch { expected: self.len(), got });
        }
        Ok(())
    }
}

/// Rejects parameters outside `[-1, 1]^dims`.
pub fn check_gamma(y: &[f64], dims: usize) -> Result<(), CollocationError> {
    if y.len() != dims {
        return Err(CollocationError::LengthMismatch { expected: dims, got: y.len() });
    }
    for (dim, &value) in y.iter().enumerate() {
        if !(value.abs() <= 1.0 + GAMMA_TOLERANCE) {
            return Err(CollocationError::OutsideGamma { dim, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules() {
        let (x, w) = gauss_legendre(1).unwrap();
        assert_eq!((x, w), (vec![0.0], vec![1.0]));
        let (x, w) = gauss_legendre(2).unwrap();
        let r = 1.0 / libm::sqrt(3.0);
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        assert_eq!(gauss_legendre(0), Err(CollocationError::NoPoints));
    }

    #[test]
    fn five_point_moment() {
        let (x, w) = gauss_legendre(5).unwrap();
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * libm::pow(*x, 8.0)).sum();
        assert!((m - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn grid_counts_and_small_grids() {
        assert_eq!(TensorGrid::new(&[4, 8]).unwrap().len(), 45);
        let g = TensorGrid::new(&[0, 0]).unwrap();
        assert_eq!(g.points(), &[vec![0.0, 0.0]]);
        assert_eq!(g.weights(), &[1.0]);
        let g = TensorGrid::new(&[1, 1]).unwrap();
        assert_eq!(g.len(), 4);
        let r = 1.0 / libm::sqrt(3.0);
        for (p, w) in g.points().iter().zip(g.weights()) {
            assert!((p[0].abs() - r).abs() < 1e-15 && (p[1].abs() - r).abs() < 1e-15);
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert_eq!(TensorGrid::new(&[]), Err(CollocationError::EmptyDegrees));
    }

    #[test]
    fn interpolation_examples() {
        let g = TensorGrid::new(&[2, 2]).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|y| 3.0 + y[0] + y[1]).collect();
        assert!((g.interpolate(&vals, &[0.3, -0.7]).unwrap() - 2.6).abs() < 1e-13);
        for (k, y) in g.points().iter().enumerate() {
            assert!((g.interpolate(&vals, y).unwrap() - vals[k]).abs() < 1e-12);
        }
        assert!(matches!(g.interpolate(&vals, &[1.5, 0.0]), Err(CollocationError::OutsideGamma { dim: 0, .. })));

        let g = TensorGrid::new(&[8]).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|y| 1.0 / (3.0 + y[0])).collect();
        let got = g.interpolate(&vals, &[0.5]).unwrap();
        assert!(((got - 1.0 / 3.5) * 3.5).abs() < 1e-6);
    }

    #[test]
    fn expectation_examples() {
        let g = TensorGrid::new(&[3, 2]).unwrap();
        assert!((g.expectation(&vec![2.5; g.len()]).unwrap() - 2.5).abs() < 1e-14);
        let g = TensorGrid::new(&[1, 1]).unwrap();
        let v: Vec<f64> = g.points().iter().map(|y| y[0] * y[1]).collect();
        assert!(g.expectation(&v).unwrap().abs() < 1e-15);
        let g = TensorGrid::new(&[4, 4]).unwrap();
        let v: Vec<f64> = g.points().iter().map(|y| y[0] * y[0] * y[1] * y[1]).collect();
        assert!((g.expectation(&v).unwrap() - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn index_round_trip() {
        let g = TensorGrid::new(&[2, 0, 3]).unwrap();
        for k in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(k)), k);
        }
        assert_eq!(g.multi_index(1), vec![0, 0, 1]);
    }
}
