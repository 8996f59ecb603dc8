//! P1 finite element assembly on [`Mesh`] triangulations.
//!
//! Coefficients, weights and sources are sampled pointwise at the quadrature
//! points of every triangle. [`Assembler`] caches the quadrature points, the
//! triangle geometry and the sparsity pattern of a mesh so repeated
//! assemblies (one per Newton step) only redo the numerical work.

use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;
use crate::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("coefficient {value} is not positive at ({x}, {y})")]
    NotCoercive { x: f64, y: f64, value: f64 },
    #[error("field evaluated to a non-finite value {value} at ({x}, {y})")]
    NonFinite { x: f64, y: f64, value: f64 },
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
}

/// Symmetric quadrature rule on the reference triangle in barycentric coordinates.
///
/// Weights are normalized to sum to one; multiply by the triangle area.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: u32,
}

impl QuadratureRule {
    /// Six-point rule exact for polynomials of total degree 4.
    pub fn degree4() -> Self {
        const A1: f64 = 0.445_948_490_915_964_886_318_329_253_883;
        const B1: f64 = 0.108_103_018_168_070_227_363_341_492_233_9;
        const W1: f64 = 0.223_381_589_678_011_465_695_007_008_433_1;
        const A2: f64 = 0.091_576_213_509_770_743_459_571_463_402_2;
        const B2: f64 = 0.816_847_572_980_458_513_080_857_073_195_6;
        const W2: f64 = 0.109_951_743_655_321_867_638_326_324_900_2;
        QuadratureRule {
            points: vec![[A1, A1, B1], [A1, B1, A1], [B1, A1, A1], [A2, A2, B2], [A2, B2, A2], [B2, A2, A2]],
            weights: vec![W1, W1, W1, W2, W2, W2],
            degree: 4,
        }
    }

    /// One-point centroid rule, exact for linear polynomials.
    pub fn centroid() -> Self {
        QuadratureRule { points: vec![[1.0 / 3.0; 3]], weights: vec![1.0], degree: 1 }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::degree4()
    }
}

/// A quadrature point of a specific triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub triangle: usize,
    /// Position within the flattened `triangle * rule.len() + q` sample array.
    pub index: usize,
    pub bary: [f64; 3],
    pub x: Point,
}

/// Cached geometry and sparsity for repeated assembly on one mesh.
#[derive(Debug, Clone)]
pub struct Assembler<'m> {
    mesh: &'m Mesh,
    rule: QuadratureRule,
    points: Vec<QuadPoint>,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    pattern: CsrMatrix,
    slots: Vec<[usize; 9]>,
}

impl<'m> Assembler<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        Self::with_rule(mesh, QuadratureRule::degree4())
    }

    pub fn with_rule(mesh: &'m Mesh, rule: QuadratureRule) -> Self {
        let nt = mesh.num_triangles();
        let mut points = Vec::with_capacity(nt * rule.len());
        for t in 0..nt {
            for (q, &bary) in rule.points().iter().enumerate() {
                points.push(QuadPoint { triangle: t, index: t * rule.len() + q, bary, x: mesh.point_at(t, bary) });
            }
        }
        let areas = (0..nt).map(|t| mesh.signed_area(t)).collect();
        let grads = (0..nt).map(|t| mesh.barycentric_gradients(t)).collect();
        let nv = mesh.num_vertices();
        let entries = mesh.triangles().iter().flat_map(|tri| {
            tri.iter().flat_map(move |&r| tri.iter().map(move |&c| (r, c)))
        });
        let pattern = CsrMatrix::pattern_from_entries(nv, nv, entries).expect("mesh indices are in range");
        let slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        s[3 * i + j] = pattern.position_unchecked(tri[i], tri[j]);
                    }
                }
                s
            })
            .collect();
        Assembler { mesh, rule, points, areas, grads, pattern, slots }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// All quadrature points, triangle-major.
    pub fn quad_points(&self) -> &[QuadPoint] {
        &self.points
    }

    pub fn num_samples(&self) -> usize {
        self.points.len()
    }

    /// Evaluates `field` at every quadrature point.
    pub fn sample(&self, field: impl Fn(&QuadPoint) -> f64) -> Result<Vec<f64>, FemError> {
        self.points
            .iter()
            .map(|q| {
                let value = field(q);
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(FemError::NonFinite { x: q.x[0], y: q.x[1], value })
                }
            })
            .collect()
    }

    /// Values of the P1 function `nodal` at every quadrature point.
    pub fn sample_nodal(&self, nodal: &[f64]) -> Vec<f64> {
        let tris = self.mesh.triangles();
        self.points
            .iter()
            .map(|q| {
                let tri = tris[q.triangle];
                q.bary[0] * nodal[tri[0]] + q.bary[1] * nodal[tri[1]] + q.bary[2] * nodal[tri[2]]
            })
            .collect()
    }

    fn check_samples(&self, samples: &[f64]) -> Result<(), FemError> {
        if samples.len() != self.points.len() {
            return Err(FemError::SampleCount { expected: self.points.len(), got: samples.len() });
        }
        Ok(())
    }

    /// `(a ∇φ_j, ∇φ_i)` from coefficient samples; every sample must be positive.
    pub fn stiffness_from_samples(&self, coefficient: &[f64]) -> Result<CsrMatrix, FemError> {
        self.check_samples(coefficient)?;
        if let Some(q) = self.points.iter().find(|q| !(coefficient[q.index] > 0.0)) {
            return Err(FemError::NotCoercive { x: q.x[0], y: q.x[1], value: coefficient[q.index] });
        }
        let nq = self.rule.len();
        let mut m = self.pattern.clone();
        let values = m.values_mut();
        for (t, slots) in self.slots.iter().enumerate() {
            let mean: f64 = (0..nq).map(|q| self.rule.weights()[q] * coefficient[t * nq + q]).sum();
            let scale = self.areas[t] * mean;
            let g = &self.grads[t];
            for i in 0..3 {
                for j in 0..3 {
                    values[slots[3 * i + j]] += scale * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        Ok(m)
    }

    /// `(w φ_j, φ_i)` from weight samples.
    pub fn mass_from_samples(&self, weight: &[f64]) -> Result<CsrMatrix, FemError> {
        self.check_samples(weight)?;
        let nq = self.rule.len();
        let mut m = self.pattern.clone();
        let values = m.values_mut();
        for (t, slots) in self.slots.iter().enumerate() {
            let area = self.areas[t];
            for (q, (b, w)) in self.rule.points().iter().zip(self.rule.weights()).enumerate() {
                let s = area * w * weight[t * nq + q];
                if s == 0.0 {
                    continue;
                }
                for i in 0..3 {
                    for j in 0..3 {
                        values[slots[3 * i + j]] += s * b[i] * b[j];
                    }
                }
            }
        }
        Ok(m)
    }

    /// `(s, φ_i)` from source samples.
    pub fn load_from_samples(&self, source: &[f64]) -> Result<Vec<f64>, FemError> {
        self.check_samples(source)?;
        let nq = self.rule.len();
        let mut out = vec![0.0; self.mesh.num_vertices()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let area = self.areas[t];
            for (q, (b, w)) in self.rule.points().iter().zip(self.rule.weights()).enumerate() {
                let s = area * w * source[t * nq + q];
                for i in 0..3 {
                    out[tri[i]] += s * b[i];
                }
            }
        }
        Ok(out)
    }

    /// `∫_D s dx` by the same quadrature.
    pub fn integrate_samples(&self, samples: &[f64]) -> Result<f64, FemError> {
        self.check_samples(samples)?;
        let nq = self.rule.len();
        Ok((0..self.mesh.num_triangles())
            .map(|t| self.areas[t] * (0..nq).map(|q| self.rule.weights()[q] * samples[t * nq + q]).sum::<f64>())
            .sum())
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn gradients(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }
}

/// Stiffness matrix `(a ∇φ_j, ∇φ_i)` with coefficient `a` sampled at quadrature points.
pub fn assemble_stiffness(mesh: &Mesh, a: impl Fn(&QuadPoint) -> f64) -> Result<CsrMatrix, FemError> {
    let asm = Assembler::new(mesh);
    let samples = asm.sample(a)?;
    let mut m = asm.stiffness_from_samples(&samples)?;
    m.drop_small();
    Ok(m)
}

/// Weighted mass matrix `(w φ_j, φ_i)`.
pub fn assemble_weighted_mass(mesh: &Mesh, w: impl Fn(&QuadPoint) -> f64) -> Result<CsrMatrix, FemError> {
    let asm = Assembler::new(mesh);
    let samples = asm.sample(w)?;
    let mut m = asm.mass_from_samples(&samples)?;
    m.drop_small();
    Ok(m)
}

/// Load vector `(s, φ_i)`.
pub fn assemble_load(mesh: &Mesh, s: impl Fn(&QuadPoint) -> f64) -> Result<Vec<f64>, FemError> {
    let asm = Assembler::new(mesh);
    let samples = asm.sample(s)?;
    asm.load_from_samples(&samples)
}

/// Index map between all vertices and the interior (free) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMap {
    free: Vec<usize>,
    num_vertices: usize,
}

impl DirichletMap {
    pub fn new(mesh: &Mesh) -> Self {
        let free = (0..mesh.num_vertices()).filter(|&v| !mesh.boundary_mask()[v]).collect();
        DirichletMap { free, num_vertices: mesh.num_vertices() }
    }

    /// Interior vertex indices, ascending.
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn reduce_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        a.restrict(&self.free)
    }

    pub fn reduce_vector(&self, b: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| b[v]).collect()
    }

    /// Full nodal vector with zeros on the boundary.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices];
        for (&v, &x) in self.free.iter().zip(reduced) {
            out[v] = x;
        }
        out
    }
}

/// A Dirichlet-reduced linear system over the interior vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub map: DirichletMap,
}

/// Eliminates boundary rows and columns for homogeneous Dirichlet data.
pub fn apply_dirichlet(a: &CsrMatrix, b: &[f64], mesh: &Mesh) -> ReducedSystem {
    let map = DirichletMap::new(mesh);
    ReducedSystem { matrix: map.reduce_matrix(a), rhs: map.reduce_vector(b), map }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn square(n: usize) -> Mesh {
        Mesh::uniform(Rect::reference_square(), n).unwrap()
    }

    #[test]
    fn rule_weights_sum_to_one() {
        let r = QuadratureRule::degree4();
        assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(r.weights().iter().all(|w| *w > 0.0));
        for p in r.points() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn stiffness_row_sums_and_diagonal() {
        let m = square(2);
        let a = assemble_stiffness(&m, |_| 1.0).unwrap();
        for r in 0..a.nrows() {
            assert!(a.row(r).1.iter().sum::<f64>().abs() < 1e-13);
        }
        assert!((a.get(4, 4) - 4.0).abs() < 1e-13);
        assert!(a.is_symmetric(1e-15));
    }

    #[test]
    fn stiffness_linear_in_coefficient() {
        let m = square(3);
        let one = assemble_stiffness(&m, |_| 1.0).unwrap();
        let c = assemble_stiffness(&m, |_| 2.5).unwrap();
        for (x, y) in one.values().iter().zip(c.values()) {
            assert!((2.5 * x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn stiffness_rejects_nonpositive_coefficient() {
        let m = square(2);
        let err = assemble_stiffness(&m, |q| if q.x[0] > 0.5 { -1.0 } else { 1.0 }).unwrap_err();
        assert!(matches!(err, FemError::NotCoercive { x, .. } if x > 0.5));
    }

    #[test]
    fn mass_totals() {
        let m = square(2);
        let mass = assemble_weighted_mass(&m, |_| 1.0).unwrap();
        assert!((mass.values().iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert_eq!(assemble_weighted_mass(&m, |_| 0.0).unwrap().nnz(), 0);
        let m4 = square(4);
        let mass = assemble_weighted_mass(&m4, |q| q.x[0] * q.x[0]).unwrap();
        assert!((mass.values().iter().sum::<f64>() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn load_of_hat_is_mass_column() {
        let m = square(2);
        let mut hat = vec![0.0; m.num_vertices()];
        hat[4] = 1.0;
        let asm = Assembler::new(&m);
        let load = asm.load_from_samples(&asm.sample_nodal(&hat)).unwrap();
        let mass = assemble_weighted_mass(&m, |_| 1.0).unwrap();
        for (v, l) in load.iter().enumerate() {
            assert!((l - mass.get(v, 4)).abs() < 1e-12);
        }
        let ones = assemble_load(&m, |_| 1.0).unwrap();
        assert!((ones.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!(assemble_load(&m, |_| 0.0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dirichlet_dimensions() {
        for (n, dim) in [(1, 0), (2, 1), (4, 9)] {
            let m = square(n);
            let a = assemble_stiffness(&m, |_| 1.0).unwrap();
            let b = vec![1.0; m.num_vertices()];
            let red = apply_dirichlet(&a, &b, &m);
            assert_eq!(red.matrix.nrows(), dim);
            assert_eq!(red.rhs.len(), dim);
            let full = red.map.expand(&vec![7.0; dim]);
            for (v, x) in full.iter().enumerate() {
                assert_eq!(*x, if m.boundary_mask()[v] { 0.0 } else { 7.0 });
            }
        }
    }

    #[test]
    fn rejects_non_finite_and_wrong_sample_count() {
        let m = square(1);
        assert!(matches!(assemble_load(&m, |_| f64::NAN), Err(FemError::NonFinite { .. })));
        let asm = Assembler::new(&m);
        assert!(matches!(asm.load_from_samples(&[1.0]), Err(FemError::SampleCount { .. })));
    }
}
