//! Structured P1 triangulations of axis-aligned rectangles.
//!
//! Every cell of an `n × n` grid is split along its south-west / north-east
//! diagonal, so refining `n → 2n` yields nested meshes: every coarse triangle
//! is a union of fine triangles and every coarse vertex is a fine vertex.

use alloc::vec::Vec;

use crate::Point;

/// Tolerance for accepting points on (or numerically just outside) the boundary.
pub const LOCATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh needs at least one subdivision per side")]
    NoSubdivisions,
    #[error("degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]")]
    DegenerateRectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    #[error("point ({x}, {y}) lies outside the mesh domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("nodal vector has length {got}, mesh has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("mesh with {fine} subdivisions is not a refinement of mesh with {coarse}")]
    NotNested { coarse: usize, fine: usize },
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    /// The square `[-1, 1]²` used by both benchmark problems.
    pub const fn reference_square() -> Self {
        Rect::new(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: Point, tol: f64) -> bool {
        x[0] >= self.x0 - tol && x[0] <= self.x1 + tol && x[1] >= self.y0 - tol && x[1] <= self.y1 + tol
    }

    fn validate(&self) -> Result<(), MeshError> {
        let finite = self.x0.is_finite() && self.x1.is_finite() && self.y0.is_finite() && self.y1.is_finite();
        if !finite || self.x1 <= self.x0 || self.y1 <= self.y0 {
            return Err(MeshError::DegenerateRectangle { x0: self.x0, x1: self.x1, y0: self.y0, y1: self.y1 });
        }
        Ok(())
    }
}

/// Triangle index plus barycentric coordinates of a located point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
}

/// Uniform triangulation of a rectangle with P1 connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: Rect,
    n: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    h: f64,
}

impl Mesh {
    /// Builds the `n × n` diagonal-split grid on `domain`.
    ///
    /// Vertex `(i, j)` has index `j * (n + 1) + i`; the two triangles of cell
    /// `(i, j)` are `2 * (j * n + i)` (below the diagonal) and the next index
    /// (above it). Both are counterclockwise.
    pub fn uniform(domain: Rect, n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::NoSubdivisions);
        }
        domain.validate()?;
        let dx = domain.width() / n as f64;
        let dy = domain.height() / n as f64;
        let stride = n + 1;

        let mut vertices = Vec::with_capacity(stride * stride);
        let mut boundary = Vec::with_capacity(stride * stride);
        for j in 0..=n {
            for i in 0..=n {
                // Snap the last row/column onto the exact boundary.
                let x = if i == n { domain.x1 } else { domain.x0 + i as f64 * dx };
                let y = if j == n { domain.y1 } else { domain.y0 + j as f64 * dy };
                vertices.push([x, y]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let sw = j * stride + i;
                let se = sw + 1;
                let nw = sw + stride;
                let ne = nw + 1;
                triangles.push([sw, se, ne]);
                triangles.push([sw, ne, nw]);
            }
        }

        Ok(Mesh { domain, n, vertices, triangles, boundary, h: dx.max(dy) })
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Subdivisions per side.
    pub fn subdivisions(&self) -> usize {
        self.n
    }

    /// Cell width `(x1 - x0) / n` (the larger of the two cell sides).
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn longest_edge(&self) -> f64 {
        let dx = self.domain.width() / self.n as f64;
        let dy = self.domain.height() / self.n as f64;
        libm::hypot(dx, dy)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    /// Signed area of triangle `t` (positive for counterclockwise ordering).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Gradients of the three barycentric (hat) functions on triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let twice_area = 2.0 * self.signed_area(t);
        [
            [(pb[1] - pc[1]) / twice_area, (pc[0] - pb[0]) / twice_area],
            [(pc[1] - pa[1]) / twice_area, (pa[0] - pc[0]) / twice_area],
            [(pa[1] - pb[1]) / twice_area, (pb[0] - pa[0]) / twice_area],
        ]
    }

    /// Cartesian point with barycentric coordinates `bary` in triangle `t`.
    pub fn point_at(&self, t: usize, bary: [f64; 3]) -> Point {
        let tri = self.triangles[t];
        let mut x = [0.0; 2];
        for (k, &v) in tri.iter().enumerate() {
            x[0] += bary[k] * self.vertices[v][0];
            x[1] += bary[k] * self.vertices[v][1];
        }
        x
    }

    /// Finds the triangle containing `x` by index arithmetic.
    pub fn locate(&self, x: Point) -> Result<Location, MeshError> {
        if !x[0].is_finite() || !x[1].is_finite() || !self.domain.contains(x, LOCATE_TOLERANCE) {
            return Err(MeshError::OutsideDomain { x: x[0], y: x[1] });
        }
        let n = self.n as f64;
        let u = ((x[0] - self.domain.x0) / self.domain.width() * n).clamp(0.0, n);
        let v = ((x[1] - self.domain.y0) / self.domain.height() * n).clamp(0.0, n);
        let i = (libm::floor(u) as usize).min(self.n - 1);
        let j = (libm::floor(v) as usize).min(self.n - 1);
        let s = (u - i as f64).clamp(0.0, 1.0);
        let t = (v - j as f64).clamp(0.0, 1.0);
        let cell = 2 * (j * self.n + i);
        if s >= t {
            Ok(Location { triangle: cell, bary: [1.0 - s, s - t, t] })
        } else {
            Ok(Location { triangle: cell + 1, bary: [1.0 - t, s, t - s] })
        }
    }

    /// Value of the P1 interpolant with vertex values `nodal` at `x`.
    pub fn evaluate_p1(&self, nodal: &[f64], x: Point) -> Result<f64, MeshError> {
        self.check_len(nodal)?;
        let loc = self.locate(x)?;
        Ok(self.evaluate_at(nodal, &loc))
    }

    /// P1 value at an already located point. `nodal` must have one entry per vertex.
    pub fn evaluate_at(&self, nodal: &[f64], loc: &Location) -> f64 {
        let tri = self.triangles[loc.triangle];
        loc.bary[0] * nodal[tri[0]] + loc.bary[1] * nodal[tri[1]] + loc.bary[2] * nodal[tri[2]]
    }

    /// Gradient of the P1 interpolant on triangle `t`.
    pub fn gradient_on(&self, nodal: &[f64], t: usize) -> [f64; 2] {
        let grads = self.barycentric_gradients(t);
        let tri = self.triangles[t];
        let mut g = [0.0; 2];
        for k in 0..3 {
            g[0] += nodal[tri[k]] * grads[k][0];
            g[1] += nodal[tri[k]] * grads[k][1];
        }
        g
    }

    pub(crate) fn check_len(&self, nodal: &[f64]) -> Result<(), MeshError> {
        if nodal.len() != self.vertices.len() {
            return Err(MeshError::LengthMismatch { expected: self.vertices.len(), got: nodal.len() });
        }
        Ok(())
    }

    /// Whether `fine` refines `self`: same domain and a multiple of the subdivisions.
    pub fn is_refined_by(&self, fine: &Mesh) -> bool {
        self.domain == fine.domain && fine.n >= self.n && fine.n % self.n == 0
    }

    /// For each triangle of `fine`, the triangle of `self` that contains it.
    pub fn parent_triangles(&self, fine: &Mesh) -> Result<Vec<usize>, MeshError> {
        if !self.is_refined_by(fine) {
            return Err(MeshError::NotNested { coarse: self.n, fine: fine.n });
        }
        (0..fine.num_triangles())
            .map(|t| self.locate(fine.point_at(t, [1.0 / 3.0; 3])).map(|loc| loc.triangle))
            .collect()
    }

    /// Integral of every P1 hat function (lumped vertex quadrature weights).
    pub fn vertex_weights(&self) -> Vec<f64> {
        let mut w = alloc::vec![0.0; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let third = self.signed_area(t) / 3.0;
            for &v in tri {
                w[v] += third;
            }
        }
        w
    }
}
