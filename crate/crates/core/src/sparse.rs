//! Compressed sparse row matrices and a preconditioned conjugate-gradient solver.

use alloc::vec;
use alloc::vec::Vec;

/// Entries with magnitude below this are dropped when a matrix is finalized.
pub const DROP_TOLERANCE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    OutOfBounds { row: usize, col: usize, rows: usize, cols: usize },
    #[error("entry ({row}, {col}) is not in the sparsity pattern")]
    NotInPattern { row: usize, col: usize },
    #[error("CG did not converge in {iterations} iterations (relative residual {relative_residual:.3e})")]
    NotConverged { iterations: usize, relative_residual: f64 },
    #[error("CG detected non-positive curvature {curvature:.3e} at iteration {iteration}")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Square or rectangular matrix in compressed row storage.
///
/// Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, row_offsets: vec![0; nrows + 1], col_indices: Vec::new(), values: Vec::new() }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates
    /// and dropping entries below [`DROP_TOLERANCE`].
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut pattern = Self::pattern_from_entries(nrows, ncols, triplets.iter().map(|&(r, c, _)| (r, c)))?;
        for &(r, c, v) in triplets {
            pattern.add_to(r, c, v)?;
        }
        pattern.drop_small();
        Ok(pattern)
    }

    /// A zero-valued matrix whose pattern holds every listed position.
    pub fn pattern_from_entries(
        nrows: usize,
        ncols: usize,
        entries: impl Iterator<Item = (usize, usize)>,
    ) -> Result<Self, SparseError> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for (r, c) in entries {
            if r >= nrows || c >= ncols {
                return Err(SparseError::OutOfBounds { row: r, col: c, rows: nrows, cols: ncols });
            }
            rows[r].push(c);
        }
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            col_indices.extend_from_slice(&cols);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        Ok(CsrMatrix { nrows, ncols, row_offsets, col_indices, values: vec![0.0; nnz] })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Columns and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_offsets[r];
        let cols = &self.col_indices[start..self.row_offsets[r + 1]];
        cols.binary_search(&c).ok().map(|k| start + k)
    }

    /// Stored value at `(r, c)`, zero when outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to an entry that must already be in the pattern.
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) -> Result<(), SparseError> {
        if r >= self.nrows || c >= self.ncols {
            return Err(SparseError::OutOfBounds { row: r, col: c, rows: self.nrows, cols: self.ncols });
        }
        let k = self.position(r, c).ok_or(SparseError::NotInPattern { row: r, col: c })?;
        self.values[k] += v;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn position_unchecked(&self, r: usize, c: usize) -> usize {
        self.position(r, c).expect("entry outside sparsity pattern")
    }

    /// Removes stored entries below [`DROP_TOLERANCE`] in magnitude.
    pub fn drop_small(&mut self) {
        let mut offsets = Vec::with_capacity(self.nrows + 1);
        offsets.push(0);
        let mut write = 0;
        for r in 0..self.nrows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                if self.values[k].abs() >= DROP_TOLERANCE {
                    self.col_indices[write] = self.col_indices[k];
                    self.values[write] = self.values[k];
                    write += 1;
                }
            }
            offsets.push(write);
        }
        self.col_indices.truncate(write);
        self.values.truncate(write);
        self.row_offsets = offsets;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        if x.len() != self.ncols {
            return Err(SparseError::DimensionMismatch { expected: self.ncols, got: x.len() });
        }
        if y.len() != self.nrows {
            return Err(SparseError::DimensionMismatch { expected: self.nrows, got: y.len() });
        }
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *out = acc;
        }
        Ok(())
    }

    /// `self + alpha * other`, over the union of both patterns.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix, SparseError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(SparseError::DimensionMismatch { expected: self.nrows, got: other.nrows });
        }
        if self.row_offsets == other.row_offsets && self.col_indices == other.col_indices {
            let mut out = self.clone();
            for (a, b) in out.values.iter_mut().zip(&other.values) {
                *a += alpha * b;
            }
            return Ok(out);
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (c, v) = self.row(r);
            triplets.extend(c.iter().zip(v).map(|(&c, &v)| (r, c, v)));
            let (c, v) = other.row(r);
            triplets.extend(c.iter().zip(v).map(|(&c, &v)| (r, c, alpha * v)));
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Multiplies every stored value by `alpha`.
    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Submatrix on the rows and columns listed in `keep` (in that order).
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut row_offsets = Vec::with_capacity(keep.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &r in keep {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                // `keep` is sorted for Dirichlet reductions, so mapped columns stay sorted.
                if map[c] != usize::MAX {
                    col_indices.push(map[c]);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix { nrows: keep.len(), ncols: keep.len(), row_offsets, col_indices, values }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).all(|(&c, &v)| (v - self.get(c, r)).abs() <= tol * (1.0 + v.abs()))
        })
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        out
    }
}

/// Preconditioner choice for [`pcg_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgParams {
    /// Relative residual target `‖b − Ax‖ ≤ tol ‖b‖`.
    pub tol: f64,
    /// Iteration cap; `None` uses `10 √n + 200`.
    pub max_iters: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for CgParams {
    fn default() -> Self {
        CgParams { tol: 1e-9, max_iters: None, preconditioner: Preconditioner::Jacobi }
    }
}

impl CgParams {
    pub fn with_tol(tol: f64) -> Self {
        CgParams { tol, ..Default::default() }
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iters.unwrap_or_else(|| 10 * libm::ceil(libm::sqrt(n as f64)) as usize + 200)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖r_k‖₂`, starting with the initial residual.
    pub residual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Preconditioned conjugate gradients from a zero initial guess.
pub fn pcg_solve(a: &CsrMatrix, b: &[f64], params: &CgParams) -> Result<CgSolution, SparseError> {
    if !(params.tol > 0.0) {
        return Err(SparseError::InvalidParameter("CG tolerance must be positive"));
    }
    if a.nrows() != a.ncols() {
        return Err(SparseError::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    let n = a.nrows();
    if b.len() != n {
        return Err(SparseError::DimensionMismatch { expected: n, got: b.len() });
    }

    let inv_diag: Vec<f64> = match params.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Jacobi => a
            .diagonal()
            .into_iter()
            .map(|d| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    // A non-positive diagonal entry rules out positive definiteness.
                    Err(SparseError::NotPositiveDefinite { iteration: 0, curvature: d })
                }
            })
            .collect::<Result<_, _>>()?,
    };

    let mut x = vec![0.0; n];
    let b_norm = norm2(b);
    let mut history = vec![b_norm];
    if b_norm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, residual_history: history });
    }
    let target = params.tol * b_norm;
    let cap = params.iteration_cap(n);

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for iter in 1..=cap {
        a.spmv_into(&p, &mut ap)?;
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(SparseError::NotPositiveDefinite { iteration: iter, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = norm2(&r);
        history.push(r_norm);
        if r_norm <= target {
            return Ok(CgSolution { x, iterations: iter, residual_history: history });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SparseError::NotConverged { iterations: cap, relative_residual: history[history.len() - 1] / b_norm })
}
