//! Small dense symmetric eigen-solvers used by the KL discretization.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EigenError {
    #[error("matrix is not square: {len} entries for dimension {dim}")]
    NotSquare { dim: usize, len: usize },
    #[error("requested {requested} eigenpairs of a {dim}x{dim} matrix")]
    TooManyPairs { requested: usize, dim: usize },
    #[error("eigen-iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
}

/// Eigenpairs sorted by decreasing eigenvalue; `vectors[k]` belongs to `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Full eigendecomposition of a symmetric row-major matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(matrix: &[f64], dim: usize) -> Result<EigenPairs, EigenError> {
    if matrix.len() != dim * dim {
        return Err(EigenError::NotSquare { dim, len: matrix.len() });
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
    const MAX_SWEEPS: usize = 100;
    let mut converged = dim < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..dim)
            .flat_map(|i| (0..dim).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * dim + j] * a[i * dim + j])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * dim + p];
                let aqq = a[q * dim + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..dim {
                    let akp = a[k * dim + p];
                    let akq = a[k * dim + q];
                    a[k * dim + p] = c * akp - s * akq;
                    a[k * dim + q] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[p * dim + k];
                    let aqk = a[q * dim + k];
                    a[p * dim + k] = c * apk - s * aqk;
                    a[q * dim + k] = s * apk + c * aqk;
                }
                for k in 0..dim {
                    let vkp = v[k * dim + p];
                    let vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(EigenError::NotConverged { iterations: MAX_SWEEPS });
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| a[j * dim + j].total_cmp(&a[i * dim + i]));
    Ok(EigenPairs {
        values: order.iter().map(|&i| a[i * dim + i]).collect(),
        vectors: order.iter().map(|&i| (0..dim).map(|k| v[k * dim + i]).collect()).collect(),
    })
}

/// Dense symmetric matrices up to this size are decomposed directly.
const DIRECT_LIMIT: usize = 160;

/// The `count` algebraically largest eigenpairs of a symmetric positive
/// semidefinite row-major matrix.
///
/// Large matrices use block subspace iteration with Rayleigh–Ritz
/// projection; the block carries extra vectors beyond `count` so clustered
/// or repeated eigenvalues at the cut do not stall convergence.
pub fn top_eigenpairs(matrix: &[f64], dim: usize, count: usize) -> Result<EigenPairs, EigenError> {
    if matrix.len() != dim * dim {
        return Err(EigenError::NotSquare { dim, len: matrix.len() });
    }
    if count > dim {
        return Err(EigenError::TooManyPairs { requested: count, dim });
    }
    let block = (count + count.max(8)).min(dim);
    if dim <= DIRECT_LIMIT || 2 * block >= dim {
        let mut all = symmetric_eigen(matrix, dim)?;
        all.values.truncate(count);
        all.vectors.truncate(count);
        return Ok(all);
    }
    if count == 0 {
        return Ok(EigenPairs { values: Vec::new(), vectors: Vec::new() });
    }

    // Deterministic pseudo-random start (xorshift64).
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    // Row-major n x block.
    let mut q: Vec<f64> = (0..dim * block).map(|_| next()).collect();
    orthonormalize(&mut q, dim, block);

    const MAX_ITERS: usize = 3000;
    let mut z = vec![0.0; dim * block];
    for _ in 0..MAX_ITERS {
        multiply(matrix, dim, &q, block, &mut z);
        // Rayleigh quotient T = Qᵀ S Q.
        let mut t = vec![0.0; block * block];
        for i in 0..dim {
            let qi = &q[i * block..(i + 1) * block];
            let zi = &z[i * block..(i + 1) * block];
            for a in 0..block {
                for b in 0..block {
                    t[a * block + b] += qi[a] * zi[b];
                }
            }
        }
        for a in 0..block {
            for b in 0..a {
                let s = 0.5 * (t[a * block + b] + t[b * block + a]);
                t[a * block + b] = s;
                t[b * block + a] = s;
            }
        }
        let ritz = symmetric_eigen(&t, block)?;
        // Ritz vectors V = Q G and S V = Z G.
        let mut v = vec![0.0; dim * block];
        let mut sv = vec![0.0; dim * block];
        for i in 0..dim {
            for (c, g) in ritz.vectors.iter().enumerate() {
                let mut acc_v = 0.0;
                let mut acc_sv = 0.0;
                for a in 0..block {
                    acc_v += q[i * block + a] * g[a];
                    acc_sv += z[i * block + a] * g[a];
                }
                v[i * block + c] = acc_v;
                sv[i * block + c] = acc_sv;
            }
        }
        let lead = ritz.values[0].abs().max(f64::MIN_POSITIVE);
        let converged = (0..count).all(|c| {
            let res: f64 = (0..dim)
                .map(|i| {
                    let r = sv[i * block + c] - ritz.values[c] * v[i * block + c];
                    r * r
                })
                .sum();
            libm::sqrt(res) <= 1e-11 * lead
        });
        if converged {
            return Ok(EigenPairs {
                values: ritz.values[..count].to_vec(),
                vectors: (0..count).map(|c| (0..dim).map(|i| v[i * block + c]).collect()).collect(),
            });
        }
        q = sv;
        orthonormalize(&mut q, dim, block);
    }
    Err(EigenError::NotConverged { iterations: MAX_ITERS })
}

fn multiply(matrix: &[f64], dim: usize, x: &[f64], block: usize, out: &mut [f64]) {
    let mut acc = vec![0.0; block];
    for i in 0..dim {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let row = &matrix[i * dim..(i + 1) * dim];
        for (j, &s) in row.iter().enumerate() {
            let xj = &x[j * block..(j + 1) * block];
            for (a, &xv) in acc.iter_mut().zip(xj) {
                *a += s * xv;
            }
        }
        out[i * block..(i + 1) * block].copy_from_slice(&acc);
    }
}

/// Modified Gram–Schmidt, applied twice, on the columns of a row-major `dim x block` array.
fn orthonormalize(x: &mut [f64], dim: usize, block: usize) {
    for _ in 0..2 {
        for c in 0..block {
            for prev in 0..c {
                let proj: f64 = (0..dim).map(|i| x[i * block + c] * x[i * block + prev]).sum();
                for i in 0..dim {
                    x[i * block + c] -= proj * x[i * block + prev];
                }
            }
            let norm = libm::sqrt((0..dim).map(|i| x[i * block + c] * x[i * block + c]).sum::<f64>());
            if norm > 0.0 {
                for i in 0..dim {
                    x[i * block + c] /= norm;
                }
            }
        }
    }
}
