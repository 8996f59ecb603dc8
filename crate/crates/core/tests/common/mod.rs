//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's quadrature, basis or solver code.

#![allow(dead_code)]

use tlsc_core::{Mesh, Rect};

pub fn square(n: usize) -> Mesh {
    Mesh::uniform(Rect::reference_square(), n).unwrap()
}

/// Gauss-Legendre nodes and weights on [-1, 1] by bisection on the three-term recurrence.
pub fn gauss_points(n: usize) -> (Vec<f64>, Vec<f64>) {
    let legendre = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        if n == 0 {
            return (1.0, 0.0);
        }
        if n == 1 {
            return (x, 1.0);
        }
        // p1 = P_n, p0 = P_{n-1}
        let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, d)
    };
    // Scan a fine grid for sign changes, then bisect.
    let samples = 20_000;
    let mut nodes = Vec::new();
    let mut prev_x = -1.0;
    let mut prev_v = legendre(prev_x).0;
    for s in 1..=samples {
        let x = -1.0 + 2.0 * s as f64 / samples as f64;
        let v = legendre(x).0;
        if v == 0.0 {
            nodes.push(x);
        } else if prev_v * v < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if legendre(mid).0 * legendre(lo).0 <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    assert_eq!(nodes.len(), n, "root scan missed nodes");
    let weights = nodes
        .iter()
        .map(|&x| {
            let d = legendre(x).1;
            2.0 / ((1.0 - x * x) * d * d)
        })
        .collect();
    (nodes, weights)
}

/// Collapsed (Duffy) tensor Gauss rule on a physical triangle: points and weights
/// that already include the Jacobian.
pub fn triangle_rule(p: [[f64; 2]; 3], order: usize) -> Vec<([f64; 2], f64)> {
    let (g, w) = gauss_points(order);
    let det = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
    let mut out = Vec::new();
    for (i, &u) in g.iter().enumerate() {
        for (j, &v) in g.iter().enumerate() {
            let s = 0.5 * (u + 1.0);
            let t = 0.5 * (v + 1.0);
            // (s, t) in the unit square -> (s, (1 - s) t) in the reference triangle.
            let xi = s;
            let eta = (1.0 - s) * t;
            let jac = (1.0 - s) * 0.25;
            let x = [
                p[0][0] + xi * (p[1][0] - p[0][0]) + eta * (p[2][0] - p[0][0]),
                p[0][1] + xi * (p[1][1] - p[0][1]) + eta * (p[2][1] - p[0][1]),
            ];
            out.push((x, w[i] * w[j] * jac * det));
        }
    }
    out
}

/// Affine hat function of local vertex `k` on triangle `p`, as (c0, cx, cy), via Cramer's rule.
pub fn hat(p: [[f64; 2]; 3], k: usize) -> [f64; 3] {
    let m = [[1.0, p[0][0], p[0][1]], [1.0, p[1][0], p[1][1]], [1.0, p[2][0], p[2][1]]];
    let mut rhs = [0.0; 3];
    rhs[k] = 1.0;
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det3(m);
    let mut c = [0.0; 3];
    for col in 0..3 {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        c[col] = det3(mc) / d;
    }
    c
}

fn corners(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let tri = mesh.triangles()[t];
    [mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]]
}

pub fn dense_zeros(n: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; n]; n]
}

pub fn dense_stiffness(mesh: &Mesh, a: impl Fn([f64; 2]) -> f64) -> Vec<Vec<f64>> {
    let mut m = dense_zeros(mesh.num_vertices());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = corners(mesh, t);
        let hats: Vec<[f64; 3]> = (0..3).map(|k| hat(p, k)).collect();
        for (x, w) in triangle_rule(p, 8) {
            let ax = a(x);
            for i in 0..3 {
                for j in 0..3 {
                    m[tri[i]][tri[j]] += w * ax * (hats[i][1] * hats[j][1] + hats[i][2] * hats[j][2]);
                }
            }
        }
    }
    m
}

pub fn dense_mass(mesh: &Mesh, wf: impl Fn([f64; 2]) -> f64) -> Vec<Vec<f64>> {
    let mut m = dense_zeros(mesh.num_vertices());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = corners(mesh, t);
        let hats: Vec<[f64; 3]> = (0..3).map(|k| hat(p, k)).collect();
        for (x, w) in triangle_rule(p, 8) {
            let phi: Vec<f64> = hats.iter().map(|c| c[0] + c[1] * x[0] + c[2] * x[1]).collect();
            let wx = wf(x);
            for i in 0..3 {
                for j in 0..3 {
                    m[tri[i]][tri[j]] += w * wx * phi[i] * phi[j];
                }
            }
        }
    }
    m
}

pub fn dense_load(mesh: &Mesh, s: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = corners(mesh, t);
        let hats: Vec<[f64; 3]> = (0..3).map(|k| hat(p, k)).collect();
        for (x, w) in triangle_rule(p, 8) {
            let sx = s(x);
            for i in 0..3 {
                b[tri[i]] += w * sx * (hats[i][0] + hats[i][1] * x[0] + hats[i][2] * x[1]);
            }
        }
    }
    b
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, bi)| {
        let mut r = row.clone();
        r.push(*bi);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}

pub fn restrict_dense(a: &[Vec<f64>], keep: &[usize]) -> Vec<Vec<f64>> {
    keep.iter().map(|&i| keep.iter().map(|&j| a[i][j]).collect()).collect()
}

pub fn interior(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.num_vertices()).filter(|&i| !mesh.boundary_mask()[i]).collect()
}

/// Value of the P1 interpolant at `x` by scanning every triangle.
pub fn brute_force_eval(mesh: &Mesh, nodal: &[f64], x: [f64; 2]) -> f64 {
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = corners(mesh, t);
        let lam: Vec<f64> = (0..3).map(|k| {
            let c = hat(p, k);
            c[0] + c[1] * x[0] + c[2] * x[1]
        }).collect();
        if lam.iter().all(|l| *l >= -1e-12) {
            return (0..3).map(|k| lam[k] * nodal[tri[k]]).sum();
        }
    }
    panic!("point {x:?} not in any triangle");
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
