mod common;

use proptest::prelude::*;
use tlsc_core::benchmarks::{example2, KlSettings};
use tlsc_core::fem::Assembler;
use tlsc_core::random_field::{compute_kl, verify_coercivity, AffineField, CovarianceKernel, FieldError};
use tlsc_core::{CoefficientField, Mesh, Rect, TensorGrid};

const EXP: CovarianceKernel = CovarianceKernel::Exponential { sigma: 0.4, correlation_length: 1.0 };

/// Lumped vertex weights: a third of every adjacent triangle's area.
fn lumped_weights(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.num_vertices()];
    for tri in mesh.triangles() {
        let [a, b, c] = tri.map(|v| mesh.vertices()[v]);
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        for v in tri {
            w[*v] += area / 3.0;
        }
    }
    w
}

#[test]
fn constant_kernel_is_rank_one() {
    let kl = compute_kl(&CovarianceKernel::Constant { sigma: 0.4 }, Rect::reference_square(), 8, 1).unwrap();
    assert!((kl.eigenvalues()[0] - 0.64).abs() < 1e-6 * 0.64);
    assert!(kl.eigenfunctions()[0].iter().all(|b| (b.abs() - 0.5).abs() < 1e-10));
}

#[test]
fn exponential_spectrum_is_grid_consistent() {
    let coarse = compute_kl(&EXP, Rect::reference_square(), 32, 2).unwrap();
    let fine = compute_kl(&EXP, Rect::reference_square(), 64, 2).unwrap();
    for (a, b) in coarse.eigenvalues().iter().zip(fine.eigenvalues()) {
        assert!((a - b).abs() <= 0.02 * b, "{a} vs {b}");
    }
    let l = fine.eigenvalues();
    assert!(l[0] >= l[1] && l[1] > 0.0);
}

#[test]
fn eigenfunctions_are_orthonormal() {
    for kernel in [EXP, CovarianceKernel::SeparableExponential { sigma: 0.7, correlation_length: 0.5 }] {
        for kl_n in [8, 20] {
            let kl = compute_kl(&kernel, Rect::reference_square(), kl_n, 6).unwrap();
            let w = lumped_weights(kl.grid());
            let l = kl.eigenvalues();
            assert!(l.windows(2).all(|p| p[0] >= p[1]) && l.iter().all(|x| *x >= -1e-12));
            for (m, bm) in kl.eigenfunctions().iter().enumerate() {
                for (n, bn) in kl.eigenfunctions().iter().enumerate() {
                    let ip: f64 = bm.iter().zip(bn).zip(&w).map(|((a, b), w)| a * b * w).sum();
                    let expected = if m == n { 1.0 } else { 0.0 };
                    assert!((ip - expected).abs() < 1e-8, "<b{m}, b{n}> = {ip}");
                }
            }
        }
    }
}

#[test]
fn reconstruction_improves_with_every_mode() {
    // 9 × 9 vertex grid; error measured in the lumped-weight Frobenius norm.
    let grid = Mesh::uniform(Rect::reference_square(), 8).unwrap();
    let w = lumped_weights(&grid);
    let mut prev = f64::INFINITY;
    for n in 1..=6 {
        let kl = compute_kl(&EXP, Rect::reference_square(), 8, n).unwrap();
        let v = grid.vertices();
        let mut err = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                let d = EXP.eval(v[i], v[j]) - kl.covariance_at_vertices(i, j);
                err += w[i] * w[j] * d * d;
            }
        }
        let err = err.sqrt();
        assert!(err < prev, "N = {n}: {err} >= {prev}");
        prev = err;
    }
}

#[test]
fn trace_bound() {
    let kl = compute_kl(&EXP, Rect::reference_square(), 10, 121).unwrap();
    let total: f64 = kl.eigenvalues().iter().sum();
    let trace = 0.16 * 4.0;
    assert!(total <= trace * 1.01, "{total} > {trace}");
}

#[test]
fn too_many_modes_rejected() {
    assert!(matches!(
        compute_kl(&EXP, Rect::reference_square(), 2, 10),
        Err(FieldError::TooManyModes { requested: 10, available: 9 })
    ));
}

#[test]
fn empty_expansion_is_mean() {
    let kl = compute_kl(&EXP, Rect::reference_square(), 6, 2).unwrap().truncated(0).with_mean(|x| 1.0 + x[0] * x[0]);
    let field = CoefficientField::KarhunenLoeve(kl);
    assert_eq!(field.dims(), 0);
    // x = ±1/3 is a grid line for kl_n = 6, so the P1 mean is exact there.
    let a = field.evaluate(&[], [1.0 / 3.0, 0.2]).unwrap();
    assert!((a - (1.0 + 1.0 / 9.0)).abs() < 1e-12);
}

#[test]
fn example_coefficients_are_coercive() {
    let field = CoefficientField::Affine(AffineField::constant(3.0, &[1.0, 1.0]));
    let corners = vec![vec![-1.0, -1.0], vec![1.0, 1.0], vec![0.0, 0.0]];
    assert_eq!(verify_coercivity(&field, &corners, &[[0.2, 0.3]]).unwrap(), 1.0);
    assert_eq!(field.evaluate(&[1.0, 1.0], [0.0, 0.0]).unwrap(), 5.0);

    let problem = example2(&KlSettings { kl_n: 16, ..Default::default() }).unwrap();
    let mesh = Mesh::uniform(Rect::reference_square(), 16).unwrap();
    let asm = Assembler::new(&mesh);
    let xs: Vec<[f64; 2]> = asm.quad_points().iter().map(|q| q.x).collect();
    let grid = TensorGrid::new(&[4, 4]).unwrap();
    let min = verify_coercivity(&problem.coefficient, grid.points(), &xs).unwrap();
    assert!(min > 0.0);

    let bad = CoefficientField::Affine(AffineField::constant(0.5, &[1.0]));
    assert!(matches!(verify_coercivity(&bad, &[vec![-1.0]], &[[0.0, 0.0]]), Err(FieldError::NotCoercive { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coefficient_is_affine_in_y(
        y in prop::array::uniform2(-1.0f64..=1.0),
        x in prop::array::uniform2(-1.0f64..=1.0),
    ) {
        let kl = compute_kl(&EXP, Rect::reference_square(), 6, 2).unwrap().with_mean(|_| 1.0);
        let fields = [
            CoefficientField::KarhunenLoeve(kl),
            CoefficientField::Affine(AffineField::constant(3.0, &[1.0, 1.0])),
        ];
        for f in &fields {
            let neg = [-y[0], -y[1]];
            let lhs = f.evaluate(&y, x).unwrap() + f.evaluate(&neg, x).unwrap();
            prop_assert!((lhs - 2.0 * f.evaluate(&[0.0, 0.0], x).unwrap()).abs() < 1e-13);
        }
    }
}
