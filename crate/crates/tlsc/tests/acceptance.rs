//! Exit criteria for the library and the `tlsc` binary.
//!
//! Runs without the libtest harness so every criterion prints exactly one
//! `PASS`, `FAIL` or `SKIPPED` line. The process exits nonzero when any
//! criterion fails. Criterion 5 needs `TLSC_FULL_SCALE=1`.

#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;

use rand::{rngs::StdRng, Rng, SeedableRng};
use tlsc::config::{ExperimentConfig, Method};
use tlsc::exec::RayonExecutor;
use tlsc::experiment::{build_problem, resolve_reference, run_method, Levels};
use tlsc::formats::read_results;
use tlsc::study::floor_fit;
use tlsc_core::collocation::gauss_legendre;
use tlsc_core::fem::{apply_dirichlet, assemble_load, assemble_stiffness, assemble_weighted_mass};
use tlsc_core::norms::{fit_slope, ErrorNorms, Norm, SlopeScale};
use tlsc_core::random_field::{compute_kl, CovarianceKernel};
use tlsc_core::solvers::{run_two_level, Discretization, NewtonParams};
use tlsc_core::sparse::{pcg_solve, CgParams};
use tlsc_core::{CsrMatrix, Mesh, Rect, Sequential, TensorGrid};

enum Verdict {
    Pass(String),
    Fail(String),
    Skipped(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Errors of one Example 1 method at `levels`, against the exact solution.
fn measure(method: Method, levels: Levels) -> ErrorNorms {
    let cfg = ExperimentConfig::default();
    let setup = build_problem(&cfg).unwrap();
    let exec = RayonExecutor::new(0).unwrap();
    let reference = resolve_reference(&cfg, &setup, levels.fine_sub, levels.fine_degree, &exec).unwrap();
    run_method(&cfg, &setup, &reference, method, levels, &exec).unwrap().1.norms
}

fn levels(coarse_sub: usize, fine_sub: usize, coarse_degree: usize, fine_degree: usize) -> Levels {
    Levels { coarse_sub, fine_sub, coarse_degree, fine_degree }
}

fn spatial_order() -> Verdict {
    let runs: Vec<(f64, ErrorNorms)> =
        [8, 16, 32, 64].into_iter().map(|n| (2.0 / n as f64, measure(Method::DirectSc, levels(n, n, 4, 4)))).collect();
    let slope = |norm| fit_slope(&runs.iter().map(|(h, e)| (*h, e.get(norm))).collect::<Vec<_>>(), SlopeScale::LogLog).unwrap();
    let (l2, h1) = (slope(Norm::L2), slope(Norm::H1Seminorm));
    check(
        (1.8..=2.2).contains(&l2.slope) && (0.8..=1.2).contains(&h1.slope),
        format!("L2 slope {:.3} (want [1.8, 2.2]), H1 slope {:.3} (want [0.8, 1.2])", l2.slope, h1.slope),
    )
}

fn stochastic_decay() -> Verdict {
    let runs: Vec<(f64, ErrorNorms)> =
        (1..=6).map(|p| (p as f64, measure(Method::DirectSc, levels(64, 64, p, p)))).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for (norm, name) in [(Norm::L2, "L2"), (Norm::H1Seminorm, "H1")] {
        let pts: Vec<(f64, f64)> = runs.iter().map(|(p, e)| (*p, e.get(norm))).collect();
        let f = floor_fit(&pts).unwrap();
        let r2 = f.fit.map(|x| x.r_squared);
        ok &= f.decreasing_until_floor && r2.is_some_and(|r| r >= 0.98);
        detail.push(format!(
            "{name}: decreasing={} pre-floor p={:?} R²={}",
            f.decreasing_until_floor,
            f.pre_floor,
            r2.map_or("n/a".into(), |r| format!("{r:.4}"))
        ));
    }
    check(ok, detail.join("; "))
}

fn two_level_h1() -> Verdict {
    let l = levels(8, 32, 2, 4);
    let coarse = measure(Method::CoarseOnly, l).h1;
    let direct = measure(Method::DirectSc, l).h1;
    let two = measure(Method::TwoLevel, l).h1;
    let within = rel(two, direct) <= 0.10;
    let separated = coarse >= 5.0 * two.max(direct);
    check(
        within && separated,
        format!(
            "H1 two-level {two:.4e}, direct {direct:.4e} (rel {:.2}%, want <= 10%); coarse {coarse:.4e} is {:.2}x (want >= 5x)",
            100.0 * rel(two, direct),
            coarse / two.max(direct)
        ),
    )
}

fn two_level_l2() -> Verdict {
    let l = levels(8, 32, 4, 8);
    let direct = measure(Method::DirectSc, l).l2;
    let two = measure(Method::TwoLevel, l).l2;
    check(
        rel(two, direct) <= 0.15,
        format!("L2 two-level {two:.4e}, direct {direct:.4e} (rel {:.2}%, want <= 15%)", 100.0 * rel(two, direct)),
    )
}

fn published_numbers() -> Verdict {
    if std::env::var("TLSC_FULL_SCALE").as_deref() != Ok("1") {
        return Verdict::Skipped("set TLSC_FULL_SCALE=1 (tens of minutes)".into());
    }
    let l = levels(8, 512, 4, 8);
    let coarse = measure(Method::CoarseOnly, l);
    let direct = measure(Method::DirectSc, l);
    let two = measure(Method::TwoLevel, l);
    let checks = [
        ("two-level H1", two.h1, 0.0105),
        ("direct H1", direct.h1, 0.0105),
        ("coarse L2", coarse.l2, 0.0167),
        ("coarse H1", coarse.h1, 0.6417),
    ];
    let ok = checks.iter().all(|&(_, got, want)| rel(got, want) <= 0.20);
    let detail: Vec<String> =
        checks.iter().map(|(name, got, want)| format!("{name} {got:.4e} vs {want} ({:+.1}%)", 100.0 * (got - want) / want)).collect();
    check(ok, detail.join("; "))
}

fn newton_step_identity() -> Verdict {
    let (problem, _) = tlsc_core::benchmarks::example1();
    let mesh = oracle::square(16);
    let grid = TensorGrid::isotropic(2, 2).unwrap();
    let params = NewtonParams::default();
    let two = run_two_level((&mesh, &grid), (&mesh, &grid), &problem, &params, &Sequential).unwrap();
    let disc = Discretization::new(&mesh, &problem).unwrap();
    let worst = (0..grid.len())
        .map(|k| {
            let step = disc.newton_update(&problem, grid.point(k), &two.coarse.nodal[k], &params.cg).unwrap();
            oracle::max_abs_diff(&step.u, &two.fine.nodal[k])
        })
        .fold(0.0, f64::max);
    check(worst <= 1e-8, format!("max |two-level - Newton update| = {worst:.2e} over {} points", grid.len()))
}

fn max_entry_diff(a: &CsrMatrix, b: &[Vec<f64>]) -> f64 {
    a.to_dense().iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

fn fem_oracles() -> Verdict {
    let a = |x: [f64; 2]| 1.0 + 0.3 * x[0] * x[0] + 0.2 * x[0] * x[1] - 0.1 * x[1];
    let w = |x: [f64; 2]| 2.0 + x[0] * x[1] + x[1] * x[1];
    let s = |x: [f64; 2]| x[0] * x[0] * x[0] - x[1] + 1.0 + x[0] * x[1] * x[1];
    let mut assembly = 0.0f64;
    let mut solve = 0.0f64;
    for n in 1..=4 {
        let mesh = oracle::square(n);
        let k = assemble_stiffness(&mesh, |q| a(q.x)).unwrap();
        let m = assemble_weighted_mass(&mesh, |q| w(q.x)).unwrap();
        let b = assemble_load(&mesh, |q| s(q.x)).unwrap();
        let (kd, md, bd) = (oracle::dense_stiffness(&mesh, a), oracle::dense_mass(&mesh, w), oracle::dense_load(&mesh, s));
        assembly = assembly.max(max_entry_diff(&k, &kd)).max(max_entry_diff(&m, &md)).max(oracle::max_abs_diff(&b, &bd));

        let sum = k.add_scaled(1.0, &m).unwrap();
        let sys = apply_dirichlet(&sum, &b, &mesh);
        if sys.rhs.is_empty() {
            continue;
        }
        let x = pcg_solve(&sys.matrix, &sys.rhs, &CgParams::default()).unwrap().x;
        let keep = oracle::interior(&mesh);
        let dense: Vec<Vec<f64>> = kd.iter().zip(&md).map(|(r, q)| r.iter().zip(q).map(|(x, y)| x + y).collect()).collect();
        let expected = oracle::dense_solve(&oracle::restrict_dense(&dense, &keep), &keep.iter().map(|&i| bd[i]).collect::<Vec<_>>());
        solve = solve.max(oracle::max_abs_diff(&x, &expected));
    }
    check(
        assembly <= 1e-12 && solve <= 1e-8,
        format!("assembly max diff {assembly:.2e} (want <= 1e-12), PCG vs dense {solve:.2e} (want <= 1e-8)"),
    )
}

fn collocation_exactness() -> Verdict {
    let moment = |j: i32| if j % 2 == 1 { 0.0 } else { 1.0 / (j as f64 + 1.0) };
    let mut gauss = 0.0f64;
    for n in 1..=20 {
        let (x, w) = gauss_legendre(n).unwrap();
        for j in 0..(2 * n as i32) {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(j)).sum();
            gauss = gauss.max((q - moment(j)).abs());
        }
    }

    let mut rng = StdRng::seed_from_u64(7);
    let mut interp = 0.0f64;
    let mut counts_ok = true;
    for _ in 0..20 {
        let dims = rng.gen_range(1..=3);
        let degrees: Vec<usize> = (0..dims).map(|_| rng.gen_range(0..=5)).collect();
        let grid = TensorGrid::new(&degrees).unwrap();
        counts_ok &= grid.len() == degrees.iter().map(|p| p + 1).product::<usize>();

        let coeffs: Vec<Vec<f64>> = degrees.iter().map(|&p| (0..=p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let f = |y: &[f64]| -> f64 {
            coeffs.iter().zip(y).map(|(c, &t)| c.iter().rev().fold(0.0, |acc, ck| acc * t + ck)).product()
        };
        let values: Vec<f64> = grid.points().iter().map(|y| f(y)).collect();
        for _ in 0..10 {
            let y: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            interp = interp.max((grid.interpolate(&values, &y).unwrap() - f(&y)).abs());
        }
    }
    check(
        gauss <= 1e-13 && interp <= 1e-12 && counts_ok,
        format!("Gauss moment error {gauss:.2e} (want <= 1e-13), interpolation error {interp:.2e} (want <= 1e-12), point counts {}", if counts_ok { "match" } else { "differ" }),
    )
}

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

fn kl_properties() -> Verdict {
    let square = Rect::reference_square();
    let kernel = CovarianceKernel::Exponential { sigma: 0.4, correlation_length: 1.0 };

    let kl = compute_kl(&kernel, square, 16, 10).unwrap();
    let l = kl.eigenvalues();
    let ordered = l.windows(2).all(|p| p[0] >= p[1]) && l.iter().all(|x| *x >= 0.0);
    let w = lumped_weights(kl.grid());
    let mut ortho = 0.0f64;
    for (m, bm) in kl.eigenfunctions().iter().enumerate() {
        for (n, bn) in kl.eigenfunctions().iter().enumerate() {
            let ip: f64 = bm.iter().zip(bn).zip(&w).map(|((a, b), w)| a * b * w).sum();
            ortho = ortho.max((ip - if m == n { 1.0 } else { 0.0 }).abs());
        }
    }

    let grid = Mesh::uniform(square, 8).unwrap();
    let w = lumped_weights(&grid);
    let v = grid.vertices();
    let errs: Vec<f64> = (1..=6)
        .map(|n| {
            let kl = compute_kl(&kernel, square, 8, n).unwrap();
            let mut e = 0.0;
            for i in 0..v.len() {
                for j in 0..v.len() {
                    let d = kernel.eval(v[i], v[j]) - kl.covariance_at_vertices(i, j);
                    e += w[i] * w[j] * d * d;
                }
            }
            e.sqrt()
        })
        .collect();
    let monotone = errs.windows(2).all(|p| p[1] < p[0]);

    let sigma = 0.4;
    let constant = compute_kl(&CovarianceKernel::Constant { sigma }, square, 8, 1).unwrap();
    let lambda_err = rel(constant.eigenvalues()[0], sigma * sigma * square.area());

    check(
        ordered && ortho <= 1e-8 && monotone && lambda_err <= 1e-6,
        format!(
            "eigenvalues ordered and nonnegative: {ordered}; orthonormality error {ortho:.2e}; reconstruction monotone for N = 1..6: {monotone}; constant-kernel relative error {lambda_err:.2e}"
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c3.cfg");
    std::fs::write(&cfg, "example = example1\nH = 8\nh = 32\nP = 2\np = 4\n").unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_tlsc"))
            .args(["solve", "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(&out)
            .args(["--threads", threads])
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success(), "tlsc exited with {status}");
        read_results(&out.join("results.csv")).unwrap()
    };
    let one = run("1");
    let four = run("4");
    let same_shape = one.len() == four.len() && one.len() == 6;
    let worst = one.iter().zip(&four).map(|(a, b)| (a.error - b.error).abs()).fold(0.0, f64::max);
    check(same_shape && worst <= 1e-12, format!("{} rows, max error-column difference {worst:.2e}", one.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("1 spatial convergence order", spatial_order),
        ("2 exponential decay in the collocation degree", stochastic_decay),
        ("3 two-level H1 equivalence", two_level_h1),
        ("4 two-level L2 at h = H^2", two_level_l2),
        ("5 published error values (full scale)", published_numbers),
        ("6 Newton-step identity", newton_step_identity),
        ("7 FEM oracle equivalence", fem_oracles),
        ("8 collocation exactness", collocation_exactness),
        ("9 KL properties", kl_properties),
        ("10 determinism across thread counts", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let verdict = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Verdict::Fail(format!("panicked: {}", panic_message(&e))));
        match verdict {
            Verdict::Pass(d) => println!("PASS     criterion {name}: {d}"),
            Verdict::Skipped(d) => println!("SKIPPED  criterion {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL     criterion {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}
