//! Discrete energies and solvers checked against independent computations.

use finsler_core::discrete::{self, energy, energy_gradient, Field};
use finsler_core::mesh::{CrossSectionMesh, CylinderMesh, Interval, Mesh};
use finsler_core::solve::{self, solve_cross_section, solve_dirichlet, SolveOptions, WeakForm};
use finsler_core::NormSpec;
use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit() -> Vec<Interval> {
    vec![Interval::new(0.0, 1.0)]
}

/// Dense P1 assembly from vertex coordinates alone (2D), lumped load, Dirichlet rows removed.
fn linear_fem_solve(mesh: &Mesh, f: f64) -> Vec<f64> {
    let n = mesh.num_nodes();
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for t in 0..mesh.num_simplices() {
        let v = mesh.simplex(t);
        let p: Vec<Vector2<f64>> = v.iter().map(|&i| Vector2::new(mesh.coords(i)[0], mesh.coords(i)[1])).collect();
        let e = Matrix2::from_columns(&[p[1] - p[0], p[2] - p[0]]);
        let area = e.determinant().abs() / 2.0;
        let inv_t = e.try_inverse().unwrap().transpose();
        let g1 = inv_t * Vector2::new(1.0, 0.0);
        let g2 = inv_t * Vector2::new(0.0, 1.0);
        let grads = [-(g1 + g2), g1, g2];
        for a in 0..3 {
            b[v[a]] += f * area / 3.0;
            for c in 0..3 {
                k[(v[a], v[c])] += area * grads[a].dot(&grads[c]);
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !mesh.is_dirichlet(i)).collect();
    let kf = DMatrix::from_fn(free.len(), free.len(), |r, c| k[(free[r], free[c])]);
    let bf = DVector::from_fn(free.len(), |r, _| b[free[r]]);
    let sol = kf.lu().solve(&bf).unwrap();
    let mut u = vec![0.0; n];
    for (r, &i) in free.iter().enumerate() {
        u[i] = sol[r];
    }
    u
}

#[test]
fn dirichlet_solve_matches_linear_fem() {
    // 33 × 17 nodes.
    let mesh = CylinderMesh::build(4.0, 1, &unit(), 0.125, 1.0 / 16.0).unwrap();
    assert_eq!(mesh.counts(), &[33, 17]);
    let cross = CrossSectionMesh::build(&unit(), 1.0 / 16.0).unwrap();
    let f = Field::constant(&cross, 1.0);
    let opts = SolveOptions { tol_grad: 1e-13, ..SolveOptions::default() };
    let res = solve_dirichlet(&mesh, &NormSpec::euclidean(2), 2.0, &f, &opts).unwrap();
    assert!(res.converged, "residual {}", res.weak_residual);
    let oracle = linear_fem_solve(&mesh, 1.0);
    let err = res.field.values.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "nodal error {err}");
    for w in res.energy_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-14 * w[0].abs());
    }
    let r = solve::weak_residual(&mesh, &NormSpec::euclidean(2), 2.0, WeakForm::Dirichlet(&f), &Field { values: oracle, constrained: true }).unwrap();
    assert!(r <= 1e-8, "oracle residual {r}");
}

#[test]
fn cross_section_matches_parabola() {
    let cross = CrossSectionMesh::build(&unit(), 1.0 / 64.0).unwrap();
    let f = Field::constant(&cross, 1.0);
    let res = solve_cross_section(&cross, &NormSpec::euclidean(2), 1, 2.0, &f, &SolveOptions::default()).unwrap();
    assert!(res.converged);
    let err = (0..cross.num_nodes())
        .map(|i| {
            let x = cross.coords(i)[0];
            (res.field.values[i] - x * (1.0 - x) / 2.0).abs()
        })
        .fold(0.0, f64::max);
    assert!(err <= 1e-3, "max error {err}");
    assert!((res.energy.total + 1.0 / 24.0).abs() <= 1e-4, "J = {}", res.energy.total);
}

#[test]
fn zero_load_gives_zero_solution() {
    let mesh = CylinderMesh::build(3.0, 1, &unit(), 0.25, 0.25).unwrap();
    let cross = CrossSectionMesh::build(&unit(), 0.25).unwrap();
    let f = Field::constant(&cross, 0.0);
    for (norm, p) in [(NormSpec::euclidean(2), 2.0), (NormSpec::qnorm(1.5, 2).unwrap(), 1.5)] {
        let res = solve_dirichlet(&mesh, &norm, p, &f, &SolveOptions::default()).unwrap();
        assert!(res.field.values.iter().all(|&v| v == 0.0));
        assert_eq!(res.energy.total, 0.0);
        assert!(res.iterations <= 1);
        assert!(res.converged);
    }
    let r = solve::weak_residual(&mesh, &NormSpec::euclidean(2), 2.0, WeakForm::Dirichlet(&Field::constant(&cross, 1.0)), &Field::zeros(&mesh)).unwrap();
    let lumped_max = (0..mesh.num_nodes()).filter(|&i| !mesh.is_dirichlet(i)).map(|i| mesh.lumped_mass()[i]).fold(0.0, f64::max);
    assert!((r - lumped_max).abs() < 1e-15);
}

#[test]
fn pseudo_laplace_cross_section_is_symmetric() {
    let cross = CrossSectionMesh::build(&unit(), 1.0 / 64.0).unwrap();
    let f = Field::constant(&cross, 1.0);
    let h3 = NormSpec::qnorm(3.0, 2).unwrap();
    let res = solve_cross_section(&cross, &h3, 1, 3.0, &f, &SolveOptions::default()).unwrap();
    assert!(res.converged, "residual {}", res.weak_residual);
    let n = cross.num_nodes();
    for i in 0..n {
        assert!((res.field.values[i] - res.field.values[n - 1 - i]).abs() <= 1e-6);
    }
}

fn random_constrained(mesh: &Mesh, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mesh.num_nodes()).map(|i| if mesh.is_dirichlet(i) { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
    Field { values, constrained: true }
}

fn finite_difference_check(mesh: &Mesh, norm: &NormSpec, p: f64, f: &Field, u: &Field) -> f64 {
    let g = energy_gradient(mesh, norm, p, f, u).unwrap();
    let load = discrete::load_vector(mesh, f).unwrap();
    // Energy with the same (possibly smoothed) norm, assembled here from per-simplex values.
    let value = |v: &[f64]| {
        let mut z = vec![0.0; mesh.dim()];
        let mut s = 0.0;
        for t in 0..mesh.num_simplices() {
            mesh.gradient_on(t, v, &mut z);
            s += mesh.simplex_volume() * norm.eval(&z).unwrap().powf(p) / p;
        }
        s - v.iter().zip(&load).map(|(a, b)| a * b).sum::<f64>()
    };
    let scale = g.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for i in (0..mesh.num_nodes()).filter(|&i| !mesh.is_dirichlet(i)) {
        let mut a = u.values.clone();
        let mut b = u.values.clone();
        a[i] += 1e-6;
        b[i] -= 1e-6;
        let fd = (value(&a) - value(&b)) / 2e-6;
        worst = worst.max((g.values[i] - fd).abs() / fd.abs().max(1e-3 * scale));
    }
    worst
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let mesh = CylinderMesh::build(2.0, 1, &unit(), 0.25, 0.25).unwrap();
    let cross = CrossSectionMesh::build(&unit(), 0.25).unwrap();
    let f = Field::from_fn(&cross, false, |x| 1.0 + x[0]);
    let cases = [
        (NormSpec::euclidean(2), 2.0),
        (NormSpec::qnorm(3.0, 2).unwrap(), 3.0),
        (NormSpec::qnorm(1.5, 2).unwrap().with_smoothing(1e-2, 1.0).unwrap(), 1.5),
        (NormSpec::qnorm(1.0, 2).unwrap().with_smoothing(1e-1, 1.0).unwrap(), 2.0),
        (NormSpec::block(2.0, vec![1, 1], vec![1.0, 2.0], vec![1.0, 4.0]).unwrap().with_smoothing(1e-2, 1.0).unwrap(), 2.5),
        (NormSpec::matrix_qnorm(2.0, vec![2.0, 0.0, 0.0, 1.0], 2).unwrap(), 3.0),
    ];
    for (k, (norm, p)) in cases.iter().enumerate() {
        let u = random_constrained(&mesh, k as u64);
        let worst = finite_difference_check(&mesh, norm, *p, &f, &u);
        assert!(worst <= 1e-4, "case {k}: relative error {worst}");
    }
}

#[test]
fn linear_gradient_is_stiffness_times_u_minus_load() {
    let mesh = CylinderMesh::build(2.0, 1, &unit(), 0.25, 0.125).unwrap();
    let cross = CrossSectionMesh::build(&unit(), 0.125).unwrap();
    let u = random_constrained(&mesh, 5);
    let f = Field::constant(&cross, 2.0);
    let g = energy_gradient(&mesh, &NormSpec::euclidean(2), 2.0, &f, &u).unwrap();
    // 5-point stencil with lumped load on the uniform right-triangle mesh.
    let (hx, hy) = (mesh.steps()[0], mesh.steps()[1]);
    let ny = mesh.counts()[1];
    for i in (0..mesh.num_nodes()).filter(|&i| !mesh.is_dirichlet(i)) {
        let v = &u.values;
        let lap = (2.0 * v[i] - v[i - ny] - v[i + ny]) * hy / hx + (2.0 * v[i] - v[i - 1] - v[i + 1]) * hx / hy;
        assert!((g.values[i] - (lap - 2.0 * hx * hy)).abs() < 1e-12);
    }
}

#[test]
fn energy_is_convex_along_segments() {
    let mesh = CylinderMesh::build(2.0, 1, &unit(), 0.25, 0.25).unwrap();
    let cross = CrossSectionMesh::build(&unit(), 0.25).unwrap();
    let f = Field::constant(&cross, 0.0);
    for norm in [NormSpec::qnorm(1.5, 2).unwrap(), NormSpec::qnorm(4.0, 2).unwrap(), NormSpec::matrix_qnorm(3.0, vec![1.0, 0.4, 0.0, 2.0], 2).unwrap()] {
        for p in [1.5, 2.0, 3.0] {
            let u = random_constrained(&mesh, 1);
            let v = random_constrained(&mesh, 2);
            let eu = energy(&mesh, &norm, p, &f, &u).unwrap().total;
            let ev = energy(&mesh, &norm, p, &f, &v).unwrap().total;
            for th in [0.25, 0.5, 0.75] {
                let w = Field { values: u.values.iter().zip(&v.values).map(|(a, b)| th * a + (1.0 - th) * b).collect(), constrained: true };
                let ew = energy(&mesh, &norm, p, &f, &w).unwrap().total;
                assert!(ew <= th * eu + (1.0 - th) * ev + 1e-12);
            }
        }
    }
}

#[test]
fn extension_energy_is_length_times_cross_energy() {
    let cross = CrossSectionMesh::build(&unit(), 0.05).unwrap();
    let mesh = CylinderMesh::build(6.0, 1, &unit(), 0.5, 0.05).unwrap();
    let w = Field::from_fn(&cross, true, |x| (3.0 * x[0]).sin() * x[0] * (1.0 - x[0]));
    let ext = discrete::extend_constant(&w, &cross, &mesh).unwrap();
    let norm = NormSpec::qnorm(3.0, 2).unwrap();
    let f_cyl = Field::constant(&cross, 0.0);
    let e_cyl = energy(&mesh, &norm, 3.0, &f_cyl, &ext).unwrap().dirichlet_part;
    let e_cross = energy(&cross, &norm.cross_section(1).unwrap(), 3.0, &f_cyl, &w).unwrap().dirichlet_part;
    assert!((e_cyl - 6.0 * e_cross).abs() <= 1e-12 * e_cyl);
}

/// Smallest generalized eigenvalue of the 1D stiffness / lumped mass pair.
fn tridiagonal_oracle(n_cells: usize) -> f64 {
    let h = 1.0 / n_cells as f64;
    let n = n_cells - 1;
    let a = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 / (h * h),
        1 => -1.0 / (h * h),
        _ => 0.0,
    });
    SymmetricEigen::new(a).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn cross_section_eigenvalue_matches_tridiagonal_oracle() {
    let cross = CrossSectionMesh::build(&unit(), 1.0 / 64.0).unwrap();
    let opts = SolveOptions { tol_grad: 1e-9, tol_energy: 1e-14, ..SolveOptions::default() };
    let res = solve::solve_eigen(&cross, &NormSpec::euclidean(1), 2.0, &opts).unwrap();
    let oracle = tridiagonal_oracle(64);
    assert!((res.lambda - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", res.lambda);
    assert!((res.lambda - std::f64::consts::PI.powi(2)).abs() <= 0.02 * std::f64::consts::PI.powi(2));
    assert!(res.field.values.iter().all(|&v| v >= -1e-12));
    assert!((discrete::lp_norm(&cross, &res.field, 2.0).unwrap() - 1.0).abs() < 1e-12);
    for w in res.rayleigh_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn rectangle_eigenvalue_and_scaling() {
    let mesh = CylinderMesh::build(4.0, 1, &unit(), 1.0 / 16.0, 1.0 / 16.0).unwrap();
    let opts = SolveOptions { tol_grad: 1e-10, tol_energy: 1e-15, ..SolveOptions::default() };
    let base = solve::solve_eigen(&mesh, &NormSpec::euclidean(2), 2.0, &opts).unwrap();
    assert!(base.converged, "residual {}", base.weak_residual);
    // Separable 5-point spectrum with lumped mass.
    let mu = |n: f64, len: f64| 4.0 * n * n / (len * len) * (std::f64::consts::PI / (2.0 * n)).sin().powi(2);
    let expect = mu(64.0, 4.0) + mu(16.0, 1.0);
    assert!((base.lambda - expect).abs() <= 1e-8 * expect, "{} vs {expect}", base.lambda);

    let scaled = solve::solve_eigen(&mesh, &NormSpec::scaled_euclidean(2.0, 2).unwrap(), 2.0, &opts).unwrap();
    assert!((scaled.lambda - 4.0 * base.lambda).abs() <= 1e-8 * scaled.lambda);
    let diff = scaled.field.values.iter().zip(&base.field.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8, "fields differ by {diff}");
}

#[test]
fn eigen_residual_is_small_at_convergence() {
    let mesh = CylinderMesh::build(2.0, 1, &unit(), 0.125, 0.125).unwrap();
    let opts = SolveOptions { tol_grad: 1e-9, ..SolveOptions::default() };
    for (norm, p) in [(NormSpec::euclidean(2), 2.0), (NormSpec::qnorm(3.0, 2).unwrap(), 3.0)] {
        let res = solve::solve_eigen(&mesh, &norm, p, &opts).unwrap();
        assert!(res.converged);
        let r = solve::weak_residual(&mesh, &norm, p, WeakForm::Eigen(res.lambda), &res.field).unwrap();
        assert!(r <= 10.0 * opts.tol_grad, "residual {r}");
    }
}

#[test]
fn solutions_do_not_depend_on_the_seed() {
    let mesh = CylinderMesh::build(3.0, 1, &unit(), 0.125, 0.125).unwrap();
    let cross = CrossSectionMesh::build(&unit(), 0.125).unwrap();
    let f = Field::constant(&cross, 1.0);
    for (norm, p) in [
        (NormSpec::qnorm(3.0, 2).unwrap(), 3.0),
        (NormSpec::split(3.0, NormSpec::qnorm(3.0, 1).unwrap(), NormSpec::qnorm(3.0, 1).unwrap()).unwrap(), 3.0),
        (NormSpec::matrix_qnorm(2.0, vec![2.0, 0.0, 0.0, 1.0], 2).unwrap(), 2.5),
    ] {
        let a = solve_dirichlet(&mesh, &norm, p, &f, &SolveOptions { seed: 1, ..SolveOptions::default() }).unwrap();
        let b = solve_dirichlet(&mesh, &norm, p, &f, &SolveOptions { seed: 2, ..SolveOptions::default() }).unwrap();
        assert!(a.converged && b.converged);
        let diff = a.field.values.iter().zip(&b.field.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "{diff}");
        // Reflection symmetry in both coordinates for the symmetric q-norm data.
        if matches!(norm.family(), finsler_core::NormFamily::QNorm { .. }) {
            let (na, nc) = (mesh.num_axis_nodes(), mesh.num_cross_nodes());
            for i in 0..na {
                for j in 0..nc {
                    let v = a.field.values[i * nc + j];
                    assert!((v - a.field.values[(na - 1 - i) * nc + j]).abs() <= 1e-6);
                    assert!((v - a.field.values[i * nc + nc - 1 - j]).abs() <= 1e-6);
                }
            }
        }
    }
}

#[test]
fn nonsmooth_problems_converge_under_continuation() {
    let mesh = CylinderMesh::build(2.0, 1, &unit(), 0.125, 0.125).unwrap();
    let cross = CrossSectionMesh::build(&unit(), 0.125).unwrap();
    let f = Field::constant(&cross, 1.0);
    for (norm, p) in [(NormSpec::qnorm(1.5, 2).unwrap(), 1.5), (NormSpec::euclidean(2), 1.5), (NormSpec::qnorm(1.5, 2).unwrap(), 2.0)] {
        let res = solve_dirichlet(&mesh, &norm, p, &f, &SolveOptions::default()).unwrap();
        assert_eq!(res.eps_schedule.len(), 4);
        assert!(res.converged, "{:?} p={p}: residual {}", norm.family(), res.weak_residual);
        for (k, &start) in res.stage_starts.iter().enumerate() {
            let end = res.stage_starts.get(k + 1).copied().unwrap_or(res.energy_trace.len());
            for w in res.energy_trace[start..end].windows(2) {
                assert!(w[1] <= w[0] + 1e-14 * w[0].abs());
            }
        }
    }
}

#[test]
fn poincare_constant_on_strips() {
    let opts = SolveOptions { tol_grad: 1e-10, ..SolveOptions::default() };
    let mut values = Vec::new();
    for (ell, width) in [(4.0, 1.0), (8.0, 1.0), (4.0, 2.0)] {
        let cross = vec![Interval::new(0.0, width)];
        let mesh = CylinderMesh::build_with(ell, 1, &cross, 0.25, width / 32.0, finsler_core::BoundaryKind::StripOnly).unwrap();
        let res = solve::solve_poincare(&mesh, 2.0, &opts).unwrap();
        assert!(res.converged);
        values.push(res.lambda.powf(-0.5));
    }
    let pi = std::f64::consts::PI;
    assert!((values[0] - 1.0 / pi).abs() <= 0.02 / pi);
    assert!((values[0] - values[1]).abs() <= 1e-8);
    assert!((values[2] - 2.0 * values[0]).abs() <= 1e-8);
}

fn random_in(mesh: &Mesh, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Field {
    let values = (0..mesh.num_nodes()).map(|i| if mesh.is_dirichlet(i) { 0.0 } else { rng.random_range(lo..hi) }).collect();
    Field { values, constrained: true }
}

#[test]
fn picone_pairs() {
    let mesh = CylinderMesh::build(2.0, 1, &unit(), 0.25, 0.25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (norm, p) in [(NormSpec::qnorm(4.0, 2).unwrap(), 3.0), (NormSpec::euclidean(2), 2.0)] {
        for _ in 0..20 {
            let u = random_in(&mesh, &mut rng, 0.0, 1.5);
            let v = random_in(&mesh, &mut rng, 0.1, 1.5);
            let r = solve::picone_check(&mesh, &norm, p, &u, &v).unwrap();
            assert!(r.max_abs_r_minus_l <= 1e-9 && r.min_l >= -1e-10, "{r:?}");
        }
        let v = Field::from_fn(&mesh, true, |x| 1.0 + x[0] * x[1]);
        let same = solve::picone_check(&mesh, &norm, p, &v, &v).unwrap();
        assert!(same.max_abs_r_minus_l <= 1e-12 && same.min_l.abs() <= 1e-12);
        let zero = solve::picone_check(&mesh, &norm, p, &Field::zeros(&mesh), &v).unwrap();
        assert!(zero.max_abs_r_minus_l <= 1e-12);
        let bad = Field::from_fn(&mesh, true, |_| 0.0);
        assert!(solve::picone_check(&mesh, &norm, p, &v, &bad).is_err());
    }
}

#[test]
fn jensen_inequality_for_axis_average() {
    let cross = CrossSectionMesh::build(&unit(), 1.0 / 16.0).unwrap();
    let mesh = CylinderMesh::build(4.0, 1, &unit(), 1.0 / 8.0, 1.0 / 16.0).unwrap();
    let f = Field::constant(&cross, 1.0);
    let norm = NormSpec::qnorm(3.0, 2).unwrap();
    let u_l = solve_dirichlet(&mesh, &norm, 3.0, &f, &SolveOptions::default()).unwrap();
    let u_inf = solve_cross_section(&cross, &norm, 1, 3.0, &f, &SolveOptions::default()).unwrap();
    let w = discrete::axis_average(&mesh, &u_l.field).unwrap();
    let cross_norm = norm.cross_section(1).unwrap();
    let jw = energy(&cross, &cross_norm, 3.0, &f, &w).unwrap().total;
    assert!(jw >= u_inf.energy.total - 1e-9);
    // Energy sandwich at this single ℓ.
    assert!(u_l.energy.total / 4.0 >= u_inf.energy.total - 1e-9);
}
