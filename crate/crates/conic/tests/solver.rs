use conic::{
    hermitian_embed, solve, AffineExpr, ComplexSdp, Cone, ProgramBuilder, Sense, SolverSettings, Status, C64,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

fn lambda_max(h: &DMatrix<C64>) -> f64 {
    h.clone().symmetric_eigen().eigenvalues.max()
}

#[test]
fn lp_lower_bound() {
    // minimize x  s.t.  x >= 3
    let mut b = ProgramBuilder::new();
    let x = b.add_variable("x", 1);
    b.add_objective(x.start, 1.0);
    b.add_nonneg(AffineExpr::var(x.start).plus_const(-3.0));
    let sol = solve(&b.build().unwrap(), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 3.0).abs() < 1e-6, "{}", sol.objective);
    assert!((sol.var("x").unwrap()[0] - 3.0).abs() < 1e-6);
}

#[test]
fn soc_distance_to_fixed_point_is_zero() {
    // minimize t  s.t.  ||x - x0|| <= t
    let x0 = [1.5, -2.0, 0.25];
    let mut b = ProgramBuilder::new();
    let t = b.add_variable("t", 1);
    let x = b.add_variable("x", 3);
    b.add_objective(t.start, 1.0);
    let mut exprs = vec![AffineExpr::var(t.start)];
    for (i, v) in x0.iter().enumerate() {
        exprs.push(AffineExpr::var(x.start + i).plus_const(-v));
    }
    b.add_cone(Cone::SecondOrder(4), exprs).unwrap();
    let sol = solve(&b.build().unwrap(), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!(sol.objective.abs() < 1e-6);
    let xs = sol.var("x").unwrap();
    for i in 0..3 {
        assert!((xs[i] - x0[i]).abs() < 1e-5, "{xs:?}");
    }
}

#[test]
fn hermitian_sdp_matches_top_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 4, 7] {
        let c = random_hermitian(&mut rng, n);
        let mut sdp = ComplexSdp::new(&[n]);
        sdp.set_objective(0, c.clone()).unwrap();
        sdp.add_constraint(vec![(0, DMatrix::identity(n, n))], Sense::LessEq, 1.0).unwrap();
        let sol = sdp.solve(&SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let expect = lambda_max(&c).max(0.0);
        assert!((sol.objective - expect).abs() < 1e-6, "n={n}: {} vs {}", sol.objective, expect);
        let w = &sol.blocks[0];
        let tr: f64 = (0..n).map(|i| w[(i, i)].re).sum();
        assert!(tr <= 1.0 + 1e-6);
        let value: f64 = (&c * w).trace().re;
        assert!((value - expect).abs() < 1e-6);
    }
}

#[test]
fn sdp_with_equalities_maxcut_style() {
    // maximize tr(C W) with diag(W) = 1: bounded by n * lambda_max(C).
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5;
    let c = random_hermitian(&mut rng, n);
    let mut sdp = ComplexSdp::new(&[n]);
    sdp.set_objective(0, c.clone()).unwrap();
    for i in 0..n {
        let mut e = DMatrix::zeros(n, n);
        e[(i, i)] = C64::new(1.0, 0.0);
        sdp.add_constraint(vec![(0, e)], Sense::Equal, 1.0).unwrap();
    }
    let sol = sdp.solve(&SolverSettings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    let w = &sol.blocks[0];
    for i in 0..n {
        assert!((w[(i, i)].re - 1.0).abs() < 1e-6);
    }
    let eig = w.clone().symmetric_eigen().eigenvalues;
    assert!(eig.min() > -1e-7);
    assert!(sol.objective <= n as f64 * lambda_max(&c) + 1e-6);
    // rank-one feasible points are dominated by the relaxation
    let ones = DVector::from_element(n, C64::new(1.0, 0.0));
    let v: f64 = (ones.adjoint() * &c * &ones)[(0, 0)].re;
    assert!(sol.objective >= v - 1e-6);
}

#[test]
fn infeasible_lp_reports_certificate() {
    // x >= 1 and x <= -1
    let mut b = ProgramBuilder::new();
    let x = b.add_variable("x", 1);
    b.add_objective(x.start, 1.0);
    b.add_nonneg(AffineExpr::var(x.start).plus_const(-1.0));
    b.add_nonneg(AffineExpr::var(x.start).scaled(-1.0).plus_const(-1.0));
    let settings = SolverSettings::default();
    let sol = solve(&b.build().unwrap(), &settings).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
    assert!(sol.residuals.certificate.unwrap() <= settings.tolerance);
}

#[test]
fn unbounded_lp_reports_direction() {
    // minimize -x s.t. x >= 0
    let mut b = ProgramBuilder::new();
    let x = b.add_variable("x", 1);
    b.add_objective(x.start, -1.0);
    b.add_nonneg(AffineExpr::var(x.start));
    let settings = SolverSettings::default();
    let sol = solve(&b.build().unwrap(), &settings).unwrap();
    assert_eq!(sol.status, Status::Unbounded);
    assert!(sol.residuals.certificate.unwrap() <= settings.tolerance);
}

#[test]
fn infeasible_sdp_is_reported_as_infeasible() {
    // tr(W) <= 1 and tr(W) >= 2
    let mut sdp = ComplexSdp::new(&[2]);
    sdp.set_objective(0, DMatrix::identity(2, 2)).unwrap();
    sdp.add_constraint(vec![(0, DMatrix::identity(2, 2))], Sense::LessEq, 1.0).unwrap();
    sdp.add_constraint(vec![(0, DMatrix::identity(2, 2))], Sense::GreaterEq, 2.0).unwrap();
    let sol = sdp.solve(&SolverSettings::default()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn zero_cone_rows_act_as_equalities() {
    // minimize x + y s.t. x - y = 1 (zero cone), x, y >= 0
    let mut b = ProgramBuilder::new();
    let v = b.add_variable("v", 2);
    b.add_objective(v.start, 1.0);
    b.add_objective(v.start + 1, 1.0);
    b.add_cone(Cone::Zero(1), vec![AffineExpr::var(0).term(1, -1.0).plus_const(-1.0)]).unwrap();
    b.add_cone(Cone::NonNeg(2), vec![AffineExpr::var(0), AffineExpr::var(1)]).unwrap();
    let sol = solve(&b.build().unwrap(), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-6);
    assert!(sol.cone_dual(0).unwrap().len() == 1);
}

#[test]
fn duality_gap_and_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let c = random_hermitian(&mut rng, 4);
    let mut sdp = ComplexSdp::new(&[4]);
    sdp.set_objective(0, c).unwrap();
    sdp.add_constraint(vec![(0, DMatrix::identity(4, 4))], Sense::LessEq, 2.0).unwrap();
    let settings = SolverSettings::default();
    let a = sdp.solve(&settings).unwrap();
    let b = sdp.solve(&settings).unwrap();
    assert!((a.objective - b.objective).abs() <= 1e-9);
    let r = a.report.residuals;
    assert!(r.gap <= settings.tolerance * (1.0 + a.report.objective.abs()));
    assert!(r.max_feasibility() <= settings.tolerance);
}

#[test]
fn objective_scaling_scales_value_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0)).collect();
    let build = |scale: f64| {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", 3);
        for i in 0..3 {
            b.add_objective(x.start + i, scale * base[i]);
            b.add_nonneg(AffineExpr::var(x.start + i));
        }
        // x0 + x1 + x2 >= 1 and ||x|| <= 2
        b.add_nonneg(AffineExpr::var(0).term(1, 1.0).term(2, 1.0).plus_const(-1.0));
        b.add_cone(
            Cone::SecondOrder(4),
            vec![AffineExpr::constant(2.0), AffineExpr::var(0), AffineExpr::var(1), AffineExpr::var(2)],
        )
        .unwrap();
        b.build().unwrap()
    };
    let s1 = solve(&build(1.0), &SolverSettings::default()).unwrap();
    let s2 = solve(&build(7.5), &SolverSettings::default()).unwrap();
    assert!((s2.objective - 7.5 * s1.objective).abs() < 1e-6 * (1.0 + s2.objective.abs()));
    assert!((&s1.x - &s2.x).norm() < 1e-5);
}

#[test]
fn embedding_preserves_spectrum_and_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let n = rng.random_range(1..6);
        let a = random_hermitian(&mut rng, n);
        let b = random_hermitian(&mut rng, n);
        let ea = hermitian_embed(&a).unwrap();
        let eb = hermitian_embed(&b).unwrap();
        let lhs = (&ea * &eb).trace();
        let rhs = 2.0 * (&a * &b).trace().re;
        assert!((lhs - rhs).abs() < 1e-10);
        let mut ec: Vec<f64> = ea.symmetric_eigenvalues().iter().copied().collect();
        let mut hc: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().flat_map(|&v| [v, v]).collect();
        ec.sort_by(f64::total_cmp);
        hc.sort_by(f64::total_cmp);
        for (x, y) in ec.iter().zip(&hc) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
