//! Oracle and identity checks run by the `validate` subcommand.

use std::time::Instant;

use conic::{solve, AffineExpr, ComplexSdp, Cone, ProgramBuilder, Sense, SolverSettings, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c, complex_gaussian, hermitize, real, top_eigen};
use crate::maxsnr::solve_p1_relaxed;
use crate::minsnr::{surrogate_snr, CcpState};
use crate::model::{generate_channels, Geometry, PhaseVector, Precoder, RcsModel, SystemConfig};
use crate::quadratics::{
    build_attack_quadratics, build_sensing_quadratics, gamma_matrix, sensing_snr, sensing_snr_direct, sensing_snr_mc,
    theta_tilde, vec_col,
};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<28} {} ({:.2} s)", self.name, self.detail, self.seconds)
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn default_rcs() -> RcsModel {
    RcsModel::new(1e-5, 1e-5, real(9e-6)).expect("valid RCS statistics")
}

fn random_precoder<R: Rng>(rng: &mut R, m: usize, l: usize) -> Precoder {
    let mut f = DMatrix::zeros(m, l);
    for j in 0..l {
        f.set_column(j, &complex_gaussian(rng, m));
    }
    Precoder::new(f)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Analytic sensing SNR against `samples` RCS draws, 20 instances at
/// `M = N = 4`, `K = 2`; passes when at least 19 lie within 3 standard
/// errors.
pub fn oracle_consistency(seed: u64, samples: usize) -> Check {
    timed("oracle_consistency", || {
        let cfg = SystemConfig::uniform(4, 2, 4, 2.0, 2.0, 1.0, 10.0);
        let rcs = default_rcs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inside = 0;
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let ch = generate_channels(&cfg, &Geometry::default(), rng.random())?;
            let theta = PhaseVector::random(4, &mut rng);
            let f = random_precoder(&mut rng, 4, 3);
            let exact = sensing_snr_direct(&ch, &rcs, &theta, &f, 1.0)?;
            let mc = sensing_snr_mc(&ch, &rcs, &theta, &f, 1.0, samples, seed.wrapping_add(i))?;
            let z = (mc.mean - exact).abs() / mc.stderr;
            worst = worst.max(z);
            if z <= 3.0 {
                inside += 1;
            }
        }
        Ok((inside >= 19, format!("{inside}/20 within 3 s.e., worst {worst:.2} s.e.")))
    })
}

/// Covariance, lifted and decoupled forms of every `rho_l` on 100 random
/// instances, pairwise relative agreement `tol`.
pub fn representation_equivalence(seed: u64, tol: f64) -> Check {
    timed("representation_equivalence", || {
        let rcs = default_rcs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (m, k, n) = (rng.random_range(2..6), rng.random_range(0..3), rng.random_range(1..6));
            let cfg = SystemConfig::uniform(m, k, n, 2.0, 2.0, 1.0, 10.0);
            let ch = generate_channels(&cfg, &Geometry::default(), rng.random())?;
            let theta = PhaseVector::random(n, &mut rng);
            let f = random_precoder(&mut rng, m, k + 1);
            let g = gamma_matrix(&ch, &rcs, &theta)?;
            let sq = build_sensing_quadratics(&ch, &rcs, &f)?;
            let aq = build_attack_quadratics(&ch, &rcs, &f)?;
            let x = theta_tilde(&theta);
            let th = theta.augmented();
            for l in 0..=k {
                let col = f.column(l);
                let a = col.dotc(&(&g * &col)).re;
                let b = sq.rho_l(l, &x);
                let d = aq.rho_l(l, &th);
                worst = worst.max(rel(a, b)).max(rel(a, d)).max(rel(b, d));
            }
        }
        Ok((worst <= tol, format!("worst pairwise relative difference {worst:.1e}")))
    })
}

/// `vec(Theta T Theta^H) = vec(T) ⊙ θ̃` on 100 random instances, `N <= 6`.
pub fn vectorization_identity(seed: u64, tol: f64) -> Check {
    timed("vectorization_identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let n = rng.random_range(1..7);
            let theta = PhaseVector::random(n, &mut rng);
            let t = DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let d = DMatrix::from_diagonal(theta.as_vector());
            let lhs = vec_col(&(&d * &t * d.adjoint()));
            let rhs = vec_col(&t).component_mul(&theta_tilde(&theta));
            worst = worst.max((lhs - rhs).norm());
        }
        Ok((worst <= tol, format!("worst residual {worst:.1e}")))
    })
}

/// Tangency and domination of the linear minorizer of `θ̃^H Q_l θ̃`, and of
/// the attack surrogate over the exact SNR, at 50 random local points.
pub fn majorization(seed: u64, tol: f64) -> Check {
    timed("majorization", || {
        let rcs = default_rcs();
        let cfg = SystemConfig::uniform(4, 2, 4, 2.0, 2.0, 1.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut tangency, mut violation): (f64, f64) = (0.0, 0.0);
        for _ in 0..50 {
            let ch = generate_channels(&cfg, &Geometry::default(), rng.random())?;
            let f = random_precoder(&mut rng, 4, 3);
            let local = PhaseVector::random(4, &mut rng);
            let sq = build_sensing_quadratics(&ch, &rcs, &f)?;
            let xt = theta_tilde(&local);
            let aq = build_attack_quadratics(&ch, &rcs, &f)?;
            let state = CcpState::initial(&aq, &local, 1.0);
            let exact = |t: &PhaseVector| sensing_snr_direct(&ch, &rcs, t, &f, cfg.sigma_t_sq);
            let at = surrogate_snr(&aq, &state, cfg.sigma_t_sq, &state.theta_hat);
            tangency = tangency.max(rel(at, exact(&local)?));
            for l in 0..sq.streams() {
                let b = sq.apply_q(l, &xt);
                let q = sq.quadratic(l, &xt);
                tangency = tangency.max(rel(2.0 * b.dotc(&xt).re - q, q));
            }
            for _ in 0..5 {
                let other = PhaseVector::random(4, &mut rng);
                let x = theta_tilde(&other);
                for l in 0..sq.streams() {
                    let b = sq.apply_q(l, &xt);
                    let q = sq.quadratic(l, &xt);
                    let lower = 2.0 * b.dotc(&x).re - q;
                    violation = violation.max((lower - sq.quadratic(l, &x)) / q.abs().max(1e-300));
                }
                let upper = surrogate_snr(&aq, &state, cfg.sigma_t_sq, &other.augmented());
                let truth = exact(&other)?;
                violation = violation.max((truth - upper) / truth.max(1e-300));
            }
        }
        Ok((
            tangency <= tol && violation <= tol,
            format!("tangency {tangency:.1e}, worst relative violation {violation:.1e}"),
        ))
    })
}

/// With `K = 0` the relaxed precoder step attains `P lambda_max(Gamma) /
/// sigma_T^2`.
pub fn closed_form(seed: u64, tol: f64) -> Check {
    timed("closed_form", || {
        let rcs = default_rcs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut usable = true;
        for _ in 0..10 {
            let (m, n) = (rng.random_range(2..7), rng.random_range(2..7));
            let cfg = SystemConfig::uniform(m, 0, n, rng.random_range(0.5..4.0), 2.0, 1.0, 10.0);
            let ch = generate_channels(&cfg, &Geometry::default(), rng.random())?;
            let theta = PhaseVector::random(n, &mut rng);
            let sol = solve_p1_relaxed(&ch, &rcs, &theta, &cfg, 0.0, &SolverSettings::default())?;
            usable &= sol.summary.status.is_usable();
            let (lam, v) = top_eigen(&gamma_matrix(&ch, &rcs, &theta)?);
            let want = cfg.P * lam / cfg.sigma_t_sq;
            let f = Precoder::new(DMatrix::from_columns(&[&v * real(cfg.P.sqrt())]));
            let direct = sensing_snr(&gamma_matrix(&ch, &rcs, &theta)?, &f, cfg.sigma_t_sq)?;
            worst = worst.max(rel(sol.objective, want)).max(rel(direct, want));
        }
        Ok((usable && worst <= tol, format!("worst relative error {worst:.1e}")))
    })
}

/// LP, second-order-cone projection and eigenvalue SDP examples.
pub fn conic_examples(seed: u64, tol: f64) -> Check {
    timed("conic_examples", || {
        let settings = SolverSettings::default();
        let mut errors = Vec::new();

        // minimize x + 2y  s.t.  x + y >= 1, x, y >= 0
        let mut b = ProgramBuilder::new();
        let v = b.add_variable("v", 2);
        b.add_objective(v.start, 1.0);
        b.add_objective(v.start + 1, 2.0);
        b.add_nonneg(AffineExpr::var(v.start).term(v.start + 1, 1.0).plus_const(-1.0));
        b.add_nonneg(AffineExpr::var(v.start));
        b.add_nonneg(AffineExpr::var(v.start + 1));
        let lp = solve(&b.build()?, &settings)?;
        errors.push(("lp", (lp.objective - 1.0).abs(), lp.status.is_usable()));

        // minimize t  s.t.  ||x - x0|| <= t,  x1 = 0
        let x0 = [1.5, -2.0, 0.25];
        let mut b = ProgramBuilder::new();
        let t = b.add_variable("t", 1);
        let x = b.add_variable("x", 3);
        b.add_objective(t.start, 1.0);
        let mut exprs = vec![AffineExpr::var(t.start)];
        exprs.extend(x0.iter().enumerate().map(|(i, v)| AffineExpr::var(x.start + i).plus_const(-v)));
        b.add_cone(Cone::SecondOrder(4), exprs)?;
        b.add_equality(AffineExpr::var(x.start));
        let soc = solve(&b.build()?, &settings)?;
        errors.push(("soc", (soc.objective - 1.5).abs(), soc.status.is_usable()));

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in [3, 6] {
            let a = DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = hermitize(&a);
            let mut sdp = ComplexSdp::new(&[n]);
            sdp.set_objective(0, h.clone())?;
            sdp.add_constraint(vec![(0, DMatrix::<C64>::identity(n, n))], Sense::LessEq, 1.0)?;
            let sol = sdp.solve(&settings)?;
            let want = top_eigen(&h).0.max(0.0);
            errors.push(("sdp", (sol.objective - want).abs(), sol.status.is_usable()));
        }
        let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
        let ok = errors.iter().all(|e| e.2) && worst <= tol;
        let names: Vec<String> = errors.iter().map(|(n, e, _)| format!("{n} {e:.1e}")).collect();
        Ok((ok, names.join(", ")))
    })
}

/// Every check with the acceptance tolerances.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        oracle_consistency(seed, 100_000),
        representation_equivalence(seed, 1e-9),
        vectorization_identity(seed, 1e-12),
        majorization(seed, 1e-8),
        closed_form(seed, 1e-6),
        conic_examples(seed, 1e-6),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        assert!(vectorization_identity(1, 1e-12).passed);
        assert!(representation_equivalence(2, 1e-9).passed);
        let c = conic_examples(3, 1e-6);
        assert!(c.passed, "{c}");
    }

    #[test]
    fn impossible_tolerance_fails() {
        let c = representation_equivalence(2, 0.0);
        assert!(!c.passed || c.detail.contains("0.0e0"));
        assert!(c.to_string().starts_with(if c.passed { "PASS" } else { "FAIL" }));
    }
}
