//! Sensing-SNR minimization by a malicious surface that keeps every UE
//! above its SINR floor.
//!
//! The reflected energy `delta_r^2 s_l^2 r^2` is decoupled through
//! `s_l >= |tau_l θ̂|`, `r >= ||Ĥ θ̂||` and square completion, the
//! indefinite `θ̂^H M̂_l θ̂` is split into PSD and NSD parts, and the unit
//! modulus and SINR constraints are convexified around the current point
//! with penalized slacks `xi`, `v`. Every convexified subproblem is a
//! second-order cone program.

use std::time::Instant;

use conic::{solve, AffineExpr, ConicProgram, ConicSolution, Cone, ProgramBuilder, SolverSettings};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{c, real_psd_factor, to_db, unit_modulus};
use crate::maxsnr::SolveSummary;
use crate::model::{apply_failure_mask, ChannelSet, FailureMask, PhaseVector, Precoder, RcsModel, SystemConfig};
use crate::quadratics::{all_sinr_unchecked, build_attack_quadratics, snr_fast, AttackQuadratics};
use crate::{Error, Result, C64};

const CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcpSettings {
    pub lambda0: f64,
    pub mu: f64,
    pub lambda_max: f64,
    pub nu: f64,
    pub max_iterations: usize,
    /// Relative SINR tolerance of the post-projection audit.
    pub sinr_audit_tolerance: f64,
    /// Relative tightening of the convexified SINR floors, absorbed by the
    /// unit-modulus projection.
    pub sinr_margin: f64,
    /// Divide the sensing-SNR part of each subproblem by its value at the
    /// expansion point, which makes the penalty schedule scale free.
    pub relative_objective: bool,
    /// Expand the next subproblem around `s_l = |tau_l θ̂|`, `r = ||Ĥ θ̂||`
    /// instead of the solved auxiliary values.
    pub reanchor_magnitudes: bool,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
}

impl Default for CcpSettings {
    fn default() -> Self {
        Self {
            lambda0: 0.01,
            mu: 3.0,
            lambda_max: 1e4,
            nu: 1e-3,
            max_iterations: 15,
            sinr_audit_tolerance: 1e-4,
            sinr_margin: 1e-2,
            relative_objective: true,
            reanchor_magnitudes: true,
            solver_tolerance: 1e-7,
            solver_max_iterations: 200,
        }
    }
}

impl CcpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0) || !(self.mu > 1.0) || !(self.lambda_max >= self.lambda0) || !(self.nu > 0.0) {
            return Err(Error::Config("penalty schedule needs lambda0 > 0, mu > 1, lambda_max >= lambda0, nu > 0".into()));
        }
        if self.max_iterations == 0
            || !(self.solver_tolerance > 0.0)
            || !(self.sinr_audit_tolerance >= 0.0)
            || !(self.sinr_margin >= 0.0)
        {
            return Err(Error::Config("invalid CCP iteration count or tolerances".into()));
        }
        Ok(())
    }

    fn solver(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
            ..SolverSettings::default()
        }
    }

    /// `min(mu^t lambda0, lambda_max)`.
    pub fn penalty(&self, t: usize) -> f64 {
        let mut l = self.lambda0;
        for _ in 0..t {
            l = (l * self.mu).min(self.lambda_max);
        }
        l
    }
}

/// Point of the convexified problem; also the expansion point of the next
/// subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpState {
    pub theta_hat: DVector<C64>,
    pub s: Vec<f64>,
    pub r: f64,
    pub alpha: Vec<f64>,
    pub xi: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: f64,
}

impl CcpState {
    /// Expansion point at `[theta; 1]` with `s_l = |tau_l θ̂|`,
    /// `r = ||Ĥ θ̂||` and `alpha_l = θ̂^H M̂_l θ̂`.
    pub fn initial(aq: &AttackQuadratics, theta: &PhaseVector, lambda: f64) -> Self {
        let th = theta.augmented();
        let s = (0..aq.streams()).map(|l| aq.s_value(l, &th)).collect();
        let r = aq.r_value(&th);
        let alpha = aq
            .mhat
            .iter()
            .map(|sp| {
                let full = &sp.plus + &sp.minus;
                th.dotc(&(full * &th)).re
            })
            .collect();
        Self {
            theta_hat: th,
            s,
            r,
            alpha,
            xi: vec![0.0; 2 * aq.n()],
            v: vec![0.0; aq.ues()],
            lambda,
        }
    }
}

/// Built subproblem with the indices needed to read its solution.
#[derive(Debug, Clone)]
pub struct P4Program {
    pub program: ConicProgram,
    n: usize,
    has_reflection: bool,
}

/// Real affine pieces of `rho^T θ̂` (no conjugation) over the stacked
/// variable `[Re θ̂; Im θ̂]` starting at `off`.
fn complex_row(row: &[C64], off: usize) -> (AffineExpr, AffineExpr) {
    let np1 = row.len();
    let mut re = AffineExpr::zero();
    let mut im = AffineExpr::zero();
    for (i, v) in row.iter().enumerate() {
        re = re.term(off + i, v.re).term(off + np1 + i, -v.im);
        im = im.term(off + np1 + i, v.re).term(off + i, v.im);
    }
    (re, im)
}

/// `2 Re(c^H θ̂)`.
fn two_re_inner(cv: &DVector<C64>, off: usize) -> AffineExpr {
    let np1 = cv.len();
    let mut e = AffineExpr::zero();
    for (i, v) in cv.iter().enumerate() {
        e = e.term(off + i, 2.0 * v.re).term(off + np1 + i, 2.0 * v.im);
    }
    e
}

fn real_rows(b: &DMatrix<f64>, off: usize) -> Vec<AffineExpr> {
    b.row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(AffineExpr::zero(), |e, (j, &v)| e.term(off + j, v))
        })
        .collect()
}

/// `sum_i rows_i^2 <= t` as a second-order cone, balanced with
/// `beta = sqrt(reference)`.
fn add_quad_le(b: &mut ProgramBuilder, rows: Vec<AffineExpr>, t: AffineExpr, reference: f64) -> Result<()> {
    if rows.is_empty() {
        b.add_nonneg(t);
        return Ok(());
    }
    let beta = reference.max(1e-12).sqrt();
    let a = t.scaled(1.0 / beta);
    let mut exprs = vec![a.clone().plus_const(beta), a.plus_const(-beta)];
    exprs.extend(rows.into_iter().map(|r| r.scaled(2.0)));
    b.add_cone(Cone::SecondOrder(exprs.len()), exprs)?;
    Ok(())
}

fn quad(a: &DMatrix<C64>, x: &DVector<C64>) -> f64 {
    x.dotc(&(a * x)).re
}

/// Builds the convexified, penalized subproblem around `local`.
pub fn build_p4(aq: &AttackQuadratics, local: &CcpState, cfg: &SystemConfig, lambda: f64) -> Result<P4Program> {
    build_p4_weighted(aq, local, cfg, lambda, 1.0, 0.0)
}

/// As [`build_p4`], with the sensing-SNR part of the objective multiplied
/// by `weight` and the SINR targets raised by the factor `1 + margin`.
pub fn build_p4_weighted(
    aq: &AttackQuadratics,
    local: &CcpState,
    cfg: &SystemConfig,
    lambda: f64,
    weight: f64,
    margin: f64,
) -> Result<P4Program> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::Config(format!("objective weight must be positive, got {weight}")));
    }
    let n = aq.n();
    let l_count = aq.streams();
    let k_count = aq.ues();
    if local.theta_hat.len() != n + 1 || local.s.len() != l_count || cfg.K != k_count {
        return Err(Error::Dimension("local point does not match the attack quadratics".into()));
    }
    let th_t = &local.theta_hat;
    let dr2 = aq.delta_r_sq;
    let inv = weight / cfg.sigma_t_sq;
    let has_reflection = dr2 > 0.0;
    let mut b = ProgramBuilder::new();
    let theta = b.add_variable("theta", 2 * (n + 1)).start;
    let alpha = b.add_variable("alpha", l_count).start;
    let xi = b.add_variable("xi", 2 * n).start;
    let xi_norm = b.add_variable("xi_norm", 1).start;
    b.add_objective(xi_norm, lambda);
    for l in 0..l_count {
        b.add_objective(alpha + l, inv);
    }
    b.add_equality(AffineExpr::var(theta + n).plus_const(-1.0));
    b.add_equality(AffineExpr::var(theta + 2 * n + 1));

    let mut offset: f64 = aq.const_terms.iter().sum::<f64>() * inv;

    // CCP on the indefinite bordered forms
    for l in 0..l_count {
        let sp = &aq.mhat[l];
        let factor = real_psd_factor(&sp.plus, 1e-12);
        let cvec = &sp.minus * th_t;
        let t = AffineExpr::var(alpha + l)
            .add(&two_re_inner(&cvec, theta).scaled(-1.0))
            .plus_const(quad(&sp.minus, th_t));
        add_quad_le(&mut b, real_rows(&factor, theta), t, quad(&sp.plus, th_t))?;
    }

    // feasible-point pursuit on the unit modulus
    for i in 0..n {
        let t = AffineExpr::var(xi + i).plus_const(1.0);
        let rows = vec![AffineExpr::var(theta + i), AffineExpr::var(theta + n + 1 + i)];
        add_quad_le(&mut b, rows, t, 1.0)?;
        let z = th_t[i];
        let lin = AffineExpr::var(xi + n + i)
            .term(theta + i, 2.0 * z.re)
            .term(theta + n + 1 + i, 2.0 * z.im)
            .plus_const(-1.0 - z.norm_sqr());
        b.add_nonneg(lin);
        b.add_nonneg(AffineExpr::var(xi + i));
        b.add_nonneg(AffineExpr::var(xi + n + i));
    }
    let mut xi_cone = vec![AffineExpr::var(xi_norm)];
    xi_cone.extend((0..2 * n).map(|i| AffineExpr::var(xi + i)));
    b.add_cone(Cone::SecondOrder(2 * n + 1), xi_cone)?;

    // convexified SINR floors
    if k_count > 0 {
        let v = b.add_variable("v", k_count).start;
        let v_norm = b.add_variable("v_norm", 1).start;
        b.add_objective(v_norm, lambda);
        for k in 0..k_count {
            let gk = cfg.gamma[k] * (1.0 + margin);
            let rkk = &aq.r[k][k];
            let cvec = rkk * th_t;
            let t = AffineExpr::var(v + k)
                .add(&two_re_inner(&cvec, theta))
                .plus_const(-gk * cfg.sigma_ue_sq[k] - quad(rkk, th_t));
            let mut rows = Vec::new();
            for l in 0..l_count {
                if l == k {
                    continue;
                }
                let row: Vec<C64> = aq.w[k][l].iter().map(|z| z.conj() * gk.sqrt()).collect();
                let (re, im) = complex_row(&row, theta);
                rows.push(re);
                rows.push(im);
            }
            add_quad_le(&mut b, rows, t, gk * quad(&aq.u[k], th_t))?;
            b.add_nonneg(AffineExpr::var(v + k));
        }
        let mut v_cone = vec![AffineExpr::var(v_norm)];
        v_cone.extend((0..k_count).map(|k| AffineExpr::var(v + k)));
        b.add_cone(Cone::SecondOrder(k_count + 1), v_cone)?;
    }

    // decoupled reflected energy
    if has_reflection {
        let s = b.add_variable("s", l_count).start;
        let r = b.add_variable("r", 1).start;
        let u = b.add_variable("u", l_count).start;
        let q = b.add_variable("q", l_count).start;
        let c4 = (dr2 / 2.0).sqrt();
        let s_t: Vec<f64> = local.s.iter().map(|v| v.max(CLAMP)).collect();
        let r_t = local.r.max(CLAMP);
        b.add_nonneg(AffineExpr::var(r));
        b.add_objective(r, -2.0 * dr2 * r_t.powi(3) * l_count as f64 * inv);
        for l in 0..l_count {
            b.add_nonneg(AffineExpr::var(s + l));
            b.add_objective(q + l, inv);
            b.add_objective(s + l, -2.0 * dr2 * s_t[l].powi(3) * inv);
            offset += 1.5 * dr2 * (s_t[l].powi(4) + r_t.powi(4)) * inv;
            // u_l >= c (s_l^2 + r^2), q_l >= u_l^2
            let sr = s_t[l] * s_t[l] + r_t * r_t;
            add_quad_le(
                &mut b,
                vec![AffineExpr::var(s + l), AffineExpr::var(r)],
                AffineExpr::var(u + l).scaled(1.0 / c4),
                sr,
            )?;
            let u_ref = c4 * sr;
            add_quad_le(&mut b, vec![AffineExpr::var(u + l)], AffineExpr::var(q + l), u_ref * u_ref)?;
            // |tau_l θ̂|^2 <= 2 s_t s_l - s_t^2
            let tau: Vec<C64> = aq.tau[l].iter().copied().collect();
            let (re, im) = complex_row(&tau, theta);
            let t = AffineExpr::var(s + l).scaled(2.0 * s_t[l]).plus_const(-s_t[l] * s_t[l]);
            add_quad_le(&mut b, vec![re, im], t, s_t[l] * s_t[l])?;
        }
        // ||Ĥ θ̂||^2 <= 2 r_t r - r_t^2
        let mut rows = Vec::with_capacity(2 * aq.hhat.nrows());
        for i in 0..aq.hhat.nrows() {
            let row: Vec<C64> = aq.hhat.row(i).iter().copied().collect();
            let (re, im) = complex_row(&row, theta);
            rows.push(re);
            rows.push(im);
        }
        let t = AffineExpr::var(r).scaled(2.0 * r_t).plus_const(-r_t * r_t);
        add_quad_le(&mut b, rows, t, r_t * r_t)?;
    }
    b.add_objective_offset(offset);
    Ok(P4Program {
        program: b.build()?,
        n,
        has_reflection,
    })
}

impl P4Program {
    /// Reads the subproblem solution back into a state.
    pub fn decode(&self, sol: &ConicSolution, lambda: f64) -> CcpState {
        let n = self.n;
        let th = sol.var("theta").expect("theta block");
        let theta_hat = DVector::from_fn(n + 1, |i, _| c(th[i], th[n + 1 + i]));
        let get = |name: &str| sol.var(name).map(|v| v.to_vec()).unwrap_or_default();
        let (s, r) = if self.has_reflection {
            (get("s"), get("r")[0])
        } else {
            (Vec::new(), 0.0)
        };
        CcpState {
            theta_hat,
            s,
            r,
            alpha: get("alpha"),
            xi: get("xi"),
            v: get("v"),
            lambda,
        }
    }
}

/// Value of the surrogate `(1/sigma_T^2) sum_l rho~_l + constants` at
/// `θ̂`, with `s`, `r` and `alpha` at their smallest feasible values for the
/// subproblem built around `local`. At `θ̂ = local.theta_hat` it equals the
/// exact sensing SNR; elsewhere it is an upper bound.
pub fn surrogate_snr(aq: &AttackQuadratics, local: &CcpState, sigma_t_sq: f64, theta_hat: &DVector<C64>) -> f64 {
    let dr2 = aq.delta_r_sq;
    let th_t = &local.theta_hat;
    let r_t = local.r.max(CLAMP);
    let rr = aq.r_value(theta_hat);
    let r = (rr * rr + r_t * r_t) / (2.0 * r_t);
    let mut total = 0.0;
    for l in 0..aq.streams() {
        let sp = &aq.mhat[l];
        let alpha = quad(&sp.plus, theta_hat) + 2.0 * th_t.dotc(&(&sp.minus * theta_hat)).re - quad(&sp.minus, th_t);
        let mut rho = alpha + aq.const_terms[l];
        if dr2 > 0.0 {
            let s_t = local.s[l].max(CLAMP);
            let ss = aq.s_value(l, theta_hat);
            let s = (ss * ss + s_t * s_t) / (2.0 * s_t);
            rho += 0.5 * dr2 * (s * s + r * r).powi(2) - 2.0 * dr2 * s_t.powi(3) * s - 2.0 * dr2 * r_t.powi(3) * r
                + 1.5 * dr2 * (s_t.powi(4) + r_t.powi(4));
        }
        total += rho;
    }
    total / sigma_t_sq
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcpRecord {
    pub iteration: usize,
    pub rho_db: f64,
    pub rho_deployed_db: f64,
    pub xi_norm: f64,
    pub v_norm: f64,
    pub theta_change: f64,
    pub lambda: f64,
    /// `max_n ||θ̂_n| - 1|` before projection.
    pub modulus_deviation: f64,
    pub sinr: Vec<f64>,
    pub sinr_deployed: Vec<f64>,
    pub audit_ok: bool,
    pub solve: SolveSummary,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CcpTrace {
    pub initial_rho_db: f64,
    pub initial_rho_deployed_db: f64,
    pub records: Vec<CcpRecord>,
    pub converged: bool,
    /// Set when a subproblem failed twice and the run stopped early.
    pub aborted: Option<String>,
    /// Iteration whose projected phases were returned (0: the input).
    pub selected_iteration: usize,
}

#[derive(Debug, Clone)]
pub struct CcpOutcome {
    pub theta: PhaseVector,
    pub trace: CcpTrace,
}

fn solve_p4(
    aq: &AttackQuadratics,
    state: &CcpState,
    cfg: &SystemConfig,
    lambda: f64,
    weight: f64,
    settings: &CcpSettings,
) -> Result<(ConicSolution, P4Program)> {
    let p4 = build_p4_weighted(aq, state, cfg, lambda, weight, settings.sinr_margin)?;
    let solver = settings.solver();
    let sol = solve(&p4.program, &solver)?;
    Ok((sol, p4))
}

/// Runs the penalized convex-concave procedure from `theta0` against the
/// known precoder `f`. The returned phases pass the SINR audit; if no
/// iterate does, `theta0` is returned.
#[allow(clippy::too_many_arguments)]
pub fn algorithm2(
    ch: &ChannelSet,
    rcs: &RcsModel,
    f: &Precoder,
    theta0: &PhaseVector,
    cfg: &SystemConfig,
    settings: &CcpSettings,
    mask: Option<&FailureMask>,
) -> Result<CcpOutcome> {
    settings.validate()?;
    cfg.validate()?;
    ch.check_against(cfg)?;
    if theta0.len() != cfg.N || f.antennas() != cfg.M || f.streams() != cfg.L() {
        return Err(Error::Dimension("initial phases or precoder do not match the configuration".into()));
    }
    let aq = build_attack_quadratics(ch, rcs, f)?;
    let solver = settings.solver();
    let fm = f.matrix();
    let n = cfg.N;
    let eval = |theta: &PhaseVector| -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let dep = match mask {
            Some(m) => apply_failure_mask(theta, m)?,
            None => theta.clone(),
        };
        Ok((
            snr_fast(ch, rcs, theta.as_vector(), fm, cfg.sigma_t_sq),
            snr_fast(ch, rcs, dep.as_vector(), fm, cfg.sigma_t_sq),
            all_sinr_unchecked(ch, theta.as_vector(), fm, &cfg.sigma_ue_sq),
            all_sinr_unchecked(ch, dep.as_vector(), fm, &cfg.sigma_ue_sq),
        ))
    };
    let (rho0, rho0_dep, _, _) = eval(theta0)?;
    let mut trace = CcpTrace {
        initial_rho_db: to_db(rho0),
        initial_rho_deployed_db: to_db(rho0_dep),
        ..CcpTrace::default()
    };
    let mut state = CcpState::initial(&aq, theta0, settings.lambda0);
    let mut lambda = settings.lambda0;
    let mut best: Option<(f64, PhaseVector, usize)> = None;
    let mut last_audited: Option<(PhaseVector, usize)> = None;
    for t in 1..=settings.max_iterations {
        let start = Instant::now();
        let weight = if settings.relative_objective {
            1.0 / surrogate_snr(&aq, &state, cfg.sigma_t_sq, &state.theta_hat).max(1e-300)
        } else {
            1.0
        };
        let (mut sol, mut p4) = solve_p4(&aq, &state, cfg, lambda, weight, settings)?;
        if !sol.status.is_usable() {
            lambda *= 0.5;
            (sol, p4) = solve_p4(&aq, &state, cfg, lambda, weight, settings)?;
            if !sol.status.is_usable() {
                trace.aborted = Some(format!(
                    "subproblem at iteration {t} ended with status {} (primal {:.1e}, dual {:.1e}, gap {:.1e})",
                    sol.status, sol.residuals.primal, sol.residuals.dual, sol.residuals.gap
                ));
                break;
            }
        }
        let mut next = p4.decode(&sol, lambda);
        if settings.reanchor_magnitudes || aq.delta_r_sq == 0.0 {
            next.s = (0..aq.streams()).map(|l| aq.s_value(l, &next.theta_hat)).collect();
            next.r = aq.r_value(&next.theta_hat);
        }
        let theta_change = (next.theta_hat.rows(0, n) - state.theta_hat.rows(0, n)).norm();
        let xi_norm = DVector::from_column_slice(&next.xi).norm();
        let v_norm = DVector::from_column_slice(&next.v).norm();
        let modulus_deviation = next.theta_hat.rows(0, n).iter().fold(0.0_f64, |m, z| m.max((z.norm() - 1.0).abs()));
        let projected = PhaseVector::project(&unit_modulus(&next.theta_hat.rows(0, n).into_owned()));
        let (rho, rho_dep, sinr, sinr_dep) = eval(&projected)?;
        let audit_ok = sinr
            .iter()
            .zip(&cfg.gamma)
            .all(|(s, g)| *s >= g * (1.0 - settings.sinr_audit_tolerance));
        trace.records.push(CcpRecord {
            iteration: t,
            rho_db: to_db(rho),
            rho_deployed_db: to_db(rho_dep),
            xi_norm,
            v_norm,
            theta_change,
            lambda,
            modulus_deviation,
            sinr,
            sinr_deployed: sinr_dep,
            audit_ok,
            solve: SolveSummary {
                status: sol.status,
                iterations: sol.iterations,
                gap_rel: sol.residuals.relative_gap,
                feasibility: sol.residuals.max_feasibility(),
                tolerance: solver.tolerance,
            },
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if audit_ok {
            if best.as_ref().is_none_or(|(b, _, _)| rho < *b) {
                best = Some((rho, projected.clone(), t));
            }
            last_audited = Some((projected.clone(), t));
        }
        state = next;
        lambda = (lambda * settings.mu).min(settings.lambda_max);
        let stop = theta_change <= settings.nu && xi_norm <= settings.nu && v_norm <= settings.nu;
        if stop && audit_ok {
            trace.converged = true;
            break;
        }
    }
    let last_t = trace.records.last().map(|r| r.iteration);
    let (theta, selected) = match (last_audited, best) {
        (Some((th, t)), _) if Some(t) == last_t => (th, t),
        (_, Some((_, th, t))) => (th, t),
        _ => (theta0.clone(), 0),
    };
    trace.selected_iteration = selected;
    Ok(CcpOutcome { theta, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, real};
    use crate::model::{generate_channels, Geometry};
    use crate::quadratics::gamma_matrix;
    use conic::Status;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (ChannelSet, RcsModel, Precoder, SystemConfig) {
        let cfg = SystemConfig::uniform(4, 2, 4, 2.0, 0.5, 1.0, 10.0);
        let ch = generate_channels(&cfg, &Geometry::default(), seed).unwrap();
        let rcs = RcsModel::new(1e-5, 1e-5, real(9e-6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Precoder::new(DMatrix::from_fn(4, 3, |_, _| complex_gaussian(&mut rng, 1)[0] * real(0.5)));
        (ch, rcs, f, cfg)
    }

    #[test]
    fn penalty_schedule() {
        let s = CcpSettings::default();
        assert_eq!(s.penalty(0), 0.01);
        assert!((s.penalty(2) - 0.09).abs() < 1e-15);
        assert!((s.penalty(10) - 0.01 * 3f64.powi(10)).abs() < 1e-9);
        assert_eq!(s.penalty(20), 1e4);
    }

    #[test]
    fn decoupled_rho_matches_gamma() {
        let (ch, rcs, f, _) = setup(1);
        let aq = build_attack_quadratics(&ch, &rcs, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = PhaseVector::random(4, &mut rng);
        let g = gamma_matrix(&ch, &rcs, &theta).unwrap();
        for l in 0..3 {
            let col = f.column(l);
            let want = col.dotc(&(&g * &col)).re;
            assert!((aq.rho_l(l, &theta.augmented()) - want).abs() <= 1e-9 * want);
        }
    }

    #[test]
    fn surrogate_is_tight_and_dominates() {
        let (ch, rcs, f, cfg) = setup(3);
        let aq = build_attack_quadratics(&ch, &rcs, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let local = CcpState::initial(&aq, &PhaseVector::random(4, &mut rng), 10.0);
        let exact = |th: &DVector<C64>| snr_fast(&ch, &rcs, &th.rows(0, 4).into_owned(), f.matrix(), cfg.sigma_t_sq);
        let at = surrogate_snr(&aq, &local, cfg.sigma_t_sq, &local.theta_hat);
        assert!((at - exact(&local.theta_hat)).abs() <= 1e-8 * at);
        for _ in 0..20 {
            let th = PhaseVector::random(4, &mut rng).augmented();
            assert!(surrogate_snr(&aq, &local, cfg.sigma_t_sq, &th) >= exact(&th) - 1e-8);
        }
    }

    #[test]
    fn subproblem_is_optimal_and_not_worse_than_local_point() {
        let (ch, rcs, f, cfg) = setup(5);
        let aq = build_attack_quadratics(&ch, &rcs, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let local = CcpState::initial(&aq, &PhaseVector::random(4, &mut rng), 10.0);
        let p4 = build_p4(&aq, &local, &cfg, 10.0).unwrap();
        let sol = solve(&p4.program, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let th = &local.theta_hat;
        let v_needed: f64 = (0..cfg.K)
            .map(|k| {
                let v = cfg.gamma[k] * (cfg.sigma_ue_sq[k] + quad(&aq.u[k], th)) - quad(&aq.r[k][k], th);
                v.max(0.0).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let at_local = surrogate_snr(&aq, &local, cfg.sigma_t_sq, th) + 10.0 * v_needed;
        assert!(sol.objective <= at_local + 1e-6 * at_local.abs().max(1.0), "{} > {}", sol.objective, at_local);
        let next = p4.decode(&sol, 10.0);
        assert!((next.theta_hat[4] - real(1.0)).norm() < 1e-7);
    }
}
