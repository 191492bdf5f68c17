//! Alternating optimization that maximizes the sensing SNR under per-UE
//! SINR floors and the power budget.
//!
//! Each iteration solves the semidefinite relaxation of the precoder
//! problem, extracts precoders (principal eigenvectors for the UE streams,
//! Gaussian randomization for the sensing stream), then solves the relaxed
//! minorized surface problem and extracts phases by randomization.

use std::time::Instant;

use conic::{ComplexSdp, Sense, SolverSettings, Status};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{complex_gaussian, eigh_desc, hermitize, psd_sqrt, rank_one_ratio, real, to_db, top_eigen, unit_modulus};
use crate::model::{apply_failure_mask, ChannelSet, FailureMask, PhaseVector, Precoder, RcsModel, SystemConfig};
use crate::quadratics::{
    all_sinr_unchecked, build_attack_quadratics, build_sensing_quadratics, gamma_unchecked, lift, snr_fast, stack,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoSettings {
    pub max_iterations: usize,
    /// Stop when `|rho_t - rho_{t-1}| <= tol * rho_{t-1}` (linear `rho`).
    pub convergence_tolerance: f64,
    /// Candidates per randomization step, for both precoders and phases.
    pub randomization_count: usize,
    /// Threshold on `lambda_2 / lambda_1` counted as rank one.
    pub rank_one_eigen_gap: f64,
    pub keep_best_so_far: bool,
    /// Relative tightening of the SINR targets in the precoder step; leaves
    /// the surface step room to move.
    pub precoder_sinr_margin: f64,
    /// Relative tightening of the SINR targets in the surface SDP.
    pub sinr_margin: f64,
    /// Halvings of the phase arc toward the fixed-point step of the surface
    /// objective (then toward the best candidate) tried when no randomized
    /// candidate is feasible and improving.
    pub backtracking_steps: usize,
    /// When no randomized phase candidate is feasible for the current
    /// precoder, also try the principal relaxed candidate with a re-solved
    /// precoder and keep it if it is better.
    pub joint_fallback: bool,
    /// Attempts with fresh random initial phases when the first SDP is
    /// infeasible.
    pub init_attempts: usize,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            convergence_tolerance: 1e-3,
            randomization_count: 1000,
            rank_one_eigen_gap: 1e-6,
            keep_best_so_far: true,
            precoder_sinr_margin: 1e-2,
            sinr_margin: 1e-6,
            backtracking_steps: 10,
            joint_fallback: true,
            init_attempts: 10,
            solver_tolerance: 1e-8,
            solver_max_iterations: 200,
        }
    }
}

impl AoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.randomization_count == 0 || self.init_attempts == 0 {
            return Err(Error::Config("AO iteration, randomization and attempt counts must be positive".into()));
        }
        if !(self.convergence_tolerance > 0.0 && self.rank_one_eigen_gap > 0.0 && self.solver_tolerance > 0.0) {
            return Err(Error::Config("AO tolerances must be positive".into()));
        }
        if !(self.sinr_margin >= 0.0 && self.precoder_sinr_margin >= 0.0) {
            return Err(Error::Config("SINR margin must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
            ..SolverSettings::default()
        }
    }
}

/// Summary of one conic solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: Status,
    pub iterations: usize,
    /// Relative duality gap reported by the solver.
    pub gap_rel: f64,
    /// Largest relative primal or dual residual.
    pub feasibility: f64,
    pub tolerance: f64,
}

impl SolveSummary {
    fn from_sdp(sol: &conic::ComplexSdpSolution, tolerance: f64) -> Self {
        let r = &sol.report;
        Self {
            status: sol.status,
            iterations: r.iterations,
            gap_rel: r.residuals.relative_gap,
            feasibility: r.residuals.max_feasibility(),
            tolerance,
        }
    }

    /// For optimal solves, whether the gap is within tolerance.
    pub fn gap_ok(&self) -> bool {
        self.status != Status::Optimal || self.gap_rel <= self.tolerance
    }
}

/// Relaxed precoder covariances.
#[derive(Debug, Clone)]
pub struct P1Solution {
    pub w: Vec<DMatrix<C64>>,
    pub objective: f64,
    pub summary: SolveSummary,
}

fn check_inputs(ch: &ChannelSet, cfg: &SystemConfig, theta_len: usize) -> Result<()> {
    cfg.validate()?;
    ch.check_against(cfg)?;
    if theta_len != cfg.N {
        return Err(Error::Dimension(format!("theta has {theta_len} entries, N = {}", cfg.N)));
    }
    Ok(())
}

/// Semidefinite relaxation of the precoder problem at fixed phases.
/// Each SINR target is tightened by the factor `1 + margin`.
pub fn solve_p1_relaxed(
    ch: &ChannelSet,
    rcs: &RcsModel,
    theta: &PhaseVector,
    cfg: &SystemConfig,
    margin: f64,
    settings: &SolverSettings,
) -> Result<P1Solution> {
    check_inputs(ch, cfg, theta.len())?;
    let (m, l_count) = (cfg.M, cfg.L());
    let gamma = gamma_unchecked(ch, rcs, theta.as_vector()) * real(1.0 / cfg.sigma_t_sq);
    let mut sdp = ComplexSdp::new(&vec![m; l_count]);
    for l in 0..l_count {
        sdp.set_objective(l, gamma.clone())?;
    }
    for k in 0..cfg.K {
        let h = crate::model::cascaded_unchecked(ch, theta.as_vector(), k);
        let ht = hermitize(&(&h * h.adjoint()));
        let target = cfg.gamma[k] * (1.0 + margin);
        let terms = (0..l_count)
            .map(|l| if l == k { (l, ht.clone()) } else { (l, &ht * real(-target)) })
            .collect();
        sdp.add_constraint(terms, Sense::GreaterEq, target * cfg.sigma_ue_sq[k])?;
    }
    let eye = DMatrix::<C64>::identity(m, m);
    sdp.add_constraint((0..l_count).map(|l| (l, eye.clone())).collect(), Sense::LessEq, cfg.P)?;
    let sol = sdp.solve(settings)?;
    Ok(P1Solution {
        summary: SolveSummary::from_sdp(&sol, settings.tolerance),
        objective: sol.objective,
        w: sol.blocks,
    })
}

/// Outcome of the precoder extraction.
#[derive(Debug, Clone)]
pub struct PrecoderExtraction {
    pub precoder: Precoder,
    /// Number of feasible sensing candidates `|S|`.
    pub feasible: usize,
    /// Whether the UE powers had to be recomputed for feasibility.
    pub power_repaired: bool,
}

fn sinr_feasible(sinr: &[f64], cfg: &SystemConfig) -> bool {
    sinr.iter().zip(&cfg.gamma).all(|(s, g)| s >= g)
}

/// Powers along fixed unit directions meeting every target with equality
/// scaled by `1 + margin`.
fn repair_powers(
    ch: &ChannelSet,
    theta: &DVector<C64>,
    dirs: &[DVector<C64>],
    cfg: &SystemConfig,
    margin: f64,
) -> Option<Vec<f64>> {
    let k_count = cfg.K;
    let h: Vec<DVector<C64>> = (0..k_count).map(|k| crate::model::cascaded_unchecked(ch, theta, k)).collect();
    let mut a = DMatrix::<f64>::zeros(k_count, k_count);
    let mut b = DVector::<f64>::zeros(k_count);
    for k in 0..k_count {
        let target = cfg.gamma[k] * (1.0 + margin);
        for l in 0..k_count {
            let gain = h[k].dotc(&dirs[l]).norm_sqr();
            a[(k, l)] = if l == k { gain } else { -target * gain };
        }
        b[k] = target * cfg.sigma_ue_sq[k];
    }
    let p = a.lu().solve(&b)?;
    if p.iter().all(|v| *v > 0.0 && v.is_finite()) && p.sum() <= cfg.P {
        Some(p.iter().copied().collect())
    } else {
        None
    }
}

/// Principal eigenvectors for the UE streams and Gaussian randomization for
/// the sensing stream.
pub fn extract_precoders(
    w: &[DMatrix<C64>],
    ch: &ChannelSet,
    rcs: &RcsModel,
    theta: &PhaseVector,
    cfg: &SystemConfig,
    settings: &AoSettings,
    seed: u64,
) -> Result<PrecoderExtraction> {
    check_inputs(ch, cfg, theta.len())?;
    if w.len() != cfg.L() {
        return Err(Error::Dimension(format!("{} covariance blocks for L = {}", w.len(), cfg.L())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let th = theta.as_vector();
    let (m, k_count) = (cfg.M, cfg.K);
    let mut f = DMatrix::<C64>::zeros(m, cfg.L());
    for k in 0..k_count {
        let (vals, vecs) = eigh_desc(&w[k]);
        let v = vecs.column(0) * real(vals[0].max(0.0).sqrt());
        f.set_column(k, &v);
    }
    let mut power_repaired = false;
    let sinr = all_sinr_unchecked(ch, th, &f, &cfg.sigma_ue_sq);
    if !sinr_feasible(&sinr, cfg) {
        let dirs: Vec<DVector<C64>> = (0..k_count)
            .map(|k| {
                let col = f.column(k).into_owned();
                let n = col.norm();
                if n > 0.0 {
                    col / real(n)
                } else {
                    col
                }
            })
            .collect();
        let p = repair_powers(ch, th, &dirs, cfg, settings.precoder_sinr_margin)
            .ok_or_else(|| Error::Infeasible("UE streams from the relaxation violate the SINR floors".into()))?;
        for k in 0..k_count {
            f.set_column(k, &(&dirs[k] * real(p[k].sqrt())));
        }
        power_repaired = true;
        if !sinr_feasible(&all_sinr_unchecked(ch, th, &f, &cfg.sigma_ue_sq), cfg) {
            return Err(Error::Infeasible("power repair did not restore the SINR floors".into()));
        }
    }
    let used: f64 = (0..k_count).map(|k| f.column(k).norm_squared()).sum();
    let residual = cfg.P - used;
    let last = cfg.L() - 1;
    let w_l = hermitize(&w[last]);
    let mut feasible = 0;
    if residual > 0.0 && w_l.norm() > 0.0 {
        let gamma = gamma_unchecked(ch, rcs, th);
        let root = psd_sqrt(&w_l);
        let mut best: Option<(f64, DVector<C64>)> = None;
        let mut trial = f.clone();
        for _ in 0..settings.randomization_count {
            let v = complex_gaussian(&mut rng, m);
            let cand = &root * v;
            let norm = cand.norm();
            if !(norm > 0.0) {
                continue;
            }
            let cand = cand * real(residual.sqrt() / norm);
            trial.set_column(last, &cand);
            if !sinr_feasible(&all_sinr_unchecked(ch, th, &trial, &cfg.sigma_ue_sq), cfg) {
                continue;
            }
            feasible += 1;
            let value = cand.dotc(&(&gamma * &cand)).re;
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, cand));
            }
        }
        if let Some((_, cand)) = best {
            f.set_column(last, &cand);
        }
    }
    Ok(PrecoderExtraction {
        precoder: Precoder::new(f),
        feasible,
        power_repaired,
    })
}

/// Coefficient matrix of the minorized surface objective,
/// `(2 / sigma_T^2) sum_l Herm(Xi_l)` of size `(N+1) x (N+1)`.
pub fn surface_objective(ch: &ChannelSet, rcs: &RcsModel, f: &Precoder, theta_t: &PhaseVector, sigma_t_sq: f64) -> Result<DMatrix<C64>> {
    let sq = build_sensing_quadratics(ch, rcs, f)?;
    let n = ch.n();
    let x = lift(theta_t.as_vector());
    let mut sum = DMatrix::<C64>::zeros(n, n);
    for l in 0..sq.streams() {
        let b = sq.apply_q(l, &x);
        sum += stack(&(&b + &sq.p[l]));
    }
    let mut out = DMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(&(hermitize(&sum) * real(2.0 / sigma_t_sq)));
    Ok(out)
}

/// Relaxed surface problem solution.
#[derive(Debug, Clone)]
pub struct P2Solution {
    pub gram: DMatrix<C64>,
    pub objective: f64,
    pub summary: SolveSummary,
}

/// Semidefinite relaxation of the minorized surface problem at fixed
/// precoders, expanded around `theta_t`.
pub fn solve_p2_relaxed(
    ch: &ChannelSet,
    rcs: &RcsModel,
    f: &Precoder,
    theta_t: &PhaseVector,
    cfg: &SystemConfig,
    margin: f64,
    settings: &SolverSettings,
) -> Result<P2Solution> {
    check_inputs(ch, cfg, theta_t.len())?;
    let n = cfg.N;
    let obj = surface_objective(ch, rcs, f, theta_t, cfg.sigma_t_sq)?;
    let aq = build_attack_quadratics(ch, rcs, f)?;
    let mut sdp = ComplexSdp::new(&[n + 1]);
    sdp.set_objective(0, obj)?;
    for i in 0..=n {
        let mut e = DMatrix::<C64>::zeros(n + 1, n + 1);
        e[(i, i)] = real(1.0);
        sdp.add_constraint(vec![(0, e)], Sense::Equal, 1.0)?;
    }
    for k in 0..cfg.K {
        let target = cfg.gamma[k] * (1.0 + margin);
        let mut a = aq.r[k][k].clone();
        for l in 0..cfg.L() {
            if l != k {
                a -= &aq.r[k][l] * real(target);
            }
        }
        sdp.add_constraint(vec![(0, hermitize(&a))], Sense::GreaterEq, target * cfg.sigma_ue_sq[k])?;
    }
    let sol = sdp.solve(settings)?;
    Ok(P2Solution {
        summary: SolveSummary::from_sdp(&sol, settings.tolerance),
        objective: sol.objective,
        gram: sol.blocks.into_iter().next().expect("one block"),
    })
}

#[derive(Debug, Clone)]
pub struct PhaseExtraction {
    pub theta: PhaseVector,
    /// Number of feasible candidates `|E|`.
    pub feasible: usize,
    /// Whether the incumbent was kept.
    pub kept_incumbent: bool,
}

/// Normalizes the principal eigenvector and randomized candidates by their last entry, projects them onto
/// the unit circle, keeps the SINR-feasible ones and returns the one with
/// the largest exact sensing SNR; the incumbent `theta_t` is a candidate.
#[allow(clippy::too_many_arguments)]
pub fn extract_phases(
    gram: &DMatrix<C64>,
    ch: &ChannelSet,
    rcs: &RcsModel,
    f: &Precoder,
    theta_t: &PhaseVector,
    cfg: &SystemConfig,
    settings: &AoSettings,
    seed: u64,
) -> Result<PhaseExtraction> {
    check_inputs(ch, cfg, theta_t.len())?;
    let n = cfg.N;
    if gram.nrows() != n + 1 || gram.ncols() != n + 1 {
        return Err(Error::Dimension(format!("Gram matrix must be {}x{}", n + 1, n + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fm = f.matrix();
    let root = psd_sqrt(gram);
    let mut best_val = snr_fast(ch, rcs, theta_t.as_vector(), fm, cfg.sigma_t_sq);
    let mut best: Option<DVector<C64>> = None;
    let mut best_any: Option<(f64, DVector<C64>)> = None;
    let mut feasible = 0;
    let principal = top_eigen(gram).1;
    for i in 0..=settings.randomization_count {
        let cand = if i == 0 {
            principal.clone()
        } else {
            &root * complex_gaussian(&mut rng, n + 1)
        };
        let last = cand[n];
        if !(last.norm() > 0.0) {
            continue;
        }
        let eta = cand.rows(0, n) / last;
        let theta = unit_modulus(&eta);
        let val = snr_fast(ch, rcs, &theta, fm, cfg.sigma_t_sq);
        if best_any.as_ref().is_none_or(|(b, _)| val > *b) {
            best_any = Some((val, theta.clone()));
        }
        let sinr = all_sinr_unchecked(ch, &theta, fm, &cfg.sigma_ue_sq);
        if !sinr_feasible(&sinr, cfg) {
            continue;
        }
        feasible += 1;
        if val > best_val {
            best_val = val;
            best = Some(theta);
        }
    }
    if best.is_none() {
        // fixed-point step of the surface objective, an ascent direction
        let c_mat = surface_objective(ch, rcs, f, theta_t, cfg.sigma_t_sq)?;
        let shift = (-eigh_desc(&c_mat).0[n]).max(0.0);
        let th = theta_t.augmented();
        let step = &c_mat * &th + &th * real(shift);
        let mm = unit_modulus(&(step.rows(0, n) / step[n]));
        let base = theta_t.as_vector();
        'targets: for target in [Some(mm), best_any.map(|(_, t)| t)].into_iter().flatten() {
            let arc: Vec<f64> = base.iter().zip(target.iter()).map(|(b, t)| (t * b.conj()).arg()).collect();
            let mut beta = 1.0;
            for _ in 0..settings.backtracking_steps {
                let theta = DVector::from_fn(n, |i, _| base[i] * C64::from_polar(1.0, beta * arc[i]));
                let sinr = all_sinr_unchecked(ch, &theta, fm, &cfg.sigma_ue_sq);
                if sinr_feasible(&sinr, cfg) {
                    let val = snr_fast(ch, rcs, &theta, fm, cfg.sigma_t_sq);
                    if val > best_val {
                        best = Some(theta);
                        break 'targets;
                    }
                }
                beta *= 0.5;
            }
        }
    }
    Ok(match best {
        Some(t) => PhaseExtraction {
            theta: PhaseVector::project(&t),
            feasible,
            kept_incumbent: false,
        },
        None => PhaseExtraction {
            theta: theta_t.clone(),
            feasible,
            kept_incumbent: true,
        },
    })
}

/// One iteration of the alternating optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoRecord {
    pub iteration: usize,
    pub rho: f64,
    pub rho_db: f64,
    /// Sensing SNR with the failure mask applied to the deployed phases
    /// (equal to `rho_db` without a mask).
    pub rho_deployed_db: f64,
    pub sinr: Vec<f64>,
    pub sinr_deployed: Vec<f64>,
    pub power: f64,
    /// `lambda_2 / lambda_1` of every UE covariance from the precoder SDP.
    pub rank_ratios: Vec<f64>,
    pub feasible_precoders: usize,
    pub feasible_phases: usize,
    pub power_repaired: bool,
    /// Whether the phases came with a re-solved precoder because no phase
    /// candidate was feasible for the current one.
    pub joint_step: bool,
    pub p1: Option<SolveSummary>,
    pub p2: Option<SolveSummary>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AoTrace {
    pub records: Vec<AoRecord>,
    pub converged: bool,
    /// Random initializations tried before the precoder SDP was feasible.
    pub init_attempts: usize,
}

impl AoTrace {
    pub fn final_rho_db(&self) -> Option<f64> {
        self.records.last().map(|r| r.rho_db)
    }
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub theta: PhaseVector,
    pub precoder: Precoder,
    pub trace: AoTrace,
}

fn deployed(theta: &PhaseVector, mask: Option<&FailureMask>) -> Result<PhaseVector> {
    match mask {
        Some(m) => apply_failure_mask(theta, m),
        None => Ok(theta.clone()),
    }
}

/// Runs the alternating optimization from random initial phases. When
/// `mask` is given, the reported deployed values use `theta ⊙ m` while the
/// optimizer itself ignores the failure.
pub fn algorithm1(
    ch: &ChannelSet,
    rcs: &RcsModel,
    cfg: &SystemConfig,
    settings: &AoSettings,
    seed: u64,
    mask: Option<&FailureMask>,
) -> Result<AoOutcome> {
    settings.validate()?;
    cfg.validate()?;
    ch.check_against(cfg)?;
    rcs.validate()?;
    let solver = settings.solver();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut theta = PhaseVector::random(cfg.N, &mut rng);
    let mut first = None;
    let mut attempts = 0;
    for _ in 0..settings.init_attempts {
        attempts += 1;
        let p1 = solve_p1_relaxed(ch, rcs, &theta, cfg, settings.precoder_sinr_margin, &solver)?;
        if p1.summary.status.is_usable() {
            first = Some(p1);
            break;
        }
        theta = PhaseVector::random(cfg.N, &mut rng);
    }
    let mut pending = first.ok_or_else(|| {
        Error::Infeasible(format!("precoder relaxation infeasible for {attempts} random initial phase vectors"))
    })?;

    let mut trace = AoTrace {
        init_attempts: attempts,
        ..AoTrace::default()
    };
    let mut incumbent: Option<Precoder> = None;
    let mut prev_rho: Option<f64> = None;
    for t in 1..=settings.max_iterations {
        let start = Instant::now();
        let p1 = if t == 1 {
            Some(pending.clone())
        } else {
            let p = solve_p1_relaxed(ch, rcs, &theta, cfg, settings.precoder_sinr_margin, &solver)?;
            p.summary.status.is_usable().then_some(p)
        };
        let p1_summary = p1.as_ref().map(|p| p.summary).or_else(|| Some(pending.summary));
        let mut rank_ratios = Vec::new();
        let mut feasible_precoders = 0;
        let mut power_repaired = false;
        let mut fresh: Option<Precoder> = None;
        if let Some(p1) = &p1 {
            rank_ratios = (0..cfg.K).map(|k| rank_one_ratio(&p1.w[k])).collect();
            match extract_precoders(&p1.w, ch, rcs, &theta, cfg, settings, rng.random()) {
                Ok(ext) => {
                    feasible_precoders = ext.feasible;
                    power_repaired = ext.power_repaired;
                    fresh = Some(ext.precoder);
                }
                Err(Error::Infeasible(_)) => {}
                Err(e) => return Err(e),
            }
            pending = p1.clone();
        }
        let mut precoder = match (fresh, incumbent.take()) {
            (Some(new), Some(old)) if settings.keep_best_so_far => {
                let th = theta.as_vector();
                let vn = snr_fast(ch, rcs, th, new.matrix(), cfg.sigma_t_sq);
                let vo = snr_fast(ch, rcs, th, old.matrix(), cfg.sigma_t_sq);
                if vn >= vo {
                    new
                } else {
                    old
                }
            }
            (Some(new), _) => new,
            (None, Some(old)) => old,
            (None, None) => return Err(Error::Infeasible("no feasible precoder at the initial phases".into())),
        };

        let p2 = solve_p2_relaxed(ch, rcs, &precoder, &theta, cfg, settings.sinr_margin, &solver)?;
        let p2_summary = p2.summary;
        let mut feasible_phases = 0;
        let mut joint_step = false;
        if p2.summary.status.is_usable() {
            let ext = extract_phases(&p2.gram, ch, rcs, &precoder, &theta, cfg, settings, rng.random())?;
            feasible_phases = ext.feasible;
            theta = ext.theta;
            if ext.feasible == 0 && settings.joint_fallback {
                let v = top_eigen(&p2.gram).1;
                if v[cfg.N].norm() > 0.0 {
                    let cand = PhaseVector::project(&unit_modulus(&(v.rows(0, cfg.N) / v[cfg.N])));
                    let now = snr_fast(ch, rcs, theta.as_vector(), precoder.matrix(), cfg.sigma_t_sq);
                    let p = solve_p1_relaxed(ch, rcs, &cand, cfg, settings.precoder_sinr_margin, &solver)?;
                    if p.summary.status.is_usable() {
                        if let Ok(ext) = extract_precoders(&p.w, ch, rcs, &cand, cfg, settings, rng.random()) {
                            let val = snr_fast(ch, rcs, cand.as_vector(), ext.precoder.matrix(), cfg.sigma_t_sq);
                            if val > now {
                                theta = cand;
                                precoder = ext.precoder;
                                joint_step = true;
                            }
                        }
                    }
                }
            }
        }

        let fm = precoder.matrix();
        let rho = snr_fast(ch, rcs, theta.as_vector(), fm, cfg.sigma_t_sq);
        let dep = deployed(&theta, mask)?;
        let rho_dep = snr_fast(ch, rcs, dep.as_vector(), fm, cfg.sigma_t_sq);
        trace.records.push(AoRecord {
            iteration: t,
            rho,
            rho_db: to_db(rho),
            rho_deployed_db: to_db(rho_dep),
            sinr: all_sinr_unchecked(ch, theta.as_vector(), fm, &cfg.sigma_ue_sq),
            sinr_deployed: all_sinr_unchecked(ch, dep.as_vector(), fm, &cfg.sigma_ue_sq),
            power: precoder.power(),
            rank_ratios,
            feasible_precoders,
            feasible_phases,
            power_repaired,
            joint_step,
            p1: p1_summary,
            p2: Some(p2_summary),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        incumbent = Some(precoder);
        if let Some(prev) = prev_rho {
            if (rho - prev).abs() <= settings.convergence_tolerance * prev.abs() {
                trace.converged = true;
                break;
            }
        }
        prev_rho = Some(rho);
    }
    Ok(AoOutcome {
        theta,
        precoder: incumbent.expect("at least one iteration"),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channels, Geometry};
    use crate::quadratics::{gamma_matrix, sensing_snr};

    fn small(k: usize, seed: u64) -> (ChannelSet, RcsModel, SystemConfig) {
        let cfg = SystemConfig::uniform(4, k, 4, 2.0, 2.0, 1.0, 10.0);
        let ch = generate_channels(&cfg, &Geometry::default(), seed).unwrap();
        let rcs = RcsModel::new(1e-5, 1e-5, real(9e-6)).unwrap();
        (ch, rcs, cfg)
    }

    #[test]
    fn single_stream_matches_eigen_solution() {
        let (ch, rcs, cfg) = small(0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = PhaseVector::random(4, &mut rng);
        let sol = solve_p1_relaxed(&ch, &rcs, &theta, &cfg, 0.0, &SolverSettings::default()).unwrap();
        assert_eq!(sol.summary.status, Status::Optimal);
        let g = gamma_matrix(&ch, &rcs, &theta).unwrap();
        let (lam, v) = crate::linalg::top_eigen(&g);
        let want = cfg.P * lam / cfg.sigma_t_sq;
        assert!((sol.objective - want).abs() <= 1e-6 * want);
        let w_want = &v * v.adjoint() * real(cfg.P);
        assert!((&sol.w[0] - w_want).norm() <= 1e-5 * cfg.P);
    }

    #[test]
    fn unattainable_targets_are_infeasible() {
        let (ch, rcs, mut cfg) = small(2, 3);
        cfg.gamma = vec![1e9; 2];
        let sol = solve_p1_relaxed(&ch, &rcs, &PhaseVector::ones(4), &cfg, 0.0, &SolverSettings::default()).unwrap();
        assert_eq!(sol.summary.status, Status::Infeasible);
    }

    #[test]
    fn zero_sensing_covariance_gives_zero_stream() {
        let (ch, rcs, cfg) = small(1, 4);
        let theta = PhaseVector::ones(4);
        let h = crate::model::cascaded_unchecked(&ch, theta.as_vector(), 0);
        let u = &h / real(h.norm());
        let w = vec![&u * u.adjoint() * real(0.5), DMatrix::zeros(4, 4)];
        let ext = extract_precoders(&w, &ch, &rcs, &theta, &cfg, &AoSettings::default(), 0).unwrap();
        assert_eq!(ext.precoder.column(1).norm(), 0.0);
        assert_eq!(ext.feasible, 0);
    }

    #[test]
    fn rank_one_sensing_covariance_is_recovered() {
        let (ch, rcs, cfg) = small(1, 5);
        let theta = PhaseVector::ones(4);
        let h = crate::model::cascaded_unchecked(&ch, theta.as_vector(), 0);
        let u = &h / real(h.norm());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = complex_gaussian(&mut rng, 4);
        let w = vec![&u * u.adjoint() * real(0.5), &s * s.adjoint()];
        let settings = AoSettings {
            randomization_count: 50,
            ..AoSettings::default()
        };
        let ext = extract_precoders(&w, &ch, &rcs, &theta, &cfg, &settings, 3).unwrap();
        let fl = ext.precoder.column(1);
        if ext.feasible > 0 {
            let residual = cfg.P - ext.precoder.column(0).norm_squared();
            assert!((fl.norm_squared() - residual).abs() < 1e-10);
            let cos = s.dotc(&fl).norm() / (s.norm() * fl.norm());
            assert!((cos - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn minorizer_is_tight_at_expansion_point() {
        let (ch, rcs, _) = small(1, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = Precoder::new(DMatrix::from_fn(4, 2, |_, _| complex_gaussian(&mut rng, 1)[0]));
        let theta = PhaseVector::random(4, &mut rng);
        let sq = build_sensing_quadratics(&ch, &rcs, &f).unwrap();
        let x = lift(theta.as_vector());
        for l in 0..2 {
            let b = sq.apply_q(l, &x);
            let q = sq.quadratic(l, &x);
            let minor = 2.0 * b.dotc(&x).re - q;
            assert!((minor - q).abs() <= 1e-12 * q.abs().max(1e-300));
            let other = lift(PhaseVector::random(4, &mut rng).as_vector());
            let bound = 2.0 * b.dotc(&other).re - q;
            assert!(sq.quadratic(l, &other) >= bound - 1e-12 * q.abs());
        }
    }

    #[test]
    fn surface_objective_matches_lifted_form() {
        let (ch, rcs, cfg) = small(1, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = Precoder::new(DMatrix::from_fn(4, 2, |_, _| complex_gaussian(&mut rng, 1)[0]));
        let theta_t = PhaseVector::random(4, &mut rng);
        let obj = surface_objective(&ch, &rcs, &f, &theta_t, cfg.sigma_t_sq).unwrap();
        let sq = build_sensing_quadratics(&ch, &rcs, &f).unwrap();
        let xt = lift(theta_t.as_vector());
        let theta = PhaseVector::random(4, &mut rng);
        let x = lift(theta.as_vector());
        let th = theta.augmented();
        let lhs = th.dotc(&(&obj * &th)).re;
        let rhs: f64 = (0..2).map(|l| 2.0 * (sq.apply_q(l, &xt).dotc(&x).re + x.dotc(&sq.p[l]).re)).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn empty_feasible_set_keeps_incumbent() {
        let (ch, rcs, mut cfg) = small(1, 10);
        let theta = PhaseVector::ones(4);
        let f = Precoder::zeros(4, 2);
        cfg.gamma = vec![1.0];
        let gram = DMatrix::identity(5, 5);
        let ext = extract_phases(&gram, &ch, &rcs, &f, &theta, &cfg, &AoSettings::default(), 1).unwrap();
        assert_eq!(ext.theta, theta);
        assert_eq!(ext.feasible, 0);
        assert!(ext.kept_incumbent);
    }

    #[test]
    fn rank_one_gram_recovers_phases() {
        let (ch, rcs, mut cfg) = small(1, 11);
        cfg.gamma = vec![1e-6];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = Precoder::new(DMatrix::from_fn(4, 2, |_, _| complex_gaussian(&mut rng, 1)[0]));
        let target = PhaseVector::random(4, &mut rng);
        let th = target.augmented();
        let gram = &th * th.adjoint();
        // incumbent with zero reflected gain never wins against the target
        let settings = AoSettings {
            randomization_count: 20,
            ..AoSettings::default()
        };
        let start = PhaseVector::random(4, &mut rng);
        let ext = extract_phases(&gram, &ch, &rcs, &f, &start, &cfg, &settings, 2).unwrap();
        let rho_target = snr_fast(&ch, &rcs, target.as_vector(), f.matrix(), 1.0);
        let rho_start = snr_fast(&ch, &rcs, start.as_vector(), f.matrix(), 1.0);
        if rho_target > rho_start {
            assert!((ext.theta.as_vector() - target.as_vector()).norm() < 1e-9);
        } else {
            let rho = snr_fast(&ch, &rcs, ext.theta.as_vector(), f.matrix(), 1.0);
            assert!(rho >= rho_start);
        }
    }

    #[test]
    fn desk_run_is_monotone_and_feasible() {
        let cfg = SystemConfig::uniform(6, 2, 5, 2.0, 2.0, 1.0, 10.0);
        let ch = generate_channels(&cfg, &Geometry::default(), 21).unwrap();
        let rcs = RcsModel::new(1e-5, 1e-5, real(9e-6)).unwrap();
        let settings = AoSettings {
            max_iterations: 5,
            randomization_count: 100,
            ..AoSettings::default()
        };
        let out = algorithm1(&ch, &rcs, &cfg, &settings, 5, None).unwrap();
        let recs = &out.trace.records;
        assert!(!recs.is_empty());
        for w in recs.windows(2) {
            assert!(w[1].rho >= w[0].rho);
        }
        for r in recs {
            assert!(r.power <= cfg.P * (1.0 + 1e-9));
            assert!(r.sinr.iter().all(|s| *s >= 2.0 * (1.0 - 1e-6)));
        }
        let g = gamma_matrix(&ch, &rcs, &out.theta).unwrap();
        let rho = sensing_snr(&g, &out.precoder, 1.0).unwrap();
        assert!((rho - recs.last().unwrap().rho).abs() <= 1e-9 * rho);
    }
}
