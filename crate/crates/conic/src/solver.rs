//! Homogeneous self-dual primal-dual interior-point method with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
//!
//! The embedding solves, for `tau, kappa >= 0`,
//!
//! ```text
//! [0]   [ 0   A^T  G^T  c ] [x  ]
//! [0] = [-A   0    0    b ] [y  ]
//! [s]   [-G   0    0    h ] [z  ]
//! [k]   [-c^T -b^T -h^T 0 ] [tau]
//! ```
//!
//! so that an optimal pair is recovered as `(x, y, z, s) / tau`, while
//! `tau -> 0` with `kappa > 0` yields an infeasibility certificate.

use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cone::{self, Block, Cone, Scaling, ScalingOp};
use crate::program::{ConicProgram, VariableLayout};
use crate::ConicError;

/// Solver knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative feasibility and gap tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Static regularization added to the reduced KKT matrix, relative to
    /// its largest diagonal entry.
    pub regularization: f64,
    /// Iterative refinement passes per KKT solve.
    pub refinement_steps: usize,
    /// A stalled solve whose residuals are within this tolerance is
    /// reported as [`Status::NearOptimal`].
    pub reduced_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iterations: 200,
            regularization: 1e-13,
            refinement_steps: 2,
            reduced_tolerance: 1e-5,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    /// No `x` satisfies the constraints; `(y, z)` hold a certificate.
    Infeasible,
    /// The objective is unbounded below; `(x, s)` hold a recession direction.
    Unbounded,
    /// Stalled, but within the reduced tolerance.
    NearOptimal,
    SlowProgress,
    IterationLimit,
}

impl Status {
    /// Optimal or near-optimal: the returned point can be used.
    pub fn is_usable(self) -> bool {
        matches!(self, Status::Optimal | Status::NearOptimal)
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::NearOptimal => "near_optimal",
            Status::SlowProgress => "slow_progress",
            Status::IterationLimit => "iteration_limit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    /// Relative primal residual of the normalized iterate.
    pub primal: f64,
    /// Relative dual residual of the normalized iterate.
    pub dual: f64,
    /// Complementarity gap `s^T z` of the normalized iterate.
    pub gap: f64,
    /// `gap / (1 + |c^T x|)`, the quantity tested against the tolerance.
    pub relative_gap: f64,
    /// Residual of the reported certificate (infeasible / unbounded only).
    pub certificate: Option<f64>,
}

impl Residuals {
    pub fn max_feasibility(&self) -> f64 {
        self.primal.max(self.dual)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: Status,
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    /// Multipliers of the equalities `A x = b` (including zero-cone rows,
    /// appended after the user equalities).
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    /// Primal objective `c^T x` plus the program's constant offset.
    pub objective: f64,
    /// Dual objective `-h^T z - b^T y` plus the constant offset.
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub wall_time: Duration,
    layout: VariableLayout,
    cone_offsets: Vec<(Cone, usize)>,
}

impl ConicSolution {
    /// Values of a named variable block.
    pub fn var(&self, name: &str) -> Option<&[f64]> {
        self.layout.get(name).map(|r| &self.x.as_slice()[r])
    }

    /// Dual variable `z` restricted to the `idx`-th cone of the program.
    /// Zero-cone blocks return their equality multipliers.
    pub fn cone_dual(&self, idx: usize) -> Option<&[f64]> {
        let &(cone, off) = self.cone_offsets.get(idx)?;
        match cone {
            Cone::Zero(n) => Some(&self.y.as_slice()[off..off + n]),
            _ => Some(&self.z.as_slice()[off..off + cone.dim()]),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

struct Reduced {
    c: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    blocks: Vec<Block>,
    /// For each original cone: (cone, offset into z or into y for zero cones).
    cone_offsets: Vec<(Cone, usize)>,
}

fn reduce(p: &ConicProgram) -> Reduced {
    let n = p.c.len();
    let mut zero_rows = Vec::new();
    let mut cone_rows = Vec::new();
    let mut blocks = Vec::new();
    let mut cone_offsets = Vec::new();
    let mut row = 0;
    let mut off = 0;
    let p_user = p.b.len();
    for cone in &p.cones {
        let d = cone.dim();
        match cone {
            Cone::Zero(_) => {
                cone_offsets.push((*cone, p_user + zero_rows.len()));
                zero_rows.extend(row..row + d);
            }
            _ => {
                cone_offsets.push((*cone, off));
                blocks.push(Block { cone: *cone, offset: off });
                cone_rows.extend(row..row + d);
                off += d;
            }
        }
        row += d;
    }
    let m = cone_rows.len();
    let mut g = DMatrix::zeros(m, n);
    let mut h = DVector::zeros(m);
    for (i, &r) in cone_rows.iter().enumerate() {
        g.set_row(i, &p.g.row(r));
        h[i] = p.h[r];
    }
    let pe = p_user + zero_rows.len();
    let mut a = DMatrix::zeros(pe, n);
    let mut b = DVector::zeros(pe);
    for i in 0..p_user {
        a.set_row(i, &p.a.row(i));
        b[i] = p.b[i];
    }
    for (k, &r) in zero_rows.iter().enumerate() {
        a.set_row(p_user + k, &p.g.row(r));
        b[p_user + k] = p.h[r];
    }
    Reduced {
        c: p.c.clone(),
        g,
        h,
        a,
        b,
        blocks,
        cone_offsets,
    }
}

fn regularized_cholesky(mut m: DMatrix<f64>, rel: f64) -> Option<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(1.0_f64, f64::max);
    let mut delta = rel * scale;
    for i in 0..n {
        m[(i, i)] += delta;
    }
    for _ in 0..8 {
        if let Some(ch) = m.clone().cholesky() {
            return Some(ch);
        }
        let bump = delta * 99.0 + 1e-14 * scale;
        for i in 0..n {
            m[(i, i)] += bump;
        }
        delta += bump;
    }
    None
}

/// Factorization of the scaled KKT system
/// `A^T uy + G^T uz = r1`, `A ux = r2`, `G ux - W^T W uz = r3`.
struct Kkt<'a> {
    d: &'a Reduced,
    w: &'a Scaling,
    gs: DMatrix<f64>,
    hfac: Cholesky<f64, Dyn>,
    schur: Option<(Cholesky<f64, Dyn>, DMatrix<f64>)>,
    refinement: usize,
}

impl<'a> Kkt<'a> {
    fn factor(d: &'a Reduced, w: &'a Scaling, settings: &SolverSettings) -> Option<Self> {
        let gs = w.apply_columns(ScalingOp::InverseTranspose, &d.g);
        let hmat = gs.tr_mul(&gs);
        let hfac = regularized_cholesky(hmat, settings.regularization)?;
        let schur = if d.a.nrows() > 0 {
            let hinv_at = hfac.solve(&d.a.transpose());
            let s = &d.a * &hinv_at;
            let sfac = regularized_cholesky(s, settings.regularization.max(1e-14))?;
            Some((sfac, hinv_at))
        } else {
            None
        };
        Some(Self {
            d,
            w,
            gs,
            hfac,
            schur,
            refinement: settings.refinement_steps,
        })
    }

    fn solve_once(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let t = self.w.apply(ScalingOp::InverseTranspose, r3);
        let rhs = r1 + self.gs.tr_mul(&t);
        let (ux, uy) = match &self.schur {
            Some((sfac, hinv_at)) => {
                let hinv_rhs = self.hfac.solve(&rhs);
                let uy = sfac.solve(&(&self.d.a * &hinv_rhs - r2));
                let ux = hinv_rhs - hinv_at * &uy;
                (ux, uy)
            }
            None => (self.hfac.solve(&rhs), DVector::zeros(0)),
        };
        let uz = self.w.apply(ScalingOp::Inverse, &(&self.gs * &ux - t));
        (ux, uy, uz)
    }

    fn solve(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (mut ux, mut uy, mut uz) = self.solve_once(r1, r2, r3);
        for _ in 0..self.refinement {
            let e1 = r1 - self.d.a.tr_mul(&uy) - self.d.g.tr_mul(&uz);
            let e2 = r2 - &self.d.a * &ux;
            let wtw = self
                .w
                .apply(ScalingOp::Transpose, &self.w.apply(ScalingOp::Forward, &uz));
            let e3 = r3 - &self.d.g * &ux + wtw;
            let (dx, dy, dz) = self.solve_once(&e1, &e2, &e3);
            ux += dx;
            uy += dy;
            uz += dz;
        }
        (ux, uy, uz)
    }
}

const STEP_FRACTION: f64 = 0.99;

/// Solves a conic program.
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    program.validate()?;
    if !(settings.tolerance > 0.0) {
        return Err(ConicError::Settings("tolerance must be positive".into()));
    }
    let start = Instant::now();
    let d = reduce(program);
    let n = d.c.len();
    let m = d.h.len();
    let pe = d.b.len();
    let blocks = d.blocks.clone();
    let degree: usize = blocks.iter().map(|b| b.cone.degree()).sum();
    let e = cone::identity(&blocks, m);

    let resx0 = d.c.norm().max(1.0);
    let resy0 = d.b.norm().max(1.0);
    let resz0 = d.h.norm().max(1.0);

    // Starting point from two least-squares problems with W = I.
    // NT scaling at s = z = e is the identity.
    let eye_w = Scaling::new(&blocks, &e, &e).ok_or(ConicError::Numerical("initial scaling"))?;
    let kkt0 = Kkt::factor(&d, &eye_w, settings).ok_or(ConicError::Numerical("initial KKT factorization"))?;
    let (x0, _, uz) = kkt0.solve(&DVector::zeros(n), &d.b, &d.h);
    let mut x = x0;
    let mut s = -uz;
    let (_, y0, z0) = kkt0.solve(&(-&d.c), &DVector::zeros(pe), &DVector::zeros(m));
    let mut y = y0;
    let mut z = z0;
    shift_interior(&blocks, &mut s, &e);
    shift_interior(&blocks, &mut z, &e);
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;

    let finish = |status: Status,
                  x: &DVector<f64>,
                  y: &DVector<f64>,
                  z: &DVector<f64>,
                  s: &DVector<f64>,
                  tau: f64,
                  res: Residuals,
                  iters: usize| {
        let norm = if matches!(status, Status::Infeasible | Status::Unbounded) {
            1.0
        } else {
            tau
        };
        let (x, y, z, s) = (x / norm, y / norm, z / norm, s / norm);
        let cost = d.c.dot(&x);
        let rtol = settings.reduced_tolerance;
        let status = if matches!(status, Status::SlowProgress | Status::IterationLimit)
            && res.primal <= rtol
            && res.dual <= rtol
            && res.relative_gap <= rtol
        {
            Status::NearOptimal
        } else {
            status
        };
        let objective = cost + program.objective_offset;
        let dual_objective = -d.h.dot(&z) - d.b.dot(&y) + program.objective_offset;
        ConicSolution {
            status,
            x,
            s,
            y,
            z,
            objective,
            dual_objective,
            residuals: res,
            iterations: iters,
            wall_time: start.elapsed(),
            layout: program.layout.clone(),
            cone_offsets: d.cone_offsets.clone(),
        }
    };

    // best normalized iterate so far, by worst residual
    let mut best: Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>, f64, Residuals)> = None;
    macro_rules! stall {
        ($status:expr, $iter:expr) => {{
            let (_, bx, by, bz, bs, btau, bres) = best.clone().expect("residuals evaluated at least once");
            return Ok(finish($status, &bx, &by, &bz, &bs, btau, bres, $iter));
        }};
    }
    for iter in 0..=settings.max_iterations {
        let rx = d.a.tr_mul(&y) + d.g.tr_mul(&z) + &d.c * tau;
        let ry = &d.a * &x - &d.b * tau;
        let rz = &d.g * &x + &s - &d.h * tau;
        let cx = d.c.dot(&x);
        let byhz = d.b.dot(&y) + d.h.dot(&z);
        let rt = kappa + cx + byhz;
        let sz = s.dot(&z);
        let mu = (sz + tau * kappa) / (degree as f64 + 1.0);

        let pcost = cx / tau;
        let pres = (ry.norm() / resy0).max(rz.norm() / resz0) / tau;
        let dres = rx.norm() / resx0 / tau;
        let gap = sz / (tau * tau);
        let last_res = Residuals {
            primal: pres,
            dual: dres,
            gap,
            relative_gap: gap / (1.0 + pcost.abs()),
            certificate: None,
        };
        let tol = settings.tolerance;
        let score = pres.max(dres).max(last_res.relative_gap);
        if score.is_finite() && best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, x.clone(), y.clone(), z.clone(), s.clone(), tau, last_res));
        }
        if pres <= tol && dres <= tol && last_res.relative_gap <= tol {
            return Ok(finish(Status::Optimal, &x, &y, &z, &s, tau, last_res, iter));
        }
        if byhz < 0.0 {
            let cert = (d.a.tr_mul(&y) + d.g.tr_mul(&z)).norm() / resx0 / (-byhz);
            if cert <= tol {
                let k = -byhz;
                let res = Residuals {
                    certificate: Some(cert),
                    ..last_res
                };
                return Ok(finish(Status::Infeasible, &(&x * 0.0), &(&y / k), &(&z / k), &(&s * 0.0), 1.0, res, iter));
            }
        }
        if cx < 0.0 {
            let cert = ((&d.a * &x).norm() / resy0).max((&d.g * &x + &s).norm() / resz0) / (-cx);
            if cert <= tol {
                let k = -cx;
                let res = Residuals {
                    certificate: Some(cert),
                    ..last_res
                };
                return Ok(finish(Status::Unbounded, &(&x / k), &(&y * 0.0), &(&z * 0.0), &(&s / k), 1.0, res, iter));
            }
        }
        if iter == settings.max_iterations {
            break;
        }

        let Some(w) = Scaling::new(&blocks, &s, &z) else {
            stall!(Status::SlowProgress, iter);
        };
        let Some(kkt) = Kkt::factor(&d, &w, settings) else {
            stall!(Status::SlowProgress, iter);
        };
        let lambda = w.lambda.clone();
        let lam_sq = w.lambda_product(&lambda);

        let (v2x, v2y, v2z) = kkt.solve(&(-&d.c), &d.b, &d.h);
        let v2_dot = d.c.dot(&v2x) + d.b.dot(&v2y) + d.h.dot(&v2z);

        // Computes the search direction for a complementarity target.
        let direction = |eta: f64, ds_target: &DVector<f64>, dk_target: f64| {
            let q = w.lambda_divide(ds_target);
            let r3 = -(&rz * eta) - w.apply(ScalingOp::Transpose, &q);
            let (v1x, v1y, v1z) = kkt.solve(&(-(&rx * eta)), &(-(&ry * eta)), &r3);
            let num = -eta * rt - dk_target / tau - (d.c.dot(&v1x) + d.b.dot(&v1y) + d.h.dot(&v1z));
            let den = v2_dot - kappa / tau;
            let dtau = num / den;
            let dx = v1x + &v2x * dtau;
            let dy = v1y + &v2y * dtau;
            let dz = v1z + &v2z * dtau;
            let dkappa = (dk_target - kappa * dtau) / tau;
            let dz_scaled = w.apply(ScalingOp::Forward, &dz);
            let ds_scaled = q - &dz_scaled;
            (dx, dy, dz, dtau, dkappa, ds_scaled, dz_scaled)
        };
        let step_length = |dtau: f64, dkappa: f64, ds_scaled: &DVector<f64>, dz_scaled: &DVector<f64>| {
            let mut a = w.max_step(ds_scaled).min(w.max_step(dz_scaled));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor.
        let (_, _, _, dtau_a, dkappa_a, ds_a, dz_a) = direction(1.0, &(-&lam_sq), -tau * kappa);
        let alpha_aff = step_length(dtau_a, dkappa_a, &ds_a, &dz_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Corrector.
        let ds_target = -&lam_sq + &e * (sigma * mu) - cone::jordan_product(&blocks, &ds_a, &dz_a);
        let dk_target = -tau * kappa + sigma * mu - dtau_a * dkappa_a;
        let (dx, dy, dz, dtau, dkappa, ds_scaled, dz_scaled) = direction(1.0 - sigma, &ds_target, dk_target);
        let alpha_max = step_length(dtau, dkappa, &ds_scaled, &dz_scaled);
        let alpha = (STEP_FRACTION * alpha_max).min(1.0);
        if !(alpha > 1e-12) {
            stall!(Status::SlowProgress, iter);
        }
        let ds = w.apply(ScalingOp::Transpose, &ds_scaled);
        x += &dx * alpha;
        y += &dy * alpha;
        z += &dz * alpha;
        s += &ds * alpha;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if !(tau > 0.0 && kappa > 0.0) || x.iter().any(|v| !v.is_finite()) {
            stall!(Status::SlowProgress, iter);
        }
    }
    stall!(Status::IterationLimit, settings.max_iterations)
}

fn shift_interior(blocks: &[Block], u: &mut DVector<f64>, e: &DVector<f64>) {
    if blocks.is_empty() {
        return;
    }
    let viol = cone::max_violation(blocks, u);
    let scale = u.norm().max(1.0);
    if viol >= -1e-8 * scale {
        *u += e * (1.0 + viol);
    }
}
