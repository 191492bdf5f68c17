//! Complex Hermitian semidefinite programs on top of the real conic solver.
//!
//! A program
//!
//! ```text
//! maximize    sum_j Re tr(C_j W_j)
//! subject to  sum_j Re tr(A_ij W_j)  (<=, =, >=)  b_i
//!             W_j Hermitian PSD
//! ```
//!
//! is solved through its LMI dual `min b^T y` s.t.
//! `sum_i y_i embed(A_ij) - embed(C_j) >= 0`, whose cone multipliers are
//! real symmetric `2n x 2n` matrices `Z_j`. The complex primal is read back
//! as `W_j = (Z11 + Z22) + i (Z21 - Z12)`, which satisfies
//! `tr(embed(A) Z) = Re tr(A W)` for every Hermitian `A`.

use nalgebra::{Complex, DMatrix};

use crate::program::{AffineExpr, ProgramBuilder};
use crate::solver::{solve, ConicSolution, SolverSettings, Status};
use crate::{Cone, ConicError};

pub type C64 = Complex<f64>;

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a complex
/// Hermitian matrix.
pub fn hermitian_embed(h: &DMatrix<C64>) -> Result<DMatrix<f64>, ConicError> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(ConicError::Argument("matrix is not square".into()));
    }
    let scale = h.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
    let asym = (h - h.adjoint()).iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    if asym > 1e-9 * scale {
        return Err(ConicError::Argument(format!("matrix is not Hermitian (asymmetry {asym:.3e})")));
    }
    Ok(embed_unchecked(h))
}

pub(crate) fn embed_unchecked(h: &DMatrix<C64>) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let v = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            out[(i, j)] = v.re;
            out[(i + n, j + n)] = v.re;
            out[(i, j + n)] = -v.im;
            out[(i + n, j)] = v.im;
        }
    }
    out
}

/// Inverse of the structural map used to read a complex primal block from
/// its real `2n x 2n` cone multiplier.
pub fn hermitian_from_embedded(z: &DMatrix<f64>) -> DMatrix<C64> {
    let n = z.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        let re = z[(i, j)] + z[(i + n, j + n)];
        let im = z[(i + n, j)] - z[(i, j + n)];
        C64::new(re, im)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    LessEq,
    Equal,
    GreaterEq,
}

#[derive(Debug, Clone)]
struct Constraint {
    terms: Vec<(usize, DMatrix<C64>)>,
    sense: Sense,
    rhs: f64,
}

/// Builder for a complex Hermitian SDP in maximization form.
#[derive(Debug, Clone)]
pub struct ComplexSdp {
    sides: Vec<usize>,
    objective: Vec<Option<DMatrix<C64>>>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct ComplexSdpSolution {
    /// Status of the SDP itself (infeasible / unbounded refer to the
    /// maximization problem, not to its dual).
    pub status: Status,
    pub blocks: Vec<DMatrix<C64>>,
    /// Optimal value of the maximization problem.
    pub objective: f64,
    /// Underlying real solve of the LMI dual.
    pub report: ConicSolution,
}

impl ComplexSdp {
    pub fn new(sides: &[usize]) -> Self {
        Self {
            sides: sides.to_vec(),
            objective: vec![None; sides.len()],
            constraints: Vec::new(),
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.sides.len()
    }

    fn check(&self, block: usize, m: &DMatrix<C64>) -> Result<(), ConicError> {
        let side = *self
            .sides
            .get(block)
            .ok_or_else(|| ConicError::Structure(format!("block {block} does not exist")))?;
        if m.nrows() != side || m.ncols() != side {
            return Err(ConicError::Structure(format!(
                "block {block} expects {side}x{side}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        hermitian_embed(m).map(|_| ())
    }

    /// Sets `C_block` in the maximized objective.
    pub fn set_objective(&mut self, block: usize, c: DMatrix<C64>) -> Result<(), ConicError> {
        self.check(block, &c)?;
        self.objective[block] = Some(c);
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        terms: Vec<(usize, DMatrix<C64>)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<(), ConicError> {
        for (b, m) in &terms {
            self.check(*b, m)?;
        }
        self.constraints.push(Constraint { terms, sense, rhs });
        Ok(())
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<ComplexSdpSolution, ConicError> {
        if self.constraints.is_empty() {
            return Err(ConicError::Structure("SDP without constraints".into()));
        }
        let obj_scale = self
            .objective
            .iter()
            .flatten()
            .map(|c| c.norm_squared())
            .sum::<f64>()
            .sqrt();
        let obj_scale = if obj_scale > 0.0 { obj_scale } else { 1.0 };

        let mut b = ProgramBuilder::new();
        let y = b.add_variable("y", self.constraints.len());
        let mut row_scale = Vec::with_capacity(self.constraints.len());
        for (i, con) in self.constraints.iter().enumerate() {
            let sign = if con.sense == Sense::GreaterEq { -1.0 } else { 1.0 };
            let norm = con.terms.iter().map(|(_, m)| m.norm_squared()).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { sign / norm } else { sign };
            row_scale.push(scale);
            b.add_objective(y.start + i, con.rhs * scale);
            if con.sense != Sense::Equal {
                b.add_nonneg(AffineExpr::var(y.start + i));
            }
        }
        for (j, &side) in self.sides.iter().enumerate() {
            let d = 2 * side;
            let c_emb = self.objective[j]
                .as_ref()
                .map(|c| embed_unchecked(c) / obj_scale)
                .unwrap_or_else(|| DMatrix::zeros(d, d));
            let mut exprs: Vec<AffineExpr> = c_emb.iter().map(|&v| AffineExpr::constant(-v)).collect();
            for (i, con) in self.constraints.iter().enumerate() {
                for (blk, a) in &con.terms {
                    if *blk != j {
                        continue;
                    }
                    let a_emb = embed_unchecked(a) * row_scale[i];
                    for (k, &v) in a_emb.iter().enumerate() {
                        if v != 0.0 {
                            exprs[k].terms.push((y.start + i, v));
                        }
                    }
                }
            }
            b.add_cone(Cone::Psd(d), exprs)?;
        }
        let program = b.build()?;
        let report = solve(&program, settings)?;
        let status = match report.status {
            Status::Infeasible => Status::Unbounded,
            Status::Unbounded => Status::Infeasible,
            other => other,
        };
        let rtol = settings.reduced_tolerance;
        // the matrix side can be accurate while the multipliers diverge
        let stalled = matches!(status, Status::SlowProgress | Status::IterationLimit);
        let status = if stalled
            && report.residuals.dual <= rtol
            && report.residuals.relative_gap <= rtol
        {
            Status::NearOptimal
        } else {
            status
        };
        let n_nonneg = self.constraints.iter().filter(|c| c.sense != Sense::Equal).count();
        let blocks = self
            .sides
            .iter()
            .enumerate()
            .map(|(j, &side)| {
                let d = 2 * side;
                let z = report.cone_dual(n_nonneg + j).expect("cone index");
                let zm = DMatrix::from_column_slice(d, d, z);
                let mut w = hermitian_from_embedded(&zm);
                let wh = w.adjoint();
                w = (&w + wh) * C64::new(0.5, 0.0);
                w
            })
            .collect();
        let objective = if status == Status::NearOptimal {
            self.objective
                .iter()
                .zip(&blocks)
                .filter_map(|(c, w): (&Option<DMatrix<C64>>, &DMatrix<C64>)| c.as_ref().map(|c| (c * w).trace().re))
                .sum()
        } else {
            report.objective * obj_scale
        };
        Ok(ComplexSdpSolution {
            status,
            blocks,
            objective,
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn embed_identity_is_identity() {
        let e = hermitian_embed(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e, DMatrix::identity(6, 6));
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(hermitian_embed(&m), Err(ConicError::Argument(_))));
    }

    #[test]
    fn read_back_inverts_embedding_up_to_factor_two() {
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, -1.0), c(0.5, 1.0), c(3.0, 0.0)]);
        let back = hermitian_from_embedded(&embed_unchecked(&m));
        assert!((back - m * c(2.0, 0.0)).norm() < 1e-15);
    }
}
