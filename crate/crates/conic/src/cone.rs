//! Cone definitions and the per-cone algebra used by the interior-point
//! iteration: Jordan products, Nesterov-Todd scalings and step lengths.
//!
//! Vectors living in a PSD cone of side `n` are stored as the full `n x n`
//! matrix in column-major order, so the Euclidean inner product of two such
//! vectors equals the trace inner product of the matrices.

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

/// One block of a product cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{0}^n`, i.e. equality rows.
    Zero(usize),
    /// The nonnegative orthant `R^n_+`.
    NonNeg(usize),
    /// `{(t, u) : ||u||_2 <= t}` of total dimension `n` (including `t`).
    SecondOrder(usize),
    /// Real symmetric positive semidefinite matrices of side `n`.
    Psd(usize),
}

impl Cone {
    /// Number of entries the block occupies in a stacked vector.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::NonNeg(n) | Cone::SecondOrder(n) => n,
            Cone::Psd(n) => n * n,
        }
    }

    /// Barrier degree of the block.
    pub(crate) fn degree(&self) -> usize {
        match *self {
            Cone::Zero(_) => 0,
            Cone::NonNeg(n) | Cone::Psd(n) => n,
            Cone::SecondOrder(_) => 1,
        }
    }
}

/// A non-zero cone block placed at an offset of the stacked slack vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub cone: Cone,
    pub offset: usize,
}

fn mat_from(v: DVectorView<'_, f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

fn write_mat(mut out: DVectorViewMut<'_, f64>, m: &DMatrix<f64>) {
    out.copy_from_slice(m.as_slice());
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Writes the identity element of every block into `e`.
pub(crate) fn identity(blocks: &[Block], m: usize) -> DVector<f64> {
    let mut e = DVector::zeros(m);
    for b in blocks {
        match b.cone {
            Cone::NonNeg(n) => e.rows_mut(b.offset, n).fill(1.0),
            Cone::SecondOrder(_) => e[b.offset] = 1.0,
            Cone::Psd(n) => {
                for i in 0..n {
                    e[b.offset + i * n + i] = 1.0;
                }
            }
            Cone::Zero(_) => {}
        }
    }
    e
}

/// Largest `t` such that `u - t e` is still in the cone is `-max_violation`;
/// a positive return value means `u` lies outside the cone by that margin.
pub(crate) fn max_violation(blocks: &[Block], u: &DVector<f64>) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for b in blocks {
        let seg = u.rows(b.offset, b.cone.dim());
        let v = match b.cone {
            Cone::NonNeg(_) => -seg.min(),
            Cone::SecondOrder(n) => seg.rows(1, n - 1).norm() - seg[0],
            Cone::Psd(n) => {
                let mut m = mat_from(seg, n);
                symmetrize(&mut m);
                -m.symmetric_eigenvalues().min()
            }
            Cone::Zero(_) => continue,
        };
        worst = worst.max(v);
    }
    worst
}

/// Jordan product `u o v`.
pub(crate) fn jordan_product(blocks: &[Block], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for b in blocks {
        let (o, d) = (b.offset, b.cone.dim());
        match b.cone {
            Cone::NonNeg(_) => {
                for i in o..o + d {
                    out[i] = u[i] * v[i];
                }
            }
            Cone::SecondOrder(n) => {
                let us = u.rows(o, n);
                let vs = v.rows(o, n);
                out[o] = us.dot(&vs);
                for i in 1..n {
                    out[o + i] = us[0] * vs[i] + vs[0] * us[i];
                }
            }
            Cone::Psd(n) => {
                let um = mat_from(u.rows(o, d), n);
                let vm = mat_from(v.rows(o, d), n);
                let p = &um * &vm;
                let sym = (&p + p.transpose()) * 0.5;
                write_mat(out.rows_mut(o, d), &sym);
            }
            Cone::Zero(_) => {}
        }
    }
    out
}

/// Nesterov-Todd scaling of one block.
#[derive(Debug, Clone)]
enum BlockScaling {
    NonNeg {
        w: DVector<f64>,
    },
    Soc {
        beta: f64,
        v: DVector<f64>,
    },
    Psd {
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
    },
}

/// Scaling `W` of the full product cone together with the scaled point
/// `lambda = W z = W^{-T} s`. For PSD blocks `lambda` is diagonal and its
/// diagonal is stored in `lambda_diag`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    blocks: Vec<Block>,
    parts: Vec<BlockScaling>,
    pub lambda: DVector<f64>,
    lambda_diag: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScalingOp {
    /// `W u`
    Forward,
    /// `W^T u`
    Transpose,
    /// `W^{-1} u`
    Inverse,
    /// `W^{-T} u`
    InverseTranspose,
}

impl Scaling {
    /// Computes the NT scaling at an interior pair `(s, z)`. Returns `None`
    /// when either point has numerically left the interior.
    pub fn new(blocks: &[Block], s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let mut parts = Vec::with_capacity(blocks.len());
        let mut lambda = DVector::zeros(s.len());
        let mut lambda_diag = Vec::new();
        for b in blocks {
            let (o, d) = (b.offset, b.cone.dim());
            let ss = s.rows(o, d);
            let zs = z.rows(o, d);
            match b.cone {
                Cone::NonNeg(_) => {
                    if ss.min() <= 0.0 || zs.min() <= 0.0 {
                        return None;
                    }
                    let w = ss.zip_map(&zs, |a, c| (a / c).sqrt());
                    for i in 0..d {
                        lambda[o + i] = (ss[i] * zs[i]).sqrt();
                    }
                    parts.push(BlockScaling::NonNeg { w });
                }
                Cone::SecondOrder(n) => {
                    let jdot = |x: &DVectorView<'_, f64>| x[0] * x[0] - x.rows(1, n - 1).norm_squared();
                    let sj = jdot(&ss);
                    let zj = jdot(&zs);
                    if sj <= 0.0 || zj <= 0.0 || ss[0] <= 0.0 || zs[0] <= 0.0 {
                        return None;
                    }
                    let sn = ss / sj.sqrt();
                    let zn = zs / zj.sqrt();
                    let gamma = ((1.0 + sn.dot(&zn)) / 2.0).sqrt();
                    let mut wbar = DVector::zeros(n);
                    wbar[0] = (sn[0] + zn[0]) / (2.0 * gamma);
                    for i in 1..n {
                        wbar[i] = (sn[i] - zn[i]) / (2.0 * gamma);
                    }
                    let mut v = wbar.clone();
                    v[0] += 1.0;
                    let denom = (2.0 * (wbar[0] + 1.0)).sqrt();
                    v /= denom;
                    let beta = (sj / zj).powf(0.25);
                    let part = BlockScaling::Soc { beta, v };
                    let lam = apply_block(&part, ScalingOp::Forward, zs.clone_owned(), n);
                    lambda.rows_mut(o, d).copy_from(&lam);
                    parts.push(part);
                }
                Cone::Psd(n) => {
                    let mut sm = mat_from(ss, n);
                    let mut zm = mat_from(zs, n);
                    symmetrize(&mut sm);
                    symmetrize(&mut zm);
                    let ls = sm.cholesky()?.l();
                    let lz = zm.cholesky()?.l();
                    let prod = lz.transpose() * &ls;
                    let svd = prod.svd(false, true);
                    let vt = svd.v_t?;
                    let sig = svd.singular_values;
                    if sig.min() <= 0.0 {
                        return None;
                    }
                    let isq = sig.map(|x| 1.0 / x.sqrt());
                    let sq = sig.map(|x| x.sqrt());
                    // R = L_s V diag(sig)^{-1/2}
                    let mut r = &ls * vt.transpose();
                    for j in 0..n {
                        r.column_mut(j).scale_mut(isq[j]);
                    }
                    // R^{-1} = diag(sig)^{1/2} V^T L_s^{-1}
                    let ls_inv = ls.clone().solve_lower_triangular(&DMatrix::identity(n, n))?;
                    let mut rinv = &vt * ls_inv;
                    for i in 0..n {
                        rinv.row_mut(i).scale_mut(sq[i]);
                    }
                    for i in 0..n {
                        lambda[o + i * n + i] = sig[i];
                    }
                    lambda_diag.push(sig);
                    parts.push(BlockScaling::Psd { r, rinv });
                }
                Cone::Zero(_) => unreachable!("zero cones are moved to equalities"),
            }
        }
        Some(Self {
            blocks: blocks.to_vec(),
            parts,
            lambda,
            lambda_diag,
        })
    }

    pub fn apply(&self, op: ScalingOp, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for (b, part) in self.blocks.iter().zip(&self.parts) {
            let (o, d) = (b.offset, b.cone.dim());
            let n = match b.cone {
                Cone::Psd(n) | Cone::SecondOrder(n) | Cone::NonNeg(n) => n,
                Cone::Zero(_) => 0,
            };
            let res = apply_block(part, op, u.rows(o, d).clone_owned(), n);
            out.rows_mut(o, d).copy_from(&res);
        }
        out
    }

    /// Applies `W^{-T}` to every column of `g` (scaled constraint matrix).
    pub fn apply_columns(&self, op: ScalingOp, g: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(g.nrows(), g.ncols());
        for j in 0..g.ncols() {
            let col = g.column(j).clone_owned();
            if col.iter().all(|v| *v == 0.0) {
                continue;
            }
            out.set_column(j, &self.apply(op, &col));
        }
        out
    }

    /// `lambda o u`
    pub fn lambda_product(&self, u: &DVector<f64>) -> DVector<f64> {
        jordan_product(&self.blocks, &self.lambda, u)
    }

    /// Solves `lambda o x = u` for `x`.
    pub fn lambda_divide(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        let mut psd_idx = 0;
        for b in &self.blocks {
            let (o, d) = (b.offset, b.cone.dim());
            match b.cone {
                Cone::NonNeg(_) => {
                    for i in o..o + d {
                        out[i] = u[i] / self.lambda[i];
                    }
                }
                Cone::SecondOrder(n) => {
                    let l = self.lambda.rows(o, n);
                    let us = u.rows(o, n);
                    let l1 = l.rows(1, n - 1);
                    let u1 = us.rows(1, n - 1);
                    let det = l[0] * l[0] - l1.norm_squared();
                    let x0 = (l[0] * us[0] - l1.dot(&u1)) / det;
                    out[o] = x0;
                    for i in 1..n {
                        out[o + i] = (us[i] - x0 * l[i]) / l[0];
                    }
                }
                Cone::Psd(n) => {
                    let lam = &self.lambda_diag[psd_idx];
                    psd_idx += 1;
                    for j in 0..n {
                        for i in 0..n {
                            let k = o + j * n + i;
                            out[k] = 2.0 * u[k] / (lam[i] + lam[j]);
                        }
                    }
                }
                Cone::Zero(_) => {}
            }
        }
        out
    }

    /// Largest `alpha` with `lambda + alpha * u` in the cone (may be infinite).
    pub fn max_step(&self, u: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        let mut psd_idx = 0;
        for b in &self.blocks {
            let (o, d) = (b.offset, b.cone.dim());
            match b.cone {
                Cone::NonNeg(_) => {
                    for i in o..o + d {
                        if u[i] < 0.0 {
                            alpha = alpha.min(-self.lambda[i] / u[i]);
                        }
                    }
                }
                Cone::SecondOrder(n) => {
                    let l = self.lambda.rows(o, n);
                    let us = u.rows(o, n);
                    alpha = alpha.min(soc_step(&l, &us));
                }
                Cone::Psd(n) => {
                    let lam = &self.lambda_diag[psd_idx];
                    psd_idx += 1;
                    let mut m = mat_from(u.rows(o, d), n);
                    symmetrize(&mut m);
                    for j in 0..n {
                        for i in 0..n {
                            m[(i, j)] /= (lam[i] * lam[j]).sqrt();
                        }
                    }
                    let min_eig = m.symmetric_eigenvalues().min();
                    if min_eig < 0.0 {
                        alpha = alpha.min(-1.0 / min_eig);
                    }
                }
                Cone::Zero(_) => {}
            }
        }
        alpha
    }
}

fn soc_step(l: &DVectorView<'_, f64>, u: &DVectorView<'_, f64>) -> f64 {
    let n = l.len();
    let u1 = u.rows(1, n - 1);
    if u[0] >= u1.norm() {
        return f64::INFINITY;
    }
    let l1 = l.rows(1, n - 1);
    let a = u[0] * u[0] - u1.norm_squared();
    let b = l[0] * u[0] - l1.dot(&u1);
    let c = l[0] * l[0] - l1.norm_squared();
    let disc = (b * b - a * c).max(0.0).sqrt();
    let denom = disc - b;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    c / denom
}

fn apply_block(part: &BlockScaling, op: ScalingOp, u: DVector<f64>, n: usize) -> DVector<f64> {
    match part {
        BlockScaling::NonNeg { w } => match op {
            ScalingOp::Forward | ScalingOp::Transpose => u.component_mul(w),
            ScalingOp::Inverse | ScalingOp::InverseTranspose => u.component_div(w),
        },
        BlockScaling::Soc { beta, v } => {
            // W = beta (2 v v^T - J), W^{-1} = (2 J v v^T J - J) / beta; both symmetric.
            let mut ju = u.clone();
            for i in 1..n {
                ju[i] = -ju[i];
            }
            match op {
                ScalingOp::Forward | ScalingOp::Transpose => {
                    let coef = 2.0 * v.dot(&u);
                    (v * coef - ju) * *beta
                }
                ScalingOp::Inverse | ScalingOp::InverseTranspose => {
                    let mut jv = v.clone();
                    for i in 1..n {
                        jv[i] = -jv[i];
                    }
                    let coef = 2.0 * jv.dot(&u);
                    (jv * coef - ju) / *beta
                }
            }
        }
        BlockScaling::Psd { r, rinv } => {
            let um = DMatrix::from_column_slice(n, n, u.as_slice());
            let mut res = match op {
                ScalingOp::Forward => r.transpose() * um * r,
                ScalingOp::Transpose => r * um * r.transpose(),
                ScalingOp::Inverse => rinv.transpose() * um * rinv,
                ScalingOp::InverseTranspose => rinv * um * rinv.transpose(),
            };
            symmetrize(&mut res);
            DVector::from_column_slice(res.as_slice())
        }
    }
}
