//! Small complex linear-algebra helpers shared by the algorithm modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::C64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// `(A + A^H) / 2`.
pub fn hermitize(a: &DMatrix<C64>) -> DMatrix<C64> {
    (a + a.adjoint()) * real(0.5)
}

/// Draws a vector of i.i.d. `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(s * re, s * im)
    })
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order.
pub fn eigh_desc(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let e = hermitize(a).symmetric_eigen();
    let n = e.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(a.nrows(), n, |r, col| e.eigenvectors[(r, idx[col])]);
    (vals, vecs)
}

/// Largest eigenvalue and a unit eigenvector.
pub fn top_eigen(a: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let (vals, vecs) = eigh_desc(a);
    (vals[0], vecs.column(0).into_owned())
}

/// `lambda_2 / lambda_1` of a PSD matrix (0 for a zero or 1x1 matrix).
pub fn rank_one_ratio(a: &DMatrix<C64>) -> f64 {
    let (vals, _) = eigh_desc(a);
    if vals.len() < 2 || vals[0] <= 0.0 {
        return 0.0;
    }
    vals[1].max(0.0) / vals[0]
}

/// Hermitian square root of the PSD part of `a`.
pub fn psd_sqrt(a: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = eigh_desc(a);
    let n = vals.len();
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for i in 0..n {
        if vals[i] > 0.0 {
            let v = vecs.column(i);
            out += (&v * v.adjoint()) * real(vals[i].sqrt());
        }
    }
    out
}

/// Entry-wise projection onto the unit circle; zeros map to 1.
pub fn unit_modulus(v: &DVector<C64>) -> DVector<C64> {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 && r.is_finite() {
            z / r
        } else {
            real(1.0)
        }
    })
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Real PSD factor `B` (rows) with `z^T B^T B z = x^H A x` where
/// `z = [Re x; Im x]`, built from the eigen-decomposition of the PSD matrix
/// `A`. Eigenvalues below `tol * lambda_max` are dropped.
pub fn real_psd_factor(a: &DMatrix<C64>, tol: f64) -> DMatrix<f64> {
    let (vals, vecs) = eigh_desc(a);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > tol * top && vals[i] > 0.0).collect();
    let mut rows = DMatrix::zeros(keep.len(), a.ncols());
    for (r, &i) in keep.iter().enumerate() {
        let s = vals[i].sqrt();
        for j in 0..a.ncols() {
            rows[(r, j)] = vecs[(j, i)].conj() * s;
        }
    }
    complex_rows_to_real(&rows)
}

/// Maps a complex matrix `B` (acting as `B x`) to the real matrix acting on
/// `[Re x; Im x]` and producing `[Re Bx; Im Bx]`.
pub fn complex_rows_to_real(b: &DMatrix<C64>) -> DMatrix<f64> {
    let (m, n) = b.shape();
    let mut out = DMatrix::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let v = b[(i, j)];
            out[(i, j)] = v.re;
            out[(i, j + n)] = -v.im;
            out[(i + m, j)] = v.im;
            out[(i + m, j + n)] = v.re;
        }
    }
    out
}
