//! Hermitian quadratic forms behind the sensing SNR and the UE SINRs.
//!
//! With `a(theta) = H_t^H diag(g) theta` the per-stream sensing energy is
//!
//! ```text
//! rho_l = delta_r^2 |a^H f_l|^2 ||a||^2 + 2 Re(delta_m f_l^H H_sT^H a a^H f_l)
//!       + delta_s^2 ||H_sT f_l||^2
//! ```
//!
//! which this module exposes in three equivalent forms: through the matrix
//! `Gamma(theta)`, through the lifted vector `theta_tilde` (for the
//! maximizing surface step) and through the bordered `(N+1)`-dimensional
//! forms used by the attack.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{eigh_desc, hermitize, real};
use crate::model::{cascaded_unchecked, draw_rcs, ChannelSet, PhaseVector, Precoder, RcsModel};
use crate::{Error, Result, C64};

fn check_dims(ch: &ChannelSet, theta: Option<&PhaseVector>, f: Option<&Precoder>) -> Result<()> {
    ch.validate()?;
    if let Some(t) = theta {
        if t.len() != ch.n() {
            return Err(Error::Dimension(format!("theta has {} entries, N = {}", t.len(), ch.n())));
        }
    }
    if let Some(f) = f {
        if f.antennas() != ch.m() {
            return Err(Error::Dimension(format!("precoder has {} rows, M = {}", f.antennas(), ch.m())));
        }
    }
    Ok(())
}

/// `H_t^H diag(g) theta`.
pub(crate) fn reflected_direction(ch: &ChannelSet, theta: &DVector<C64>) -> DVector<C64> {
    ch.h_t.adjoint() * ch.g.component_mul(theta)
}

/// `Gamma = E[H_T^H H_T]` for the phase vector `theta`.
pub fn gamma_matrix(ch: &ChannelSet, rcs: &RcsModel, theta: &PhaseVector) -> Result<DMatrix<C64>> {
    check_dims(ch, Some(theta), None)?;
    Ok(gamma_unchecked(ch, rcs, theta.as_vector()))
}

pub(crate) fn gamma_unchecked(ch: &ChannelSet, rcs: &RcsModel, theta: &DVector<C64>) -> DMatrix<C64> {
    let a = reflected_direction(ch, theta);
    let refl = &a * a.adjoint();
    let hst = ch.h_st_outer();
    let g = hst.adjoint() * &hst * real(rcs.delta_s_sq)
        + hst.adjoint() * &refl * rcs.delta_m
        + &refl * &hst * rcs.delta_m.conj()
        + &refl * &refl * real(rcs.delta_r_sq);
    hermitize(&g)
}

/// `rho = sum_l f_l^H Gamma f_l / sigma_T^2`.
pub fn sensing_snr(gamma: &DMatrix<C64>, f: &Precoder, sigma_t_sq: f64) -> Result<f64> {
    if gamma.nrows() != f.antennas() || gamma.ncols() != f.antennas() {
        return Err(Error::Dimension("Gamma and precoder sizes differ".into()));
    }
    let fm = f.matrix();
    let total: f64 = (fm.adjoint() * gamma * fm).trace().re;
    Ok(total.max(0.0) / sigma_t_sq)
}

/// Exact sensing SNR without forming `Gamma`.
pub fn sensing_snr_direct(ch: &ChannelSet, rcs: &RcsModel, theta: &PhaseVector, f: &Precoder, sigma_t_sq: f64) -> Result<f64> {
    check_dims(ch, Some(theta), Some(f))?;
    Ok(snr_fast(ch, rcs, theta.as_vector(), f.matrix(), sigma_t_sq))
}

pub(crate) fn snr_fast(ch: &ChannelSet, rcs: &RcsModel, theta: &DVector<C64>, f: &DMatrix<C64>, sigma_t_sq: f64) -> f64 {
    let a = reflected_direction(ch, theta);
    let an = a.norm_squared();
    let hst_norm = ch.h_st.norm_squared();
    let mut total = 0.0;
    for col in f.column_iter() {
        let af = a.dotc(&col);
        let hf = ch.h_st.dotc(&col);
        // H_sT f = h_sT (h_sT^H f); f^H H_sT^H a a^H f = conj(hf) (h_sT^H a) af
        let cross = hf.conj() * ch.h_st.dotc(&a) * af;
        total += rcs.delta_r_sq * af.norm_sqr() * an
            + 2.0 * (rcs.delta_m * cross).re
            + rcs.delta_s_sq * hf.norm_sqr() * hst_norm;
    }
    total.max(0.0) / sigma_t_sq
}

/// Monte-Carlo estimate of the sensing SNR with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Averages `sum_l ||H_T f_l||^2 / sigma_T^2` over RCS draws of the
/// two-way channel `H_T = c_r H_t^H Theta T Theta^H H_t + c_s H_sT`.
pub fn sensing_snr_mc(
    ch: &ChannelSet,
    rcs: &RcsModel,
    theta: &PhaseVector,
    f: &Precoder,
    sigma_t_sq: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_dims(ch, Some(theta), Some(f))?;
    rcs.validate()?;
    if samples == 0 {
        return Err(Error::Config("at least one Monte-Carlo sample is required".into()));
    }
    let a = reflected_direction(ch, theta.as_vector());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = draw_rcs(rcs, samples, &mut rng);
    // H_T f_l = c_r a (a^H f_l) + c_s h (h^H f_l)
    let proj: Vec<(C64, C64)> = f
        .matrix()
        .column_iter()
        .map(|col| (a.dotc(&col), ch.h_st.dotc(&col)))
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut buf = DVector::zeros(ch.m());
    for d in &draws {
        let mut e = 0.0;
        for &(af, hf) in &proj {
            buf.copy_from(&a);
            buf *= d.c_r * af;
            buf += &ch.h_st * (d.c_s * hf);
            e += buf.norm_squared();
        }
        let e = e / sigma_t_sq;
        sum += e;
        sum_sq += e * e;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
    })
}

/// `|h_k^H f_k|^2 / (sigma_k^2 + sum_{l != k} |h_k^H f_l|^2)`.
pub fn sinr(ch: &ChannelSet, theta: &PhaseVector, f: &Precoder, k: usize, sigma_k_sq: f64) -> Result<f64> {
    check_dims(ch, Some(theta), Some(f))?;
    if k >= ch.k() || k >= f.streams() {
        return Err(Error::Index { index: k, len: ch.k().min(f.streams()) });
    }
    Ok(sinr_unchecked(ch, theta.as_vector(), f.matrix(), k, sigma_k_sq))
}

pub(crate) fn sinr_unchecked(ch: &ChannelSet, theta: &DVector<C64>, f: &DMatrix<C64>, k: usize, sigma_k_sq: f64) -> f64 {
    let h = cascaded_unchecked(ch, theta, k);
    sinr_from_channel(&h, f, k, sigma_k_sq)
}

pub(crate) fn sinr_from_channel(h: &DVector<C64>, f: &DMatrix<C64>, k: usize, sigma_k_sq: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (l, col) in f.column_iter().enumerate() {
        let p = h.dotc(&col).norm_sqr();
        if l == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (sigma_k_sq + interference)
}

/// SINR of every UE.
pub fn all_sinr(ch: &ChannelSet, theta: &PhaseVector, f: &Precoder, sigma_ue_sq: &[f64]) -> Result<Vec<f64>> {
    (0..ch.k()).map(|k| sinr(ch, theta, f, k, sigma_ue_sq[k])).collect()
}

pub(crate) fn all_sinr_unchecked(ch: &ChannelSet, theta: &DVector<C64>, f: &DMatrix<C64>, sigma_ue_sq: &[f64]) -> Vec<f64> {
    (0..ch.k()).map(|k| sinr_unchecked(ch, theta, f, k, sigma_ue_sq[k])).collect()
}

/// Diagonal of `conj(Theta) ⊗ Theta`: entry `m N + n` equals
/// `conj(theta_m) theta_n`.
pub fn theta_tilde(theta: &PhaseVector) -> DVector<C64> {
    lift(theta.as_vector())
}

pub(crate) fn lift(theta: &DVector<C64>) -> DVector<C64> {
    let n = theta.len();
    DVector::from_fn(n * n, |i, _| theta[i / n].conj() * theta[i % n])
}

/// Column-major `vec` of a matrix.
pub fn vec_col(a: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec_col`] for a square matrix: the `N^2` vector is stacked
/// column by column into `N x N`.
pub fn stack(v: &DVector<C64>) -> DMatrix<C64> {
    let n = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, v.len(), "length must be a perfect square");
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Lifted forms for the maximizing surface step:
/// `f_l^H Gamma f_l = θ̃^H Q_l θ̃ + 2 Re(θ̃^H p_l) + const_l`.
#[derive(Debug, Clone)]
pub struct SensingQuadratics {
    /// `T = g g^H`.
    pub t: DMatrix<C64>,
    /// `delta_r^2 H_t f_l f_l^H H_t^H` (right Kronecker factor of `Q_l`).
    pub a: Vec<DMatrix<C64>>,
    /// `H_t H_t^H`.
    pub b: DMatrix<C64>,
    pub p: Vec<DVector<C64>>,
    pub const_terms: Vec<f64>,
}

impl SensingQuadratics {
    pub fn streams(&self) -> usize {
        self.a.len()
    }

    /// Dense `Q_l = diag(vec T)^H ((H_t^* H_t^T) ⊗ A_l) diag(vec T)`.
    pub fn dense_q(&self, l: usize) -> DMatrix<C64> {
        let tv = vec_col(&self.t);
        let left = self.b.transpose();
        let kron = left.kronecker(&self.a[l]);
        let n2 = tv.len();
        let q = DMatrix::from_fn(n2, n2, |i, j| tv[i].conj() * kron[(i, j)] * tv[j]);
        hermitize(&q)
    }

    /// `Q_l x` without forming `Q_l`.
    pub fn apply_q(&self, l: usize, x: &DVector<C64>) -> DVector<C64> {
        let tv = vec_col(&self.t);
        let xm = stack(&tv.component_mul(x));
        let prod = &self.a[l] * xm * &self.b;
        tv.map(|v| v.conj()).component_mul(&vec_col(&prod))
    }

    /// `θ̃^H Q_l θ̃`.
    pub fn quadratic(&self, l: usize, x: &DVector<C64>) -> f64 {
        x.dotc(&self.apply_q(l, x)).re
    }

    /// `θ̃^H Q_l θ̃ + 2 Re(θ̃^H p_l) + const_l`.
    pub fn rho_l(&self, l: usize, x: &DVector<C64>) -> f64 {
        self.quadratic(l, x) + 2.0 * x.dotc(&self.p[l]).re + self.const_terms[l]
    }
}

pub fn build_sensing_quadratics(ch: &ChannelSet, rcs: &RcsModel, f: &Precoder) -> Result<SensingQuadratics> {
    check_dims(ch, None, Some(f))?;
    let t = &ch.g * ch.g.adjoint();
    let tv = vec_col(&t);
    let hst = ch.h_st_outer();
    let b = &ch.h_t * ch.h_t.adjoint();
    let mut a = Vec::with_capacity(f.streams());
    let mut p = Vec::with_capacity(f.streams());
    let mut const_terms = Vec::with_capacity(f.streams());
    for col in f.matrix().column_iter() {
        let htf = &ch.h_t * col;
        a.push(hermitize(&(&htf * htf.adjoint() * real(rcs.delta_r_sq))));
        let y = &ch.h_t * (&hst * col) * htf.adjoint() * rcs.delta_m.conj();
        p.push(tv.map(|v| v.conj()).component_mul(&vec_col(&y)));
        let hf = &hst * col;
        const_terms.push(rcs.delta_s_sq * hf.norm_squared());
    }
    Ok(SensingQuadratics { t, a, b, p, const_terms })
}

/// Split of a Hermitian matrix into PSD and NSD parts.
#[derive(Debug, Clone)]
pub struct SignSplit {
    pub plus: DMatrix<C64>,
    pub minus: DMatrix<C64>,
}

/// Eigenvalues in `[-1e-12, 1e-12] * max|lambda|` go to the PSD part.
pub fn psd_nsd_split(a: &DMatrix<C64>) -> SignSplit {
    let n = a.nrows();
    let (vals, vecs) = eigh_desc(a);
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut plus = DMatrix::zeros(n, n);
    let mut minus = DMatrix::zeros(n, n);
    for (i, &lam) in vals.iter().enumerate() {
        let v = vecs.column(i);
        let outer = &v * v.adjoint() * real(lam);
        if lam >= -1e-12 * scale {
            plus += outer;
        } else {
            minus += outer;
        }
    }
    SignSplit {
        plus: hermitize(&plus),
        minus: hermitize(&minus),
    }
}

/// Bordered forms for the attack.
#[derive(Debug, Clone)]
pub struct AttackQuadratics {
    /// Diagonal of `G = diag(g)`.
    pub g: DVector<C64>,
    pub m: Vec<DMatrix<C64>>,
    /// PSD / NSD parts of the bordered `M̂_l`.
    pub mhat: Vec<SignSplit>,
    /// `w_{k,l} = [H_{r,k}^H H_t f_l; h_{s,k}^H f_l]`, so `R_{k,l} = w w^H`.
    pub w: Vec<Vec<DVector<C64>>>,
    pub u: Vec<DMatrix<C64>>,
    pub r: Vec<Vec<DMatrix<C64>>>,
    /// `tau_l^T` as a column: `tau_l θ̂ = tau_l^T θ̂` (no conjugation).
    pub tau: Vec<DVector<C64>>,
    /// `Ĥ = [H_t^H G, 0]`, `M x (N+1)`.
    pub hhat: DMatrix<C64>,
    pub const_terms: Vec<f64>,
    pub delta_r_sq: f64,
}

impl AttackQuadratics {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn streams(&self) -> usize {
        self.m.len()
    }

    pub fn ues(&self) -> usize {
        self.u.len()
    }

    /// `|tau_l θ̂|`.
    pub fn s_value(&self, l: usize, theta_hat: &DVector<C64>) -> f64 {
        self.tau[l].dot(theta_hat).norm()
    }

    /// `||Ĥ θ̂||`.
    pub fn r_value(&self, theta_hat: &DVector<C64>) -> f64 {
        (&self.hhat * theta_hat).norm()
    }

    /// Decoupled `rho_l = delta_r^2 s^2 r^2 + θ^H M_l θ + const_l` at
    /// `θ̂ = [theta; 1]`.
    pub fn rho_l(&self, l: usize, theta_hat: &DVector<C64>) -> f64 {
        let n = self.n();
        let th = theta_hat.rows(0, n);
        let s = self.s_value(l, theta_hat);
        let r = self.r_value(theta_hat);
        let quad = th.dotc(&(&self.m[l] * th)).re;
        self.delta_r_sq * s * s * r * r + quad + self.const_terms[l]
    }
}

fn quad_form(a: &DMatrix<C64>, x: &DVector<C64>) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn build_attack_quadratics(ch: &ChannelSet, rcs: &RcsModel, f: &Precoder) -> Result<AttackQuadratics> {
    check_dims(ch, None, Some(f))?;
    let n = ch.n();
    let k_count = ch.k();
    if f.streams() < k_count {
        return Err(Error::Dimension(format!("{} streams for K = {k_count}", f.streams())));
    }
    let hst = ch.h_st_outer();
    // H_t^H G
    let htg = DMatrix::from_fn(ch.m(), n, |i, j| ch.h_t[(j, i)].conj() * ch.g[j]);
    let mut hhat = DMatrix::zeros(ch.m(), n + 1);
    hhat.columns_mut(0, n).copy_from(&htg);
    let mut m = Vec::new();
    let mut mhat = Vec::new();
    let mut tau = Vec::new();
    let mut const_terms = Vec::new();
    for col in f.matrix().column_iter() {
        let ff = &col * col.adjoint();
        let inner = &hst * &ff * rcs.delta_m.conj() + &ff * hst.adjoint() * rcs.delta_m;
        let ml = hermitize(&(htg.adjoint() * inner * &htg));
        let mut bordered = DMatrix::zeros(n + 1, n + 1);
        bordered.view_mut((0, 0), (n, n)).copy_from(&ml);
        mhat.push(psd_nsd_split(&bordered));
        m.push(ml);
        // f^H H_t^H G θ = (H_t^H G)^T conj(f) · θ
        let row = htg.transpose() * col.map(|v| v.conj());
        let mut t = DVector::zeros(n + 1);
        t.rows_mut(0, n).copy_from(&row);
        tau.push(t);
        const_terms.push(rcs.delta_s_sq * (&hst * col).norm_squared());
    }
    let mut w = Vec::with_capacity(k_count);
    let mut r = Vec::with_capacity(k_count);
    let mut u = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut wk = Vec::new();
        let mut rk = Vec::new();
        let mut uk = DMatrix::zeros(n + 1, n + 1);
        for (l, col) in f.matrix().column_iter().enumerate() {
            let htf = &ch.h_t * col;
            let d = ch.h_r[k].map(|v| v.conj()).component_mul(&htf);
            let mut wkl = DVector::zeros(n + 1);
            wkl.rows_mut(0, n).copy_from(&d);
            wkl[n] = ch.h_s[k].dotc(&col);
            let rkl = hermitize(&(&wkl * wkl.adjoint()));
            if l != k {
                uk += &rkl;
            }
            wk.push(wkl);
            rk.push(rkl);
        }
        w.push(wk);
        r.push(rk);
        u.push(hermitize(&uk));
    }
    Ok(AttackQuadratics {
        g: ch.g.clone(),
        m,
        mhat,
        w,
        u,
        r,
        tau,
        hhat,
        const_terms,
        delta_r_sq: rcs.delta_r_sq,
    })
}

/// `θ̂^H R_{k,l} θ̂`, the received power of stream `l` at UE `k`.
pub fn stream_power(aq: &AttackQuadratics, k: usize, l: usize, theta_hat: &DVector<C64>) -> f64 {
    quad_form(&aq.r[k][l], theta_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, complex_gaussian};
    use crate::model::{generate_channels, Geometry, SystemConfig};
    use rand::Rng;

    fn setup(m: usize, k: usize, n: usize, seed: u64) -> (ChannelSet, RcsModel, Precoder, PhaseVector) {
        let cfg = SystemConfig::uniform(m, k, n, 2.0, 2.0, 1.0, 10.0);
        let ch = generate_channels(&cfg, &Geometry::default(), seed).unwrap();
        let rcs = RcsModel::new(1e-5, 1e-5, real(9e-6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let mut fm = DMatrix::zeros(m, k + 1);
        for l in 0..=k {
            fm.set_column(l, &complex_gaussian(&mut rng, m));
        }
        (ch, rcs, Precoder::new(fm), PhaseVector::random(n, &mut rng))
    }

    #[test]
    fn static_only_gamma() {
        let (ch, mut rcs, _, theta) = setup(4, 1, 3, 1);
        rcs.delta_r_sq = 0.0;
        rcs.delta_m = real(0.0);
        let g = gamma_matrix(&ch, &rcs, &theta).unwrap();
        let want = &ch.h_st * ch.h_st.adjoint() * real(rcs.delta_s_sq * ch.h_st.norm_squared());
        assert!((g - &want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn gamma_is_psd() {
        for seed in 0..10 {
            let (ch, rcs, _, theta) = setup(5, 2, 4, seed);
            let g = gamma_matrix(&ch, &rcs, &theta).unwrap();
            let (vals, _) = eigh_desc(&g);
            assert!(vals[vals.len() - 1] >= -1e-10 * vals[0]);
        }
    }

    #[test]
    fn direct_snr_matches_gamma() {
        let (ch, rcs, f, theta) = setup(5, 2, 4, 3);
        let g = gamma_matrix(&ch, &rcs, &theta).unwrap();
        let a = sensing_snr(&g, &f, 1.0).unwrap();
        let b = sensing_snr_direct(&ch, &rcs, &theta, &f, 1.0).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn zero_precoder_has_zero_snr() {
        let (ch, rcs, _, theta) = setup(4, 1, 3, 2);
        let g = gamma_matrix(&ch, &rcs, &theta).unwrap();
        assert_eq!(sensing_snr(&g, &Precoder::zeros(4, 2), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn theta_tilde_small_case() {
        let theta = PhaseVector::new(DVector::from_vec(vec![real(1.0), c(0.0, 1.0)])).unwrap();
        let tt = theta_tilde(&theta);
        let want = [real(1.0), c(0.0, 1.0), c(0.0, -1.0), real(1.0)];
        for i in 0..4 {
            assert!((tt[i] - want[i]).norm() < 1e-15);
        }
        assert!(theta_tilde(&PhaseVector::ones(3)).iter().all(|v| *v == real(1.0)));
    }

    #[test]
    fn vectorization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(1..7);
            let theta = PhaseVector::random(n, &mut rng);
            let t = DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let d = DMatrix::from_diagonal(theta.as_vector());
            let lhs = vec_col(&(&d * &t * d.adjoint()));
            let rhs = vec_col(&t).component_mul(&theta_tilde(&theta));
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn operator_matches_dense_q() {
        let (ch, rcs, f, theta) = setup(3, 1, 3, 4);
        let sq = build_sensing_quadratics(&ch, &rcs, &f).unwrap();
        let x = theta_tilde(&theta);
        for l in 0..sq.streams() {
            let dense = sq.dense_q(l) * &x;
            assert!((dense - sq.apply_q(l, &x)).norm() < 1e-10 * (1.0 + sq.apply_q(l, &x).norm()));
        }
    }

    #[test]
    fn lifted_form_matches_gamma() {
        let (ch, rcs, f, _) = setup(3, 1, 3, 5);
        let sq = build_sensing_quadratics(&ch, &rcs, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let theta = PhaseVector::random(3, &mut rng);
            let g = gamma_matrix(&ch, &rcs, &theta).unwrap();
            let x = theta_tilde(&theta);
            for l in 0..sq.streams() {
                let col = f.column(l);
                let want = col.dotc(&(&g * &col)).re;
                assert!((sq.rho_l(l, &x) - want).abs() <= 1e-9 * want.abs());
            }
        }
    }

    #[test]
    fn q_vanishes_without_reflected_rcs() {
        let (ch, mut rcs, f, _) = setup(3, 1, 3, 6);
        rcs.delta_r_sq = 0.0;
        rcs.delta_m = real(0.0);
        let sq = build_sensing_quadratics(&ch, &rcs, &f).unwrap();
        assert_eq!(sq.dense_q(0).norm(), 0.0);
    }

    #[test]
    fn split_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = hermitize(&DMatrix::from_fn(5, 5, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
        let s = psd_nsd_split(&a);
        assert!((&s.plus + &s.minus - &a).norm() <= 1e-10 * a.norm());
        let (vp, _) = eigh_desc(&s.plus);
        let (vm, _) = eigh_desc(&s.minus);
        assert!(vp[4] >= -1e-12 && vm[0] <= 1e-12);
    }

    #[test]
    fn r_matrices_give_stream_powers() {
        let (ch, rcs, f, theta) = setup(4, 2, 3, 7);
        let aq = build_attack_quadratics(&ch, &rcs, &f).unwrap();
        let th = theta.augmented();
        for k in 0..2 {
            let h = cascaded_unchecked(&ch, theta.as_vector(), k);
            for l in 0..3 {
                let want = h.dotc(&f.column(l)).norm_sqr();
                assert!((stream_power(&aq, k, l, &th) - want).abs() < 1e-10 * want.max(1.0));
            }
        }
    }
}
