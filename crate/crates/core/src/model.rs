//! System configuration, propagation channels, radar cross-section draws and
//! the clustered pixel-failure mask.
//!
//! Indices are zero-based throughout the API: UE `k` ranges over `0..K`,
//! stream `K` is the sensing stream and RIS element `n` ranges over `0..N`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, complex_gaussian, real};
use crate::{Error, Result, C64};

/// Dimensions, powers and noise levels of one scenario.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Transmit (and receive) antennas at the base station.
    pub M: usize,
    /// Number of single-antenna UEs.
    pub K: usize,
    /// Number of RIS elements.
    pub N: usize,
    /// Total transmit power (linear).
    pub P: f64,
    /// Per-UE SINR floors (linear), length `K`.
    pub gamma: Vec<f64>,
    /// Per-UE noise variances, length `K`.
    pub sigma_ue_sq: Vec<f64>,
    pub sigma_t_sq: f64,
    pub rician_kfactor: f64,
}

impl SystemConfig {
    /// Scenario with a common SINR floor and common UE noise variance.
    #[allow(non_snake_case)]
    pub fn uniform(M: usize, K: usize, N: usize, P: f64, gamma: f64, sigma_sq: f64, kfactor: f64) -> Self {
        Self {
            M,
            K,
            N,
            P,
            gamma: vec![gamma; K],
            sigma_ue_sq: vec![sigma_sq; K],
            sigma_t_sq: sigma_sq,
            rician_kfactor: kfactor,
        }
    }

    /// Number of streams, `K + 1`.
    #[allow(non_snake_case)]
    pub fn L(&self) -> usize {
        self.K + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.M == 0 || self.N == 0 {
            return Err(Error::Config("M and N must be at least 1".into()));
        }
        if self.gamma.len() != self.K || self.sigma_ue_sq.len() != self.K {
            return Err(Error::Config(format!(
                "gamma ({}) and sigma_ue_sq ({}) must have length K = {}",
                self.gamma.len(),
                self.sigma_ue_sq.len(),
                self.K
            )));
        }
        if !(self.P > 0.0 && self.P.is_finite()) {
            return Err(Error::Config(format!("power budget must be positive, got {}", self.P)));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Config("SINR targets must be positive".into()));
        }
        if self.sigma_ue_sq.iter().any(|s| !(*s > 0.0 && s.is_finite())) || !(self.sigma_t_sq > 0.0) {
            return Err(Error::Config("noise variances must be positive".into()));
        }
        if !(self.rician_kfactor >= 0.0) {
            return Err(Error::Config("Rician K-factor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

/// Planar positions (meters) used for line-of-sight angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub target_pos: [f64; 2],
    pub ue_region: Region,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs_pos: [0.0, 20.0],
            ris_pos: [50.0, 100.0],
            target_pos: [150.0, 60.0],
            ue_region: Region {
                x: [100.0, 150.0],
                y: [100.0, 120.0],
            },
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let r = &self.ue_region;
        if !(r.x[1] > r.x[0] && r.y[1] > r.y[0]) {
            return Err(Error::Config("UE region must have positive area".into()));
        }
        let pts = [self.bs_pos, self.ris_pos, self.target_pos];
        for i in 0..3 {
            for j in (i + 1)..3 {
                if pts[i] == pts[j] {
                    return Err(Error::Config("BS, RIS and target positions must be distinct".into()));
                }
            }
        }
        Ok(())
    }

    /// Draws `k` UE positions uniformly in the UE region.
    pub fn draw_ue_positions<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<[f64; 2]> {
        let r = self.ue_region;
        (0..k)
            .map(|_| [rng.random_range(r.x[0]..r.x[1]), rng.random_range(r.y[0]..r.y[1])])
            .collect()
    }
}

fn angle(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Half-wavelength uniform linear array response `exp(j pi n sin(phi))`.
pub fn steering_vector(n: usize, phi: f64) -> DVector<C64> {
    let s = phi.sin();
    DVector::from_fn(n, |i, _| {
        let ph = PI * i as f64 * s;
        c(ph.cos(), ph.sin())
    })
}

/// All propagation channels of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS to RIS, `N x M`.
    pub h_t: DMatrix<C64>,
    /// BS to UE `k` static paths, each of length `M`.
    pub h_s: Vec<DVector<C64>>,
    /// RIS to UE `k`, each of length `N`.
    pub h_r: Vec<DVector<C64>>,
    /// BS to target static path, length `M`.
    pub h_st: DVector<C64>,
    /// RIS to target, length `N`.
    pub g: DVector<C64>,
}

impl ChannelSet {
    pub fn m(&self) -> usize {
        self.h_t.ncols()
    }

    pub fn n(&self) -> usize {
        self.h_t.nrows()
    }

    pub fn k(&self) -> usize {
        self.h_s.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.h_t.shape();
        let bad = self.h_s.iter().any(|h| h.len() != m)
            || self.h_r.len() != self.h_s.len()
            || self.h_r.iter().any(|h| h.len() != n)
            || self.h_st.len() != m
            || self.g.len() != n;
        if bad {
            return Err(Error::Dimension("inconsistent channel dimensions".into()));
        }
        Ok(())
    }

    /// Checks that the channel dimensions match `cfg`.
    pub fn check_against(&self, cfg: &SystemConfig) -> Result<()> {
        self.validate()?;
        if self.m() != cfg.M || self.n() != cfg.N || self.k() != cfg.K {
            return Err(Error::Dimension(format!(
                "channels are (M, N, K) = ({}, {}, {}), config expects ({}, {}, {})",
                self.m(),
                self.n(),
                self.k(),
                cfg.M,
                cfg.N,
                cfg.K
            )));
        }
        Ok(())
    }

    /// `H_{s,T} = h_{s,T} h_{s,T}^H`.
    pub fn h_st_outer(&self) -> DMatrix<C64> {
        &self.h_st * self.h_st.adjoint()
    }
}

fn rician<R: Rng + ?Sized>(los: DVector<C64>, kfactor: f64, rng: &mut R) -> DVector<C64> {
    let n = los.len();
    let w = complex_gaussian(rng, n);
    if kfactor.is_infinite() {
        return los;
    }
    let a = (kfactor / (kfactor + 1.0)).sqrt();
    let b = (1.0 / (kfactor + 1.0)).sqrt();
    los * real(a) + w * real(b)
}

/// Draws UE positions from the seed and then the channels.
pub fn generate_channels(cfg: &SystemConfig, geometry: &Geometry, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    geometry.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ues = geometry.draw_ue_positions(cfg.K, &mut rng);
    channels_from_rng(cfg, geometry, &ues, &mut rng)
}

/// Channels for given UE positions.
pub fn generate_channels_at(cfg: &SystemConfig, geometry: &Geometry, ues: &[[f64; 2]], seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    geometry.validate()?;
    if ues.len() != cfg.K {
        return Err(Error::Dimension(format!("{} UE positions for K = {}", ues.len(), cfg.K)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    channels_from_rng(cfg, geometry, ues, &mut rng)
}

fn channels_from_rng(cfg: &SystemConfig, geo: &Geometry, ues: &[[f64; 2]], rng: &mut ChaCha8Rng) -> Result<ChannelSet> {
    let a_bs = steering_vector(cfg.M, angle(geo.bs_pos, geo.ris_pos));
    let a_ris = steering_vector(cfg.N, angle(geo.ris_pos, geo.bs_pos));
    let h_t = &a_ris * a_bs.adjoint();
    let kf = cfg.rician_kfactor;
    let h_s = ues
        .iter()
        .map(|&p| rician(steering_vector(cfg.M, angle(geo.bs_pos, p)), kf, rng))
        .collect();
    let h_st = rician(steering_vector(cfg.M, angle(geo.bs_pos, geo.target_pos)), kf, rng);
    let g = rician(steering_vector(cfg.N, angle(geo.ris_pos, geo.target_pos)), kf, rng);
    let h_r = (0..cfg.K).map(|_| complex_gaussian(rng, cfg.N)).collect();
    Ok(ChannelSet { h_t, h_s, h_r, h_st, g })
}

/// Second-order statistics of the two RCS coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcsModel {
    pub delta_r_sq: f64,
    pub delta_s_sq: f64,
    /// `E[c_r c_s^*]`.
    pub delta_m: C64,
}

impl RcsModel {
    pub fn new(delta_r_sq: f64, delta_s_sq: f64, delta_m: C64) -> Result<Self> {
        let m = Self {
            delta_r_sq,
            delta_s_sq,
            delta_m,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_r_sq >= 0.0 && self.delta_s_sq >= 0.0) {
            return Err(Error::Model("RCS variances must be nonnegative".into()));
        }
        let bound = self.delta_r_sq * self.delta_s_sq;
        if self.delta_m.norm_sqr() > bound * (1.0 + 1e-12) {
            return Err(Error::Model(format!(
                "|delta_m|^2 = {:.3e} exceeds delta_r^2 delta_s^2 = {:.3e}",
                self.delta_m.norm_sqr(),
                bound
            )));
        }
        Ok(())
    }

    /// Lower-triangular factor `[[a, 0], [b, d]]` of the covariance.
    fn factor(&self) -> (f64, C64, f64) {
        if self.delta_r_sq == 0.0 {
            return (0.0, real(0.0), self.delta_s_sq.sqrt());
        }
        let a = self.delta_r_sq.sqrt();
        let b = self.delta_m.conj() / a;
        let d = (self.delta_s_sq - b.norm_sqr()).max(0.0).sqrt();
        (a, b, d)
    }
}

/// One joint draw `(c_r, c_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcsSample {
    pub c_r: C64,
    pub c_s: C64,
}

/// Draws `count` jointly Gaussian RCS pairs.
pub fn sample_rcs(model: &RcsModel, count: usize, seed: u64) -> Result<Vec<RcsSample>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_rcs(model, count, &mut rng))
}

pub(crate) fn draw_rcs<R: Rng + ?Sized>(model: &RcsModel, count: usize, rng: &mut R) -> Vec<RcsSample> {
    let (a, b, d) = model.factor();
    (0..count)
        .map(|_| {
            let w = complex_gaussian(rng, 2);
            RcsSample {
                c_r: w[0] * a,
                c_s: b * w[0] + w[1] * d,
            }
        })
        .collect()
}

/// Unit-modulus RIS phase vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(DVector<C64>);

impl PhaseVector {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(theta: DVector<C64>) -> Result<Self> {
        if let Some((i, v)) = theta.iter().enumerate().find(|(_, v)| (v.norm() - 1.0).abs() > Self::TOLERANCE) {
            return Err(Error::Model(format!("entry {i} has modulus {}", v.norm())));
        }
        Ok(Self(theta))
    }

    /// Projects every entry onto the unit circle.
    pub fn project(v: &DVector<C64>) -> Self {
        Self(crate::linalg::unit_modulus(v))
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        Self(DVector::from_iterator(angles.len(), angles.iter().map(|a| c(a.cos(), a.sin()))))
    }

    pub fn ones(n: usize) -> Self {
        Self(DVector::from_element(n, real(1.0)))
    }

    /// i.i.d. uniform phases.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self::from_angles(&angles)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<C64> {
        self.0
    }

    /// `[theta; 1]`.
    pub fn augmented(&self) -> DVector<C64> {
        let n = self.0.len();
        DVector::from_fn(n + 1, |i, _| if i < n { self.0[i] } else { real(1.0) })
    }
}

/// Precoding matrix `F = [f_1 ... f_L]` of size `M x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder(DMatrix<C64>);

impl Precoder {
    pub fn new(f: DMatrix<C64>) -> Self {
        Self(f)
    }

    pub fn zeros(m: usize, l: usize) -> Self {
        Self(DMatrix::zeros(m, l))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn streams(&self) -> usize {
        self.0.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn column(&self, l: usize) -> DVector<C64> {
        self.0.column(l).into_owned()
    }

    pub fn set_column(&mut self, l: usize, f: &DVector<C64>) {
        self.0.set_column(l, f);
    }

    /// `sum_l ||f_l||^2`.
    pub fn power(&self) -> f64 {
        self.0.norm_squared()
    }
}

/// Clustered-biased failure: a contiguous block of elements whose phase is
/// offset by `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureMask {
    faulty: Vec<usize>,
    kappa: f64,
    mask: DVector<C64>,
}

impl FailureMask {
    pub fn new(n: usize, faulty: Vec<usize>, kappa: f64) -> Result<Self> {
        if let Some(&i) = faulty.iter().find(|&&i| i >= n) {
            return Err(Error::Index { index: i, len: n });
        }
        let rot = c(kappa.cos(), kappa.sin());
        let mut mask = DVector::from_element(n, real(1.0));
        for &i in &faulty {
            mask[i] = rot;
        }
        Ok(Self { faulty, kappa, mask })
    }

    /// Elements `offset..offset + count`.
    pub fn contiguous(n: usize, count: usize, offset: usize, kappa: f64) -> Result<Self> {
        if offset + count > n {
            return Err(Error::Config(format!("faulty block {offset}..{} exceeds N = {n}", offset + count)));
        }
        Self::new(n, (offset..offset + count).collect(), kappa)
    }

    pub fn faulty_set(&self) -> &[usize] {
        &self.faulty
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mask(&self) -> &DVector<C64> {
        &self.mask
    }
}

/// `theta ⊙ m`.
pub fn apply_failure_mask(theta: &PhaseVector, mask: &FailureMask) -> Result<PhaseVector> {
    if theta.len() != mask.mask.len() {
        return Err(Error::Dimension(format!("theta has {} entries, mask {}", theta.len(), mask.mask.len())));
    }
    Ok(PhaseVector(theta.0.component_mul(&mask.mask)))
}

/// End-to-end channel `h_k = h_{s,k} + H_t^H diag(theta) h_{r,k}`.
pub fn cascaded_channel(ch: &ChannelSet, theta: &PhaseVector, k: usize) -> Result<DVector<C64>> {
    if k >= ch.k() {
        return Err(Error::Index { index: k, len: ch.k() });
    }
    if theta.len() != ch.n() {
        return Err(Error::Dimension(format!("theta has {} entries, N = {}", theta.len(), ch.n())));
    }
    Ok(cascaded_unchecked(ch, theta.as_vector(), k))
}

pub(crate) fn cascaded_unchecked(ch: &ChannelSet, theta: &DVector<C64>, k: usize) -> DVector<C64> {
    let refl = theta.component_mul(&ch.h_r[k]);
    &ch.h_s[k] + ch.h_t.adjoint() * refl
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, k: usize, n: usize, kf: f64) -> SystemConfig {
        SystemConfig::uniform(m, k, n, 2.0, 2.0, 1.0, kf)
    }

    #[test]
    fn h_t_has_unit_modulus_entries() {
        let ch = generate_channels(&cfg(5, 2, 4, 10.0), &Geometry::default(), 3).unwrap();
        assert!(ch.h_t.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert_eq!(ch.h_t.shape(), (4, 5));
    }

    #[test]
    fn large_kfactor_gives_line_of_sight() {
        let ch = generate_channels(&cfg(6, 3, 4, 1e12), &Geometry::default(), 11).unwrap();
        for h in ch.h_s.iter().chain([&ch.h_st]) {
            assert!(h.iter().all(|v| (v.norm() - 1.0).abs() < 1e-5));
        }
        assert!(ch.g.iter().all(|v| (v.norm() - 1.0).abs() < 1e-5));
    }

    #[test]
    fn generation_is_deterministic() {
        let c = cfg(4, 2, 3, 10.0);
        let a = generate_channels(&c, &Geometry::default(), 42).unwrap();
        let b = generate_channels(&c, &Geometry::default(), 42).unwrap();
        assert_eq!(a, b);
        let d = generate_channels(&c, &Geometry::default(), 43).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = cfg(4, 2, 3, 10.0);
        c.gamma.pop();
        assert!(matches!(generate_channels(&c, &Geometry::default(), 0), Err(Error::Config(_))));
        let mut c = cfg(4, 2, 3, 10.0);
        c.P = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mask_rotates_selected_entries() {
        let theta = PhaseVector::ones(3);
        let m = FailureMask::new(3, vec![1], PI).unwrap();
        let out = apply_failure_mask(&theta, &m).unwrap();
        let want = [1.0, -1.0, 1.0];
        for i in 0..3 {
            assert!((out.as_vector()[i] - real(want[i])).norm() < 1e-15);
        }
    }

    #[test]
    fn clustered_mask_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = PhaseVector::random(15, &mut rng);
        let m = FailureMask::contiguous(15, 4, 0, PI / 3.0).unwrap();
        let out = apply_failure_mask(&theta, &m).unwrap();
        let rot = c((PI / 3.0).cos(), (PI / 3.0).sin());
        let mut rotated = 0;
        let mut same = 0;
        for i in 0..15 {
            let (a, b) = (theta.as_vector()[i], out.as_vector()[i]);
            if (b - a).norm() < 1e-14 {
                same += 1;
            } else if (b - a * rot).norm() < 1e-14 {
                rotated += 1;
            }
        }
        assert_eq!((rotated, same), (4, 11));
        assert!(out.as_vector().iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_bias_mask_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let theta = PhaseVector::random(7, &mut rng);
        let m = FailureMask::contiguous(7, 3, 2, 0.0).unwrap();
        assert_eq!(apply_failure_mask(&theta, &m).unwrap(), theta);
    }

    #[test]
    fn mask_length_mismatch() {
        let m = FailureMask::contiguous(4, 1, 0, 1.0).unwrap();
        assert!(matches!(apply_failure_mask(&PhaseVector::ones(3), &m), Err(Error::Dimension(_))));
        assert!(FailureMask::contiguous(4, 3, 2, 1.0).is_err());
    }

    #[test]
    fn cascaded_channel_without_reflection() {
        let mut ch = generate_channels(&cfg(4, 2, 3, 10.0), &Geometry::default(), 9).unwrap();
        ch.h_r[1] = DVector::zeros(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = PhaseVector::random(3, &mut rng);
        assert_eq!(cascaded_channel(&ch, &theta, 1).unwrap(), ch.h_s[1]);
        assert!(matches!(cascaded_channel(&ch, &theta, 2), Err(Error::Index { .. })));
    }

    #[test]
    fn cascaded_channel_scalar_element() {
        let ch = generate_channels(&cfg(3, 1, 1, 10.0), &Geometry::default(), 2).unwrap();
        let h = cascaded_channel(&ch, &PhaseVector::ones(1), 0).unwrap();
        for i in 0..3 {
            let want = ch.h_s[0][i] + ch.h_t[(0, i)].conj() * ch.h_r[0][0];
            assert!((h[i] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn rcs_rejects_invalid_covariance() {
        assert!(RcsModel::new(1.0, 1.0, real(1.5)).is_err());
        assert!(RcsModel::new(-1.0, 1.0, real(0.0)).is_err());
        assert!(RcsModel::new(0.0, 1.0, real(0.0)).is_ok());
    }

    #[test]
    fn phase_vector_checks_modulus() {
        assert!(PhaseVector::new(DVector::from_element(2, c(0.5, 0.0))).is_err());
        let p = PhaseVector::project(&DVector::from_element(2, c(0.5, 0.5)));
        assert!(PhaseVector::new(p.into_vector()).is_ok());
    }
}
