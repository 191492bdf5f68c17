//! Experiment configuration.
//!
//! Files are TOML. Dotted keys at the top level (`system.M = 30`) and the
//! equivalent `[system]` tables are both accepted; unknown keys are
//! rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::c;
use crate::maxsnr::AoSettings;
use crate::minsnr::CcpSettings;
use crate::model::{FailureMask, Geometry, RcsModel, SystemConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Maximize,
    Attack,
    SweepN,
    SweepKappa,
    SweepGamma,
}

impl Mode {
    pub fn is_sweep(self) -> bool {
        matches!(self, Mode::SweepN | Mode::SweepKappa | Mode::SweepGamma)
    }

    fn default_pipeline(self) -> Pipeline {
        match self {
            Mode::Attack | Mode::SweepGamma => Pipeline::Attack,
            _ => Pipeline::Maximize,
        }
    }
}

/// What runs on each realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Algorithm 1 only.
    Maximize,
    /// Algorithm 1, then Algorithm 2 from its output.
    Attack,
}

/// Domain in which per-realization values are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of `10 log10 rho`.
    #[default]
    Db,
    /// `10 log10` of the mean of `rho`.
    Linear,
}

/// Scenario parameters shared by all UEs.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub M: usize,
    pub K: usize,
    pub N: usize,
    /// Transmit power budget in dB (linear `P = 10^(power_db / 10)`).
    pub power_db: f64,
    pub gamma: f64,
    pub sigma_ue_sq: f64,
    pub sigma_t_sq: f64,
    pub rician_kfactor: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            M: 30,
            K: 4,
            N: 15,
            power_db: 3.0,
            gamma: 2.0,
            sigma_ue_sq: 1.0,
            sigma_t_sq: 1.0,
            rician_kfactor: 10.0,
        }
    }
}

impl SystemSpec {
    pub fn resolve(&self) -> SystemConfig {
        let mut cfg = SystemConfig::uniform(
            self.M,
            self.K,
            self.N,
            10f64.powf(self.power_db / 10.0),
            self.gamma,
            self.sigma_ue_sq,
            self.rician_kfactor,
        );
        cfg.sigma_t_sq = self.sigma_t_sq;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcsSpec {
    pub delta_r_sq: f64,
    pub delta_s_sq: f64,
    pub delta_m_re: f64,
    pub delta_m_im: f64,
}

impl Default for RcsSpec {
    fn default() -> Self {
        Self {
            delta_r_sq: 1e-5,
            delta_s_sq: 1e-5,
            delta_m_re: 9e-6,
            delta_m_im: 0.0,
        }
    }
}

impl RcsSpec {
    pub fn resolve(&self) -> Result<RcsModel> {
        RcsModel::new(self.delta_r_sq, self.delta_s_sq, c(self.delta_m_re, self.delta_m_im))
    }
}

/// Clustered-biased failure: elements `offset..offset + count` rotated by
/// `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureSpec {
    pub count: usize,
    pub kappa: f64,
    pub offset: usize,
}

impl Default for FailureSpec {
    fn default() -> Self {
        Self {
            count: 4,
            kappa: PI / 6.0,
            offset: 0,
        }
    }
}

impl FailureSpec {
    pub fn resolve(&self, n: usize) -> Result<FailureMask> {
        FailureMask::contiguous(n, self.count, self.offset, self.kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `M = 8, K = 2, N = 8`, 20 realizations.
    Desk,
    /// `M = 30, K = 4, N = 15`, 500 realizations; `paper` on the command line.
    #[serde(rename = "paper")]
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" | "full" => Ok(Scale::Full),
            _ => Err(Error::Config(format!("unknown scale `{s}` (expected desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure `{s}` (expected fig3, fig4, fig5 or fig6)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment id written to every row.
    pub name: String,
    pub mode: Mode,
    /// Overrides the mode's pipeline (sweeps only).
    pub pipeline: Option<Pipeline>,
    /// Swept values of `N`, `kappa` or `gamma`.
    pub sweep: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Keep one set of UE positions (drawn from the master seed) for all
    /// realizations instead of re-drawing them.
    pub fix_ue_positions: bool,
    pub averaging: Averaging,
    /// Record wall times; disable for bit-identical reruns.
    pub record_timing: bool,
    pub system: SystemSpec,
    pub geometry: Geometry,
    pub rcs: RcsSpec,
    pub failure: Option<FailureSpec>,
    pub ao: AoSettings,
    pub ccp: CcpSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "maximize".into(),
            mode: Mode::Maximize,
            pipeline: None,
            sweep: Vec::new(),
            realizations: 500,
            master_seed: 0,
            fix_ue_positions: false,
            averaging: Averaging::Db,
            record_timing: true,
            system: SystemSpec::default(),
            geometry: Geometry::default(),
            rcs: RcsSpec::default(),
            failure: None,
            ao: AoSettings::default(),
            ccp: CcpSettings::default(),
        }
    }
}

/// Configuration of one sweep point.
#[derive(Debug, Clone)]
pub struct ResolvedPoint {
    pub sweep: Option<f64>,
    pub system: SystemConfig,
    pub mask: Option<FailureMask>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pipeline(&self) -> Pipeline {
        self.pipeline.unwrap_or_else(|| self.mode.default_pipeline())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains([',', '"', '\n']) {
            return Err(Error::Config("experiment name must be non-empty without commas or quotes".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.mode.is_sweep() && self.sweep.is_empty() {
            return Err(Error::Config("sweep modes need a non-empty sweep list".into()));
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        if self.mode == Mode::SweepKappa && self.failure.is_none() {
            return Err(Error::Config("sweep_kappa needs a failure section".into()));
        }
        self.geometry.validate()?;
        self.rcs.resolve()?;
        self.ao.validate()?;
        self.ccp.validate()?;
        for p in self.points()? {
            p.system.validate()?;
        }
        Ok(())
    }

    /// One entry per sweep value (a single entry outside sweep modes).
    pub fn points(&self) -> Result<Vec<ResolvedPoint>> {
        let values: Vec<Option<f64>> = if self.mode.is_sweep() {
            self.sweep.iter().map(|&v| Some(v)).collect()
        } else {
            vec![None]
        };
        values
            .into_iter()
            .map(|v| {
                let mut spec = self.system.clone();
                let mut failure = self.failure;
                match (self.mode, v) {
                    (Mode::SweepN, Some(n)) => {
                        if !(n >= 1.0 && n.fract() == 0.0) {
                            return Err(Error::Config(format!("sweep value {n} is not a valid N")));
                        }
                        spec.N = n as usize;
                    }
                    (Mode::SweepKappa, Some(k)) => {
                        if let Some(f) = failure.as_mut() {
                            f.kappa = k;
                        }
                    }
                    (Mode::SweepGamma, Some(g)) => spec.gamma = g,
                    _ => {}
                }
                let system = spec.resolve();
                let mask = failure.map(|f| f.resolve(system.N)).transpose()?;
                Ok(ResolvedPoint { sweep: v, system, mask })
            })
            .collect()
    }

    /// Applies a scale preset to the scenario size and realization count.
    pub fn with_scale(mut self, scale: Scale) -> Self {
        match scale {
            Scale::Desk => {
                self.system.M = 8;
                self.system.K = 2;
                self.system.N = 8;
                self.realizations = 20;
            }
            Scale::Full => {
                self.system.M = 30;
                self.system.K = 4;
                self.system.N = 15;
                self.realizations = 500;
            }
        }
        self
    }

    pub fn preset(figure: Figure, scale: Scale) -> Self {
        let base = Self::default().with_scale(scale);
        let kappas = vec![0.0, PI / 6.0, PI / 4.0, PI / 3.0];
        let failure = Some(FailureSpec {
            count: match scale {
                Scale::Desk => 2,
                Scale::Full => 4,
            },
            ..FailureSpec::default()
        });
        match figure {
            Figure::Fig3 => Self {
                name: "fig3".into(),
                mode: Mode::SweepN,
                sweep: match scale {
                    Scale::Desk => vec![6.0, 8.0, 10.0],
                    Scale::Full => vec![15.0, 20.0, 25.0],
                },
                ..base
            },
            Figure::Fig4 => Self {
                name: "fig4".into(),
                mode: Mode::SweepKappa,
                sweep: kappas,
                failure,
                ..base
            },
            Figure::Fig5 => Self {
                name: "fig5".into(),
                mode: Mode::SweepGamma,
                sweep: vec![2.0, 1.0, 0.5],
                ..base
            },
            Figure::Fig6 => Self {
                name: "fig6".into(),
                mode: Mode::SweepKappa,
                pipeline: Some(Pipeline::Attack),
                sweep: kappas,
                failure,
                ..base
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_parse() {
        let text = "name = \"x\"\nmode = \"sweep_n\"\nsweep = [4, 5]\nrealizations = 3\nsystem.M = 6\nsystem.K = 1\nao.max_iterations = 4\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.system.M, 6);
        assert_eq!(cfg.ao.max_iterations, 4);
        assert_eq!(cfg.ao.randomization_count, AoSettings::default().randomization_count);
        let pts = cfg.points().unwrap();
        assert_eq!(pts.iter().map(|p| p.system.N).collect::<Vec<_>>(), vec![4, 5]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(ExperimentConfig::from_toml_str("system.Q = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn invariants_are_checked() {
        assert!(ExperimentConfig::from_toml_str("realizations = 0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("mode = \"sweep_gamma\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("mode = \"sweep_n\"\nsweep = [2.5]\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        for f in Figure::ALL {
            let cfg = ExperimentConfig::preset(f, Scale::Desk);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn power_is_in_db() {
        let sys = SystemSpec::default().resolve();
        assert!((sys.P - 10f64.powf(0.3)).abs() < 1e-15);
        assert_eq!(sys.gamma, vec![2.0; 4]);
    }
}
