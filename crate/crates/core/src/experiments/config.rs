use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Scheduler, SystemConfig};
use crate::beamforming::{RtdMode, RtdOptions};
use crate::error::{Error, Result};
use crate::rates::DEFAULT_MC_TRIALS;
use crate::scenario::ScenarioConfig;

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Pilot length `τ`.
    Tau,
    /// Number of UEs `M`.
    NumUe,
    /// Number of RRHs `K`.
    NumRrh,
    /// RRH antennas `N`.
    RrhAntennas,
    /// MBS antennas `B`.
    MbsAntennas,
    /// RRH coverage radius `D_max` in meters.
    CoverageRadius,
    /// Coherence interval `T` in symbols.
    Coherence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::Tau,
            values: vec![5.0],
        }
    }
}

/// How beamformers are obtained in SE and tightness experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beamformer {
    /// Robust design on the estimated channels.
    Rtd,
    /// Same design with error-free serving links and orthogonal training
    /// overhead; a reference curve, not a competing scheme.
    PerfectCsi,
    /// All beamformers zero.
    None,
}

impl Beamformer {
    pub fn name(self) -> &'static str {
        match self {
            Beamformer::Rtd => "rtd",
            Beamformer::PerfectCsi => "perfect_csi",
            Beamformer::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtdConfig {
    pub rho: f64,
    pub max_iters: usize,
    pub mode: RtdMode,
    pub solver_tol: f64,
    pub max_dual_iters: usize,
}

impl Default for RtdConfig {
    fn default() -> Self {
        let d = RtdOptions::default();
        Self {
            rho: d.rho,
            max_iters: d.max_iters,
            mode: d.mode,
            solver_tol: d.solver.tol,
            max_dual_iters: d.solver.max_dual_iters,
        }
    }
}

impl RtdConfig {
    pub fn options(&self) -> RtdOptions {
        let mut o = RtdOptions {
            rho: self.rho,
            max_iters: self.max_iters,
            mode: self.mode,
            ..RtdOptions::default()
        };
        o.solver.tol = self.solver_tol;
        o.solver.max_dual_iters = self.max_dual_iters;
        o
    }
}

/// One experiment: a base scenario, a sweep and an ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub system: SystemConfig,
    pub sweep: Sweep,
    pub num_realizations: usize,
    pub schedulers: Vec<Scheduler>,
    pub beamformers: Vec<Beamformer>,
    /// Monte Carlo trials per UE; 0 skips the Monte Carlo columns.
    pub mc_trials: usize,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub rtd: RtdConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            system: SystemConfig::default(),
            sweep: Sweep::default(),
            num_realizations: 100,
            schedulers: vec![Scheduler::Psa, Scheduler::DsaturRandom],
            beamformers: vec![Beamformer::Rtd],
            mc_trials: DEFAULT_MC_TRIALS,
            master_seed: 0,
            output_path: None,
            rtd: RtdConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_realizations == 0 {
            return Err(Error::Config("num_realizations must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.schedulers.is_empty() {
            return Err(Error::Config("at least one scheduler is required".into()));
        }
        for &v in &self.sweep.values {
            let (scenario, system) = self.point(v)?;
            scenario.validate()?;
            system.validate()?;
        }
        Ok(())
    }

    /// Scenario and system settings at one sweep value.
    pub fn point(&self, value: f64) -> Result<(ScenarioConfig, SystemConfig)> {
        let mut scenario = self.scenario.clone();
        let mut system = self.system.clone();
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "sweep value {value} must be a non-negative integer for {:?}",
                    self.sweep.parameter
                )))
            }
        };
        match self.sweep.parameter {
            SweepParameter::Tau => system.tau = count()?,
            SweepParameter::NumUe => scenario.num_ue = count()?,
            SweepParameter::NumRrh => scenario.num_rrh = count()?,
            SweepParameter::RrhAntennas => scenario.rrh_antennas = count()?,
            SweepParameter::MbsAntennas => scenario.mbs_antennas = count()?,
            SweepParameter::CoverageRadius => scenario.coverage_radius = value,
            SweepParameter::Coherence => system.coherence = count()?,
        }
        Ok((scenario, system))
    }
}
