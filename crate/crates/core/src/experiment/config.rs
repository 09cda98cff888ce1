//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noise::NoiseConfig;
use crate::pulse::ShiftModel;
use crate::qubit::InputState;
use crate::sequence::{Probe, RamseyConfig, SequenceConfig};
use crate::spin::DonorParams;
use crate::tomography::montecarlo::McMode;
use crate::tomography::TomographyPlan;

/// Coherence time `T2(N) = t2_base · N^exponent` with stretch `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeModel {
    pub t2_base: f64,
    pub exponent: f64,
    pub alpha: f64,
}

impl LifetimeModel {
    /// Reaches `t2_256` at `N = 256`.
    pub fn anchored(t2_256: f64, exponent: f64, alpha: f64) -> Self {
        Self {
            t2_base: t2_256 / 256f64.powf(exponent),
            exponent,
            alpha,
        }
    }

    pub fn t2(&self, n: usize) -> f64 {
        self.t2_base * (n.max(1) as f64).powf(self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    Memory,
    Nucleus,
    Electron,
}

impl ScanMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanMode::Memory => "memory",
            ScanMode::Nucleus => "nucleus",
            ScanMode::Electron => "electron",
        }
    }

    pub fn probe(&self) -> Option<Probe> {
        match self {
            ScanMode::Memory => None,
            ScanMode::Nucleus => Some(Probe::Nucleus),
            ScanMode::Electron => Some(Probe::Electron),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceConfig {
    pub n_list: Vec<usize>,
    pub modes: Vec<ScanMode>,
    /// Storage times per curve, log-spaced.
    pub points: usize,
    /// Scan range as multiples of the model `T2(N)`; the lower end is raised
    /// to fit the pulses and the range is widened to at least one decade.
    pub tau_min_factor: f64,
    pub tau_max_factor: f64,
    /// Memory lifetimes come from the `noise` section.
    pub nucleus: LifetimeModel,
    pub electron: LifetimeModel,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            n_list: vec![1, 2, 4, 8, 16, 32, 64, 128, 256],
            modes: vec![ScanMode::Memory, ScanMode::Nucleus, ScanMode::Electron],
            points: 12,
            tau_min_factor: 0.05,
            tau_max_factor: 3.0,
            nucleus: LifetimeModel::anchored(80e-3, 0.28, 2.0),
            electron: LifetimeModel::anchored(80e-3, 0.75, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftScanConfig {
    /// Delays after the end of the RF pulse, s.
    pub delays: Vec<f64>,
    pub ramsey: RamseyConfig,
}

impl Default for ShiftScanConfig {
    fn default() -> Self {
        Self {
            delays: (0..=20).map(|k| 25e-6 * k as f64).collect(),
            ramsey: RamseyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Drives every random stream; required unless the run is analytic
    /// without Monte Carlo.
    pub seed: Option<u64>,
    pub donor: DonorParams,
    pub noise: NoiseConfig,
    pub shift: ShiftModel,
    pub sequence: SequenceConfig,
    pub tomography: TomographyPlan,
    /// Inputs for `state-tomo`.
    pub inputs: Vec<InputState>,
    /// Monte Carlo samples for process tomography; 0 disables.
    pub mc_samples: usize,
    pub mc_mode: McMode,
    /// Exact expectation values instead of sampled shots.
    pub analytic: bool,
    /// Choose the recovery RF phase so a stored `+X` comes back on `+X`.
    pub calibrate_recovery: bool,
    pub coherence: CoherenceConfig,
    pub shift_scan: ShiftScanConfig,
    pub output_dir: PathBuf,
    /// Rayon pool size; does not affect results.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            donor: DonorParams::default(),
            noise: NoiseConfig::default(),
            shift: ShiftModel::default(),
            sequence: SequenceConfig {
                mw_rabi: 50e3,
                mw_carrier_offset: 1.5e3,
                plus_z_two_pi: true,
                ..SequenceConfig::default()
            },
            tomography: TomographyPlan::default(),
            inputs: InputState::PROCESS_SET.to_vec(),
            mc_samples: 2000,
            mc_mode: McMode::DensityElements,
            analytic: false,
            calibrate_recovery: true,
            coherence: CoherenceConfig::default(),
            shift_scan: ShiftScanConfig::default(),
            output_dir: PathBuf::from("out"),
            workers: None,
        }
    }
}

fn at(section: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            path: format!("{section}.{name}"),
            reason,
        },
        other => Error::Config {
            path: section.to_string(),
            reason: other.to_string(),
        },
    })
}

fn config_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(&path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Noise, shift, carrier offset, shot noise and Monte Carlo all
    /// switched off.
    pub fn make_ideal(&mut self) {
        let keep = (self.noise.shots_per_point, self.noise.repetitions);
        self.noise = NoiseConfig::ideal();
        (self.noise.shots_per_point, self.noise.repetitions) = keep;
        self.shift = ShiftModel::none();
        self.sequence.mw_carrier_offset = 0.0;
        self.analytic = true;
        self.mc_samples = 0;
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_for(true)
    }

    /// As [`validate`](Self::validate); without `monte_carlo` the sample
    /// count does not make a seed mandatory.
    pub fn validate_for(&self, monte_carlo: bool) -> Result<()> {
        at("donor", self.donor.validate())?;
        at("noise", self.noise.validate())?;
        at("shift", self.shift.validate())?;
        at("sequence", self.sequence.validate())?;
        at("tomography", self.tomography.validate())?;
        let stochastic = !self.analytic || (monte_carlo && self.mc_samples > 0);
        if stochastic && self.seed.is_none() {
            return Err(config_err("seed", "required for runs with shot noise or Monte Carlo"));
        }
        if self.mc_samples == 1 {
            return Err(config_err("mc_samples", "must be 0 or at least 2"));
        }
        if self.inputs.is_empty() {
            return Err(config_err("inputs", "need at least one input state"));
        }
        if self.workers == Some(0) {
            return Err(config_err("workers", "must be >= 1"));
        }
        let c = &self.coherence;
        if c.n_list.is_empty() || c.n_list.contains(&0) {
            return Err(config_err("coherence.n_list", "need one or more pulse counts >= 1"));
        }
        if c.points < 5 {
            return Err(config_err("coherence.points", "need at least 5 storage times"));
        }
        if !(c.tau_min_factor > 0.0 && c.tau_max_factor > c.tau_min_factor) {
            return Err(config_err("coherence.tau_min_factor", "need 0 < tau_min_factor < tau_max_factor"));
        }
        for (name, m) in [("coherence.nucleus", c.nucleus), ("coherence.electron", c.electron)] {
            if !(m.t2_base > 0.0 && m.alpha > 0.0 && m.alpha <= 4.0 && m.exponent.is_finite()) {
                return Err(config_err(name, "need t2_base > 0, 0 < alpha <= 4 and a finite exponent"));
            }
        }
        let s = &self.shift_scan;
        if s.delays.is_empty() || s.delays.iter().any(|d| !(*d >= 0.0)) {
            return Err(config_err("shift_scan.delays", "need one or more delays >= 0"));
        }
        let r = &s.ramsey;
        for (name, v) in [
            ("shift_scan.ramsey.rf_duration", r.rf_duration),
            ("shift_scan.ramsey.rf_rabi", r.rf_rabi),
            ("shift_scan.ramsey.mw_rabi", r.mw_rabi),
            ("shift_scan.ramsey.ramsey_time", r.ramsey_time),
        ] {
            if !(v > 0.0) {
                return Err(config_err(name, "must be > 0"));
            }
        }
        Ok(())
    }

    /// Seed used for every stream (0 for fully deterministic runs).
    pub fn run_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// SHA-256 of the settings that determine the data: everything except
    /// the output directory and the worker count.
    pub fn config_hash(&self) -> String {
        let mut view = self.clone();
        view.output_dir = PathBuf::new();
        view.workers = None;
        let text = serde_json::to_string(&view).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig {
            seed: Some(5),
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.config_hash(), cfg.config_hash());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str("seed = 3\n[noise]\nreadout_visibility = 0.8\n").unwrap();
        assert_eq!(cfg.noise.readout_visibility, 0.8);
        assert_eq!(cfg.noise.t2star_e, 160e-6);
        cfg.validate().unwrap();
    }

    #[test]
    fn errors_carry_field_paths() {
        let cfg = ExperimentConfig::from_toml_str("seed = 3\n[noise]\nreadout_visibility = 1.5\n").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("noise.readout_visibility"), "{err}");

        let cfg = ExperimentConfig::from_toml_str("seed = 3\n[sequence]\nstorage_time = 1e-6\n").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("sequence.storage_time"));

        let err = ExperimentConfig::from_toml_str("[noise]\nvisibility = 0.5\n").unwrap_err().to_string();
        assert!(err.contains("visibility"), "{err}");
    }

    #[test]
    fn stochastic_runs_need_a_seed() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.validate().unwrap_err().to_string().contains("seed"));
        let mut ideal = ExperimentConfig {
            mc_samples: 0,
            ..ExperimentConfig::default()
        };
        ideal.make_ideal();
        ideal.validate().unwrap();
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            workers: Some(8),
            output_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.config_hash(), b.config_hash());
        let c = ExperimentConfig {
            seed: Some(1),
            ..a.clone()
        };
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn lifetime_anchor() {
        let m = LifetimeModel::anchored(80e-3, 0.36, 2.0);
        assert!((m.t2(256) - 80e-3).abs() < 1e-15);
        assert!((m.t2(1) - 80e-3 / 256f64.powf(0.36)).abs() < 1e-15);
    }
}
