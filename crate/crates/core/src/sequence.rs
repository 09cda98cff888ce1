//! Pulse sequences: the memory protocol and the auxiliary experiments.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pulse::{Channel, Pulse, Transition};
use crate::qubit::InputState;
use crate::spin::DonorParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Init,
    Transfer,
    Storage,
    Recovery,
    Tomography,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Init => "init",
            Stage::Transfer => "transfer",
            Stage::Storage => "storage",
            Stage::Recovery => "recovery",
            Stage::Tomography => "tomography",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Stage::Init, Stage::Transfer, Stage::Storage, Stage::Recovery, Stage::Tomography]
            .into_iter()
            .find(|st| st.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Pulse(Pulse),
    Free(f64),
    Readout,
}

impl EventKind {
    pub fn duration(&self) -> f64 {
        match self {
            EventKind::Pulse(p) => p.duration,
            EventKind::Free(d) => *d,
            EventKind::Readout => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub stage: Stage,
    pub kind: EventKind,
}

/// Events in time order, with stage tags that never go backwards.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseSequence {
    events: Vec<Event>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<Event>) -> Result<Self> {
        let mut seq = Self::new();
        for e in events {
            seq.push(e.stage, e.kind)?;
        }
        Ok(seq)
    }

    pub fn push(&mut self, stage: Stage, kind: EventKind) -> Result<()> {
        if let Some(last) = self.events.last() {
            if stage < last.stage {
                return Err(Error::InvalidSequence(format!(
                    "stage `{}` after `{}`",
                    stage.as_str(),
                    last.stage.as_str()
                )));
            }
        }
        if let EventKind::Free(d) = kind {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidSequence(format!("free evolution of {d} s")));
            }
        }
        self.events.push(Event { stage, kind });
        Ok(())
    }

    pub fn pulse(&mut self, stage: Stage, pulse: Pulse) -> Result<()> {
        self.push(stage, EventKind::Pulse(pulse))
    }

    /// Appends free evolution; zero-length intervals are dropped.
    pub fn wait(&mut self, stage: Stage, duration: f64) -> Result<()> {
        if duration == 0.0 {
            return Ok(());
        }
        self.push(stage, EventKind::Free(duration))
    }

    pub fn readout(&mut self, stage: Stage) -> Result<()> {
        self.push(stage, EventKind::Readout)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.events.iter().map(|e| e.kind.duration()).sum()
    }

    pub fn stage_duration(&self, stage: Stage) -> f64 {
        self.stage_events(stage).map(|e| e.kind.duration()).sum()
    }

    pub fn free_time(&self, stage: Stage) -> f64 {
        self.stage_events(stage)
            .filter_map(|e| match e.kind {
                EventKind::Free(d) => Some(d),
                _ => None,
            })
            .sum()
    }

    pub fn stage_pulses(&self, stage: Stage) -> Vec<Pulse> {
        self.stage_events(stage)
            .filter_map(|e| match e.kind {
                EventKind::Pulse(p) => Some(p),
                _ => None,
            })
            .collect()
    }

    fn stage_events(&self, stage: Stage) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.stage == stage)
    }

    /// Appends `other`, which must start at or after the current stage.
    pub fn extend(&mut self, other: &PulseSequence) -> Result<()> {
        for e in &other.events {
            self.push(e.stage, e.kind)?;
        }
        Ok(())
    }

    /// One line per event: stage, channel, carrier Hz, phase deg, duration s,
    /// Rabi Hz. Free evolution and readout markers use `-` for the pulse
    /// fields.
    pub fn to_timeline(&self) -> String {
        let mut out = String::from("# stage channel carrier_hz phase_deg duration_s rabi_hz\n");
        for e in &self.events {
            let stage = e.stage.as_str();
            let _ = match e.kind {
                EventKind::Pulse(p) => writeln!(
                    out,
                    "{stage} {} {} {} {} {}",
                    p.channel.as_str(),
                    p.carrier,
                    p.phase,
                    p.duration,
                    p.rabi
                ),
                EventKind::Free(d) => writeln!(out, "{stage} FREE - - {d} -"),
                EventKind::Readout => writeln!(out, "{stage} READOUT - - 0 -"),
            };
        }
        out
    }

    pub fn from_timeline(text: &str) -> Result<Self> {
        let mut seq = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::InvalidSequence(format!("timeline line {}: {m}", i + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let stage = Stage::parse(f[0]).ok_or_else(|| bad("unknown stage"))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
            let kind = match f[1] {
                "FREE" => EventKind::Free(num(f[4])?),
                "READOUT" => EventKind::Readout,
                ch => {
                    let channel = match ch {
                        "MW" => Channel::Mw,
                        "RF" => Channel::Rf,
                        _ => return Err(bad("unknown channel")),
                    };
                    EventKind::Pulse(Pulse::new(channel, num(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?)?)
                }
            };
            seq.push(stage, kind)?;
        }
        Ok(seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    pub input_state: InputState,
    /// s.
    pub storage_time: f64,
    pub dd_pulses: usize,
    /// Decoupling phase relative to the transfer RF phase, degrees.
    pub dd_phase_offset: f64,
    /// s.
    pub transfer_rf_pi: f64,
    /// s.
    pub dd_rf_pi: f64,
    /// Phase of the final MW π/2 pulse, degrees; absent for Z readout.
    pub tomography_phase: Option<f64>,
    /// Hz.
    pub mw_rabi: f64,
    /// MW carrier relative to the steady-state ESR line, Hz.
    pub mw_carrier_offset: f64,
    /// Phase of the transfer RF pulse, degrees.
    pub transfer_phase: f64,
    /// Extra phase on the recovery RF pulse, degrees.
    pub recovery_phase_offset: f64,
    /// Prepare `+Z` with a 2π MW pulse instead of no pulse.
    pub plus_z_two_pi: bool,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            input_state: InputState::PlusX,
            storage_time: 196e-6,
            dd_pulses: 2,
            dd_phase_offset: 90.0,
            transfer_rf_pi: 50e-6,
            dd_rf_pi: 97.4e-6,
            tomography_phase: None,
            mw_rabi: 100e3,
            mw_carrier_offset: 0.0,
            transfer_phase: 0.0,
            recovery_phase_offset: 0.0,
            plus_z_two_pi: false,
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("transfer_rf_pi", self.transfer_rf_pi),
            ("dd_rf_pi", self.dd_rf_pi),
            ("mw_rabi", self.mw_rabi),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.storage_time.is_finite() && self.storage_time >= 0.0) {
            return Err(invalid("storage_time", "must be >= 0"));
        }
        let needed = self.dd_pulses as f64 * self.dd_rf_pi;
        if self.storage_time < needed {
            return Err(invalid(
                "storage_time",
                format!(
                    "{} s cannot hold {} pulses of {} s",
                    self.storage_time, self.dd_pulses, self.dd_rf_pi
                ),
            ));
        }
        Ok(())
    }

    fn mw(&self, p: &DonorParams, angle: f64, phase: f64) -> Result<Pulse> {
        Pulse::rotation(Transition::MwUp, p, angle, phase, self.mw_rabi, self.mw_carrier_offset)
    }

    fn rf_pi(&self, p: &DonorParams, duration: f64, phase: f64) -> Result<Pulse> {
        Pulse::rotation(Transition::RfDown, p, PI, phase, 1.0 / (2.0 * duration), 0.0)
    }

    fn init_and_readout(&self, seq: &mut PulseSequence, p: &DonorParams, tail: bool) -> Result<()> {
        if !tail {
            let (angle, phase) = match self.input_state {
                InputState::PlusZ if self.plus_z_two_pi => (2.0 * PI, 0.0),
                s => s.preparation(),
            };
            if angle != 0.0 {
                seq.pulse(Stage::Init, self.mw(p, angle, phase)?)?;
            }
            return Ok(());
        }
        if let Some(phase) = self.tomography_phase {
            seq.pulse(Stage::Tomography, self.mw(p, PI / 2.0, phase)?)?;
        }
        seq.readout(Stage::Tomography)
    }
}

/// Free intervals around `n` pulses of length `tp` centred at
/// `τ/2n, 3τ/2n, …` within `tau`; returns `n + 1` gaps.
pub fn cpmg_gaps(tau: f64, n: usize, tp: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(vec![tau]);
    }
    let slot = tau / n as f64;
    if slot < tp * (1.0 - 1e-12) {
        return Err(invalid(
            "storage_time",
            format!("{tau} s cannot hold {n} pulses of {tp} s"),
        ));
    }
    let inner = (slot - tp).max(0.0);
    let mut gaps = vec![inner / 2.0];
    gaps.extend(std::iter::repeat(inner).take(n - 1));
    gaps.push(inner / 2.0);
    Ok(gaps)
}

fn decoupled_wait(seq: &mut PulseSequence, stage: Stage, gaps: &[f64], pulse: &Pulse) -> Result<()> {
    for (k, gap) in gaps.iter().enumerate() {
        if k > 0 {
            seq.pulse(stage, *pulse)?;
        }
        seq.wait(stage, *gap)?;
    }
    Ok(())
}

/// Initialisation, ENDOR transfer, decoupled storage, recovery and
/// optional tomography pulse, followed by a readout marker.
pub fn build_memory_sequence(cfg: &SequenceConfig, params: &DonorParams) -> Result<PulseSequence> {
    cfg.validate()?;
    let mut seq = PulseSequence::new();
    cfg.init_and_readout(&mut seq, params, false)?;

    let transfer_rf = cfg.rf_pi(params, cfg.transfer_rf_pi, cfg.transfer_phase)?;
    let mw_pi = cfg.mw(params, PI, 0.0)?;
    seq.pulse(Stage::Transfer, transfer_rf)?;
    seq.pulse(Stage::Transfer, mw_pi)?;

    let dd = cfg.rf_pi(params, cfg.dd_rf_pi, cfg.transfer_phase + cfg.dd_phase_offset)?;
    let gaps = cpmg_gaps(cfg.storage_time, cfg.dd_pulses, cfg.dd_rf_pi)?;
    decoupled_wait(&mut seq, Stage::Storage, &gaps, &dd)?;

    let recovery_rf = cfg.rf_pi(
        params,
        cfg.transfer_rf_pi,
        cfg.transfer_phase + cfg.recovery_phase_offset,
    )?;
    seq.pulse(Stage::Recovery, mw_pi)?;
    seq.pulse(Stage::Recovery, recovery_rf)?;

    cfg.init_and_readout(&mut seq, params, true)?;
    Ok(seq)
}

/// Initialisation followed directly by tomography.
pub fn build_init_sequence(cfg: &SequenceConfig, params: &DonorParams) -> Result<PulseSequence> {
    cfg.validate()?;
    let mut seq = PulseSequence::new();
    cfg.init_and_readout(&mut seq, params, false)?;
    cfg.init_and_readout(&mut seq, params, true)?;
    Ok(seq)
}

/// Which spin a bare decoupling experiment probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Probe {
    Electron,
    Nucleus,
}

/// CPMG on a single spin: `π/2`, `n` π pulses at +90°, closing `π/2` at
/// `readout_phase`. The nuclear variant ends with a MW π pulse on the
/// nucleus-`⇓` line so the electron reads out the nuclear state.
pub fn build_cpmg_sequence(
    probe: Probe,
    n: usize,
    tau: f64,
    readout_phase: f64,
    cfg: &SequenceConfig,
    params: &DonorParams,
) -> Result<PulseSequence> {
    let (transition, rabi) = match probe {
        Probe::Electron => (Transition::MwUp, cfg.mw_rabi),
        Probe::Nucleus => (Transition::RfDown, 1.0 / (2.0 * cfg.dd_rf_pi)),
    };
    let offset = if probe == Probe::Electron { cfg.mw_carrier_offset } else { 0.0 };
    let rot = |angle: f64, phase: f64| Pulse::rotation(transition, params, angle, phase, rabi, offset);
    let pi = rot(PI, 90.0)?;
    let gaps = cpmg_gaps(tau, n, pi.duration)?;

    let mut seq = PulseSequence::new();
    seq.pulse(Stage::Init, rot(PI / 2.0, 0.0)?)?;
    decoupled_wait(&mut seq, Stage::Storage, &gaps, &pi)?;
    seq.pulse(Stage::Recovery, rot(PI / 2.0, readout_phase)?)?;
    if probe == Probe::Nucleus {
        let map = Pulse::rotation(Transition::MwDown, params, PI, 0.0, cfg.mw_rabi, cfg.mw_carrier_offset)?;
        seq.pulse(Stage::Recovery, map)?;
    }
    seq.readout(Stage::Tomography)?;
    Ok(seq)
}

/// Ramsey probe of the ESR line `delay` after an RF pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseyConfig {
    /// RF pulse triggering the shift, s; applied on the electron-`↑` NMR line
    /// so it leaves `|↓⇑⟩` untouched.
    pub rf_duration: f64,
    pub rf_rabi: f64,
    /// MW carrier offset from the steady-state line, Hz.
    pub mw_offset: f64,
    pub mw_rabi: f64,
    /// Free time between the two π/2 pulses, s.
    pub ramsey_time: f64,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        Self {
            rf_duration: 50e-6,
            rf_rabi: 10e3,
            mw_offset: 15e3,
            mw_rabi: 1e6,
            ramsey_time: 10e-6,
        }
    }
}

pub fn build_ramsey_sequence(
    delay: Option<f64>,
    readout_phase: f64,
    cfg: &RamseyConfig,
    params: &DonorParams,
) -> Result<PulseSequence> {
    let mut seq = PulseSequence::new();
    if let Some(delay) = delay {
        let rf = Pulse::rotation(
            Transition::RfUp,
            params,
            2.0 * PI * cfg.rf_rabi * cfg.rf_duration,
            0.0,
            cfg.rf_rabi,
            0.0,
        )?;
        seq.pulse(Stage::Transfer, rf)?;
        seq.wait(Stage::Storage, delay)?;
    }
    let half = |phase| Pulse::rotation(Transition::MwUp, params, PI / 2.0, phase, cfg.mw_rabi, cfg.mw_offset);
    seq.pulse(Stage::Tomography, half(0.0)?)?;
    seq.wait(Stage::Tomography, cfg.ramsey_time)?;
    seq.pulse(Stage::Tomography, half(readout_phase)?)?;
    seq.readout(Stage::Tomography)?;
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> DonorParams {
        DonorParams::default()
    }

    #[test]
    fn default_storage_stage_has_one_microsecond_free_time() {
        let cfg = SequenceConfig::default();
        let seq = build_memory_sequence(&cfg, &params()).unwrap();
        let pulses = seq.stage_pulses(Stage::Storage);
        assert_eq!(pulses.len(), 2);
        assert!(pulses.iter().all(|p| (p.duration - 97.4e-6).abs() < 1e-15));
        assert_relative_eq!(seq.stage_duration(Stage::Storage), 196e-6, epsilon = 1e-15);
        let free = seq.free_time(Stage::Storage);
        assert!((free - 1e-6).abs() < 0.5e-6, "free time {free}");
    }

    #[test]
    fn plus_z_has_no_init_pulse() {
        let cfg = SequenceConfig {
            input_state: InputState::PlusZ,
            ..SequenceConfig::default()
        };
        let seq = build_memory_sequence(&cfg, &params()).unwrap();
        assert!(seq.stage_pulses(Stage::Init).is_empty());
        let two_pi = SequenceConfig {
            plus_z_two_pi: true,
            ..cfg
        };
        let seq = build_memory_sequence(&two_pi, &params()).unwrap();
        assert_relative_eq!(seq.stage_pulses(Stage::Init)[0].angle(), 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let cfg = SequenceConfig {
            dd_pulses: 8,
            storage_time: 2e-3,
            tomography_phase: Some(30.0),
            ..SequenceConfig::default()
        };
        let seq = build_memory_sequence(&cfg, &params()).unwrap();
        let by_stage: f64 = [Stage::Init, Stage::Transfer, Stage::Storage, Stage::Recovery, Stage::Tomography]
            .iter()
            .map(|s| seq.stage_duration(*s))
            .sum();
        assert_relative_eq!(seq.total_duration(), by_stage, max_relative = 1e-14);
        let expected = 2.5e-6 + 2.0 * 50e-6 + 2.0 * 5e-6 + 2e-3 + 2.5e-6;
        assert_relative_eq!(seq.total_duration(), expected, max_relative = 1e-12);
    }

    #[test]
    fn dd_pulses_are_centred_on_cpmg_positions() {
        let tau = 1e-3;
        let n = 4;
        let gaps = cpmg_gaps(tau, n, 97.4e-6).unwrap();
        let mut t = 0.0;
        for k in 0..n {
            t += gaps[k];
            let centre = t + 97.4e-6 / 2.0;
            assert_relative_eq!(centre, (2 * k + 1) as f64 * tau / (2 * n) as f64, epsilon = 1e-15);
            t += 97.4e-6;
        }
    }

    #[test]
    fn storage_too_short_is_rejected() {
        let cfg = SequenceConfig {
            storage_time: 150e-6,
            ..SequenceConfig::default()
        };
        assert!(matches!(
            build_memory_sequence(&cfg, &params()),
            Err(Error::InvalidParameter { name: "storage_time", .. })
        ));
    }

    #[test]
    fn dd_phase_is_offset_from_transfer() {
        let cfg = SequenceConfig {
            transfer_phase: 300.0,
            ..SequenceConfig::default()
        };
        let seq = build_memory_sequence(&cfg, &params()).unwrap();
        assert_relative_eq!(seq.stage_pulses(Stage::Storage)[0].phase, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn stage_order_is_enforced() {
        let mut seq = PulseSequence::new();
        seq.wait(Stage::Storage, 1e-6).unwrap();
        assert!(seq.push(Stage::Init, EventKind::Free(1e-6)).is_err());
    }

    #[test]
    fn timeline_round_trips() {
        let cfg = SequenceConfig {
            tomography_phase: Some(15.0),
            ..SequenceConfig::default()
        };
        let seq = build_memory_sequence(&cfg, &params()).unwrap();
        let text = seq.to_timeline();
        assert_eq!(PulseSequence::from_timeline(&text).unwrap(), seq);
        assert!(PulseSequence::from_timeline("init MW 1 0 1").is_err());
    }
}
