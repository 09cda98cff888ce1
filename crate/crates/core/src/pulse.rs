//! Rectangular pulses and free evolution in the doubly-rotating frame.
//!
//! The simulation frame co-rotates with every level at its steady-state
//! secular energy, so without detuning free evolution is the identity.
//! Each drive is treated in the rotating-wave approximation on the single
//! transition it addresses.
//!
//! Phase convention: within the logical frame of the addressed transition
//! (`|0⟩` = the initialised value of the flipped spin) a pulse of phase `φ`
//! rotates about `(−sin φ, cos φ, 0)`, so a `π/2` pulse at `φ = 0` takes
//! `|0⟩` to `|+X⟩`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin::{basis, c, transition_frequencies, ComplexMatrix4, DonorParams};

/// Selectivity window in units of the pulse Rabi frequency.
pub const SELECTIVITY_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "MW")]
    Mw,
    #[serde(rename = "RF")]
    Rf,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Mw => "MW",
            Channel::Rf => "RF",
        }
    }
}

/// One of the four allowed magnetic-dipole transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    /// Electron flip with the nucleus `⇑`.
    MwUp,
    /// Electron flip with the nucleus `⇓`.
    MwDown,
    /// Nuclear flip with the electron `↓`.
    RfDown,
    /// Nuclear flip with the electron `↑`.
    RfUp,
}

impl Transition {
    pub const ALL: [Transition; 4] = [
        Transition::MwUp,
        Transition::MwDown,
        Transition::RfDown,
        Transition::RfUp,
    ];

    /// `(|0⟩, |1⟩)` basis indices of the logical frame.
    pub fn states(self) -> (usize, usize) {
        use basis::*;
        match self {
            Transition::MwUp => (DOWN_UP, UP_UP),
            Transition::MwDown => (DOWN_DOWN, UP_DOWN),
            Transition::RfDown => (DOWN_UP, DOWN_DOWN),
            Transition::RfUp => (UP_UP, UP_DOWN),
        }
    }

    pub fn channel(self) -> Channel {
        match self {
            Transition::MwUp | Transition::MwDown => Channel::Mw,
            Transition::RfDown | Transition::RfUp => Channel::Rf,
        }
    }

    pub fn frequency(self, p: &DonorParams) -> f64 {
        let f = transition_frequencies(p);
        match self {
            Transition::MwUp => f.nu_mw_up,
            Transition::MwDown => f.nu_mw_down,
            Transition::RfDown => f.nu_rf_down,
            Transition::RfUp => f.nu_rf_up,
        }
    }
}

/// Secular steady-state level energies, Hz; these define the frame.
pub(crate) fn frame_energies(p: &DonorParams) -> [f64; 4] {
    let (ez, nz, a) = (p.electron_zeeman(), p.nuclear_zeeman(), p.hyperfine_a);
    [0, 1, 2, 3].map(|k| {
        let (se, sn) = (basis::electron_sign(k), basis::nuclear_sign(k));
        0.5 * se * ez - 0.5 * sn * nz + 0.25 * se * sn * a
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub channel: Channel,
    /// Hz.
    pub carrier: f64,
    /// Degrees, normalised to `[0, 360)`.
    pub phase: f64,
    /// Seconds.
    pub duration: f64,
    /// On-resonance Rabi frequency of the addressed transition, Hz.
    pub rabi: f64,
}

pub fn normalize_phase(deg: f64) -> f64 {
    let p = deg.rem_euclid(360.0);
    if p >= 360.0 {
        0.0
    } else {
        p
    }
}

impl Pulse {
    pub fn new(channel: Channel, carrier: f64, phase: f64, duration: f64, rabi: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(invalid("duration", format!("must be >= 0, got {duration}")));
        }
        if !(rabi.is_finite() && rabi >= 0.0) {
            return Err(invalid("rabi", format!("must be >= 0, got {rabi}")));
        }
        if !(carrier.is_finite() && carrier > 0.0) {
            return Err(invalid("carrier", format!("must be > 0, got {carrier}")));
        }
        if !phase.is_finite() {
            return Err(invalid("phase", "must be finite"));
        }
        Ok(Self {
            channel,
            carrier,
            phase: normalize_phase(phase),
            duration,
            rabi,
        })
    }

    /// Pulse of rotation `angle` (rad) on `transition`, resonant with its
    /// steady-state frequency plus `carrier_offset`.
    pub fn rotation(
        transition: Transition,
        p: &DonorParams,
        angle: f64,
        phase: f64,
        rabi: f64,
        carrier_offset: f64,
    ) -> Result<Self> {
        if rabi <= 0.0 {
            return Err(invalid("rabi", "a rotation needs a positive Rabi frequency"));
        }
        Self::new(
            transition.channel(),
            transition.frequency(p) + carrier_offset,
            phase,
            angle / (2.0 * PI * rabi),
            rabi,
        )
    }

    /// Nominal rotation angle on resonance, rad.
    pub fn angle(&self) -> f64 {
        2.0 * PI * self.rabi * self.duration
    }
}

/// Zeeman-like frequency offsets applied on top of the steady-state frame.
///
/// `electron` shifts both ESR lines by `+electron`; `nuclear` shifts the
/// electron-`↓` NMR line by `+nuclear` and the electron-`↑` line by
/// `−nuclear`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelShift {
    pub electron: f64,
    pub nuclear: f64,
}

impl LevelShift {
    pub const ZERO: LevelShift = LevelShift {
        electron: 0.0,
        nuclear: 0.0,
    };

    pub fn energies(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| {
            0.5 * basis::electron_sign(k) * self.electron - 0.5 * basis::nuclear_sign(k) * self.nuclear
        })
    }

    fn scaled(&self, s: f64) -> LevelShift {
        LevelShift {
            electron: self.electron * s,
            nuclear: self.nuclear * s,
        }
    }

    fn plus(&self, o: &LevelShift) -> LevelShift {
        LevelShift {
            electron: self.electron + o.electron,
            nuclear: self.nuclear + o.nuclear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftShape {
    #[default]
    Exponential,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftTarget {
    #[default]
    Electron,
    ElectronAndNucleus,
}

/// Transient resonance shift following RF pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftModel {
    /// Hz, at zero delay.
    pub peak_detuning: f64,
    /// s.
    pub decay_time: f64,
    pub shape: ShiftShape,
    pub applies_to: ShiftTarget,
    /// Nuclear shift as a fraction of the electron shift.
    pub nuclear_scale: f64,
}

impl Default for ShiftModel {
    fn default() -> Self {
        Self {
            peak_detuning: 10e3,
            decay_time: 100e-6,
            shape: ShiftShape::Exponential,
            applies_to: ShiftTarget::Electron,
            nuclear_scale: 0.0,
        }
    }
}

impl ShiftModel {
    pub fn none() -> Self {
        Self {
            shape: ShiftShape::None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_detuning.is_finite() && self.peak_detuning >= 0.0) {
            return Err(invalid("peak_detuning", "must be >= 0"));
        }
        if !(self.decay_time.is_finite() && self.decay_time > 0.0) {
            return Err(invalid("decay_time", "must be > 0"));
        }
        if !self.nuclear_scale.is_finite() {
            return Err(invalid("nuclear_scale", "must be finite"));
        }
        Ok(())
    }

    fn per_unit(&self) -> LevelShift {
        LevelShift {
            electron: 1.0,
            nuclear: match self.applies_to {
                ShiftTarget::Electron => 0.0,
                ShiftTarget::ElectronAndNucleus => self.nuclear_scale,
            },
        }
    }

    /// Frozen level shift at `since_rf` seconds after the last RF pulse.
    pub fn level_shift_at(&self, since_rf: Option<f64>) -> LevelShift {
        match since_rf {
            Some(t) => self.per_unit().scaled(shift_detuning(t, self)),
            None => LevelShift::ZERO,
        }
    }

    /// `∫ Δ dt` (cycles) over `[since_rf, since_rf + duration]`.
    pub fn integrated(&self, since_rf: Option<f64>, duration: f64) -> LevelShift {
        match since_rf {
            Some(t) => self.per_unit().scaled(integrated_shift_cycles(t, duration, self)),
            None => LevelShift::ZERO,
        }
    }
}

/// Electron resonance shift (Hz, positive) `t` seconds after an RF pulse.
pub fn shift_detuning(t_since_last_rf: f64, model: &ShiftModel) -> f64 {
    match model.shape {
        ShiftShape::None => 0.0,
        ShiftShape::Exponential => model.peak_detuning * (-t_since_last_rf.max(0.0) / model.decay_time).exp(),
    }
}

/// Accumulated shift in cycles between `start` and `start + duration`
/// after the last RF pulse.
pub fn integrated_shift_cycles(start: f64, duration: f64, model: &ShiftModel) -> f64 {
    match model.shape {
        ShiftShape::None => 0.0,
        ShiftShape::Exponential => {
            let tau = model.decay_time;
            let start = start.max(0.0);
            model.peak_detuning * tau * ((-start / tau).exp() - (-(start + duration) / tau).exp())
        }
    }
}

/// Unique transition whose frequency lies within the selectivity window of
/// the carrier.
pub fn addressed_transition(pulse: &Pulse, p: &DonorParams) -> Result<Transition> {
    let window = SELECTIVITY_WINDOW * pulse.rabi;
    let mut hits = Transition::ALL
        .into_iter()
        .filter(|t| t.channel() == pulse.channel)
        .filter(|t| (pulse.carrier - t.frequency(p)).abs() < window);
    match (hits.next(), hits.next()) {
        (Some(t), None) => Ok(t),
        _ => Err(Error::AmbiguousAddressing {
            carrier_hz: pulse.carrier,
        }),
    }
}

/// `exp(−2πi·H·t)` for a Hermitian 2×2 `H`.
fn expm_hermitian2(h: &Matrix2<Complex64>, t: f64) -> Matrix2<Complex64> {
    let h0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let hz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let hx = h[(1, 0)].re;
    let hy = h[(1, 0)].im;
    let norm = (hx * hx + hy * hy + hz * hz).sqrt();
    let theta = 2.0 * PI * norm * t;
    let global = Complex64::from_polar(1.0, -2.0 * PI * h0 * t);
    let (cos, sin) = (theta.cos(), theta.sin());
    let mut u = Matrix2::identity() * c(cos);
    if norm > 0.0 {
        let i = Complex64::new(0.0, 1.0);
        let (nx, ny, nz) = (hx / norm, hy / norm, hz / norm);
        // n·σ with σy = [[0, −i], [i, 0]]
        let ns = Matrix2::new(c(nz), Complex64::new(nx, -ny), Complex64::new(nx, ny), c(-nz));
        u -= ns * (i * sin);
    }
    u * global
}

/// Propagator of a pulse starting at absolute frame time `t0` under the
/// frozen level shift `shift`.
pub(crate) fn pulse_propagator(
    pulse: &Pulse,
    p: &DonorParams,
    shift: &LevelShift,
    t0: f64,
) -> Result<ComplexMatrix4> {
    let transition = addressed_transition(pulse, p)?;
    let (a, b) = transition.states();
    let energies = frame_energies(p);
    let omega_ab = energies[b] - energies[a];
    let sigma = omega_ab.signum();
    let eps = omega_ab - sigma * pulse.carrier;
    let d = shift.energies();
    let t1 = t0 + pulse.duration;

    let g = Complex64::new(0.0, 0.5 * pulse.rabi) * Complex64::from_polar(1.0, pulse.phase.to_radians());
    let h = Matrix2::new(c(d[a] - eps / 2.0), g.conj(), g, c(d[b] + eps / 2.0));
    let core = expm_hermitian2(&h, pulse.duration);
    // Undo the carrier frame: W(t) = exp(−iπ ε t σz_ab), U = W(t1)† U' W(t0).
    let w = |t: f64| [Complex64::from_polar(1.0, PI * eps * t), Complex64::from_polar(1.0, -PI * eps * t)];
    let (w1, w0) = (w(t1), w(t0));
    let block = Matrix2::from_fn(|r, col| w1[r].conj() * core[(r, col)] * w0[col]);

    let mut u = ComplexMatrix4::zeros();
    for k in 0..4 {
        if k != a && k != b {
            u[(k, k)] = Complex64::from_polar(1.0, -2.0 * PI * d[k] * pulse.duration);
        }
    }
    let idx = [a, b];
    for r in 0..2 {
        for col in 0..2 {
            u[(idx[r], idx[col])] = block[(r, col)];
        }
    }
    Ok(u)
}

/// Unitary of `pulse` with its addressed transition detuned by `detuning`
/// Hz from the steady-state line; the other transition block is left
/// untouched.
pub fn pulse_unitary(pulse: &Pulse, params: &DonorParams, detuning: f64) -> Result<ComplexMatrix4> {
    let transition = addressed_transition(pulse, params)?;
    let (a, b) = transition.states();
    let energies = frame_energies(params);
    let signed = (energies[b] - energies[a]).signum() * detuning;
    let shift = match transition.channel() {
        Channel::Mw => LevelShift {
            electron: signed,
            nuclear: 0.0,
        },
        Channel::Rf => LevelShift {
            electron: 0.0,
            nuclear: signed,
        },
    };
    let mut u = pulse_propagator(pulse, params, &shift, 0.0)?;
    for k in (0..4).filter(|&k| k != a && k != b) {
        u[(k, k)] = c(1.0);
    }
    Ok(u)
}

/// Free evolution over `duration` with a static offset `detuning` and the
/// transient shift integrated exactly from `since_rf`.
pub fn free_evolution(
    duration: f64,
    detuning: &LevelShift,
    shift: &ShiftModel,
    since_rf: Option<f64>,
) -> ComplexMatrix4 {
    let cycles = detuning.scaled(duration).plus(&shift.integrated(since_rf, duration));
    let phases = cycles.energies().map(|e| Complex64::from_polar(1.0, -2.0 * PI * e));
    ComplexMatrix4::from_diagonal(&Vector4::from(phases))
}
