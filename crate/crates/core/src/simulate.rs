//! Density-matrix propagation of a pulse sequence.

use crate::error::Result;
use crate::noise::{damp, Coherence, NoiseConfig, StorageModel};
use crate::pulse::{free_evolution, pulse_propagator, Channel, LevelShift, ShiftModel};
use crate::sequence::{EventKind, PulseSequence, Stage};
use crate::spin::{DensityMatrix4, DonorParams};

/// Physical environment a sequence runs in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment<'a> {
    pub params: &'a DonorParams,
    pub noise: &'a NoiseConfig,
    pub shift: &'a ShiftModel,
}

/// Applies `seq` to `rho0` from left to right.
///
/// Pulses see the resonance shift frozen at their midpoint and no
/// dephasing. Free intervals accrue the integrated shift, the static
/// detunings and, when enabled, T2* dephasing. The shift clock restarts at
/// the end of every RF pulse. In envelope mode the storage stage skips T2*
/// dephasing and instead damps the stored coherence once by
/// `exp(−(τ/T2(N))^α)`.
pub fn apply_sequence(rho0: &DensityMatrix4, seq: &PulseSequence, env: &Environment) -> Result<DensityMatrix4> {
    let noise = env.noise;
    let statics = LevelShift {
        electron: noise.static_electron_detuning,
        nuclear: noise.static_nuclear_detuning,
    };
    let envelope = noise.dephasing && noise.storage_model == StorageModel::Envelope;

    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut since_rf: Option<f64> = None;
    let mut storage = StorageTally::default();

    for event in seq.events() {
        if storage.active && event.stage != Stage::Storage {
            if envelope {
                rho = storage.apply(&rho, noise);
            }
            storage.active = false;
        }
        if event.stage == Stage::Storage {
            storage.active = true;
            storage.duration += event.kind.duration();
        }
        match event.kind {
            EventKind::Pulse(pulse) => {
                let midpoint = since_rf.map(|s| s + pulse.duration / 2.0);
                let shift = env.shift.level_shift_at(midpoint);
                let u = pulse_propagator(&pulse, env.params, &shift, t)?;
                rho = rho.evolve(&u);
                if event.stage == Stage::Storage {
                    storage.pulses += 1;
                    storage.channel = Some(pulse.channel);
                }
                since_rf = match pulse.channel {
                    Channel::Rf => Some(0.0),
                    Channel::Mw => since_rf.map(|s| s + pulse.duration),
                };
            }
            EventKind::Free(d) => {
                let u = free_evolution(d, &statics, env.shift, since_rf);
                rho = rho.evolve(&u);
                let skip = envelope && event.stage == Stage::Storage;
                if noise.dephasing && !skip {
                    rho = free_dephasing(&rho, d, noise);
                }
                since_rf = since_rf.map(|s| s + d);
            }
            EventKind::Readout => {}
        }
        t += event.kind.duration();
    }
    if storage.active && envelope {
        rho = storage.apply(&rho, noise);
    }
    Ok(rho)
}

#[derive(Default)]
struct StorageTally {
    active: bool,
    duration: f64,
    pulses: usize,
    channel: Option<Channel>,
}

impl StorageTally {
    fn apply(&self, rho: &DensityMatrix4, noise: &NoiseConfig) -> DensityMatrix4 {
        let t2 = noise.storage_t2(self.pulses);
        let factor = (-(self.duration / t2).powf(noise.storage_stretch_alpha)).exp();
        let coherence = match self.channel {
            Some(Channel::Mw) => Coherence::Electron,
            _ => Coherence::Nuclear,
        };
        damp(rho, factor, coherence)
    }
}

fn free_dephasing(rho: &DensityMatrix4, d: f64, noise: &NoiseConfig) -> DensityMatrix4 {
    let (ge, gn) = (d / noise.t2star_e, d / noise.t2star_n);
    let rho = damp(rho, (-ge).exp(), Coherence::Electron);
    damp(&rho, (-gn).exp(), Coherence::Nuclear)
}
