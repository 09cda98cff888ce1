//! Phenomenological decoherence, initialisation and single-shot readout.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spin::{basis, c, ComplexMatrix4, DensityMatrix4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageModel {
    /// Stretched-exponential envelope `exp(−(τ/T2(N))^α)` applied to the
    /// stored coherence once per storage stage.
    #[default]
    Envelope,
    /// Per-interval dephasing and static detunings during storage.
    Microscopic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Master switch for all dephasing channels.
    pub dephasing: bool,
    /// Electron free-induction time, s.
    pub t2star_e: f64,
    /// Nuclear free-induction time, s.
    pub t2star_n: f64,
    /// Memory coherence time with a single decoupling pulse, s.
    pub storage_t2_base: f64,
    pub storage_stretch_alpha: f64,
    /// `T2(N) = storage_t2_base · N^cpmg_exponent`.
    pub cpmg_exponent: f64,
    pub storage_model: StorageModel,
    /// Quasi-static frequency offsets during free evolution, Hz.
    pub static_electron_detuning: f64,
    pub static_nuclear_detuning: f64,
    /// Probability of not starting in `|↓⇑⟩`.
    pub init_error: f64,
    pub readout_visibility: f64,
    pub shots_per_point: u64,
    pub repetitions: u64,
    pub rng_seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            dephasing: true,
            t2star_e: 160e-6,
            t2star_n: 5e-3,
            storage_t2_base: 80e-3 / 256f64.powf(0.36),
            storage_stretch_alpha: 2.0,
            cpmg_exponent: 0.36,
            storage_model: StorageModel::Envelope,
            static_electron_detuning: 0.0,
            static_nuclear_detuning: 0.0,
            init_error: 0.0,
            readout_visibility: 0.9,
            shots_per_point: 200,
            repetitions: 25,
            rng_seed: 0,
        }
    }
}

impl NoiseConfig {
    /// No dephasing, perfect initialisation and unit visibility.
    pub fn ideal() -> Self {
        Self {
            dephasing: false,
            static_electron_detuning: 0.0,
            static_nuclear_detuning: 0.0,
            init_error: 0.0,
            readout_visibility: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let times = [
            ("t2star_e", self.t2star_e),
            ("t2star_n", self.t2star_n),
            ("storage_t2_base", self.storage_t2_base),
            ("storage_stretch_alpha", self.storage_stretch_alpha),
        ];
        for (name, v) in times {
            if !(v > 0.0) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !self.cpmg_exponent.is_finite() {
            return Err(invalid("cpmg_exponent", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.readout_visibility) {
            return Err(invalid("readout_visibility", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.init_error) {
            return Err(invalid("init_error", "must lie in [0, 1)"));
        }
        if self.shots_per_point == 0 {
            return Err(invalid("shots_per_point", "must be >= 1"));
        }
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be >= 1"));
        }
        Ok(())
    }

    /// Memory coherence time for `n` decoupling pulses (`n = 0` uses the base).
    pub fn storage_t2(&self, n: usize) -> f64 {
        if n == 0 {
            self.storage_t2_base
        } else {
            cpmg_t2(n, self.storage_t2_base, self.cpmg_exponent).expect("n >= 1")
        }
    }
}

/// `(1 − ε)|↓⇑⟩⟨↓⇑| + (ε/3)·(remaining basis states)`.
pub fn initialize_state(error_prob: f64) -> Result<DensityMatrix4> {
    if !(0.0..1.0).contains(&error_prob) {
        return Err(invalid("error_prob", "must lie in [0, 1)"));
    }
    let mut m = ComplexMatrix4::zeros();
    for k in 0..4 {
        m[(k, k)] = c(if k == basis::DOWN_UP {
            1.0 - error_prob
        } else {
            error_prob / 3.0
        });
    }
    DensityMatrix4::new(m)
}

/// Spin whose phase fluctuates in a dephasing channel.
///
/// Each variant is Gaussian phase noise generated by a diagonal operator
/// `g`; element `(i, j)` is damped by `f^((g_i − g_j)²/4)`, so the
/// addressed coherences get exactly `f` and the map stays completely
/// positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coherence {
    /// `g = σz ⊗ 1`: every element with the electron flipped.
    Electron,
    /// `g = 1 ⊗ σz`: every element with the nucleus flipped.
    Nuclear,
    /// `g = (σz ⊗ 1 + 1 ⊗ σz)/2`: the `|↑⇑⟩–|↓⇓⟩` coherence, with the
    /// single-spin coherences damped by `f^(1/4)`.
    Double,
}

impl Coherence {
    fn generator(self, k: usize) -> f64 {
        let (se, sn) = (basis::electron_sign(k), basis::nuclear_sign(k));
        match self {
            Coherence::Electron => se,
            Coherence::Nuclear => sn,
            Coherence::Double => 0.5 * (se + sn),
        }
    }
}

/// Multiplies the coherences addressed by `coherence` by
/// `exp(−(duration/t2)^alpha)`.
pub fn dephase(
    rho: &DensityMatrix4,
    duration: f64,
    t2: f64,
    alpha: f64,
    coherence: Coherence,
) -> Result<DensityMatrix4> {
    if !(duration >= 0.0) {
        return Err(invalid("duration", "must be >= 0"));
    }
    if !(t2 > 0.0) {
        return Err(invalid("t2", "must be > 0"));
    }
    if !(alpha > 0.0) {
        return Err(invalid("alpha", "must be > 0"));
    }
    Ok(damp(rho, (-(duration / t2).powf(alpha)).exp(), coherence))
}

pub(crate) fn damp(rho: &DensityMatrix4, factor: f64, coherence: Coherence) -> DensityMatrix4 {
    if factor == 1.0 {
        return rho.clone();
    }
    let g = [0, 1, 2, 3].map(|k| coherence.generator(k));
    let mut m = *rho.matrix();
    for i in 0..4 {
        for j in 0..4 {
            let w = (g[i] - g[j]).powi(2) / 4.0;
            if w > 0.0 {
                m[(i, j)] *= factor.powf(w);
            }
        }
    }
    DensityMatrix4::from_propagated(m)
}

/// `t2_base · n^exponent`.
pub fn cpmg_t2(n_pulses: usize, t2_base: f64, exponent: f64) -> Result<f64> {
    if n_pulses == 0 {
        return Err(invalid("n_pulses", "must be >= 1"));
    }
    Ok(t2_base * (n_pulses as f64).powf(exponent))
}

/// Measurement setting of a record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReadoutBasis {
    /// XY-plane basis selected by a tomography pulse of this phase, degrees.
    Phase(f64),
    /// Direct Z readout.
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub basis: ReadoutBasis,
    pub counts_up: u64,
    pub shots: u64,
    pub repetition: u64,
}

impl ShotRecord {
    pub fn new(basis: ReadoutBasis, counts_up: u64, shots: u64, repetition: u64) -> Result<Self> {
        if shots == 0 || counts_up > shots {
            return Err(invalid("counts_up", format!("need 0 <= counts_up <= shots, got {counts_up}/{shots}")));
        }
        Ok(Self {
            basis,
            counts_up,
            shots,
            repetition,
        })
    }

    pub fn fraction(&self) -> f64 {
        self.counts_up as f64 / self.shots as f64
    }
}

/// Click probability seen through a readout of the given visibility.
pub fn reported_probability(p_up: f64, visibility: f64) -> f64 {
    (0.5 + visibility * (p_up - 0.5)).clamp(0.0, 1.0)
}

/// One repetition of `shots_per_point` single-shot electron readouts.
pub fn measure_electron_z<R: Rng + ?Sized>(
    rho: &DensityMatrix4,
    cfg: &NoiseConfig,
    basis: ReadoutBasis,
    repetition: u64,
    rng: &mut R,
) -> ShotRecord {
    sample_record(rho.electron_up_probability(), cfg, basis, repetition, rng)
}

pub(crate) fn sample_record<R: Rng + ?Sized>(
    p_up: f64,
    cfg: &NoiseConfig,
    basis: ReadoutBasis,
    repetition: u64,
    rng: &mut R,
) -> ShotRecord {
    let p = reported_probability(p_up.clamp(0.0, 1.0), cfg.readout_visibility);
    let counts_up = Binomial::new(cfg.shots_per_point, p)
        .expect("probability clamped to [0, 1]")
        .sample(rng);
    ShotRecord {
        basis,
        counts_up,
        shots: cfg.shots_per_point,
        repetition,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Mean of the per-repetition fractions.
    pub mean: f64,
    /// Sample standard deviation across repetitions.
    pub std: f64,
    /// Standard error of `mean`.
    pub sem: f64,
    pub repetitions: usize,
}

impl Estimate {
    pub fn exact(p: f64) -> Self {
        Self {
            mean: p,
            std: 0.0,
            sem: 0.0,
            repetitions: 0,
        }
    }
}

pub fn estimate_probability(records: &[ShotRecord]) -> Result<Estimate> {
    if records.is_empty() {
        return Err(Error::Empty("shot records"));
    }
    let n = records.len() as f64;
    let mean = records.iter().map(ShotRecord::fraction).sum::<f64>() / n;
    let std = if records.len() > 1 {
        (records.iter().map(|r| (r.fraction() - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        std,
        sem: std / n.sqrt(),
        repetitions: records.len(),
    })
}
