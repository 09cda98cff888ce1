//! XY-plane state tomography.
//!
//! A π/2 pulse of phase `φ` followed by Z readout measures
//! `σφ = cos φ σx + sin φ σy`: `P↑(φ) = (1 + v⟨σφ⟩)/2` at visibility `v`.

use nalgebra::{Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::{estimate_probability, initialize_state, reported_probability, sample_record, Estimate, NoiseConfig, ReadoutBasis, ShotRecord};
use crate::pulse::normalize_phase;
use crate::qubit::{electron_qubit, Bloch, InputState, QubitState};
use crate::rng::stream;
use crate::sequence::{build_init_sequence, build_memory_sequence, SequenceConfig};
use crate::simulate::{apply_sequence, Environment};

use super::TomographyPlan;

/// Anything that can report the ideal `|↑⟩` probability after a tomography
/// pulse of the given phase (`None` for direct Z readout).
pub trait Preparation: Sync {
    fn up_probability(&self, tomography_phase: Option<f64>) -> Result<f64>;
}

/// A known electron state measured by ideal tomography pulses.
#[derive(Debug, Clone)]
pub struct StatePreparation(pub QubitState);

impl Preparation for StatePreparation {
    fn up_probability(&self, tomography_phase: Option<f64>) -> Result<f64> {
        let b = self.0.bloch();
        Ok(match tomography_phase {
            Some(phi) => {
                let phi = phi.to_radians();
                0.5 * (1.0 + b.x * phi.cos() + b.y * phi.sin())
            }
            None => 0.5 * (1.0 - b.z),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    InitOnly,
    Memory,
}

/// Simulated protocol run from the initialised register.
#[derive(Debug, Clone, Copy)]
pub struct SequencePreparation<'a> {
    pub config: SequenceConfig,
    pub kind: SequenceKind,
    pub env: Environment<'a>,
}

impl SequencePreparation<'_> {
    pub fn final_state(&self, tomography_phase: Option<f64>) -> Result<crate::spin::DensityMatrix4> {
        let cfg = SequenceConfig {
            tomography_phase,
            ..self.config
        };
        let seq = match self.kind {
            SequenceKind::InitOnly => build_init_sequence(&cfg, self.env.params)?,
            SequenceKind::Memory => build_memory_sequence(&cfg, self.env.params)?,
        };
        apply_sequence(&initialize_state(self.env.noise.init_error)?, &seq, &self.env)
    }

    /// Electron state just before the tomography pulse.
    pub fn output_state(&self) -> Result<QubitState> {
        Ok(electron_qubit(&self.final_state(None)?))
    }
}

impl Preparation for SequencePreparation<'_> {
    fn up_probability(&self, tomography_phase: Option<f64>) -> Result<f64> {
        Ok(self.final_state(tomography_phase)?.electron_up_probability())
    }
}

/// How readout probabilities are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// Exact expectation values (infinite shots).
    Analytic,
    /// Binomial shots from the stream `(seed, key…, point, repetition)`.
    Shots { seed: u64, key: Vec<u64> },
}

/// Per-basis probability estimates of one tomography run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XyData {
    pub phases: Vec<f64>,
    pub estimates: Vec<Estimate>,
    pub z: Option<Estimate>,
    pub records: Vec<ShotRecord>,
}

/// One readout setting: the estimate and, when sampled, its records.
/// `point` selects the stream `(seed, key…, point, repetition)`.
pub fn measure_point(
    prep: &dyn Preparation,
    basis: ReadoutBasis,
    point: u64,
    noise: &NoiseConfig,
    sampling: &Sampling,
) -> Result<(Estimate, Vec<ShotRecord>)> {
    let phase = match basis {
        ReadoutBasis::Phase(p) => Some(p),
        ReadoutBasis::Z => None,
    };
    let p_up = prep.up_probability(phase)?;
    match sampling {
        Sampling::Analytic => Ok((Estimate::exact(reported_probability(p_up, noise.readout_visibility)), Vec::new())),
        Sampling::Shots { seed, key } => {
            let records: Vec<ShotRecord> = (0..noise.repetitions)
                .map(|rep| {
                    let mut k = key.clone();
                    k.extend([point, rep]);
                    sample_record(p_up, noise, basis, rep, &mut stream(*seed, &k))
                })
                .collect();
            Ok((estimate_probability(&records)?, records))
        }
    }
}

pub fn run_xy_tomography(
    prep: &dyn Preparation,
    plan: &TomographyPlan,
    noise: &NoiseConfig,
    sampling: &Sampling,
) -> Result<XyData> {
    plan.validate()?;
    let mut bases: Vec<ReadoutBasis> = plan.phases.iter().map(|p| ReadoutBasis::Phase(*p)).collect();
    if plan.include_z {
        bases.push(ReadoutBasis::Z);
    }
    let mut estimates = Vec::with_capacity(bases.len());
    let mut records = Vec::new();
    for (point, basis) in bases.iter().enumerate() {
        let (estimate, point_records) = measure_point(prep, *basis, point as u64, noise, sampling)?;
        estimates.push(estimate);
        records.extend(point_records);
    }
    let z = plan.include_z.then(|| estimates.pop()).flatten();
    Ok(XyData {
        phases: plan.phases.clone(),
        estimates,
        z,
        records,
    })
}

/// Groups measurement records by basis; phases come out sorted.
pub fn xy_from_records(records: &[ShotRecord]) -> Result<XyData> {
    if records.is_empty() {
        return Err(Error::Empty("measurement records"));
    }
    let mut phases: Vec<f64> = Vec::new();
    for r in records {
        if let ReadoutBasis::Phase(p) = r.basis {
            if !phases.contains(&p) {
                phases.push(p);
            }
        }
    }
    phases.sort_by(f64::total_cmp);
    let select = |b: ReadoutBasis| -> Vec<ShotRecord> { records.iter().filter(|r| r.basis == b).copied().collect() };
    let estimates = phases
        .iter()
        .map(|p| estimate_probability(&select(ReadoutBasis::Phase(*p))))
        .collect::<Result<Vec<_>>>()?;
    let z_records = select(ReadoutBasis::Z);
    let z = if z_records.is_empty() {
        None
    } else {
        Some(estimate_probability(&z_records)?)
    };
    Ok(XyData {
        phases,
        estimates,
        z,
        records: records.to_vec(),
    })
}

/// `offset + amplitude·cos(φ − phase)` fitted linearly as
/// `offset + a cos φ + b sin φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub offset_err: f64,
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// Degrees in `[0, 360)`; `None` when the amplitude is within one
    /// standard error of zero.
    pub phase_deg: Option<f64>,
    pub phase_err_deg: f64,
    /// Cosine and sine coefficients and their covariance.
    pub a: f64,
    pub b: f64,
    pub cov_ab: [[f64; 2]; 2],
    pub chi2: f64,
}

/// Weighted least-squares sinusoid. All-zero errors mean exact data: unit
/// weights and zero parameter errors.
pub fn sinusoid_fit(phases_deg: &[f64], probs: &[f64], errs: &[f64]) -> Result<SinusoidFit> {
    if phases_deg.len() != probs.len() || probs.len() != errs.len() {
        return Err(invalid("phases/probs/errs", "lengths differ"));
    }
    if phases_deg.len() < 4 {
        return Err(invalid("phases", "need at least 4 points"));
    }
    let exact = errs.iter().all(|e| *e == 0.0);
    let floor = errs.iter().copied().filter(|e| *e > 0.0).fold(f64::INFINITY, f64::min);
    let sigma = |e: f64| if exact { 1.0 } else { e.max(floor) };

    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for ((phi, y), e) in phases_deg.iter().zip(probs).zip(errs) {
        let phi = phi.to_radians();
        let row = Vector3::new(1.0, phi.cos(), phi.sin());
        let w = sigma(*e).powi(-2);
        normal += row * row.transpose() * w;
        rhs += row * (w * y);
    }
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::Singular("phases do not determine a sinusoid".into()))?;
    let p = inv * rhs;
    let chi2: f64 = phases_deg
        .iter()
        .zip(probs)
        .zip(errs)
        .map(|((phi, y), e)| {
            let phi = phi.to_radians();
            ((y - p[0] - p[1] * phi.cos() - p[2] * phi.sin()) / sigma(*e)).powi(2)
        })
        .sum();
    let cov = if exact { Matrix3::zeros() } else { inv };

    let (a, b) = (p[1], p[2]);
    let amplitude = a.hypot(b);
    let (amplitude_err, phase_err) = if amplitude > 0.0 {
        let (ca, cb, cab) = (cov[(1, 1)], cov[(2, 2)], cov[(1, 2)]);
        let var_amp = (a * a * ca + b * b * cb + 2.0 * a * b * cab) / (amplitude * amplitude);
        let var_phase = (b * b * ca + a * a * cb - 2.0 * a * b * cab) / amplitude.powi(4);
        (var_amp.max(0.0).sqrt(), var_phase.max(0.0).sqrt().to_degrees())
    } else {
        (cov[(1, 1)].max(cov[(2, 2)]).sqrt(), f64::INFINITY)
    };
    let resolved = if exact {
        amplitude > 1e-12
    } else {
        amplitude > amplitude_err
    };
    Ok(SinusoidFit {
        offset: p[0],
        offset_err: cov[(0, 0)].sqrt(),
        amplitude,
        amplitude_err,
        phase_deg: resolved.then(|| crate::pulse::normalize_phase(b.atan2(a).to_degrees())),
        phase_err_deg: phase_err,
        a,
        b,
        cov_ab: [[cov[(1, 1)], cov[(1, 2)]], [cov[(2, 1)], cov[(2, 2)]]],
        chi2,
    })
}

/// Bloch components with one-sigma errors, before any projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochEstimate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub x_err: f64,
    pub y_err: f64,
    pub z_err: f64,
}

impl BlochEstimate {
    pub fn exact(b: Bloch) -> Self {
        Self {
            x: b.x,
            y: b.y,
            z: b.z,
            x_err: 0.0,
            y_err: 0.0,
            z_err: 0.0,
        }
    }

    pub fn vector(&self) -> Bloch {
        Bloch::new(self.x, self.y, self.z)
    }

    pub fn errors(&self) -> [f64; 3] {
        [self.x_err, self.y_err, self.z_err]
    }
}

/// `⟨σx⟩ = 2A cos φ / v`, `⟨σy⟩ = 2A sin φ / v`, `⟨σz⟩ = (2·p0 − 1)/v`
/// where `p0` is the probability of reading the logical `|0⟩` (`|↓⟩`).
pub fn bloch_from_tomography(fit: &SinusoidFit, p0: Estimate, visibility: f64) -> Result<BlochEstimate> {
    if !(visibility > 0.0 && visibility <= 1.0) {
        return Err(invalid("visibility", "must lie in (0, 1]"));
    }
    Ok(BlochEstimate {
        x: 2.0 * fit.a / visibility,
        y: 2.0 * fit.b / visibility,
        z: (2.0 * p0.mean - 1.0) / visibility,
        x_err: 2.0 * fit.cov_ab[0][0].sqrt() / visibility,
        y_err: 2.0 * fit.cov_ab[1][1].sqrt() / visibility,
        z_err: 2.0 * p0.sem / visibility,
    })
}

/// `(1 + b·σ)/2`, radially rescaled onto the sphere when `|b| > 1`.
pub fn density_from_bloch(b: Bloch) -> QubitState {
    let n = b.norm();
    let b = if n > 1.0 {
        Bloch::new(b.x / n, b.y / n, b.z / n)
    } else {
        b
    };
    QubitState::from_bloch_unchecked(b)
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn state_fidelity(rho: &QubitState, psi: &Vector2<Complex64>) -> f64 {
    rho.fidelity_with(psi).clamp(0.0, 1.0)
}

/// Everything extracted from one state-tomography data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateEstimate {
    pub fit: SinusoidFit,
    pub bloch: BlochEstimate,
    /// Bloch vector after projection.
    pub projected: Bloch,
    pub purity: f64,
}

pub fn reconstruct_state(data: &XyData, visibility: f64) -> Result<StateEstimate> {
    let probs: Vec<f64> = data.estimates.iter().map(|e| e.mean).collect();
    let errs: Vec<f64> = data.estimates.iter().map(|e| e.sem).collect();
    let fit = sinusoid_fit(&data.phases, &probs, &errs)?;
    let z = data.z.ok_or_else(|| invalid("include_z", "Z readout is required for a full state"))?;
    let p0 = Estimate {
        mean: 1.0 - z.mean,
        ..z
    };
    let bloch = bloch_from_tomography(&fit, p0, visibility)?;
    let rho = density_from_bloch(bloch.vector());
    Ok(StateEstimate {
        fit,
        bloch,
        projected: rho.bloch(),
        purity: rho.purity(),
    })
}

/// Recovery RF phase offset (degrees) that zeroes the tomography phase of
/// a stored `+X`, cancelling the deterministic Z rotation picked up from
/// the resonance shift and the carrier offset. Both signs of the measured
/// angle are tried and the better branch is refined by fixed-point
/// iteration.
pub fn calibrate_recovery_phase(config: &SequenceConfig, env: Environment, plan: &TomographyPlan) -> Result<f64> {
    let angle_after = |offset: f64| -> Result<f64> {
        let prep = SequencePreparation {
            config: SequenceConfig {
                input_state: InputState::PlusX,
                recovery_phase_offset: offset,
                ..*config
            },
            kind: SequenceKind::Memory,
            env,
        };
        let data = run_xy_tomography(&prep, plan, env.noise, &Sampling::Analytic)?;
        let probs: Vec<f64> = data.estimates.iter().map(|e| e.mean).collect();
        let fit = sinusoid_fit(&data.phases, &probs, &vec![0.0; probs.len()])?;
        Ok(fit.b.atan2(fit.a).to_degrees())
    };
    let wrap = |a: f64| {
        let a = normalize_phase(a);
        if a > 180.0 {
            a - 360.0
        } else {
            a
        }
    };
    let a0 = angle_after(0.0)?;
    let mut best = (0.0, a0);
    for sign in [-1.0, 1.0] {
        let mut offset = wrap(sign * a0);
        let mut angle = angle_after(offset)?;
        for _ in 0..6 {
            if angle.abs() < 1e-6 {
                break;
            }
            offset = wrap(offset + sign * angle);
            angle = angle_after(offset)?;
        }
        if angle.abs() < best.1.abs() {
            best = (offset, angle);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::InputState;
    use crate::rng;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    fn ideal_noise() -> NoiseConfig {
        NoiseConfig::ideal()
    }

    fn curve(state: InputState) -> XyData {
        let prep = StatePreparation(QubitState::of(state));
        run_xy_tomography(&prep, &TomographyPlan::default(), &ideal_noise(), &Sampling::Analytic).unwrap()
    }

    #[test]
    fn plus_x_is_cosine() {
        let d = curve(InputState::PlusX);
        for (phi, e) in d.phases.iter().zip(&d.estimates) {
            assert_relative_eq!(e.mean, 0.5 * (1.0 + phi.to_radians().cos()), epsilon = 1e-14);
        }
    }

    #[test]
    fn plus_z_is_flat_and_plus_y_peaks_at_90() {
        let z = curve(InputState::PlusZ);
        assert!(z.estimates.iter().all(|e| (e.mean - 0.5).abs() < 1e-14));
        let y = curve(InputState::PlusY);
        let best = y
            .estimates
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .unwrap()
            .0;
        assert_eq!(y.phases[best], 90.0);
    }

    #[test]
    fn sinusoid_exact_cases() {
        let d = curve(InputState::PlusX);
        let probs: Vec<f64> = d.estimates.iter().map(|e| e.mean).collect();
        let fit = sinusoid_fit(&d.phases, &probs, &vec![0.0; 24]).unwrap();
        assert_relative_eq!(fit.amplitude, 0.5, epsilon = 1e-14);
        assert_relative_eq!(fit.offset, 0.5, epsilon = 1e-14);
        assert!(fit.phase_deg.unwrap().min(360.0 - fit.phase_deg.unwrap()) < 1e-10);

        let flat = sinusoid_fit(&d.phases, &vec![0.5; 24], &vec![0.0; 24]).unwrap();
        assert!(flat.amplitude < 1e-14);
        assert!(flat.phase_deg.is_none());
        assert!(sinusoid_fit(&[0.0, 90.0, 180.0], &[0.5; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn sinusoid_noisy_recovery_within_three_sigma() {
        let phases = TomographyPlan::default().phases;
        let normal = Normal::new(0.0, 0.01).unwrap();
        let mut hits = 0;
        for trial in 0..40 {
            let mut r = rng::stream(17, &[trial]);
            let y: Vec<f64> = phases
                .iter()
                .map(|p| 0.5 + 0.4 * (p - 37.0f64).to_radians().cos() + normal.sample(&mut r))
                .collect();
            let fit = sinusoid_fit(&phases, &y, &vec![0.01; 24]).unwrap();
            let ok_amp = (fit.amplitude - 0.4).abs() < 3.0 * fit.amplitude_err;
            let ok_phase = (fit.phase_deg.unwrap() - 37.0).abs() < 3.0 * fit.phase_err_deg;
            if ok_amp && ok_phase {
                hits += 1;
            }
        }
        assert!(hits >= 38, "{hits}/40 within 3σ");
    }

    #[test]
    fn bloch_examples() {
        let fit = |a: f64, b: f64| SinusoidFit {
            offset: 0.5,
            offset_err: 0.0,
            amplitude: a.hypot(b),
            amplitude_err: 0.0,
            phase_deg: None,
            phase_err_deg: 0.0,
            a,
            b,
            cov_ab: [[0.0; 2]; 2],
            chi2: 0.0,
        };
        let half = Estimate::exact(0.5);
        let b = bloch_from_tomography(&fit(0.5, 0.0), half, 1.0).unwrap();
        assert_eq!((b.x, b.y, b.z), (1.0, 0.0, 0.0));
        let b = bloch_from_tomography(&fit(0.0, 0.25), half, 0.5).unwrap();
        assert_relative_eq!(b.y, 1.0);
        assert!(bloch_from_tomography(&fit(0.0, 0.0), half, 0.0).is_err());
    }

    #[test]
    fn density_examples() {
        let down = density_from_bloch(Bloch::new(0.0, 0.0, 1.0));
        assert_relative_eq!(down.matrix()[(0, 0)].re, 1.0);
        let mixed = density_from_bloch(Bloch::new(0.0, 0.0, 0.0));
        assert_relative_eq!(mixed.purity(), 0.5);
        let over = density_from_bloch(Bloch::new(1.2, 0.0, 0.0));
        assert_relative_eq!(state_fidelity(&over, &InputState::PlusX.ket()), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let psi = InputState::PlusY.ket();
        assert_relative_eq!(state_fidelity(&QubitState::pure(psi), &psi), 1.0, epsilon = 1e-15);
        let mixed = QubitState::from_bloch_unchecked(Bloch::new(0.0, 0.0, 0.0));
        assert_relative_eq!(state_fidelity(&mixed, &psi), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn visibility_is_undone_in_reconstruction() {
        let noise = NoiseConfig {
            readout_visibility: 0.8,
            ..NoiseConfig::ideal()
        };
        let target = QubitState::of(InputState::Custom {
            theta: 1.0,
            phi_deg: 200.0,
        });
        let d = run_xy_tomography(&StatePreparation(target.clone()), &TomographyPlan::default(), &noise, &Sampling::Analytic).unwrap();
        let est = reconstruct_state(&d, 0.8).unwrap();
        let b = target.bloch();
        assert_relative_eq!(est.bloch.x, b.x, epsilon = 1e-12);
        assert_relative_eq!(est.bloch.y, b.y, epsilon = 1e-12);
        assert_relative_eq!(est.bloch.z, b.z, epsilon = 1e-12);
    }

    #[test]
    fn sampled_run_round_trips_through_records() {
        let noise = NoiseConfig::default();
        let prep = StatePreparation(QubitState::of(InputState::PlusX));
        let sampling = Sampling::Shots { seed: 3, key: vec![1] };
        let d = run_xy_tomography(&prep, &TomographyPlan::default(), &noise, &sampling).unwrap();
        assert_eq!(d.records.len(), 25 * 25);
        let back = xy_from_records(&d.records).unwrap();
        assert_eq!(back.phases, d.phases);
        assert_eq!(back.estimates, d.estimates);
        assert_eq!(back.z, d.z);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sinusoid_fit_is_phase_covariant(delta in 0.0f64..360.0, amp in 0.05f64..0.5, phase in 0.0f64..360.0, seed in 0u64..100) {
                let normal = Normal::new(0.0, 0.01).unwrap();
                let mut r = rng::stream(seed, &[]);
                let phases: Vec<f64> = TomographyPlan::default().phases;
                let noise: Vec<f64> = phases.iter().map(|_| normal.sample(&mut r)).collect();
                let y = |shift: f64| -> Vec<f64> {
                    phases.iter().zip(&noise).map(|(p, n)| 0.5 + amp * (p - phase - shift).to_radians().cos() + n).collect()
                };
                let shifted: Vec<f64> = phases.iter().map(|p| p + delta).collect();
                let a = sinusoid_fit(&phases, &y(0.0), &vec![0.01; 24]).unwrap();
                let b = sinusoid_fit(&shifted, &y(0.0), &vec![0.01; 24]).unwrap();
                prop_assert!((a.amplitude - b.amplitude).abs() < 1e-9);
                let d = (b.phase_deg.unwrap() - a.phase_deg.unwrap() - delta).rem_euclid(360.0);
                prop_assert!(d.min(360.0 - d) < 1e-7);
            }
        }
    }
}
