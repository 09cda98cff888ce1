//! ESR-line detuning versus delay after an RF pulse, from the Ramsey
//! fringe phase relative to a run without the RF pulse.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::noise::{initialize_state, ReadoutBasis};
use crate::pulse::{integrated_shift_cycles, normalize_phase, shift_detuning};
use crate::rng;
use crate::sequence::{build_ramsey_sequence, RamseyConfig};
use crate::simulate::{apply_sequence, Environment};
use crate::tomography::state::{measure_point, Preparation, Sampling};

use super::config::ExperimentConfig;
use super::output::{CurvePoint, Output};

pub const METHOD: &str = "Ramsey fringe phase of two MW pi/2 pulses detuned by `mw_offset` from the steady-state \
ESR line, read out at closing phases 0 and 90 deg; the detuning is the phase difference to a reference \
without the RF pulse divided by 2 pi times the effective free time.";

struct RamseyPreparation<'a> {
    delay: Option<f64>,
    config: RamseyConfig,
    env: Environment<'a>,
}

impl Preparation for RamseyPreparation<'_> {
    fn up_probability(&self, tomography_phase: Option<f64>) -> Result<f64> {
        let seq = build_ramsey_sequence(self.delay, tomography_phase.unwrap_or(0.0), &self.config, self.env.params)?;
        Ok(apply_sequence(&initialize_state(self.env.noise.init_error)?, &seq, &self.env)?.electron_up_probability())
    }
}

/// Free time plus the phase accrued during two finite π/2 pulses.
pub fn effective_ramsey_time(r: &RamseyConfig) -> f64 {
    let t_half = 1.0 / (4.0 * r.mw_rabi);
    r.ramsey_time + 4.0 * t_half / PI
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Quadratures {
    pub p0: f64,
    pub p0_err: f64,
    pub p90: f64,
    pub p90_err: f64,
}

impl Quadratures {
    /// Fringe phase (deg) and its error.
    pub fn phase(&self) -> (f64, f64) {
        let (x, y) = (2.0 * self.p0 - 1.0, 2.0 * self.p90 - 1.0);
        let (sx, sy) = (2.0 * self.p0_err, 2.0 * self.p90_err);
        let r2 = x * x + y * y;
        let err = ((y * sx).powi(2) + (x * sy).powi(2)).sqrt() / r2;
        (y.atan2(x).to_degrees(), err.to_degrees())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShiftPoint {
    /// After the end of the RF pulse, s.
    pub delay: f64,
    pub quadratures: Quadratures,
    pub phase_deg: f64,
    pub shift: f64,
    pub shift_err: f64,
    /// Model shift averaged over the free-evolution window, Hz.
    pub model_window: f64,
    /// Model shift at the delay itself, Hz.
    pub model_instant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftScanReport {
    pub method: &'static str,
    pub ramsey: RamseyConfig,
    pub effective_time: f64,
    pub reference: Quadratures,
    pub reference_phase_deg: f64,
    /// Line minus carrier seen by the reference, Hz; `−mw_offset` up to
    /// pulse errors.
    pub reference_detuning: f64,
    /// Maps fringe phase to line-minus-carrier frequency.
    pub sign: f64,
    pub points: Vec<ShiftPoint>,
}

fn measure(cfg: &ExperimentConfig, delay: Option<f64>, index: u64) -> Result<Quadratures> {
    let env = Environment {
        params: &cfg.donor,
        noise: &cfg.noise,
        shift: &cfg.shift,
    };
    let prep = RamseyPreparation {
        delay,
        config: cfg.shift_scan.ramsey,
        env,
    };
    let sampling = if cfg.analytic {
        Sampling::Analytic
    } else {
        Sampling::Shots {
            seed: cfg.run_seed(),
            key: vec![rng::label("shift-scan"), index],
        }
    };
    let (a, _) = measure_point(&prep, ReadoutBasis::Phase(0.0), 0, &cfg.noise, &sampling)?;
    let (b, _) = measure_point(&prep, ReadoutBasis::Phase(90.0), 1, &cfg.noise, &sampling)?;
    Ok(Quadratures {
        p0: a.mean,
        p0_err: a.sem,
        p90: b.mean,
        p90_err: b.sem,
    })
}

fn signed_phase(deg: f64) -> f64 {
    let p = normalize_phase(deg);
    if p > 180.0 {
        p - 360.0
    } else {
        p
    }
}

pub fn run_shift_scan(cfg: &ExperimentConfig, out: Option<&mut Output>) -> Result<ShiftScanReport> {
    cfg.validate_for(false)?;
    let r = cfg.shift_scan.ramsey;
    if r.mw_offset == 0.0 {
        return Err(invalid("shift_scan.ramsey.mw_offset", "must be non-zero to fix the phase sign"));
    }
    let delays = &cfg.shift_scan.delays;
    let mut runs: Vec<Option<f64>> = delays.iter().copied().map(Some).collect();
    runs.push(None);
    let mut quads = runs
        .par_iter()
        .enumerate()
        .map(|(k, d)| measure(cfg, *d, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let reference = quads.pop().expect("reference run");

    let t_eff = effective_ramsey_time(&r);
    let (ref_phase, ref_err) = reference.phase();
    let sign = if ref_phase * r.mw_offset > 0.0 { -1.0 } else { 1.0 };
    let to_hz = sign / (360.0 * t_eff);
    let t_half = 1.0 / (4.0 * r.mw_rabi);
    let points = delays
        .iter()
        .zip(&quads)
        .map(|(&delay, q)| {
            let (phase, err) = q.phase();
            ShiftPoint {
                delay,
                quadratures: *q,
                phase_deg: phase,
                shift: to_hz * signed_phase(phase - ref_phase),
                shift_err: (err.powi(2) + ref_err.powi(2)).sqrt() / (360.0 * t_eff),
                model_window: integrated_shift_cycles(delay + t_half, r.ramsey_time, &cfg.shift) / r.ramsey_time,
                model_instant: shift_detuning(delay, &cfg.shift),
            }
        })
        .collect();
    let report = ShiftScanReport {
        method: METHOD,
        ramsey: r,
        effective_time: t_eff,
        reference,
        reference_phase_deg: ref_phase,
        reference_detuning: to_hz * ref_phase,
        sign,
        points,
    };
    if let Some(out) = out {
        write_files(out, &report)?;
    }
    Ok(report)
}

fn write_files(out: &mut Output, report: &ShiftScanReport) -> Result<()> {
    let measured: Vec<CurvePoint> = report
        .points
        .iter()
        .map(|p| CurvePoint {
            x: p.delay,
            y: p.shift,
            y_err: p.shift_err,
        })
        .collect();
    out.curve(
        "shift_scan.csv",
        "x=delay after RF pulse (s) y=ESR detuning (Hz) from Ramsey phase",
        &measured,
    )?;
    let model: Vec<CurvePoint> = report
        .points
        .iter()
        .map(|p| CurvePoint {
            x: p.delay,
            y: p.model_instant,
            y_err: 0.0,
        })
        .collect();
    out.curve("shift_model.csv", "x=delay after RF pulse (s) y=model detuning (Hz)", &model)?;
    out.json("shift_scan.json", report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_phase() {
        let q = Quadratures {
            p0: 0.5,
            p0_err: 0.0,
            p90: 1.0,
            p90_err: 0.0,
        };
        assert!((q.phase().0 - 90.0).abs() < 1e-12);
        assert_eq!(signed_phase(-10.0), -10.0);
        assert_eq!(signed_phase(190.0), -170.0);
    }
}
