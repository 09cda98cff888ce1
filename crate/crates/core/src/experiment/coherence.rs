//! Storage-time sweeps for the memory, a bare nucleus and a bare electron,
//! with stretched-exponential fits per curve and a power law over `N`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fitting::{power_law_fit, stretched_exp_fit, PowerLawFit, StretchedExpFit};
use crate::noise::{initialize_state, NoiseConfig, ReadoutBasis};
use crate::qubit::InputState;
use crate::rng;
use crate::sequence::{build_cpmg_sequence, Probe, SequenceConfig};
use crate::simulate::{apply_sequence, Environment};
use crate::tomography::state::{
    calibrate_recovery_phase, measure_point, Preparation, Sampling, SequenceKind, SequencePreparation,
};
use crate::tomography::TomographyPlan;

use super::config::{ExperimentConfig, LifetimeModel, ScanMode};
use super::output::{CurvePoint, Output};

/// Bare single-spin CPMG, read out through the closing π/2 pulse.
struct CpmgPreparation<'a> {
    probe: Probe,
    n: usize,
    tau: f64,
    config: SequenceConfig,
    env: Environment<'a>,
}

impl Preparation for CpmgPreparation<'_> {
    fn up_probability(&self, tomography_phase: Option<f64>) -> Result<f64> {
        let phase = tomography_phase.unwrap_or(0.0);
        let seq = build_cpmg_sequence(self.probe, self.n, self.tau, phase, &self.config, self.env.params)?;
        Ok(apply_sequence(&initialize_state(self.env.noise.init_error)?, &seq, &self.env)?.electron_up_probability())
    }
}

/// Lifetime model a mode is simulated with.
pub fn lifetime_model(cfg: &ExperimentConfig, mode: ScanMode) -> LifetimeModel {
    match mode {
        ScanMode::Memory => LifetimeModel {
            t2_base: cfg.noise.storage_t2_base,
            exponent: cfg.noise.cpmg_exponent,
            alpha: cfg.noise.storage_stretch_alpha,
        },
        ScanMode::Nucleus => cfg.coherence.nucleus,
        ScanMode::Electron => cfg.coherence.electron,
    }
}

fn mode_noise(cfg: &ExperimentConfig, mode: ScanMode) -> NoiseConfig {
    let m = lifetime_model(cfg, mode);
    NoiseConfig {
        storage_t2_base: m.t2_base,
        cpmg_exponent: m.exponent,
        storage_stretch_alpha: m.alpha,
        ..cfg.noise
    }
}

fn decoupling_pulse(cfg: &ExperimentConfig, mode: ScanMode) -> f64 {
    match mode {
        ScanMode::Memory | ScanMode::Nucleus => cfg.sequence.dd_rf_pi,
        ScanMode::Electron => 1.0 / (2.0 * cfg.sequence.mw_rabi),
    }
}

/// Log-spaced storage times around the model `T2(N)`, at least one decade
/// wide and long enough to hold the `N` pulses.
pub fn storage_times(cfg: &ExperimentConfig, mode: ScanMode, n: usize) -> Vec<f64> {
    let c = &cfg.coherence;
    let t2 = lifetime_model(cfg, mode).t2(n);
    let lo = (c.tau_min_factor * t2).max(1.05 * n as f64 * decoupling_pulse(cfg, mode));
    let hi = (c.tau_max_factor * t2).max(10.5 * lo);
    let k = c.points.max(2) - 1;
    (0..=k)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / k as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceCurve {
    pub n: usize,
    /// Model `T2(N)` used in the simulation, s.
    pub t2_model: f64,
    pub points: Vec<CurvePoint>,
    /// Memory mode only, degrees.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub recovery_phase_offsets: Vec<f64>,
    pub fit: Option<StretchedExpFit>,
    pub fit_error: Option<String>,
}

impl CoherenceCurve {
    /// Fitted `T2` when the fit converged and resolved a decay.
    pub fn fitted_t2(&self) -> Option<(f64, f64)> {
        self.fit
            .as_ref()
            .filter(|f| f.converged && !f.degenerate && f.t2.is_finite() && f.t2 > 0.0 && f.t2_err.is_finite())
            .map(|f| (f.t2, f.t2_err))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeScan {
    pub mode: ScanMode,
    pub model: LifetimeModel,
    pub curves: Vec<CoherenceCurve>,
    pub power_law: Option<PowerLawFit>,
    pub power_law_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceReport {
    pub signal: &'static str,
    pub modes: Vec<ModeScan>,
}

struct Point {
    estimate: CurvePoint,
    offset: Option<f64>,
}

fn simulate_point(cfg: &ExperimentConfig, mode: ScanMode, n: usize, k: usize, tau: f64) -> Result<Point> {
    let noise = mode_noise(cfg, mode);
    let env = Environment {
        params: &cfg.donor,
        noise: &noise,
        shift: &cfg.shift,
    };
    let sampling = if cfg.analytic {
        Sampling::Analytic
    } else {
        Sampling::Shots {
            seed: cfg.run_seed(),
            key: vec![rng::label("coherence"), rng::label(mode.as_str()), n as u64],
        }
    };
    let base = SequenceConfig {
        input_state: InputState::PlusX,
        storage_time: tau,
        dd_pulses: n,
        ..cfg.sequence
    };
    let basis = ReadoutBasis::Phase(0.0);
    let (estimate, offset) = match mode.probe() {
        None => {
            let offset = if cfg.calibrate_recovery {
                let plan = TomographyPlan {
                    phases: vec![0.0, 90.0, 180.0, 270.0],
                    include_z: false,
                };
                Some(calibrate_recovery_phase(&base, env, &plan)?)
            } else {
                None
            };
            let prep = SequencePreparation {
                config: SequenceConfig {
                    recovery_phase_offset: offset.unwrap_or(base.recovery_phase_offset),
                    ..base
                },
                kind: SequenceKind::Memory,
                env,
            };
            (measure_point(&prep, basis, k as u64, &noise, &sampling)?.0, offset)
        }
        Some(probe) => {
            let prep = CpmgPreparation {
                probe,
                n,
                tau,
                config: base,
                env,
            };
            (measure_point(&prep, basis, k as u64, &noise, &sampling)?.0, None)
        }
    };
    Ok(Point {
        estimate: CurvePoint {
            x: tau,
            y: estimate.mean,
            y_err: estimate.sem,
        },
        offset,
    })
}

fn fit_curve(points: &[CurvePoint], analytic: bool) -> (Option<StretchedExpFit>, Option<String>) {
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let e: Vec<f64> = if analytic {
        vec![0.0; points.len()]
    } else {
        points.iter().map(|p| p.y_err.max(1e-6)).collect()
    };
    match stretched_exp_fit(&x, &y, &e) {
        Ok(f) => (Some(f), None),
        Err(err) => (None, Some(err.to_string())),
    }
}

fn fit_power_law(curves: &[CoherenceCurve], analytic: bool) -> (Option<PowerLawFit>, Option<String>) {
    let good: Vec<(f64, f64, f64)> = curves
        .iter()
        .filter_map(|c| c.fitted_t2().map(|(t, e)| (c.n as f64, t, if analytic { 0.0 } else { e })))
        .collect();
    let n: Vec<f64> = good.iter().map(|g| g.0).collect();
    let t2: Vec<f64> = good.iter().map(|g| g.1).collect();
    let err: Vec<f64> = good.iter().map(|g| g.2).collect();
    match power_law_fit(&n, &t2, &err) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn run_coherence_scan(cfg: &ExperimentConfig, out: Option<&mut Output>) -> Result<CoherenceReport> {
    cfg.validate_for(false)?;
    let c = &cfg.coherence;
    if c.n_list.is_empty() {
        return Err(invalid("coherence.n_list", "must not be empty"));
    }
    let mut tasks = Vec::new();
    for &mode in &c.modes {
        for &n in &c.n_list {
            for (k, tau) in storage_times(cfg, mode, n).into_iter().enumerate() {
                tasks.push((mode, n, k, tau));
            }
        }
    }
    let points = tasks
        .par_iter()
        .map(|&(mode, n, k, tau)| simulate_point(cfg, mode, n, k, tau))
        .collect::<Result<Vec<_>>>()?;

    let mut modes = Vec::new();
    let mut it = points.into_iter();
    for &mode in &c.modes {
        let model = lifetime_model(cfg, mode);
        let mut curves = Vec::new();
        for &n in &c.n_list {
            let pts: Vec<Point> = it.by_ref().take(c.points.max(2)).collect();
            let points: Vec<CurvePoint> = pts.iter().map(|p| p.estimate).collect();
            let (fit, fit_error) = fit_curve(&points, cfg.analytic);
            curves.push(CoherenceCurve {
                n,
                t2_model: model.t2(n),
                recovery_phase_offsets: pts.iter().filter_map(|p| p.offset).collect(),
                points,
                fit,
                fit_error,
            });
        }
        let (power_law, power_law_error) = fit_power_law(&curves, cfg.analytic);
        modes.push(ModeScan {
            mode,
            model,
            curves,
            power_law,
            power_law_error,
        });
    }
    let report = CoherenceReport {
        signal: "P(up) after the closing pi/2 at phase 0 for a +X input",
        modes,
    };
    if let Some(out) = out {
        write_files(out, &report)?;
    }
    Ok(report)
}

fn write_files(out: &mut Output, report: &CoherenceReport) -> Result<()> {
    for m in &report.modes {
        let name = m.mode.as_str();
        for curve in &m.curves {
            out.curve(
                &format!("coherence_{name}_n{}.csv", curve.n),
                &format!("x=storage time (s) y=P(up) mode={name} N={}", curve.n),
                &curve.points,
            )?;
        }
        let t2: Vec<CurvePoint> = m
            .curves
            .iter()
            .filter_map(|c| c.fitted_t2().map(|(t, e)| CurvePoint { x: c.n as f64, y: t, y_err: e }))
            .collect();
        out.curve(
            &format!("coherence_t2_{name}.csv"),
            &format!("x=N decoupling pulses y=fitted T2 (s) mode={name}"),
            &t2,
        )?;
    }
    out.json("coherence_fits.json", report)
}
