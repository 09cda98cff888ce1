//! State and process tomography runs, simulated or from records.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qubit::InputState;
use crate::rng;
use crate::sequence::SequenceConfig;
use crate::simulate::Environment;
use crate::tomography::fidelity::{ratio_std, FidelityReport, StateFidelities, Value};
use crate::tomography::mle::MleResult;
use crate::tomography::montecarlo::{bootstrap_errors, monte_carlo_errors, output_sigma, McMode, McSummary};
use crate::tomography::process::{process_tomography, standard_inputs, to_conventional, ChiMatrix, Physicality, BASIS_LABELS};
use crate::tomography::state::{
    calibrate_recovery_phase, density_from_bloch, reconstruct_state, run_xy_tomography, state_fidelity, Sampling,
    SequenceKind, SequencePreparation, StateEstimate, XyData,
};

use super::config::ExperimentConfig;
use super::output::{CurvePoint, Output};

pub fn kind_name(kind: SequenceKind) -> &'static str {
    match kind {
        SequenceKind::InitOnly => "init",
        SequenceKind::Memory => "memory",
    }
}

/// File-name friendly label: `+X` → `plus_x`.
pub fn input_slug(input: &InputState) -> String {
    match input {
        InputState::PlusX => "plus_x".into(),
        InputState::PlusY => "plus_y".into(),
        InputState::PlusZ => "plus_z".into(),
        InputState::MinusZ => "minus_z".into(),
        InputState::Custom { .. } => format!("custom_{:08x}", rng::label(&input.label()) & 0xffff_ffff),
    }
}

/// Sequence settings after the optional recovery calibration.
pub fn effective_sequence(cfg: &ExperimentConfig) -> Result<(SequenceConfig, Option<f64>)> {
    let env = Environment {
        params: &cfg.donor,
        noise: &cfg.noise,
        shift: &cfg.shift,
    };
    if cfg.calibrate_recovery {
        let offset = calibrate_recovery_phase(&cfg.sequence, env, &cfg.tomography)?;
        Ok((
            SequenceConfig {
                recovery_phase_offset: offset,
                ..cfg.sequence
            },
            Some(offset),
        ))
    } else {
        Ok((cfg.sequence, None))
    }
}

/// Simulated XY tomography of one input after one sequence kind.
pub fn simulate_xy(cfg: &ExperimentConfig, seq: &SequenceConfig, kind: SequenceKind, input: InputState) -> Result<XyData> {
    let env = Environment {
        params: &cfg.donor,
        noise: &cfg.noise,
        shift: &cfg.shift,
    };
    let prep = SequencePreparation {
        config: SequenceConfig {
            input_state: input,
            ..*seq
        },
        kind,
        env,
    };
    let sampling = if cfg.analytic {
        Sampling::Analytic
    } else {
        Sampling::Shots {
            seed: cfg.run_seed(),
            key: vec![rng::label("tomography"), rng::label(kind_name(kind)), rng::label(&input.label())],
        }
    };
    run_xy_tomography(&prep, &cfg.tomography, &cfg.noise, &sampling)
}

#[derive(Debug, Clone, Serialize)]
pub struct StateResult {
    pub input: String,
    pub kind: String,
    pub estimate: StateEstimate,
    /// Against the nominal input, when known.
    pub state_fidelity: Option<f64>,
    #[serde(skip)]
    pub data: XyData,
}

impl StateResult {
    pub fn curve(&self) -> Vec<CurvePoint> {
        self.data
            .phases
            .iter()
            .zip(&self.data.estimates)
            .map(|(p, e)| CurvePoint {
                x: *p,
                y: e.mean,
                y_err: e.sem,
            })
            .collect()
    }
}

pub fn analyze_state(data: XyData, input: Option<InputState>, label: String, kind: &str, visibility: f64) -> Result<StateResult> {
    let estimate = reconstruct_state(&data, visibility)?;
    let rho = density_from_bloch(estimate.bloch.vector());
    Ok(StateResult {
        input: label,
        kind: kind.to_string(),
        state_fidelity: input.map(|i| state_fidelity(&rho, &i.ket())),
        estimate,
        data,
    })
}

fn write_state_files(out: &mut Output, s: &StateResult, slug: &str) -> Result<()> {
    out.curve(
        &format!("xy_{}_{slug}.csv", s.kind),
        &format!("x=tomography phase (deg) y=P(up) input={} stage={}", s.input, s.kind),
        &s.curve(),
    )?;
    if !s.data.records.is_empty() {
        out.records(&format!("records_{}_{slug}.csv", s.kind), &s.data.records)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct StateTomoReport {
    pub recovery_phase_offset: Option<f64>,
    pub states: Vec<StateResult>,
}

/// XY tomography of every configured input, before and after the memory.
pub fn run_state_tomo(cfg: &ExperimentConfig, out: Option<&mut Output>) -> Result<StateTomoReport> {
    cfg.validate_for(false)?;
    let (seq, offset) = effective_sequence(cfg)?;
    let tasks: Vec<(SequenceKind, InputState)> = [SequenceKind::InitOnly, SequenceKind::Memory]
        .iter()
        .flat_map(|k| cfg.inputs.iter().map(move |i| (*k, *i)))
        .collect();
    let states = tasks
        .par_iter()
        .map(|(kind, input)| {
            let data = simulate_xy(cfg, &seq, *kind, *input)?;
            analyze_state(data, Some(*input), input.label(), kind_name(*kind), cfg.noise.readout_visibility)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = StateTomoReport {
        recovery_phase_offset: offset,
        states,
    };
    if let Some(out) = out {
        for (s, (_, input)) in report.states.iter().zip(&tasks) {
            write_state_files(out, s, &input_slug(input))?;
        }
        out.json("state_tomo.json", &report)?;
    }
    Ok(report)
}

/// χ as separate real and imaginary 4×4 arrays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiParts {
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

impl From<&ChiMatrix> for ChiParts {
    fn from(chi: &ChiMatrix) -> Self {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for m in 0..4 {
            for n in 0..4 {
                re[m][n] = chi[(m, n)].re;
                im[m][n] = chi[(m, n)].im;
            }
        }
        Self { re, im }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcessRun {
    pub kind: String,
    pub states: Vec<StateResult>,
    /// `χ_II` of the projected χ.
    pub process_fidelity: f64,
    pub chi: ChiParts,
    pub chi_raw: ChiParts,
    /// The projected χ in the `{I, X, Y, Z}` basis.
    pub chi_conventional: ChiParts,
    pub physicality: Physicality,
    pub physicality_raw: Physicality,
    pub mle: MleResult,
    pub mc: Option<McSummary>,
    #[serde(skip)]
    pub chi_matrix: ChiMatrix,
}

impl ProcessRun {
    /// `(label, χ_kk)` of the largest non-identity diagonal element.
    pub fn dominant_error(&self) -> (&'static str, f64) {
        (1..4)
            .map(|k| (BASIS_LABELS[k], self.chi.re[k][k]))
            .fold(("", f64::MIN), |best, c| if c.1 > best.1 { c } else { best })
    }
}

/// Process tomography on four XY data sets in `+X, +Y, +Z, −Z` order.
pub fn analyze_process(kind: &str, data: Vec<XyData>, cfg: &ExperimentConfig) -> Result<ProcessRun> {
    if data.len() != 4 {
        return Err(invalid("records", format!("process tomography needs 4 data sets, got {}", data.len())));
    }
    let v = cfg.noise.readout_visibility;
    let states = data
        .into_iter()
        .zip(InputState::PROCESS_SET)
        .map(|(d, input)| analyze_state(d, Some(input), input.label(), kind, v))
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<_> = states
        .iter()
        .map(|s| *density_from_bloch(s.estimate.bloch.vector()).matrix())
        .collect();
    let sigmas: Vec<_> = states.iter().map(|s| output_sigma(&s.estimate.bloch)).collect();
    let fit = process_tomography(&standard_inputs(), &outputs, &sigmas)?;
    let key = [rng::label("monte-carlo"), rng::label(kind)];
    let mc = match (cfg.mc_samples, cfg.mc_mode) {
        (0, _) => None,
        (n, McMode::DensityElements) => {
            let blochs: Vec<_> = states.iter().map(|s| s.estimate.bloch).collect();
            Some(monte_carlo_errors(&blochs, n, cfg.run_seed(), &key)?)
        }
        (n, McMode::CountsBootstrap) => {
            let records: Vec<_> = states.iter().map(|s| s.data.records.clone()).collect();
            if records.iter().any(Vec::is_empty) {
                return Err(invalid("mc_mode", "counts bootstrap needs shot records"));
            }
            Some(bootstrap_errors(&records, v, n, cfg.run_seed(), &key)?)
        }
    };
    Ok(ProcessRun {
        kind: kind.to_string(),
        process_fidelity: fit.process_fidelity(),
        chi: (&fit.chi).into(),
        chi_raw: (&fit.raw).into(),
        chi_conventional: (&to_conventional(&fit.chi)).into(),
        physicality: Physicality::of(&fit.chi),
        physicality_raw: Physicality::of(&fit.raw),
        chi_matrix: fit.chi,
        mle: fit.mle,
        mc,
        states,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcessTomoReport {
    pub recovery_phase_offset: Option<f64>,
    pub init: ProcessRun,
    pub memory: ProcessRun,
    pub fidelity: FidelityReport,
}

/// SPAM deconvolution of a memory run by an init-only run.
pub fn fidelity_report(init: &ProcessRun, memory: &ProcessRun) -> Result<FidelityReport> {
    let err = |run: &ProcessRun, f: &dyn Fn(&McSummary) -> f64| run.mc.as_ref().map_or(0.0, f);
    let mut states = Vec::with_capacity(4);
    for k in 0..4 {
        let sf = |run: &ProcessRun| {
            Value::new(
                run.states[k].state_fidelity.unwrap_or(f64::NAN),
                err(run, &|m| m.state_fidelity_std[k]),
            )
        };
        let mut row = StateFidelities::new(init.states[k].input.clone(), sf(init), sf(memory))?;
        if let (Some(a), Some(b)) = (&memory.mc, &init.mc) {
            let num: Vec<f64> = a.samples.iter().map(|s| s.state_fidelities[k]).collect();
            let den: Vec<f64> = b.samples.iter().map(|s| s.state_fidelities[k]).collect();
            row.sf_memory_mc_err = Some(ratio_std(&num, &den));
        }
        states.push(row);
    }
    let f_p = Value::new(memory.process_fidelity, err(memory, &|m| m.chi_ii_std));
    let f_i = Value::new(init.process_fidelity, err(init, &|m| m.chi_ii_std));
    let mut report = FidelityReport::new(states, f_p, f_i)?;
    if let (Some(a), Some(b)) = (&memory.mc, &init.mc) {
        let num: Vec<f64> = a.samples.iter().map(|s| s.chi_ii).collect();
        let den: Vec<f64> = b.samples.iter().map(|s| s.chi_ii).collect();
        report.f_m_mc_err = Some(ratio_std(&num, &den));
    }
    Ok(report)
}

pub fn analyze_process_pair(
    init: Vec<XyData>,
    memory: Vec<XyData>,
    cfg: &ExperimentConfig,
    recovery_phase_offset: Option<f64>,
) -> Result<ProcessTomoReport> {
    let (init, memory) = rayon::join(
        || analyze_process("init", init, cfg),
        || analyze_process("memory", memory, cfg),
    );
    let (init, memory) = (init?, memory?);
    Ok(ProcessTomoReport {
        recovery_phase_offset,
        fidelity: fidelity_report(&init, &memory)?,
        init,
        memory,
    })
}

#[derive(Serialize)]
struct ChiDocument<'a> {
    basis_order: [&'static str; 4],
    convention: &'static str,
    init: ChiEntry<'a>,
    memory: ChiEntry<'a>,
}

#[derive(Serialize)]
struct ChiEntry<'a> {
    process_fidelity: f64,
    chi: &'a ChiParts,
    chi_raw: &'a ChiParts,
    chi_conventional: &'a ChiParts,
    physicality: &'a Physicality,
    physicality_raw: &'a Physicality,
    mle: &'a MleResult,
}

impl<'a> From<&'a ProcessRun> for ChiEntry<'a> {
    fn from(r: &'a ProcessRun) -> Self {
        Self {
            process_fidelity: r.process_fidelity,
            chi: &r.chi,
            chi_raw: &r.chi_raw,
            chi_conventional: &r.chi_conventional,
            physicality: &r.physicality,
            physicality_raw: &r.physicality_raw,
            mle: &r.mle,
        }
    }
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    basis_order: [&'static str; 4],
    mc_samples: usize,
    mc_mode: McMode,
    init: Option<ErrorEntry<'a>>,
    memory: Option<ErrorEntry<'a>>,
}

#[derive(Serialize)]
struct ErrorEntry<'a> {
    chi_re_std: &'a [[f64; 4]; 4],
    chi_im_std: &'a [[f64; 4]; 4],
    chi_ii_std: f64,
    state_fidelity_std: &'a [f64; 4],
    worst_physicality: &'a Physicality,
    unconverged: usize,
}

impl<'a> ErrorEntry<'a> {
    fn of(run: &'a ProcessRun) -> Option<Self> {
        run.mc.as_ref().map(|m| Self {
            chi_re_std: &m.chi_re_std,
            chi_im_std: &m.chi_im_std,
            chi_ii_std: m.chi_ii_std,
            state_fidelity_std: &m.state_fidelity_std,
            worst_physicality: &m.worst,
            unconverged: m.unconverged,
        })
    }
}

#[derive(Serialize)]
struct StatesDocument<'a> {
    recovery_phase_offset: Option<f64>,
    init: &'a [StateResult],
    memory: &'a [StateResult],
}

pub fn write_process_files(out: &mut Output, report: &ProcessTomoReport, cfg: &ExperimentConfig) -> Result<()> {
    for run in [&report.init, &report.memory] {
        for (s, input) in run.states.iter().zip(InputState::PROCESS_SET) {
            write_state_files(out, s, &input_slug(&input))?;
        }
    }
    out.json(
        "chi.json",
        &ChiDocument {
            basis_order: BASIS_LABELS,
            convention: "xi(rho) = sum_mn chi_mn E_m rho E_n^dagger",
            init: (&report.init).into(),
            memory: (&report.memory).into(),
        },
    )?;
    out.json(
        "chi_errors.json",
        &ErrorDocument {
            basis_order: BASIS_LABELS,
            mc_samples: cfg.mc_samples,
            mc_mode: cfg.mc_mode,
            init: ErrorEntry::of(&report.init),
            memory: ErrorEntry::of(&report.memory),
        },
    )?;
    out.json("fidelity.json", &report.fidelity)?;
    out.json(
        "process_states.json",
        &StatesDocument {
            recovery_phase_offset: report.recovery_phase_offset,
            init: &report.init.states,
            memory: &report.memory.states,
        },
    )
}

/// Four-input process tomography of the init-only and memory sequences,
/// with MLE and Monte Carlo errors.
pub fn run_process_tomo(cfg: &ExperimentConfig, out: Option<&mut Output>) -> Result<ProcessTomoReport> {
    cfg.validate()?;
    let (seq, offset) = effective_sequence(cfg)?;
    let tasks: Vec<(SequenceKind, InputState)> = [SequenceKind::InitOnly, SequenceKind::Memory]
        .iter()
        .flat_map(|k| InputState::PROCESS_SET.iter().map(move |i| (*k, *i)))
        .collect();
    let mut data = tasks
        .par_iter()
        .map(|(kind, input)| simulate_xy(cfg, &seq, *kind, *input))
        .collect::<Result<Vec<_>>>()?;
    let memory = data.split_off(4);
    let report = analyze_process_pair(data, memory, cfg, offset)?;
    if let Some(out) = out {
        write_process_files(out, &report, cfg)?;
    }
    Ok(report)
}
