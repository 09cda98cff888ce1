//! Tomography on external measurement records, bypassing simulation.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::noise::ShotRecord;
use crate::qubit::InputState;
use crate::tomography::state::xy_from_records;

use super::config::ExperimentConfig;
use super::output::Output;
use super::tomo::{analyze_process, analyze_process_pair, analyze_state, write_process_files, ProcessRun, ProcessTomoReport, StateResult};

/// One record file with its label and, when known, the nominal input.
#[derive(Debug, Clone)]
pub struct RecordSet {
    pub label: String,
    pub input: Option<InputState>,
    pub records: Vec<ShotRecord>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum IngestReport {
    State { states: Vec<StateResult> },
    /// Memory data only; no init-only runs to deconvolve with.
    Process { memory: ProcessRun },
    ProcessWithInit(ProcessTomoReport),
}

/// State tomography of each set, or with `process` set, process tomography
/// of four memory sets (`+X, +Y, +Z, −Z`) and optionally four init-only
/// sets.
pub fn run_ingest(
    cfg: &ExperimentConfig,
    sets: Vec<RecordSet>,
    init: Option<Vec<RecordSet>>,
    process: bool,
    out: Option<&mut Output>,
) -> Result<IngestReport> {
    // No shots are drawn here, so only Monte Carlo needs a seed.
    ExperimentConfig {
        analytic: true,
        ..cfg.clone()
    }
    .validate_for(process)?;
    if sets.is_empty() {
        return Err(invalid("records", "no record files given"));
    }
    let v = cfg.noise.readout_visibility;
    let xy = |sets: Vec<RecordSet>| -> Result<Vec<_>> { sets.iter().map(|s| xy_from_records(&s.records)).collect() };
    let report = if !process {
        if init.is_some() {
            return Err(invalid("init", "init-only records only apply to process tomography"));
        }
        let states = sets
            .into_iter()
            .map(|s| analyze_state(xy_from_records(&s.records)?, s.input, s.label, "ingested", v))
            .collect::<Result<Vec<_>>>()?;
        IngestReport::State { states }
    } else {
        if sets.len() != 4 || init.as_ref().is_some_and(|i| i.len() != 4) {
            return Err(invalid("records", "process tomography needs 4 files per stage in +X, +Y, +Z, -Z order"));
        }
        match init {
            Some(init) => IngestReport::ProcessWithInit(analyze_process_pair(xy(init)?, xy(sets)?, cfg, None)?),
            None => IngestReport::Process {
                memory: analyze_process("memory", xy(sets)?, cfg)?,
            },
        }
    };
    if let Some(out) = out {
        match &report {
            IngestReport::ProcessWithInit(r) => write_process_files(out, r, cfg)?,
            other => out.json("ingest.json", other)?,
        }
    }
    Ok(report)
}
