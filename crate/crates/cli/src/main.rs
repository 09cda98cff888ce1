use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use donor_memory::experiment::coherence::run_coherence_scan;
use donor_memory::experiment::fit::{run_fit, FitKind, FitOutcome};
use donor_memory::experiment::ingest::{run_ingest, IngestReport, RecordSet};
use donor_memory::experiment::output::load_curve;
use donor_memory::experiment::shift_scan::run_shift_scan;
use donor_memory::experiment::tomo::{run_process_tomo, run_state_tomo};
use donor_memory::experiment::{with_workers, ExperimentConfig, Metadata, Output, ScanMode};
use donor_memory::qubit::InputState;
use donor_memory::records::load_records;

#[derive(Parser)]
#[command(name = "donor-memory", version, about = "Simulate and analyse donor spin memory experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "INT")]
    mc_samples: Option<usize>,
    /// Shots per readout point and repetition.
    #[arg(long, global = true, value_name = "INT")]
    shots: Option<u64>,
    /// Repetitions per readout point.
    #[arg(long, global = true, value_name = "INT")]
    repetitions: Option<u64>,
    /// No noise, no hyperfine shift, exact expectation values.
    #[arg(long, global = true)]
    ideal: bool,
    /// Exact expectation values instead of sampled shots.
    #[arg(long, global = true)]
    analytic: bool,
    #[arg(long, global = true, value_name = "INT")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// XY tomography after initialisation and after the memory sequence.
    StateTomo {
        /// Input states: +X, +Y, +Z or -Z.
        #[arg(long = "input", value_name = "LABEL", allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Process matrices of the init-only and memory sequences.
    ProcessTomo,
    /// Storage-time sweeps with stretched-exponential and power-law fits.
    CoherenceScan {
        /// Decoupling pulse counts.
        #[arg(long, value_delimiter = ',', value_name = "N,...")]
        n: Vec<usize>,
        #[arg(long = "mode", value_enum)]
        modes: Vec<Mode>,
    },
    /// ESR detuning versus delay after an RF pulse.
    ShiftScan,
    /// Tomography on measurement-record CSV files.
    Ingest {
        /// Memory-sequence record files; +X, +Y, +Z, -Z order with --process.
        #[arg(required = true, value_name = "FILE")]
        records: Vec<PathBuf>,
        /// Init-only record files for SPAM deconvolution (with --process).
        #[arg(long, num_args = 1.., value_name = "FILE")]
        init: Vec<PathBuf>,
        #[arg(long)]
        process: bool,
        /// Nominal input of each record file, in order.
        #[arg(long = "input", value_name = "LABEL", allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Fit a model to an `x,y,y_err` curve file.
    Fit {
        #[arg(long, value_enum)]
        kind: Kind,
        curve: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Memory,
    Nucleus,
    Electron,
}

impl From<Mode> for ScanMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Memory => ScanMode::Memory,
            Mode::Nucleus => ScanMode::Nucleus,
            Mode::Electron => ScanMode::Electron,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    StretchedExp,
    PowerLaw,
    Sinusoid,
}

impl From<Kind> for FitKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::StretchedExp => FitKind::StretchedExp,
            Kind::PowerLaw => FitKind::PowerLaw,
            Kind::Sinusoid => FitKind::Sinusoid,
        }
    }
}

fn parse_input(label: &str) -> Result<InputState> {
    InputState::parse(label).with_context(|| format!("unknown input state {label:?}"))
}

fn resolve_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if c.ideal {
        cfg.make_ideal();
    }
    if let Some(seed) = c.seed {
        cfg.seed = Some(seed);
        cfg.noise.rng_seed = seed;
    }
    if let Some(n) = c.mc_samples {
        cfg.mc_samples = n;
    }
    if let Some(n) = c.shots {
        cfg.noise.shots_per_point = n;
    }
    if let Some(n) = c.repetitions {
        cfg.noise.repetitions = n;
    }
    if c.analytic {
        cfg.analytic = true;
    }
    if let Some(dir) = &c.out {
        cfg.output_dir = dir.clone();
    }
    if c.workers.is_some() {
        cfg.workers = c.workers;
    }
    Ok(cfg)
}

/// Output directory with the resolved config written next to the data.
fn open_output(command: &str, cfg: &ExperimentConfig) -> Result<Output> {
    let dir = cfg.output_dir.clone();
    let mut out = Output::new(&dir, Metadata::new(command, cfg)).with_context(|| format!("creating {}", dir.display()))?;
    let mut saved = cfg.clone();
    saved.output_dir = PathBuf::new();
    saved.workers = None;
    let path = dir.join("config.toml");
    std::fs::write(&path, saved.to_toml_string()).with_context(|| format!("writing {}", path.display()))?;
    out.written.push(path);
    Ok(out)
}

fn record_set(path: &Path, input: Option<InputState>) -> Result<RecordSet> {
    let records = load_records(path).with_context(|| format!("reading records {}", path.display()))?;
    let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(RecordSet { label, input, records })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.common)?;
    let command = match &cli.command {
        Command::StateTomo { .. } => "state-tomo",
        Command::ProcessTomo => "process-tomo",
        Command::CoherenceScan { .. } => "coherence-scan",
        Command::ShiftScan => "shift-scan",
        Command::Ingest { .. } => "ingest",
        Command::Fit { .. } => "fit",
    };
    match &cli.command {
        Command::StateTomo { inputs } if !inputs.is_empty() => {
            cfg.inputs = inputs.iter().map(|s| parse_input(s)).collect::<Result<_>>()?;
        }
        Command::CoherenceScan { n, modes } => {
            if !n.is_empty() {
                cfg.coherence.n_list = n.clone();
            }
            if !modes.is_empty() {
                cfg.coherence.modes = modes.iter().map(|&m| m.into()).collect();
            }
        }
        _ => {}
    }
    // ingest validates its own, shot-free view of the config
    if !matches!(command, "fit" | "ingest") {
        cfg.validate_for(command == "process-tomo")?;
    }
    let mut out = open_output(command, &cfg)?;
    let workers = cfg.workers;

    match cli.command {
        Command::StateTomo { .. } => {
            let report = with_workers(workers, || run_state_tomo(&cfg, Some(&mut out)))??;
            for s in &report.states {
                let b = &s.estimate.bloch;
                let f = s.state_fidelity.map_or(String::new(), |f| format!(" fidelity {f:.4}"));
                println!("{:<7} {:<8} bloch ({:+.3}, {:+.3}, {:+.3}){f}", s.kind, s.input, b.x, b.y, b.z);
            }
        }
        Command::ProcessTomo => {
            let report = with_workers(workers, || run_process_tomo(&cfg, Some(&mut out)))??;
            let f = &report.fidelity;
            println!("F_p {:.4} +- {:.4}", f.f_p.value, f.f_p.err);
            println!("F_i {:.4} +- {:.4}", f.f_i.value, f.f_i.err);
            println!("F_m {:.4} +- {:.4}", f.f_m.value, f.f_m.err);
            let (name, w) = report.memory.dominant_error();
            println!("largest memory error {name} {w:.4}");
        }
        Command::CoherenceScan { .. } => {
            let report = with_workers(workers, || run_coherence_scan(&cfg, Some(&mut out)))??;
            for m in &report.modes {
                match (&m.power_law, &m.power_law_error) {
                    (Some(p), _) => println!("{:<8} exponent {:.3} +- {:.3}", m.mode.as_str(), p.exponent, p.exponent_err),
                    (None, e) => println!("{:<8} no power-law fit: {}", m.mode.as_str(), e.as_deref().unwrap_or("")),
                }
            }
        }
        Command::ShiftScan => {
            let report = with_workers(workers, || run_shift_scan(&cfg, Some(&mut out)))??;
            for p in &report.points {
                println!("{:>9.1} us {:>9.1} +- {:.1} Hz", p.delay * 1e6, p.shift, p.shift_err);
            }
        }
        Command::Ingest {
            records,
            init,
            process,
            inputs,
        } => {
            if !inputs.is_empty() && inputs.len() != records.len() {
                bail!("--input given {} times for {} record files", inputs.len(), records.len());
            }
            let labels: Vec<Option<InputState>> = if inputs.is_empty() {
                vec![None; records.len()]
            } else {
                inputs.iter().map(|s| parse_input(s).map(Some)).collect::<Result<_>>()?
            };
            let sets = records
                .iter()
                .zip(labels)
                .map(|(p, i)| record_set(p, i))
                .collect::<Result<Vec<_>>>()?;
            let init = if init.is_empty() {
                None
            } else {
                Some(init.iter().map(|p| record_set(p, None)).collect::<Result<Vec<_>>>()?)
            };
            let report = with_workers(workers, || run_ingest(&cfg, sets, init, process, Some(&mut out)))??;
            match &report {
                IngestReport::State { states } => {
                    for s in states {
                        let b = &s.estimate.bloch;
                        println!("{:<12} bloch ({:+.3}, {:+.3}, {:+.3})", s.input, b.x, b.y, b.z);
                    }
                }
                IngestReport::Process { memory } => println!("chi_II {:.4}", memory.process_fidelity),
                IngestReport::ProcessWithInit(r) => {
                    println!("F_p {:.4} F_i {:.4} F_m {:.4}", r.fidelity.f_p.value, r.fidelity.f_i.value, r.fidelity.f_m.value)
                }
            }
        }
        Command::Fit { kind, curve } => {
            let points = load_curve(&curve).with_context(|| format!("reading curve {}", curve.display()))?;
            let report = run_fit(kind.into(), &points, Some(&mut out))?;
            match &report.fit {
                FitOutcome::StretchedExp(f) => println!(
                    "T2 {:.6} +- {:.6} alpha {:.3} +- {:.3} K {:.4} y0 {:.4}",
                    f.t2, f.t2_err, f.alpha, f.alpha_err, f.k, f.y0
                ),
                FitOutcome::PowerLaw(f) => println!("exponent {:.4} +- {:.4}", f.exponent, f.exponent_err),
                FitOutcome::Sinusoid(f) => println!(
                    "offset {:.4} amplitude {:.4} +- {:.4} phase {:.2} deg",
                    f.offset,
                    f.amplitude,
                    f.amplitude_err,
                    f.phase_deg.unwrap_or(f64::NAN)
                ),
            }
        }
    }
    for path in &out.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
