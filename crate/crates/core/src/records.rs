//! Measurement-record CSV files.
//!
//! ```text
//! basis,phase_deg,shots,counts_up,repetition
//! XY,0,200,181,0
//! Z,,200,12,0
//! ```
//!
//! Lines starting with `#` are comments. Column order is free.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::{ReadoutBasis, ShotRecord};

pub const HEADER: [&str; 5] = ["basis", "phase_deg", "shots", "counts_up", "repetition"];

pub fn write_records<W: Write>(out: W, records: &[ShotRecord], comments: &[String]) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        let (basis, phase) = match r.basis {
            ReadoutBasis::Phase(p) => ("XY", format!("{p}")),
            ReadoutBasis::Z => ("Z", String::new()),
        };
        w.write_record([
            basis.to_string(),
            phase,
            r.shots.to_string(),
            r.counts_up.to_string(),
            r.repetition.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_records(path: &Path, records: &[ShotRecord], comments: &[String]) -> Result<()> {
    write_records(std::fs::File::create(path)?, records, comments)
}

fn field<'a>(row: &'a csv::StringRecord, idx: usize) -> &'a str {
    row.get(idx).unwrap_or("").trim()
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ShotRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(input);
    let header_line = rdr.position().line().max(1);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 5];
    for (k, name) in HEADER.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| Error::Record {
                line: header_line,
                message: format!("missing column `{name}`"),
            })?;
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Record { line, message };
        let int = |k: usize| -> Result<u64> {
            let text = field(&row, idx[k]);
            text.parse()
                .map_err(|_| bad(format!("`{}` is not a non-negative integer: {text:?}", HEADER[k])))
        };
        let basis = match field(&row, idx[0]) {
            "Z" | "z" => ReadoutBasis::Z,
            "XY" | "xy" => {
                let text = field(&row, idx[1]);
                let phase: f64 = text
                    .parse()
                    .map_err(|_| bad(format!("`phase_deg` is not a number: {text:?}")))?;
                if !(0.0..360.0).contains(&phase) {
                    return Err(bad(format!("`phase_deg` {phase} outside [0, 360)")));
                }
                ReadoutBasis::Phase(phase)
            }
            other => return Err(bad(format!("unknown basis {other:?}, expected XY or Z"))),
        };
        let (shots, counts_up, repetition) = (int(2)?, int(3)?, int(4)?);
        if shots == 0 {
            return Err(bad("`shots` must be positive".into()));
        }
        if counts_up > shots {
            return Err(bad(format!("counts_up {counts_up} exceeds shots {shots}")));
        }
        out.push(ShotRecord::new(basis, counts_up, shots, repetition)?);
    }
    if out.is_empty() {
        return Err(Error::Empty("measurement records"));
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<ShotRecord>> {
    read_records(std::fs::File::open(path)?)
}
