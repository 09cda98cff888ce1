//! Emitted files: JSON documents and `x,y,y_err` curve CSVs, each tagged
//! with the command, config hash and seed.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::ShotRecord;
use crate::records::write_records;

use super::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub analytic: bool,
    pub version: String,
}

impl Metadata {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.config_hash(),
            seed: cfg.seed,
            analytic: cfg.analytic,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn comment_lines(&self) -> Vec<String> {
        vec![format!(
            "command={} config_hash={} seed={} analytic={} version={}",
            self.command,
            self.config_hash,
            self.seed.map_or("none".to_string(), |s| s.to_string()),
            self.analytic,
            self.version
        )]
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    #[serde(flatten)]
    body: &'a T,
}

/// One point of a plotted curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub y_err: f64,
}

/// Writes into one output directory and remembers what it wrote.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    pub metadata: Metadata,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, metadata: Metadata) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metadata,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn create(&mut self, name: &str) -> Result<std::fs::File> {
        let path = self.dir.join(name);
        let f = std::fs::File::create(&path)?;
        self.written.push(path);
        Ok(f)
    }

    /// JSON object with a `metadata` key next to the fields of `body`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let doc = Document {
            metadata: &self.metadata,
            body,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.create(name)?.write_all(text.as_bytes())?;
        Ok(())
    }

    /// `x,y,y_err` CSV; `description` names the axes in a comment line.
    pub fn curve(&mut self, name: &str, description: &str, points: &[CurvePoint]) -> Result<()> {
        let mut comments = self.metadata.comment_lines();
        comments.push(description.to_string());
        let f = self.create(name)?;
        write_curve(f, &comments, points)
    }

    pub fn records(&mut self, name: &str, records: &[ShotRecord]) -> Result<()> {
        let comments = self.metadata.comment_lines();
        let f = self.create(name)?;
        write_records(f, records, &comments)
    }
}

pub fn write_curve<W: Write>(out: W, comments: &[String], points: &[CurvePoint]) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "x,y,y_err")?;
    for p in points {
        writeln!(out, "{},{},{}", p.x, p.y, p.y_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an `x,y,y_err` CSV (the `y_err` column is optional).
pub fn read_curve<R: Read>(input: R) -> Result<Vec<CurvePoint>> {
    let mut points = Vec::new();
    let mut header_seen = false;
    let mut has_err = true;
    for (k, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line_no = k as u64 + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = text.split(',').map(str::trim).collect();
        if !header_seen {
            header_seen = true;
            if cols.first() != Some(&"x") || cols.get(1) != Some(&"y") {
                return Err(Error::Record {
                    line: line_no,
                    message: "expected header `x,y,y_err`".into(),
                });
            }
            has_err = cols.get(2) == Some(&"y_err");
            continue;
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            cols.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Record {
                    line: line_no,
                    message: format!("`{name}` is not a number"),
                })
        };
        points.push(CurvePoint {
            x: num(0, "x")?,
            y: num(1, "y")?,
            y_err: if has_err { num(2, "y_err")? } else { 0.0 },
        });
    }
    if points.is_empty() {
        return Err(Error::Empty("curve points"));
    }
    Ok(points)
}

pub fn load_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    read_curve(std::fs::File::open(path)?)
}
